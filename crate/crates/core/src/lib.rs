//! Split-half reliability of dichotomously scored tests.
//!
//! A test is split into two sub-tests whose item-score sums are as close as
//! possible, and reliability is read off the geometry of the two sub-test
//! score vectors. The crate also estimates true scores, weights test
//! batteries for maximal reliability, and generates synthetic data.

pub mod analysis;
pub mod battery;
pub mod data;
pub mod error;
pub mod linalg;
pub mod reliability;
pub mod simulate;
pub mod splitter;
pub mod truescore;

pub use analysis::{analyze, histogram, score_histograms, Analysis, AnalysisOptions, Histogram, ScoreHistograms};
pub use data::{
    descriptive_stats, examinee_totals, item_totals, load_score_matrix, ExamineeScores, ItemScores,
    LoadOptions, ScoreMatrix, TestStats,
};
pub use error::{Error, Result};
pub use reliability::{classical_reliability, ReliabilityReport, SubTestScores};
pub use splitter::{split, Assignment, Criterion, SplitOptions, SplitResult, SwapPolicy};
