//! End-to-end analysis of one score matrix: split, sub-test scores,
//! reliability, and score histograms.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::data::{descriptive_stats, item_totals, ExamineeScores, ItemScores, ScoreMatrix, TestStats};
use crate::error::{Error, Result};
use crate::reliability::{classical_reliability, ReliabilityReport, SubTestScores};
use crate::splitter::{split_item_scores, SplitOptions, SplitResult};

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct AnalysisOptions {
    pub split: SplitOptions,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Analysis {
    pub item_scores: ItemScores,
    pub split: SplitResult,
    pub subtests: SubTestScores,
    /// Statistics of `X_g + X_h`; with an odd item count the dropped item is
    /// excluded.
    pub stats: TestStats,
    pub reliability: ReliabilityReport,
    pub elapsed_seconds: f64,
}

pub fn analyze(m: &ScoreMatrix, options: AnalysisOptions) -> Result<Analysis> {
    let start = Instant::now();
    let item_scores = item_totals(m);
    let split = split_item_scores(&item_scores, options.split)?;
    let subtests = SubTestScores::from_assignment(m, &split.assignment);
    let stats = descriptive_stats(
        &ExamineeScores::new(subtests.combined()),
        2 * split.assignment.n_rows(),
    )?;
    let reliability = classical_reliability(&subtests, &stats)?;
    Ok(Analysis {
        item_scores,
        split,
        subtests,
        stats,
        reliability,
        elapsed_seconds: start.elapsed().as_secs_f64(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct HistogramBin {
    /// Inclusive lower edge.
    pub low: u64,
    /// Exclusive upper edge.
    pub high: u64,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Histogram {
    pub bin_width: u64,
    pub bins: Vec<HistogramBin>,
}

impl Histogram {
    pub fn total(&self) -> usize {
        self.bins.iter().map(|b| b.count).sum()
    }
}

/// Histogram of integer scores on `[0, max_score]` with bins
/// `[k w, (k + 1) w)`.
pub fn histogram(scores: &[u64], max_score: u64, bin_width: u64) -> Result<Histogram> {
    if bin_width == 0 {
        return Err(Error::Range {
            what: "bin width",
            value: 0.0,
            low: 1.0,
            high: f64::INFINITY,
        });
    }
    let top = scores.iter().copied().max().unwrap_or(0).max(max_score);
    let n_bins = (top / bin_width + 1) as usize;
    let mut bins: Vec<HistogramBin> = (0..n_bins as u64)
        .map(|k| HistogramBin {
            low: k * bin_width,
            high: (k + 1) * bin_width,
            count: 0,
        })
        .collect();
    for &s in scores {
        bins[(s / bin_width) as usize].count += 1;
    }
    Ok(Histogram { bin_width, bins })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScoreHistograms {
    pub total: Histogram,
    pub g: Histogram,
    pub h: Histogram,
}

/// Histograms of `X_g + X_h`, `X_g` and `X_h`.
pub fn score_histograms(s: &SubTestScores, n_rows: usize, bin_width: u64) -> Result<ScoreHistograms> {
    let rows = n_rows as u64;
    Ok(ScoreHistograms {
        total: histogram(&s.combined(), 2 * rows, bin_width)?,
        g: histogram(&s.g, rows, bin_width)?,
        h: histogram(&s.h, rows, bin_width)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn histogram_counts_everything() {
        let h = histogram(&[0, 1, 1, 5, 9], 10, 3).unwrap();
        assert_eq!(h.bins.len(), 4);
        assert_eq!(h.bins.iter().map(|b| b.count).collect::<Vec<_>>(), [3, 1, 0, 1]);
        assert_eq!(h.total(), 5);
        assert!(histogram(&[1], 1, 0).is_err());
    }

    #[test]
    fn analysis_of_small_matrix() {
        let m = ScoreMatrix::from_rows(&[
            [1u8, 1, 1, 0, 1],
            [1, 0, 1, 0, 0],
            [1, 1, 0, 1, 1],
            [0, 0, 0, 0, 1],
            [1, 1, 1, 1, 0],
        ])
        .unwrap();
        let a = analyze(&m, AnalysisOptions::default()).unwrap();
        assert!(a.split.assignment.dropped_item.is_some());
        assert_eq!(a.stats.n_items, 4);
        let h = score_histograms(&a.subtests, a.split.assignment.n_rows(), 1).unwrap();
        assert_eq!(h.total.total(), 5);
        assert_eq!(h.g.total(), 5);
        assert_eq!(h.h.total(), 5);
    }
}
