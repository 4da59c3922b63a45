//! Synthetic Bernoulli response matrices.
//!
//! Each entry is `Bernoulli(p)`. In `D1`/`D3` the probability is fixed per
//! examinee (an ability), in `D2`/`D4` per item. `D1`/`D2` draw it from
//! `Uniform[0, 1]`; `D3`/`D4` from `Normal(0.5, 0.2)` clamped to `[0, 1]`.
//!
//! All parameters are drawn first, then the entries in row-major order, from
//! one ChaCha8 stream seeded with the model seed.

use std::str::FromStr;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::analysis::{analyze, AnalysisOptions};
use crate::data::{item_totals, ScoreMatrix};
use crate::error::{Error, Result};
use crate::splitter::{split_item_scores, SplitOptions};

/// Identifies the random stream and sampling algorithms, for output metadata.
pub const GENERATOR_ID: &str =
    "rand_chacha-0.9/ChaCha8Rng; uniform f64 via rand-0.9 StandardUniform; normal via rand_distr-0.5 Normal";

pub const NORMAL_MEAN: f64 = 0.5;
pub const NORMAL_SD: f64 = 0.2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ModelKind {
    D1,
    D2,
    D3,
    D4,
}

impl ModelKind {
    pub const ALL: [ModelKind; 4] = [ModelKind::D1, ModelKind::D2, ModelKind::D3, ModelKind::D4];

    pub fn axis(self) -> ParamAxis {
        match self {
            ModelKind::D1 | ModelKind::D3 => ParamAxis::Examinee,
            ModelKind::D2 | ModelKind::D4 => ParamAxis::Item,
        }
    }

    fn is_normal(self) -> bool {
        matches!(self, ModelKind::D3 | ModelKind::D4)
    }
}

impl FromStr for ModelKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "D1" => Ok(ModelKind::D1),
            "D2" => Ok(ModelKind::D2),
            "D3" => Ok(ModelKind::D3),
            "D4" => Ok(ModelKind::D4),
            _ => Err(Error::Parse(format!("unknown model {s:?}, expected D1..D4"))),
        }
    }
}

impl std::fmt::Display for ModelKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{self:?}")
    }
}

/// Which dimension the success probability is attached to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ParamAxis {
    Examinee,
    Item,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SimModel {
    pub kind: ModelKind,
    pub n_examinees: usize,
    pub n_items: usize,
    pub seed: u64,
}

impl SimModel {
    pub fn new(kind: ModelKind, n_examinees: usize, n_items: usize, seed: u64) -> Self {
        Self {
            kind,
            n_examinees,
            n_items,
            seed,
        }
    }
}

fn check_size(n_examinees: usize, n_items: usize) -> Result<()> {
    if n_examinees < 2 || n_items < 2 {
        return Err(Error::TooSmall {
            examinees: n_examinees,
            items: n_items,
        });
    }
    Ok(())
}

/// Draws the model's probabilities (one per examinee or per item).
pub fn draw_probabilities(model: &SimModel, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let count = match model.kind.axis() {
        ParamAxis::Examinee => model.n_examinees,
        ParamAxis::Item => model.n_items,
    };
    if model.kind.is_normal() {
        let normal = Normal::new(NORMAL_MEAN, NORMAL_SD).expect("valid normal parameters");
        (0..count)
            .map(|_| normal.sample(rng).clamp(0.0, 1.0))
            .collect()
    } else {
        (0..count).map(|_| rng.random::<f64>()).collect()
    }
}

fn fill(
    axis: ParamAxis,
    probabilities: &[f64],
    n_examinees: usize,
    n_items: usize,
    rng: &mut ChaCha8Rng,
) -> Result<ScoreMatrix> {
    let mut entries = Vec::with_capacity(n_examinees * n_items);
    for i in 0..n_examinees {
        for j in 0..n_items {
            let p = match axis {
                ParamAxis::Examinee => probabilities[i],
                ParamAxis::Item => probabilities[j],
            };
            entries.push(u8::from(rng.random::<f64>() < p));
        }
    }
    ScoreMatrix::from_flat(n_examinees, n_items, entries)
}

/// Generates the response matrix; identical models give identical matrices.
pub fn generate(model: &SimModel) -> Result<ScoreMatrix> {
    generate_with_parameters(model).map(|(m, _)| m)
}

/// Like [`generate`], also returning the drawn probabilities.
pub fn generate_with_parameters(model: &SimModel) -> Result<(ScoreMatrix, Vec<f64>)> {
    check_size(model.n_examinees, model.n_items)?;
    let mut rng = ChaCha8Rng::seed_from_u64(model.seed);
    let p = draw_probabilities(model, &mut rng);
    let m = fill(model.kind.axis(), &p, model.n_examinees, model.n_items, &mut rng)?;
    Ok((m, p))
}

/// Fills a matrix from caller-chosen probabilities instead of drawing them.
pub fn generate_from_probabilities(
    axis: ParamAxis,
    probabilities: &[f64],
    n_examinees: usize,
    n_items: usize,
    seed: u64,
) -> Result<ScoreMatrix> {
    check_size(n_examinees, n_items)?;
    let expected = match axis {
        ParamAxis::Examinee => n_examinees,
        ParamAxis::Item => n_items,
    };
    if probabilities.len() != expected {
        return Err(Error::Shape(format!(
            "{} probabilities, expected {expected}",
            probabilities.len()
        )));
    }
    if let Some(&p) = probabilities.iter().find(|p| !(0.0..=1.0).contains(*p)) {
        return Err(Error::Range {
            what: "probability",
            value: p,
            low: 0.0,
            high: 1.0,
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    fill(axis, probabilities, n_examinees, n_items, &mut rng)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScaleRow {
    pub n_examinees: usize,
    pub n_items: usize,
    pub r_tt: f64,
    pub abs_s: u64,
    pub iterations: usize,
    pub generate_seconds: f64,
    /// Item totals, seed allocation and refinement.
    pub split_seconds: f64,
    /// Seed allocation and refinement from item totals alone.
    pub refine_seconds: f64,
    /// Generation plus the full reliability analysis.
    pub total_seconds: f64,
}

/// Generates, splits and analyses one matrix per size.
pub fn scaling_suite(sizes: &[(usize, usize)], kind: ModelKind, seed: u64) -> Result<Vec<ScaleRow>> {
    if sizes.is_empty() {
        return Err(Error::Shape("no sizes given".into()));
    }
    sizes
        .iter()
        .map(|&(n_examinees, n_items)| {
            let start = Instant::now();
            let m = generate(&SimModel::new(kind, n_examinees, n_items, seed))?;
            let generate_seconds = start.elapsed().as_secs_f64();

            let t0 = Instant::now();
            let tau = item_totals(&m);
            let t1 = Instant::now();
            split_item_scores(&tau, SplitOptions::default())?;
            let refine_seconds = t1.elapsed().as_secs_f64();
            let split_seconds = t0.elapsed().as_secs_f64();

            let analysis = analyze(&m, AnalysisOptions::default())?;
            let total_seconds = generate_seconds + analysis.elapsed_seconds;
            Ok(ScaleRow {
                n_examinees,
                n_items,
                r_tt: analysis.reliability.r_tt,
                abs_s: analysis.split.abs_s,
                iterations: analysis.split.iterations,
                generate_seconds,
                split_seconds,
                refine_seconds,
                total_seconds,
            })
        })
        .collect()
}
