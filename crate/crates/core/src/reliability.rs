//! Reliability of a test from its two parallel halves.
//!
//! For parallel halves `g` and `h` the true-score components cancel in
//! `X_g - X_h`, and the error vectors are orthogonal, so
//! `|X_g - X_h|^2 = N * S_e^2` where `S_e^2` is the error variance of the
//! whole test. Reliability follows as `r_tt = 1 - S_e^2 / S_X^2`.

use serde::{Deserialize, Serialize};
use statrs::function::beta::beta_reg;

use crate::data::{ScoreMatrix, TestStats};
use crate::error::{Error, Result};
use crate::splitter::Assignment;

/// Examinee scores on the two sub-tests.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SubTestScores {
    pub g: Vec<u64>,
    pub h: Vec<u64>,
}

impl SubTestScores {
    pub fn new(g: Vec<u64>, h: Vec<u64>) -> Result<Self> {
        if g.len() != h.len() {
            return Err(Error::Shape(format!(
                "sub-test vectors of length {} and {}",
                g.len(),
                h.len()
            )));
        }
        Ok(Self { g, h })
    }

    /// Sums each examinee's responses over the items of each sub-test.
    pub fn from_assignment(m: &ScoreMatrix, a: &Assignment) -> Self {
        let score = |row: &[u8], items: &[usize]| -> u64 { items.iter().map(|&j| u64::from(row[j])).sum() };
        let (g, h) = m
            .rows()
            .map(|row| (score(row, &a.g_items), score(row, &a.h_items)))
            .unzip();
        Self { g, h }
    }

    pub fn len(&self) -> usize {
        self.g.len()
    }

    pub fn is_empty(&self) -> bool {
        self.g.is_empty()
    }

    /// Per-examinee `X_g + X_h`, the score on all split items.
    pub fn combined(&self) -> Vec<u64> {
        self.g.iter().zip(&self.h).map(|(a, b)| a + b).collect()
    }

    pub fn norm_sq_g(&self) -> f64 {
        self.g.iter().map(|&v| (v * v) as f64).sum()
    }

    pub fn norm_sq_h(&self) -> f64 {
        self.h.iter().map(|&v| (v * v) as f64).sum()
    }

    /// `sum_i X_i^(g) X_i^(h)`.
    pub fn cross(&self) -> f64 {
        self.g.iter().zip(&self.h).map(|(&a, &b)| (a * b) as f64).sum()
    }
}

fn mean(v: &[u64]) -> f64 {
    v.iter().sum::<u64>() as f64 / v.len() as f64
}

/// Population variance.
fn variance(v: &[u64]) -> f64 {
    let m = mean(v);
    v.iter().map(|&x| (x as f64 - m).powi(2)).sum::<f64>() / v.len() as f64
}

/// Error variance of the whole test: `|X_g - X_h|^2 / N`.
pub fn error_variance(s: &SubTestScores) -> f64 {
    let sum: u64 = s
        .g
        .iter()
        .zip(&s.h)
        .map(|(&a, &b)| a.abs_diff(b).pow(2))
        .sum();
    sum as f64 / s.len() as f64
}

/// Pearson correlation between the two halves.
pub fn split_half_correlation(s: &SubTestScores) -> Result<f64> {
    let (mg, mh) = (mean(&s.g), mean(&s.h));
    let (mut sgg, mut shh, mut sgh) = (0.0, 0.0, 0.0);
    for (&a, &b) in s.g.iter().zip(&s.h) {
        let (da, db) = (a as f64 - mg, b as f64 - mh);
        sgg += da * da;
        shh += db * db;
        sgh += da * db;
    }
    if sgg == 0.0 || shh == 0.0 {
        return Err(Error::Undefined("correlation with a zero-variance half"));
    }
    Ok((sgh / (sgg * shh).sqrt()).clamp(-1.0, 1.0))
}

/// Variance-ratio test of the two halves.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FTest {
    /// Larger sample variance over smaller.
    pub f_stat: f64,
    pub df_num: usize,
    pub df_den: usize,
    /// Two-sided p-value.
    pub p_value: f64,
}

/// Upper tail `P(F > f)` of the F distribution.
pub fn f_upper_tail(f: f64, df_num: f64, df_den: f64) -> f64 {
    if f <= 0.0 {
        return 1.0;
    }
    beta_reg(df_den / 2.0, df_num / 2.0, df_den / (df_den + df_num * f))
}

/// F-test of equal variances on the observed sub-test scores (sample variances,
/// `N - 1` degrees of freedom each).
pub fn f_test_equal_variance(s: &SubTestScores) -> Result<FTest> {
    let n = s.len();
    if n < 3 {
        return Err(Error::TooSmall {
            examinees: n,
            items: 0,
        });
    }
    let correction = n as f64 / (n - 1) as f64;
    let (vg, vh) = (variance(&s.g) * correction, variance(&s.h) * correction);
    let (hi, lo) = if vg >= vh { (vg, vh) } else { (vh, vg) };
    if lo == 0.0 {
        return Err(Error::Undefined("F statistic with a zero-variance half"));
    }
    let f_stat = hi / lo;
    let df = (n - 1) as f64;
    Ok(FTest {
        f_stat,
        df_num: n - 1,
        df_den: n - 1,
        p_value: (2.0 * f_upper_tail(f_stat, df, df)).min(1.0),
    })
}

/// True-score geometry in person space.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrueScoreGeometry {
    pub s_t_sq: f64,
    pub norm_t: f64,
    pub cos_theta_t: f64,
    /// `|T|^2 sin^2(theta_T) / N`, which must reproduce `s_t_sq`.
    pub s_t_sq_geometric: f64,
}

/// Norm and angle of the true-score vector, using that observed and true
/// means coincide.
pub fn true_score_geometry(stats: &TestStats, r_tt: f64) -> Result<TrueScoreGeometry> {
    if !(0.0..=1.0).contains(&r_tt) {
        return Err(Error::Range {
            what: "r_tt",
            value: r_tt,
            low: 0.0,
            high: 1.0,
        });
    }
    let cos_x = stats
        .cos_theta_x
        .ok_or(Error::Undefined("angle of the zero score vector"))?;
    let n = stats.n_examinees as f64;
    let s_t_sq = r_tt * stats.variance;
    let norm_t = (n * (stats.mean * stats.mean + s_t_sq)).sqrt();
    let cos_theta_t = (stats.norm_x / norm_t * cos_x).min(1.0);
    let s_t_sq_geometric = norm_t * norm_t * (1.0 - cos_theta_t * cos_theta_t) / n;
    Ok(TrueScoreGeometry {
        s_t_sq,
        norm_t,
        cos_theta_t,
        s_t_sq_geometric,
    })
}

/// Summary of one sub-test.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HalfSummary {
    pub sum: u64,
    pub mean: f64,
    pub variance: f64,
    pub norm_sq: f64,
}

impl HalfSummary {
    fn of(v: &[u64]) -> Self {
        Self {
            sum: v.iter().sum(),
            mean: mean(v),
            variance: variance(v),
            norm_sq: v.iter().map(|&x| (x * x) as f64).sum(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReliabilityReport {
    pub n_examinees: usize,
    pub test_variance: f64,
    pub error_variance: f64,
    /// `1 - (|X_g|^2 + |X_h|^2 - 2 X_g.X_h) / (N S_X^2)`.
    pub r_tt: f64,
    /// `1 - (2 |X_g|^2 - 2 X_g.X_h) / (N S_X^2)`, exact only when `|X_g| = |X_h|`.
    pub r_tt_symmetric: f64,
    pub r_gh: Option<f64>,
    /// `sqrt(r_tt)`, absent when `r_tt < 0`.
    pub r_xt: Option<f64>,
    pub true_score_variance: f64,
    /// Computed on observed sub-test variances, a proxy for the unobservable
    /// error variances.
    pub f_test: Option<FTest>,
    pub geometry: Option<TrueScoreGeometry>,
    pub g: HalfSummary,
    pub h: HalfSummary,
    pub warnings: Vec<String>,
}

/// Reliability from a split; `stats` describes the score on the split items.
pub fn classical_reliability(s: &SubTestScores, stats: &TestStats) -> Result<ReliabilityReport> {
    if s.len() != stats.n_examinees {
        return Err(Error::Shape(format!(
            "{} sub-test scores for {} examinees",
            s.len(),
            stats.n_examinees
        )));
    }
    if stats.variance <= 0.0 {
        return Err(Error::ZeroVariance("test score variance is zero"));
    }
    let n = s.len() as f64;
    let denom = n * stats.variance;
    let (ng, cross) = (s.norm_sq_g(), s.cross());
    let error_variance = error_variance(s);
    let r_tt = 1.0 - error_variance / stats.variance;
    let r_tt_symmetric = 1.0 - (2.0 * ng - 2.0 * cross) / denom;

    let mut warnings = Vec::new();
    if r_tt < 0.0 {
        warnings.push(format!(
            "negative reliability {r_tt:.6}: error variance exceeds observed variance"
        ));
    }
    let r_gh = split_half_correlation(s)
        .map_err(|e| warnings.push(format!("split-half correlation: {e}")))
        .ok();
    let f_test = f_test_equal_variance(s)
        .map_err(|e| warnings.push(format!("F-test: {e}")))
        .ok();
    if f_test.is_some() {
        warnings.push("F-test uses observed sub-test variances as a proxy for error variances".into());
    }
    let geometry = true_score_geometry(stats, r_tt)
        .map_err(|e| warnings.push(format!("true-score geometry skipped: {e}")))
        .ok();

    Ok(ReliabilityReport {
        n_examinees: s.len(),
        test_variance: stats.variance,
        error_variance,
        r_tt,
        r_tt_symmetric,
        r_gh,
        r_xt: (r_tt >= 0.0).then(|| r_tt.sqrt()),
        true_score_variance: stats.variance - error_variance,
        f_test,
        geometry,
        g: HalfSummary::of(&s.g),
        h: HalfSummary::of(&s.h),
        warnings,
    })
}
