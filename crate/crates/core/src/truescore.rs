//! True-score estimation by linear regression on the observed score.
//!
//! `T_hat = alpha + beta * X` with `beta = r` and `alpha = mean * (1 - r)`.
//! Each estimate carries the interval `T_hat +/- S_E`, `S_E^2 = (1 - r) S_X^2`.

use std::collections::BTreeMap;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::data::{ExamineeScores, TestStats};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReliabilityKind {
    #[default]
    Classical,
    SplitHalf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrueScoreRow {
    /// 0-based examinee position.
    pub examinee: usize,
    pub examinee_id: Option<String>,
    pub observed: u64,
    pub estimate: f64,
    pub low: f64,
    pub high: f64,
    /// `|T_hat - X| = (1 - r) |X - mean|`, the regression residual.
    pub prediction_error: f64,
    /// Estimate falls outside `[0, n]`.
    pub out_of_range: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrueScoreTable {
    pub reliability_kind: ReliabilityKind,
    pub reliability: f64,
    pub alpha1: f64,
    pub beta1: f64,
    pub mean: f64,
    pub s_e: f64,
    /// `(1 - r)^2 S_X^2`, the mean squared regression residual.
    pub prediction_error_variance: f64,
    /// `S_E^2` minus the above, `r (1 - r) S_X^2`.
    pub prediction_gap: f64,
    pub rows: Vec<TrueScoreRow>,
    pub warnings: Vec<String>,
}

pub fn estimate_true_scores(
    x: &ExamineeScores,
    stats: &TestStats,
    r: f64,
    kind: ReliabilityKind,
) -> Result<TrueScoreTable> {
    estimate_true_scores_with_ids(x, stats, r, kind, None)
}

pub fn estimate_true_scores_with_ids(
    x: &ExamineeScores,
    stats: &TestStats,
    r: f64,
    kind: ReliabilityKind,
    ids: Option<&[String]>,
) -> Result<TrueScoreTable> {
    if !(0.0..=1.0).contains(&r) {
        return Err(Error::Range {
            what: "reliability",
            value: r,
            low: 0.0,
            high: 1.0,
        });
    }
    if stats.variance <= 0.0 {
        return Err(Error::ZeroVariance("observed score variance is zero"));
    }
    if x.len() != stats.n_examinees {
        return Err(Error::Shape(format!(
            "{} scores for statistics over {} examinees",
            x.len(),
            stats.n_examinees
        )));
    }
    if let Some(ids) = ids {
        if ids.len() != x.len() {
            return Err(Error::Shape(format!("{} ids for {} examinees", ids.len(), x.len())));
        }
    }

    let mean = stats.mean;
    let s_e = ((1.0 - r) * stats.variance).sqrt();
    let max_score = stats.n_items as f64;
    let rows: Vec<TrueScoreRow> = x
        .totals
        .iter()
        .enumerate()
        .map(|(i, &obs)| {
            let dev = obs as f64 - mean;
            // mean + r * dev equals alpha + beta * X and is exact at X = mean
            let estimate = mean + r * dev;
            TrueScoreRow {
                examinee: i,
                examinee_id: ids.map(|v| v[i].clone()),
                observed: obs,
                estimate,
                low: estimate - s_e,
                high: estimate + s_e,
                prediction_error: ((1.0 - r) * dev).abs(),
                out_of_range: !(0.0..=max_score).contains(&estimate),
            }
        })
        .collect();

    let mut warnings = Vec::new();
    let outside = rows.iter().filter(|r| r.out_of_range).count();
    if outside > 0 {
        warnings.push(format!("{outside} estimates fall outside [0, {}]", stats.n_items));
    }

    Ok(TrueScoreTable {
        reliability_kind: kind,
        reliability: r,
        alpha1: mean * (1.0 - r),
        beta1: r,
        mean,
        s_e,
        prediction_error_variance: (1.0 - r).powi(2) * stats.variance,
        prediction_gap: r * (1.0 - r) * stats.variance,
        rows,
        warnings,
    })
}

impl TrueScoreTable {
    pub fn estimates(&self) -> impl Iterator<Item = f64> + '_ {
        self.rows.iter().map(|r| r.estimate)
    }

    /// Writes one CSV row per examinee.
    pub fn write_csv<W: Write>(&self, sink: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(sink);
        let err = |e: csv::Error| Error::Parse(e.to_string());
        w.write_record([
            "examinee",
            "examinee_id",
            "observed",
            "estimate",
            "low",
            "high",
            "prediction_error",
            "out_of_range",
        ])
        .map_err(err)?;
        for r in &self.rows {
            w.write_record([
                (r.examinee + 1).to_string(),
                r.examinee_id.clone().unwrap_or_default(),
                r.observed.to_string(),
                r.estimate.to_string(),
                r.low.to_string(),
                r.high.to_string(),
                r.prediction_error.to_string(),
                r.out_of_range.to_string(),
            ])
            .map_err(err)?;
        }
        w.flush().map_err(|e| Error::Parse(e.to_string()))
    }
}

/// `100 * #{estimates <= t} / N`.
pub fn percentile_rank(table: &TrueScoreTable, t: f64) -> f64 {
    if table.rows.is_empty() {
        return 0.0;
    }
    let below = table.estimates().filter(|&e| e <= t).count();
    100.0 * below as f64 / table.rows.len() as f64
}

/// Examinees whose estimates fall in one bin.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimateBin {
    pub low: f64,
    pub high: f64,
    /// 0-based examinee positions, ordered by estimate and then position.
    pub examinees: Vec<usize>,
    /// Percentile rank at the largest estimate in the bin.
    pub percentile_rank: f64,
}

/// Groups examinees into half-open bins `[k w, (k + 1) w)` of their estimates.
pub fn estimate_bins(table: &TrueScoreTable, width: f64) -> Result<Vec<EstimateBin>> {
    if !(width > 0.0 && width.is_finite()) {
        return Err(Error::Range {
            what: "bin width",
            value: width,
            low: f64::MIN_POSITIVE,
            high: f64::INFINITY,
        });
    }
    let mut bins: BTreeMap<i64, Vec<(f64, usize)>> = BTreeMap::new();
    for row in &table.rows {
        let key = (row.estimate / width).floor() as i64;
        bins.entry(key).or_default().push((row.estimate, row.examinee));
    }
    Ok(bins
        .into_iter()
        .map(|(key, mut members)| {
            members.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
            let top = members.last().map_or(0.0, |m| m.0);
            EstimateBin {
                low: key as f64 * width,
                high: (key + 1) as f64 * width,
                examinees: members.into_iter().map(|m| m.1).collect(),
                percentile_rank: percentile_rank(table, top),
            }
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EstimatorDifference {
    pub examinee: usize,
    pub observed: u64,
    /// `T_hat(split-half) - T_hat(classical) = (X - mean)(r_gh - r_tt)`.
    pub difference: f64,
    pub sign: i8,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimatorComparison {
    pub r_tt: f64,
    pub r_gh: f64,
    /// `true` when `r_gh < r_tt`, so the usual ordering is reversed.
    pub reversed: bool,
    pub rows: Vec<EstimatorDifference>,
    pub warnings: Vec<String>,
}

/// Per-examinee difference between split-half and classical estimates.
pub fn compare_estimators(
    x: &ExamineeScores,
    stats: &TestStats,
    r_tt: f64,
    r_gh: f64,
) -> EstimatorComparison {
    let reversed = r_gh < r_tt;
    let mut warnings = Vec::new();
    if reversed {
        warnings.push(format!(
            "r_gh = {r_gh:.6} < r_tt = {r_tt:.6}: split-half estimates fall below classical ones above the mean"
        ));
    }
    let rows = x
        .totals
        .iter()
        .enumerate()
        .map(|(i, &obs)| {
            // factored form keeps the sign exact
            let difference = (r_gh - r_tt) * (obs as f64 - stats.mean);
            EstimatorDifference {
                examinee: i,
                observed: obs,
                difference,
                sign: if difference > 0.0 {
                    1
                } else if difference < 0.0 {
                    -1
                } else {
                    0
                },
            }
        })
        .collect();
    EstimatorComparison {
        r_tt,
        r_gh,
        reversed,
        rows,
        warnings,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::descriptive_stats;

    fn stats_with(mean: f64, variance: f64, n: usize) -> TestStats {
        TestStats {
            n_examinees: n,
            n_items: 50,
            mean,
            variance,
            norm_x: 1.0,
            norm_i: 1.0,
            cos_theta_x: Some(0.5),
        }
    }

    #[test]
    fn regression_through_mean() {
        let x = ExamineeScores::new(vec![10, 14]);
        let stats = stats_with(10.0, 4.0, 2);
        for r in [0.0, 0.3, 0.9, 1.0] {
            let t = estimate_true_scores(&x, &stats, r, ReliabilityKind::Classical).unwrap();
            assert_eq!(t.rows[0].estimate, 10.0);
        }
        let t = estimate_true_scores(&x, &stats, 0.5, ReliabilityKind::Classical).unwrap();
        assert_eq!(t.rows[1].estimate, 12.0);
        assert_eq!(t.alpha1, 5.0);
        assert!((t.rows[1].high - t.rows[1].low - 2.0 * t.s_e).abs() < 1e-12);
    }

    #[test]
    fn interval_and_gap_from_published_constants() {
        let x = ExamineeScores::new(vec![11, 11]);
        let stats = stats_with(10.99, 19.63, 2);
        let t = estimate_true_scores(&x, &stats, 0.66, ReliabilityKind::Classical).unwrap();
        assert!((t.s_e - 2.58).abs() < 0.01, "{}", t.s_e);
        assert!((t.prediction_gap - 4.41).abs() < 0.01, "{}", t.prediction_gap);
    }

    #[test]
    fn rejects_out_of_range_reliability() {
        let x = ExamineeScores::new(vec![1, 2]);
        let stats = stats_with(1.5, 0.25, 2);
        for r in [-0.1, 1.01, f64::NAN] {
            assert!(matches!(
                estimate_true_scores(&x, &stats, r, ReliabilityKind::Classical),
                Err(Error::Range { .. })
            ));
        }
    }

    #[test]
    fn estimator_difference_signs() {
        let x = ExamineeScores::new(vec![10, 14, 6]);
        let stats = stats_with(10.0, 4.0, 3);
        let c = compare_estimators(&x, &stats, 0.66, 0.99);
        assert!(!c.reversed);
        assert_eq!(c.rows[0].difference, 0.0);
        assert!((c.rows[1].difference - 1.32).abs() < 1e-12);
        assert!((c.rows[2].difference + 1.32).abs() < 1e-12);
        assert_eq!([c.rows[0].sign, c.rows[1].sign, c.rows[2].sign], [0, 1, -1]);

        let c = compare_estimators(&x, &stats, 0.9, 0.5);
        assert!(c.reversed);
        assert_eq!(c.rows[1].sign, -1);
        assert!(!c.warnings.is_empty());
    }

    fn table_1_to_10() -> TrueScoreTable {
        let x = ExamineeScores::new((1..=10).collect());
        let stats = descriptive_stats(&x, 10).unwrap();
        estimate_true_scores(&x, &stats, 1.0, ReliabilityKind::Classical).unwrap()
    }

    #[test]
    fn percentile_counts() {
        let t = table_1_to_10();
        assert_eq!(percentile_rank(&t, 9.3), 90.0);
        assert_eq!(percentile_rank(&t, 10.0), 100.0);
        assert_eq!(percentile_rank(&t, 0.5), 0.0);
    }

    #[test]
    fn unit_bins() {
        let t = table_1_to_10();
        let bins = estimate_bins(&t, 1.0).unwrap();
        assert_eq!(bins.len(), 10);
        assert_eq!(bins[0].low, 1.0);
        assert_eq!(bins[0].examinees, vec![0]);
        assert_eq!(bins[9].percentile_rank, 100.0);
        assert!(estimate_bins(&t, 0.0).is_err());
    }

    #[test]
    fn csv_has_one_row_per_examinee() {
        let t = table_1_to_10();
        let mut out = Vec::new();
        t.write_csv(&mut out).unwrap();
        let text = String::from_utf8(out).unwrap();
        assert_eq!(text.lines().count(), 11);
        assert!(text.starts_with("examinee,examinee_id,observed"));
    }
}
