//! Reliability of a battery of `K` tests combined into a (weighted) sum.
//!
//! Errors are uncorrelated with true scores and with each other, so
//! observed covariances between component tests equal true-score
//! covariances. The battery's true-score variance is therefore
//! `sum r_i W_i^2 var_i + 2 sum_{i<j} W_i W_j cov_ij`, and its reliability is
//! that divided by `W^T D W`.
//!
//! Throughout, `var_i` is the variance (not the standard deviation) of test `i`,
//! i.e. the diagonal of `D`.
#![allow(clippy::neg_cmp_op_on_partial_ord)] // NaN must fail these checks

use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use crate::data::ExamineeScores;
use crate::error::{Error, Result};
use crate::linalg::{condition_number, jacobi_eigen, solve, Matrix};

/// Condition number above which weight solutions carry a warning.
pub const CONDITION_WARNING: f64 = 1e12;
const EIGEN_TOL: f64 = 1e-10;
const WEIGHT_SUM_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComponentTest {
    pub scores: ExamineeScores,
    pub reliability: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatteryInput {
    pub tests: Vec<ComponentTest>,
}

impl BatteryInput {
    pub fn reliabilities(&self) -> Vec<f64> {
        self.tests.iter().map(|t| t.reliability).collect()
    }
}

/// Symmetric variance-covariance matrix of the component test scores.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Vec<f64>>", into = "Vec<Vec<f64>>")]
pub struct CovMatrix(Matrix);

impl CovMatrix {
    pub fn new(m: Matrix) -> Result<Self> {
        let scale = (0..m.dim()).map(|i| m[(i, i)].abs()).fold(1.0, f64::max);
        if m.max_asymmetry() > 1e-12 * scale {
            return Err(Error::Shape("covariance matrix is not symmetric".into()));
        }
        if let Some(i) = (0..m.dim()).find(|&i| !(m[(i, i)] >= 0.0)) {
            return Err(Error::Range {
                what: "variance",
                value: m[(i, i)],
                low: 0.0,
                high: f64::INFINITY,
            });
        }
        Ok(Self(m))
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        Self::new(Matrix::from_rows(rows)?)
    }

    pub fn dim(&self) -> usize {
        self.0.dim()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.0[(i, j)]
    }

    pub fn matrix(&self) -> &Matrix {
        &self.0
    }

    /// `W^T D W`, the variance of the weighted battery score.
    pub fn quad_form(&self, w: &[f64]) -> f64 {
        self.0.quad_form(w)
    }

    /// `D W`; entry `i` is `cov(Y, X_i)` for `Y = sum W_j X_j`.
    pub fn mul_vec(&self, w: &[f64]) -> Vec<f64> {
        self.0.mul_vec(w)
    }
}

impl TryFrom<Vec<Vec<f64>>> for CovMatrix {
    type Error = Error;
    fn try_from(rows: Vec<Vec<f64>>) -> Result<Self> {
        Self::from_rows(&rows)
    }
}

impl From<CovMatrix> for Vec<Vec<f64>> {
    fn from(c: CovMatrix) -> Self {
        c.0.to_rows()
    }
}

/// Population covariances (divide by `N`) between all component score vectors.
pub fn covariance_matrix(b: &BatteryInput) -> Result<CovMatrix> {
    let k = b.tests.len();
    if k == 0 {
        return Err(Error::Shape("battery has no tests".into()));
    }
    let n = b.tests[0].scores.len();
    if n < 2 {
        return Err(Error::TooSmall {
            examinees: n,
            items: 0,
        });
    }
    if let Some(t) = b.tests.iter().find(|t| t.scores.len() != n) {
        return Err(Error::Shape(format!(
            "component tests have {} and {} examinees",
            n,
            t.scores.len()
        )));
    }
    let centred: Vec<Vec<f64>> = b
        .tests
        .iter()
        .map(|t| {
            let x = t.scores.as_f64();
            let mean = x.iter().sum::<f64>() / n as f64;
            x.into_iter().map(|v| v - mean).collect()
        })
        .collect();
    let mut m = Matrix::zeros(k);
    for i in 0..k {
        for j in 0..=i {
            let c = centred[i].iter().zip(&centred[j]).map(|(a, b)| a * b).sum::<f64>() / n as f64;
            m[(i, j)] = c;
            m[(j, i)] = c;
        }
    }
    CovMatrix::new(m)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WeightMethod {
    Lagrange,
    NonnegQp,
    EigenCov,
    EigenCorr,
    Equal,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightVector {
    pub w: Vec<f64>,
    /// Lagrange multiplier `2 / (e^T D^-1 e)` of the sum constraint, where defined.
    pub lambda: Option<f64>,
    pub method: WeightMethod,
    pub warnings: Vec<String>,
}

impl WeightVector {
    pub fn equal(k: usize) -> Self {
        Self {
            w: vec![1.0 / k as f64; k],
            lambda: None,
            method: WeightMethod::Equal,
            warnings: Vec::new(),
        }
    }

    /// Wraps caller-supplied weights, which must sum to one.
    pub fn custom(w: Vec<f64>, method: WeightMethod) -> Result<Self> {
        check_weight_sum(&w)?;
        Ok(Self {
            w,
            lambda: None,
            method,
            warnings: Vec::new(),
        })
    }
}

fn check_weight_sum(w: &[f64]) -> Result<()> {
    let sum: f64 = w.iter().sum();
    if (sum - 1.0).abs() > WEIGHT_SUM_TOL {
        return Err(Error::Range {
            what: "sum of weights",
            value: sum,
            low: 1.0,
            high: 1.0,
        });
    }
    Ok(())
}

fn check_reliabilities(reliabilities: &[f64], d: &CovMatrix) -> Result<()> {
    if reliabilities.len() != d.dim() {
        return Err(Error::Shape(format!(
            "{} reliabilities for a {}x{} covariance matrix",
            reliabilities.len(),
            d.dim(),
            d.dim()
        )));
    }
    Ok(())
}

/// Numerator and denominator of the weighted battery reliability.
fn weighted_parts(reliabilities: &[f64], d: &CovMatrix, w: &[f64]) -> (f64, f64) {
    let k = d.dim();
    let mut num = 0.0;
    let mut den = 0.0;
    for i in 0..k {
        let diag = w[i] * w[i] * d.get(i, i);
        num += reliabilities[i] * diag;
        den += diag;
        for j in i + 1..k {
            let off = 2.0 * w[i] * w[j] * d.get(i, j);
            num += off;
            den += off;
        }
    }
    (num, den)
}

/// Reliability of the unweighted sum of the component tests.
pub fn summative_reliability(reliabilities: &[f64], d: &CovMatrix) -> Result<f64> {
    check_reliabilities(reliabilities, d)?;
    let (num, den) = weighted_parts(reliabilities, d, &vec![1.0; d.dim()]);
    if !(den > 0.0) {
        return Err(Error::Degenerate(format!(
            "battery score variance {den} is not positive"
        )));
    }
    Ok(num / den)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatteryReport {
    pub covariance: CovMatrix,
    pub reliabilities: Vec<f64>,
    pub weights: WeightVector,
    /// Reliability of the weighted battery score.
    pub r_battery: f64,
    /// Reliability of the unweighted sum, for comparison.
    pub r_summative: Option<f64>,
    /// `W^T D W`.
    pub variance_y: f64,
    /// True-score variance of the weighted battery score.
    pub true_variance_y: f64,
    pub warnings: Vec<String>,
}

pub fn weighted_reliability(
    reliabilities: &[f64],
    d: &CovMatrix,
    w: &WeightVector,
) -> Result<BatteryReport> {
    check_reliabilities(reliabilities, d)?;
    if w.w.len() != d.dim() {
        return Err(Error::Shape(format!(
            "{} weights for {} tests",
            w.w.len(),
            d.dim()
        )));
    }
    check_weight_sum(&w.w)?;
    let (num, den) = weighted_parts(reliabilities, d, &w.w);
    if !(den > 0.0) {
        return Err(Error::Degenerate(format!(
            "weighted battery score variance {den} is not positive"
        )));
    }
    let r_battery = num / den;
    let mut warnings = w.warnings.clone();
    let r_summative = summative_reliability(reliabilities, d)
        .map_err(|e| warnings.push(format!("summative reliability: {e}")))
        .ok();
    if !(0.0..=1.0).contains(&r_battery) {
        warnings.push(format!("battery reliability {r_battery:.6} outside [0, 1]"));
    }
    Ok(BatteryReport {
        covariance: d.clone(),
        reliabilities: reliabilities.to_vec(),
        weights: w.clone(),
        r_battery,
        r_summative,
        variance_y: den,
        true_variance_y: num,
        warnings,
    })
}

/// Minimum-variance weights `D^-1 e / (e^T D^-1 e)` on a subset of tests.
fn lagrange_on(d: &Matrix, support: &[usize]) -> Result<(Vec<f64>, f64)> {
    let sub = d.submatrix(support);
    let z = solve(&sub, &vec![1.0; support.len()])?;
    let total: f64 = z.iter().sum();
    if !(total > 0.0) {
        return Err(Error::Degenerate(format!(
            "e^T D^-1 e = {total} is not positive"
        )));
    }
    Ok((z.into_iter().map(|v| v / total).collect(), total))
}

/// Unconstrained minimum-variance weights with `sum W = 1`.
pub fn optimal_weights(d: &CovMatrix) -> Result<WeightVector> {
    let support: Vec<usize> = (0..d.dim()).collect();
    let (w, total) = lagrange_on(d.matrix(), &support)?;
    let mut warnings = Vec::new();
    let cond = condition_number(d.matrix())?;
    if cond > CONDITION_WARNING {
        warnings.push(format!("covariance matrix is near-singular (condition {cond:.3e})"));
    }
    if w.iter().any(|&v| v < 0.0) {
        warnings.push("some minimum-variance weights are negative".into());
    }
    Ok(WeightVector {
        w,
        lambda: Some(2.0 / total),
        method: WeightMethod::Lagrange,
        warnings,
    })
}

/// Minimum-variance weights restricted to `W >= 0`.
///
/// Solves on the current support, drops the most negative weight (lowest
/// index on ties) and repeats. Once all weights are nonnegative, any dropped
/// test whose covariance with the battery score is below the common value on
/// the support would lower the variance, so the worst such test is restored
/// and the search continues. A support seen before ends the search.
pub fn nonnegative_weights(d: &CovMatrix) -> Result<WeightVector> {
    let k = d.dim();
    let m = d.matrix();
    let mut support: Vec<usize> = (0..k).collect();
    let mut seen: HashSet<Vec<usize>> = HashSet::new();
    let mut warnings = Vec::new();

    loop {
        if support.is_empty() {
            return Err(Error::Degenerate("no feasible support for nonnegative weights".into()));
        }
        seen.insert(support.clone());
        let (w_sub, total) = lagrange_on(m, &support).map_err(|e| match e {
            Error::SingularMatrix => Error::Degenerate("singular covariance on the weight support".into()),
            other => other,
        })?;

        let negative = w_sub
            .iter()
            .enumerate()
            .filter(|(_, &v)| v < 0.0)
            .min_by(|a, b| a.1.total_cmp(b.1).then(a.0.cmp(&b.0)));
        if let Some((pos, _)) = negative {
            support.remove(pos);
            continue;
        }

        let mut w = vec![0.0; k];
        for (&i, &v) in support.iter().zip(&w_sub) {
            w[i] = v;
        }
        let level = 1.0 / total;
        let dw = m.mul_vec(&w);
        let violator = (0..k)
            .filter(|i| !support.contains(i))
            .map(|i| (i, dw[i] - level))
            .filter(|&(_, gap)| gap < -1e-12 * level.abs().max(1.0))
            .min_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
        if let Some((i, _)) = violator {
            let mut next = support.clone();
            next.push(i);
            next.sort_unstable();
            if seen.contains(&next) {
                warnings.push("active-set search revisited a support; result may be suboptimal".into());
            } else {
                support = next;
                continue;
            }
        }
        return Ok(WeightVector {
            w,
            lambda: Some(2.0 * level),
            method: WeightMethod::NonnegQp,
            warnings,
        });
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EigenVariant {
    /// Principal eigenvector of `D`.
    CovProportional,
    /// `S^-1 U / (e^T S^-1 U)` with `U` the principal eigenvector of the
    /// correlation matrix and `S` the diagonal of standard deviations.
    CorrScaled,
}

/// Weights from the principal eigenvector, rescaled to sum to one.
pub fn eigen_weights(d: &CovMatrix, variant: EigenVariant) -> Result<WeightVector> {
    let k = d.dim();
    let (target, scale) = match variant {
        EigenVariant::CovProportional => (d.matrix().clone(), vec![1.0; k]),
        EigenVariant::CorrScaled => {
            let sd: Vec<f64> = (0..k).map(|i| d.get(i, i).sqrt()).collect();
            if sd.contains(&0.0) {
                return Err(Error::ZeroVariance("component test with zero variance"));
            }
            let mut r = Matrix::zeros(k);
            for i in 0..k {
                for j in 0..k {
                    r[(i, j)] = d.get(i, j) / (sd[i] * sd[j]);
                }
            }
            (r, sd.iter().map(|s| 1.0 / s).collect())
        }
    };
    let eig = jacobi_eigen(&target, EIGEN_TOL)?;
    let mut warnings = Vec::new();
    if k > 1 && (eig.values[0] - eig.values[1]).abs() <= EIGEN_TOL * eig.values[0].abs().max(1.0) {
        warnings.push("largest eigenvalue is repeated; eigenvector choice is arbitrary".into());
    }
    let raw: Vec<f64> = eig.vectors[0].iter().zip(&scale).map(|(u, s)| u * s).collect();
    let total: f64 = raw.iter().sum();
    if total.abs() < 1e-12 {
        return Err(Error::Degenerate("principal eigenvector sums to zero".into()));
    }
    Ok(WeightVector {
        w: raw.iter().map(|v| v / total).collect(),
        lambda: None,
        method: match variant {
            EigenVariant::CovProportional => WeightMethod::EigenCov,
            EigenVariant::CorrScaled => WeightMethod::EigenCorr,
        },
        warnings,
    })
}
