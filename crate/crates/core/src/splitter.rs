//! Dichotomisation of a test into two sub-tests with near-equal item-score sums.
//!
//! Items are sorted by total score and dealt into sub-tests `g` and `h` in the
//! pattern `g, h, h, g, g, h, h, g, ...`, which produces a table of rows, each
//! holding one item of each sub-test. The seed is then refined by swapping the
//! two items of a row whenever that shrinks `|S|`, where `S` is the sum over
//! rows of `tau(g item) - tau(h item)`. Each refinement pass touches at most
//! `n/2` rows, and the cost never depends on the number of examinees.

use serde::{Deserialize, Serialize};

use crate::data::{item_totals, ItemScores, ScoreMatrix};
use crate::error::{Error, Result};

/// Largest item count accepted by [`brute_force_split`].
pub const BRUTE_FORCE_MAX_ITEMS: usize = 20;

/// Row-aligned allocation of items to the two sub-tests.
///
/// Position `k` of `g_items` and `h_items` forms row `k` of the split table.
/// Indices are 0-based column positions in the score matrix.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Assignment {
    pub g_items: Vec<usize>,
    pub h_items: Vec<usize>,
    pub dropped_item: Option<usize>,
}

impl Assignment {
    pub fn n_rows(&self) -> usize {
        self.g_items.len()
    }

    /// Checks disjointness, equal sizes and coverage of `0..n_items`.
    pub fn validate(&self, n_items: usize) -> Result<()> {
        if self.g_items.len() != self.h_items.len() || self.g_items.len() != n_items / 2 {
            return Err(Error::Shape(format!(
                "sub-tests of {} and {} items for a {n_items}-item test",
                self.g_items.len(),
                self.h_items.len()
            )));
        }
        if self.dropped_item.is_some() != (n_items % 2 == 1) {
            return Err(Error::Shape("dropped item must be present exactly when n is odd".into()));
        }
        let mut seen = vec![false; n_items];
        let all = self
            .g_items
            .iter()
            .chain(&self.h_items)
            .chain(self.dropped_item.as_ref());
        for &j in all {
            if j >= n_items || std::mem::replace(&mut seen[j], true) {
                return Err(Error::Shape(format!("item {j} out of range or repeated")));
            }
        }
        Ok(())
    }

    /// Odd-even allocation (`g` takes items 0, 2, 4, ...), the classical baseline.
    pub fn odd_even(n_items: usize) -> Self {
        let pairs = n_items / 2;
        Self {
            g_items: (0..pairs).map(|k| 2 * k).collect(),
            h_items: (0..pairs).map(|k| 2 * k + 1).collect(),
            dropped_item: (n_items % 2 == 1).then_some(n_items - 1),
        }
    }
}

/// Objective minimised by the refinement.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Criterion {
    /// `|S|` with same-row swaps.
    #[default]
    AbsS,
    /// `|S| * |S_sq|` with cross-row swaps.
    Product,
}

/// How many improving rows are swapped per iteration of [`swap_refine`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SwapPolicy {
    /// The single row giving the largest reduction of `|S|`.
    #[default]
    SingleBest,
    /// Every row whose swap alone would reduce `|S|`, swapped together.
    /// An iteration whose combined effect does not reduce `|S|` is discarded
    /// and ends the refinement.
    AllImproving,
}

/// Split table plus balance diagnostics.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitResult {
    pub assignment: Assignment,
    pub criterion: Criterion,
    /// `sum_g - sum_h`.
    pub s: i64,
    pub abs_s: u64,
    /// Sum over rows of `tau(g)^2 - tau(h)^2`.
    pub s_sq: i64,
    pub sum_g: u64,
    pub sum_h: u64,
    pub iterations: usize,
    /// Objective value (`|S|` or `|S| * |S_sq|`) of the seed followed by one
    /// entry per applied iteration.
    pub history: Vec<u128>,
}

impl SplitResult {
    fn evaluate(assignment: Assignment, tau: &ItemScores, criterion: Criterion) -> Self {
        let t = &tau.totals;
        let sum_g: u64 = assignment.g_items.iter().map(|&j| t[j]).sum();
        let sum_h: u64 = assignment.h_items.iter().map(|&j| t[j]).sum();
        let sq = |j: usize| i128::from(t[j]) * i128::from(t[j]);
        let s_sq: i128 = assignment.g_items.iter().map(|&j| sq(j)).sum::<i128>()
            - assignment.h_items.iter().map(|&j| sq(j)).sum::<i128>();
        let s = sum_g as i64 - sum_h as i64;
        let mut result = Self {
            assignment,
            criterion,
            s,
            abs_s: s.unsigned_abs(),
            s_sq: s_sq as i64,
            sum_g,
            sum_h,
            iterations: 0,
            history: Vec::new(),
        };
        result.history.push(result.objective());
        result
    }

    /// Current value of the criterion being minimised.
    pub fn objective(&self) -> u128 {
        match self.criterion {
            Criterion::AbsS => u128::from(self.abs_s),
            Criterion::Product => u128::from(self.abs_s) * u128::from(self.s_sq.unsigned_abs()),
        }
    }

    /// Rows of `(g item, g score, h item, h score, difference)`.
    pub fn table(&self, tau: &ItemScores) -> Vec<SplitRow> {
        self.assignment
            .g_items
            .iter()
            .zip(&self.assignment.h_items)
            .map(|(&g, &h)| SplitRow {
                g_item: g,
                g_score: tau.totals[g],
                h_item: h,
                h_score: tau.totals[h],
                difference: tau.totals[g] as i64 - tau.totals[h] as i64,
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitRow {
    pub g_item: usize,
    pub g_score: u64,
    pub h_item: usize,
    pub h_score: u64,
    pub difference: i64,
}

/// Refinement settings for [`split`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct SplitOptions {
    pub criterion: Criterion,
    pub policy: SwapPolicy,
    /// Iteration cap; `None` means `10 * n`.
    pub max_iter: Option<usize>,
}

pub fn default_max_iter(n_items: usize) -> usize {
    10 * n_items
}

/// Seed sub-tests: sort by score descending (ties by index), deal `g,h,h,g`.
///
/// For odd `n` the last item in sort order (lowest score) is dropped.
pub fn seed_allocation(tau: &ItemScores) -> Assignment {
    let t = &tau.totals;
    let mut order: Vec<usize> = (0..t.len()).collect();
    order.sort_by(|&a, &b| t[b].cmp(&t[a]).then(a.cmp(&b)));

    let dropped_item = (t.len() % 2 == 1).then(|| order[t.len() - 1]);
    let pairs = t.len() / 2;
    let mut g_items = Vec::with_capacity(pairs);
    let mut h_items = Vec::with_capacity(pairs);
    for (row, pair) in order.chunks_exact(2).enumerate() {
        let (first, second) = (pair[0], pair[1]);
        if row % 2 == 0 {
            g_items.push(first);
            h_items.push(second);
        } else {
            g_items.push(second);
            h_items.push(first);
        }
    }
    Assignment {
        g_items,
        h_items,
        dropped_item,
    }
}

/// Same-row swap refinement minimising `|S|`.
pub fn swap_refine(
    a: Assignment,
    tau: &ItemScores,
    max_iter: usize,
    policy: SwapPolicy,
) -> SplitResult {
    let t = &tau.totals;
    let mut result = SplitResult::evaluate(a, tau, Criterion::AbsS);
    let mut diffs: Vec<i64> = result
        .assignment
        .g_items
        .iter()
        .zip(&result.assignment.h_items)
        .map(|(&g, &h)| t[g] as i64 - t[h] as i64)
        .collect();
    let mut s = result.s;

    while s != 0 && result.iterations < max_iter {
        let current = s.unsigned_abs();
        let swapped: Vec<usize> = match policy {
            SwapPolicy::SingleBest => {
                let mut best: Option<(usize, u64)> = None;
                for (row, &d) in diffs.iter().enumerate() {
                    let after = (s - 2 * d).unsigned_abs();
                    if after < best.map_or(current, |(_, v)| v) {
                        best = Some((row, after));
                    }
                }
                best.map(|(row, _)| vec![row]).unwrap_or_default()
            }
            SwapPolicy::AllImproving => {
                let rows: Vec<usize> = (0..diffs.len())
                    .filter(|&row| (s - 2 * diffs[row]).unsigned_abs() < current)
                    .collect();
                let after = s - 2 * rows.iter().map(|&r| diffs[r]).sum::<i64>();
                if after.unsigned_abs() < current {
                    rows
                } else {
                    Vec::new()
                }
            }
        };
        if swapped.is_empty() {
            break;
        }
        for row in swapped {
            s -= 2 * diffs[row];
            diffs[row] = -diffs[row];
            let asg = &mut result.assignment;
            std::mem::swap(&mut asg.g_items[row], &mut asg.h_items[row]);
        }
        result.iterations += 1;
        result.history.push(u128::from(s.unsigned_abs()));
    }

    finish(result, tau)
}

/// Cross-row swap refinement minimising `|S| * |S_sq|`.
///
/// Each iteration scans every `(g row, h row)` pair, applies the pair giving
/// the smallest product if it is strictly below the current one, and stops
/// once a full sweep finds no reduction.
pub fn product_refine(a: Assignment, tau: &ItemScores, max_iter: usize) -> SplitResult {
    let t = &tau.totals;
    let mut result = SplitResult::evaluate(a, tau, Criterion::Product);
    let mut s = i128::from(result.s);
    let mut s_sq = i128::from(result.s_sq);
    let objective = |s: i128, s_sq: i128| s.unsigned_abs() * s_sq.unsigned_abs();

    while result.iterations < max_iter {
        let current = objective(s, s_sq);
        if current == 0 {
            break;
        }
        let mut best: Option<(usize, usize, u128)> = None;
        for (r1, &g) in result.assignment.g_items.iter().enumerate() {
            let tg = i128::from(t[g]);
            for (r2, &h) in result.assignment.h_items.iter().enumerate() {
                let th = i128::from(t[h]);
                let value = objective(s - 2 * (tg - th), s_sq - 2 * (tg * tg - th * th));
                if value < best.map_or(current, |b| b.2) {
                    best = Some((r1, r2, value));
                }
            }
        }
        let Some((r1, r2, value)) = best else { break };
        let asg = &mut result.assignment;
        let (tg, th) = (i128::from(t[asg.g_items[r1]]), i128::from(t[asg.h_items[r2]]));
        s -= 2 * (tg - th);
        s_sq -= 2 * (tg * tg - th * th);
        std::mem::swap(&mut asg.g_items[r1], &mut asg.h_items[r2]);
        result.iterations += 1;
        result.history.push(value);
    }

    finish(result, tau)
}

fn finish(result: SplitResult, tau: &ItemScores) -> SplitResult {
    let SplitResult {
        assignment,
        criterion,
        iterations,
        history,
        ..
    } = result;
    let mut out = SplitResult::evaluate(assignment, tau, criterion);
    out.iterations = iterations;
    out.history = history;
    out
}

/// Seed plus refinement on precomputed item totals.
pub fn split_item_scores(tau: &ItemScores, options: SplitOptions) -> Result<SplitResult> {
    if tau.len() < 2 {
        return Err(Error::TooSmall {
            examinees: 0,
            items: tau.len(),
        });
    }
    let seed = seed_allocation(tau);
    let max_iter = options.max_iter.unwrap_or_else(|| default_max_iter(tau.len()));
    Ok(match options.criterion {
        Criterion::AbsS => swap_refine(seed, tau, max_iter, options.policy),
        Criterion::Product => product_refine(seed, tau, max_iter),
    })
}

/// Full pipeline: item totals, seed allocation, refinement.
pub fn split(m: &ScoreMatrix, options: SplitOptions) -> Result<SplitResult> {
    split_item_scores(&item_totals(m), options)
}

/// Exhaustive optimum over all balanced bipartitions (test oracle).
///
/// Subsets for `g` are visited in lexicographic order of their sorted index
/// lists and the first one reaching the minimum wins. Requires an even item
/// count no larger than [`BRUTE_FORCE_MAX_ITEMS`].
pub fn brute_force_split(tau: &ItemScores) -> Result<SplitResult> {
    let n = tau.len();
    if n % 2 == 1 || !(2..=BRUTE_FORCE_MAX_ITEMS).contains(&n) {
        return Err(Error::Unsupported(format!(
            "brute force needs an even item count in 2..={BRUTE_FORCE_MAX_ITEMS}, got {n}"
        )));
    }
    let t = &tau.totals;
    let total: u64 = tau.grand_total();
    let k = n / 2;
    let mut combo: Vec<usize> = (0..k).collect();
    let mut best: Option<(u64, Vec<usize>)> = None;
    loop {
        let sum_g: u64 = combo.iter().map(|&j| t[j]).sum();
        let gap = (2 * sum_g).abs_diff(total);
        if best.as_ref().is_none_or(|(b, _)| gap < *b) {
            best = Some((gap, combo.clone()));
            if gap == 0 {
                break;
            }
        }
        // next combination in lexicographic order
        let Some(i) = (0..k).rev().find(|&i| combo[i] < n - k + i) else {
            break;
        };
        combo[i] += 1;
        for j in i + 1..k {
            combo[j] = combo[j - 1] + 1;
        }
    }
    let (_, g_items) = best.expect("at least one combination");
    let mut in_g = vec![false; n];
    for &j in &g_items {
        in_g[j] = true;
    }
    let h_items = (0..n).filter(|&j| !in_g[j]).collect();
    let assignment = Assignment {
        g_items,
        h_items,
        dropped_item: None,
    };
    Ok(SplitResult::evaluate(assignment, tau, Criterion::AbsS))
}
