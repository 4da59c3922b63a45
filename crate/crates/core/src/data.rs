//! Score matrix, item/examinee aggregates and person-space statistics.
//!
//! A test of `n` binary items administered to `N` examinees is stored as an
//! `N x n` matrix of 0/1 entries. Examinee totals form the score vector `X`
//! in the `N`-dimensional person space, and `I = (n, ..., n)` is the vector
//! of maximum possible scores. Mean and variance of `X` follow from `|X|`
//! and the angle between `X` and `I`.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Binary response matrix, one row per examinee and one column per item.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScoreMatrix {
    n_examinees: usize,
    n_items: usize,
    /// Row-major entries, each 0 or 1.
    entries: Vec<u8>,
    examinee_ids: Option<Vec<String>>,
    item_ids: Option<Vec<String>>,
}

impl ScoreMatrix {
    /// Builds a matrix from row-major entries.
    pub fn from_flat(n_examinees: usize, n_items: usize, entries: Vec<u8>) -> Result<Self> {
        if n_examinees < 2 || n_items < 2 {
            return Err(Error::TooSmall {
                examinees: n_examinees,
                items: n_items,
            });
        }
        if entries.len() != n_examinees * n_items {
            return Err(Error::Shape(format!(
                "expected {} entries for {n_examinees}x{n_items}, got {}",
                n_examinees * n_items,
                entries.len()
            )));
        }
        if let Some(pos) = entries.iter().position(|&v| v > 1) {
            return Err(Error::DomainViolation {
                row: pos / n_items + 1,
                column: pos % n_items + 1,
                line: 0,
                value: entries[pos].to_string(),
            });
        }
        Ok(Self {
            n_examinees,
            n_items,
            entries,
            examinee_ids: None,
            item_ids: None,
        })
    }

    /// Builds a matrix from a list of rows.
    pub fn from_rows<R: AsRef<[u8]>>(rows: &[R]) -> Result<Self> {
        let n_items = rows.first().map_or(0, |r| r.as_ref().len());
        let mut entries = Vec::with_capacity(rows.len() * n_items);
        for (i, row) in rows.iter().enumerate() {
            let row = row.as_ref();
            if row.len() != n_items {
                return Err(Error::Shape(format!(
                    "row {} has {} columns, expected {n_items}",
                    i + 1,
                    row.len()
                )));
            }
            entries.extend_from_slice(row);
        }
        Self::from_flat(rows.len(), n_items, entries)
    }

    pub fn with_item_ids(mut self, ids: Vec<String>) -> Result<Self> {
        if ids.len() != self.n_items {
            return Err(Error::Shape(format!(
                "{} item ids for {} items",
                ids.len(),
                self.n_items
            )));
        }
        self.item_ids = Some(ids);
        Ok(self)
    }

    pub fn with_examinee_ids(mut self, ids: Vec<String>) -> Result<Self> {
        if ids.len() != self.n_examinees {
            return Err(Error::Shape(format!(
                "{} examinee ids for {} examinees",
                ids.len(),
                self.n_examinees
            )));
        }
        self.examinee_ids = Some(ids);
        Ok(self)
    }

    pub fn n_examinees(&self) -> usize {
        self.n_examinees
    }

    pub fn n_items(&self) -> usize {
        self.n_items
    }

    pub fn item_ids(&self) -> Option<&[String]> {
        self.item_ids.as_deref()
    }

    pub fn examinee_ids(&self) -> Option<&[String]> {
        self.examinee_ids.as_deref()
    }

    #[inline]
    pub fn get(&self, examinee: usize, item: usize) -> u8 {
        self.entries[examinee * self.n_items + item]
    }

    pub fn row(&self, examinee: usize) -> &[u8] {
        let start = examinee * self.n_items;
        &self.entries[start..start + self.n_items]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[u8]> {
        self.entries.chunks_exact(self.n_items)
    }

    /// Writes the matrix as delimited text, with a header row when item ids are present.
    pub fn write_delimited<W: Write>(&self, sink: W, delimiter: u8) -> Result<()> {
        let mut writer = csv::WriterBuilder::new()
            .delimiter(delimiter)
            .from_writer(sink);
        let io = |e: csv::Error| Error::Parse(e.to_string());
        if let Some(ids) = &self.item_ids {
            writer.write_record(ids).map_err(io)?;
        }
        let mut record: Vec<&'static str> = Vec::with_capacity(self.n_items);
        for row in self.rows() {
            record.clear();
            record.extend(row.iter().map(|&v| if v == 1 { "1" } else { "0" }));
            writer.write_record(&record).map_err(io)?;
        }
        writer.flush().map_err(|e| Error::Parse(e.to_string()))?;
        Ok(())
    }
}

/// Options for [`load_score_matrix`].
#[derive(Debug, Clone, Copy)]
pub struct LoadOptions {
    pub has_header: bool,
    pub delimiter: u8,
}

impl Default for LoadOptions {
    fn default() -> Self {
        Self {
            has_header: false,
            delimiter: b',',
        }
    }
}

/// Parses a delimited 0/1 table, one examinee per row and one item per column.
///
/// Cells are trimmed; anything other than `0` or `1` (including blanks) is a
/// [`Error::DomainViolation`]. Row and column numbers in errors are 1-based and
/// count data rows only; `line` is the physical line in the source.
pub fn load_score_matrix<R: Read>(source: R, options: LoadOptions) -> Result<ScoreMatrix> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .delimiter(options.delimiter)
        .trim(csv::Trim::All)
        .from_reader(source);

    let mut header: Option<Vec<String>> = None;
    let mut n_items: Option<usize> = None;
    let mut entries = Vec::new();
    let mut n_rows = 0usize;

    for record in reader.records() {
        let record = record.map_err(|e| Error::Parse(e.to_string()))?;
        let line = record.position().map_or(0, |p| p.line());
        if options.has_header && header.is_none() {
            header = Some(record.iter().map(str::to_owned).collect());
            n_items = Some(record.len());
            continue;
        }
        let width = *n_items.get_or_insert(record.len());
        if record.len() != width {
            return Err(Error::Shape(format!(
                "ragged row {} (line {line}): {} columns, expected {width}",
                n_rows + 1,
                record.len()
            )));
        }
        n_rows += 1;
        for (j, cell) in record.iter().enumerate() {
            let v = match cell {
                "0" => 0,
                "1" => 1,
                other => {
                    return Err(Error::DomainViolation {
                        row: n_rows,
                        column: j + 1,
                        line,
                        value: other.to_owned(),
                    })
                }
            };
            entries.push(v);
        }
    }

    let matrix = ScoreMatrix::from_flat(n_rows, n_items.unwrap_or(0), entries)?;
    match header {
        Some(ids) => matrix.with_item_ids(ids),
        None => Ok(matrix),
    }
}

/// Per-item totals `tau_j` (number of correct responses to item `j`).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ItemScores {
    pub totals: Vec<u64>,
}

impl ItemScores {
    pub fn new(totals: Vec<u64>) -> Self {
        Self { totals }
    }

    pub fn len(&self) -> usize {
        self.totals.len()
    }

    pub fn is_empty(&self) -> bool {
        self.totals.is_empty()
    }

    pub fn grand_total(&self) -> u64 {
        self.totals.iter().sum()
    }
}

/// Per-examinee totals `X_i`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExamineeScores {
    pub totals: Vec<u64>,
}

impl ExamineeScores {
    pub fn new(totals: Vec<u64>) -> Self {
        Self { totals }
    }

    pub fn len(&self) -> usize {
        self.totals.len()
    }

    pub fn is_empty(&self) -> bool {
        self.totals.is_empty()
    }

    pub fn as_f64(&self) -> Vec<f64> {
        self.totals.iter().map(|&x| x as f64).collect()
    }
}

pub fn item_totals(m: &ScoreMatrix) -> ItemScores {
    let mut totals = vec![0u64; m.n_items()];
    for row in m.rows() {
        for (t, &v) in totals.iter_mut().zip(row) {
            *t += u64::from(v);
        }
    }
    ItemScores { totals }
}

pub fn examinee_totals(m: &ScoreMatrix) -> ExamineeScores {
    ExamineeScores {
        totals: m
            .rows()
            .map(|row| row.iter().map(|&v| u64::from(v)).sum())
            .collect(),
    }
}

/// Descriptive statistics of a test score vector in person space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestStats {
    /// Number of examinees.
    pub n_examinees: usize,
    /// Number of items; the maximum score per examinee.
    pub n_items: usize,
    pub mean: f64,
    /// Population variance (divide by `N`).
    pub variance: f64,
    pub norm_x: f64,
    pub norm_i: f64,
    /// `cos(theta_X)`; `None` when `X` is the zero vector.
    pub cos_theta_x: Option<f64>,
}

impl TestStats {
    pub fn std_dev(&self) -> f64 {
        self.variance.sqrt()
    }

    /// Mean recovered from `|X| cos(theta_X) / sqrt(N)`.
    pub fn mean_geometric(&self) -> Option<f64> {
        self.cos_theta_x
            .map(|c| self.norm_x * c / (self.n_examinees as f64).sqrt())
    }

    /// Variance recovered from `|X|^2 sin^2(theta_X) / N`.
    pub fn variance_geometric(&self) -> Option<f64> {
        self.cos_theta_x
            .map(|c| self.norm_x * self.norm_x * (1.0 - c * c) / self.n_examinees as f64)
    }
}

/// Computes person-space statistics of `x` for a test of `n_items` items.
pub fn descriptive_stats(x: &ExamineeScores, n_items: usize) -> Result<TestStats> {
    if x.is_empty() {
        return Err(Error::TooSmall {
            examinees: 0,
            items: n_items,
        });
    }
    if n_items == 0 {
        return Err(Error::TooSmall {
            examinees: x.len(),
            items: 0,
        });
    }
    let big_n = x.len() as f64;
    let sum: u64 = x.totals.iter().sum();
    let sum_sq: u128 = x.totals.iter().map(|&v| u128::from(v) * u128::from(v)).sum();
    let mean = sum as f64 / big_n;
    let variance = x
        .totals
        .iter()
        .map(|&v| {
            let d = v as f64 - mean;
            d * d
        })
        .sum::<f64>()
        / big_n;

    let norm_x = (sum_sq as f64).sqrt();
    let n = n_items as f64;
    let norm_i = (big_n * n * n).sqrt();
    // X . I = n * sum(X)
    let cos_theta_x = (norm_x > 0.0).then(|| (n * sum as f64 / (norm_x * norm_i)).min(1.0));

    Ok(TestStats {
        n_examinees: x.len(),
        n_items,
        mean,
        variance,
        norm_x,
        norm_i,
        cos_theta_x,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str) -> Result<ScoreMatrix> {
        load_score_matrix(text.as_bytes(), LoadOptions::default())
    }

    #[test]
    fn parses_small_table() {
        let m = parse("0,1\n1,1").unwrap();
        assert_eq!((m.n_examinees(), m.n_items()), (2, 2));
        assert_eq!(m.row(0), &[0, 1]);
        assert_eq!(m.row(1), &[1, 1]);
    }

    #[test]
    fn rejects_non_binary_cell_with_location() {
        match parse("0,2\n1,1") {
            Err(Error::DomainViolation { row, column, .. }) => assert_eq!((row, column), (1, 2)),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn rejects_blank_cell() {
        assert!(matches!(
            parse("0,1\n1,\n"),
            Err(Error::DomainViolation { row: 2, column: 2, .. })
        ));
    }

    #[test]
    fn rejects_ragged_rows() {
        assert!(matches!(parse("0,1\n1,1,0"), Err(Error::Shape(_))));
    }

    #[test]
    fn rejects_too_small() {
        assert!(matches!(parse("0,1"), Err(Error::TooSmall { .. })));
        assert!(matches!(parse("0\n1\n1"), Err(Error::TooSmall { .. })));
    }

    #[test]
    fn header_and_whitespace() {
        let opts = LoadOptions {
            has_header: true,
            delimiter: b';',
        };
        let m = load_score_matrix("q1; q2 ;q3\n 1;0;1\n0 ;0;1\n".as_bytes(), opts).unwrap();
        assert_eq!(m.item_ids().unwrap(), &["q1", "q2", "q3"]);
        assert_eq!(m.row(1), &[0, 0, 1]);
    }

    #[test]
    fn totals_by_hand() {
        let m = ScoreMatrix::from_rows(&[[1u8, 0], [1, 1]]).unwrap();
        assert_eq!(item_totals(&m).totals, vec![2, 1]);
        assert_eq!(examinee_totals(&m).totals, vec![1, 2]);

        let ones = ScoreMatrix::from_flat(3, 4, vec![1; 12]).unwrap();
        assert_eq!(examinee_totals(&ones).totals, vec![4, 4, 4]);
    }

    #[test]
    fn collinear_with_max_vector() {
        let x = ExamineeScores::new(vec![3; 7]);
        let s = descriptive_stats(&x, 5).unwrap();
        assert!((s.cos_theta_x.unwrap() - 1.0).abs() < 1e-12);
        assert_eq!(s.variance, 0.0);
        assert!(s.variance_geometric().unwrap().abs() < 1e-9);
    }

    #[test]
    fn all_zero_scores_flag_undefined_angle() {
        let s = descriptive_stats(&ExamineeScores::new(vec![0; 4]), 3).unwrap();
        assert_eq!(s.norm_x, 0.0);
        assert!(s.cos_theta_x.is_none());
        assert_eq!(s.mean, 0.0);
    }

    #[test]
    fn norm_of_max_vector() {
        // |I| = sqrt(N n^2); 912 examinees, 50 items
        let s = descriptive_stats(&ExamineeScores::new(vec![1; 912]), 50).unwrap();
        assert!((s.norm_i - 1509.97).abs() < 0.01);
    }

    #[test]
    fn published_geometry_constants_are_consistent() {
        // |X| ~ 357.82, cos ~ 0.9275, N = 912
        let (norm_x, cos, n): (f64, f64, f64) = (357.82, 0.9275, 912.0);
        let mean = norm_x * cos / n.sqrt();
        let var = norm_x * norm_x * (1.0 - cos * cos) / n;
        assert!((mean - 10.99).abs() < 0.01, "{mean}");
        assert!((var - 19.63).abs() < 0.05, "{var}");
    }
}
