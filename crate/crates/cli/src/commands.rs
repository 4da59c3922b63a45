use std::fmt;
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::json;
use splithalf::analysis::{analyze, score_histograms, Analysis, AnalysisOptions, Histogram, ScoreHistograms};
use splithalf::battery::{
    covariance_matrix, eigen_weights, nonnegative_weights, optimal_weights, weighted_reliability,
    BatteryInput, BatteryReport, ComponentTest, CovMatrix, EigenVariant, WeightVector,
};
use splithalf::data::{load_score_matrix, LoadOptions, ScoreMatrix, TestStats};
use splithalf::reliability::ReliabilityReport;
use splithalf::simulate::{generate, scaling_suite, ScaleRow, SimModel, GENERATOR_ID};
use splithalf::splitter::{Criterion, SplitOptions, SwapPolicy};
use splithalf::truescore::{
    compare_estimators, estimate_bins, estimate_true_scores_with_ids, EstimateBin, EstimatorComparison,
    ReliabilityKind, TrueScoreTable,
};
use splithalf::{Error, ExamineeScores};

use crate::provenance::{sha256_hex, InputDigest, Provenance};
use crate::{
    BatteryCmd, CriterionArg, Format, InputArgs, OutputArgs, PolicyArg, ReliabilityArg, ReliabilityCmd,
    ScaleCmd, SimulateCmd, SplitArgs, SplitCmd, TruescoreCmd, WeightsArg,
};

#[derive(Debug)]
pub enum Failure {
    Invalid(String),
    Degenerate { name: &'static str, message: String },
}

impl Failure {
    pub fn exit_code(&self) -> u8 {
        match self {
            Failure::Invalid(_) => 1,
            Failure::Degenerate { .. } => 2,
        }
    }

    fn from_lib(context: &str, e: Error) -> Self {
        if e.is_degenerate() {
            Failure::Degenerate {
                name: e.name(),
                message: format!("{context}: {e}"),
            }
        } else {
            Failure::Invalid(format!("{context}: {} ({})", e, e.name()))
        }
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Failure::Invalid(m) => write!(f, "error: {m}"),
            Failure::Degenerate { name, message } => write!(f, "error [{name}]: {message}"),
        }
    }
}

type CmdResult<T = ()> = Result<T, Failure>;

fn delimiter_byte(c: char) -> CmdResult<u8> {
    u8::try_from(c)
        .ok()
        .filter(u8::is_ascii)
        .ok_or_else(|| Failure::Invalid(format!("delimiter {c:?} must be a single ASCII character")))
}

fn read_bytes(path: &Path) -> CmdResult<Vec<u8>> {
    fs::read(path).map_err(|e| Failure::Invalid(format!("{}: {e}", path.display())))
}

struct Loaded {
    matrix: ScoreMatrix,
    digest: InputDigest,
}

fn load_matrix(path: &Path, header: bool, delimiter: u8) -> CmdResult<Loaded> {
    let bytes = read_bytes(path)?;
    let matrix = load_score_matrix(
        &bytes[..],
        LoadOptions {
            has_header: header,
            delimiter,
        },
    )
    .map_err(|e| Failure::from_lib(&path.display().to_string(), e))?;
    Ok(Loaded {
        digest: InputDigest::of(path, &bytes),
        matrix,
    })
}

fn split_options(a: &SplitArgs) -> SplitOptions {
    SplitOptions {
        criterion: match a.criterion {
            CriterionArg::AbsS => Criterion::AbsS,
            CriterionArg::Product => Criterion::Product,
        },
        policy: match a.policy {
            PolicyArg::SingleBest => SwapPolicy::SingleBest,
            PolicyArg::AllImproving => SwapPolicy::AllImproving,
        },
        max_iter: a.max_iter,
    }
}

fn split_parameters(a: &SplitArgs, n_items: usize) -> serde_json::Value {
    let o = split_options(a);
    json!({
        "criterion": o.criterion,
        "policy": o.policy,
        "max_iter": o.max_iter.unwrap_or(splithalf::splitter::default_max_iter(n_items)),
    })
}

fn run_analysis(path: &Path, m: &ScoreMatrix, a: &SplitArgs) -> CmdResult<Analysis> {
    analyze(
        m,
        AnalysisOptions {
            split: split_options(a),
        },
    )
    .map_err(|e| Failure::from_lib(&path.display().to_string(), e))
}

fn sink(out: &Option<PathBuf>) -> CmdResult<Box<dyn Write>> {
    match out {
        Some(p) => fs::File::create(p)
            .map(|f| Box::new(io::BufWriter::new(f)) as Box<dyn Write>)
            .map_err(|e| Failure::Invalid(format!("{}: {e}", p.display()))),
        None => Ok(Box::new(io::stdout().lock())),
    }
}

fn write_json<T: Serialize>(out: &OutputArgs, value: &T) -> CmdResult {
    let mut w = sink(&out.output)?;
    let text = serde_json::to_string_pretty(value).map_err(|e| Failure::Invalid(e.to_string()))?;
    writeln!(w, "{text}")
        .and_then(|_| w.flush())
        .map_err(|e| Failure::Invalid(format!("writing output: {e}")))
}

fn csv_writer(w: Box<dyn Write>, delimiter: u8) -> csv::Writer<Box<dyn Write>> {
    csv::WriterBuilder::new().delimiter(delimiter).from_writer(w)
}

fn write_rows(out: &Option<PathBuf>, delimiter: u8, header: &[&str], rows: Vec<Vec<String>>) -> CmdResult {
    let mut w = csv_writer(sink(out)?, delimiter);
    let err = |e: csv::Error| Failure::Invalid(format!("writing output: {e}"));
    w.write_record(header).map_err(err)?;
    for r in rows {
        w.write_record(&r).map_err(err)?;
    }
    w.flush().map_err(|e| Failure::Invalid(format!("writing output: {e}")))
}

fn item_label(m: &ScoreMatrix, item: usize) -> Option<String> {
    m.item_ids().map(|ids| ids[item].clone())
}

#[derive(Serialize)]
struct SplitTableRow {
    row: usize,
    g_item: usize,
    g_label: Option<String>,
    g_score: u64,
    h_item: usize,
    h_label: Option<String>,
    h_score: u64,
    difference: i64,
}

#[derive(Serialize)]
struct SplitSummary {
    s: i64,
    abs_s: u64,
    s_sq: i64,
    sum_g: u64,
    sum_h: u64,
    iterations: usize,
    history: Vec<u128>,
    /// 1-based item numbers.
    g_items: Vec<usize>,
    h_items: Vec<usize>,
    dropped_item: Option<usize>,
}

fn split_summary(a: &Analysis) -> SplitSummary {
    let s = &a.split;
    let one = |v: &[usize]| v.iter().map(|j| j + 1).collect();
    SplitSummary {
        s: s.s,
        abs_s: s.abs_s,
        s_sq: s.s_sq,
        sum_g: s.sum_g,
        sum_h: s.sum_h,
        iterations: s.iterations,
        history: s.history.clone(),
        g_items: one(&s.assignment.g_items),
        h_items: one(&s.assignment.h_items),
        dropped_item: s.assignment.dropped_item.map(|j| j + 1),
    }
}

fn split_table(m: &ScoreMatrix, a: &Analysis) -> Vec<SplitTableRow> {
    a.split
        .table(&a.item_scores)
        .into_iter()
        .enumerate()
        .map(|(k, r)| SplitTableRow {
            row: k + 1,
            g_item: r.g_item + 1,
            g_label: item_label(m, r.g_item),
            g_score: r.g_score,
            h_item: r.h_item + 1,
            h_label: item_label(m, r.h_item),
            h_score: r.h_score,
            difference: r.difference,
        })
        .collect()
}

#[derive(Serialize)]
struct SplitOutput {
    provenance: Provenance,
    n_examinees: usize,
    n_items: usize,
    split: SplitSummary,
    table: Vec<SplitTableRow>,
}

pub fn split(c: SplitCmd) -> CmdResult {
    let delimiter = delimiter_byte(c.input.delimiter)?;
    let loaded = load_matrix(&c.input.input, c.input.header, delimiter)?;
    let m = &loaded.matrix;
    let a = run_analysis(&c.input.input, m, &c.split)?;
    let table = split_table(m, &a);
    match c.out.format {
        Format::Json => write_json(
            &c.out,
            &SplitOutput {
                provenance: Provenance::new(
                    "split",
                    vec![loaded.digest],
                    input_parameters(&c.input, split_parameters(&c.split, m.n_items()), json!({})),
                ),
                n_examinees: m.n_examinees(),
                n_items: m.n_items(),
                split: split_summary(&a),
                table,
            },
        ),
        Format::Csv => write_rows(
            &c.out.output,
            delimiter,
            &["row", "g_item", "g_score", "h_item", "h_score", "difference"],
            table
                .iter()
                .map(|r| {
                    vec![
                        r.row.to_string(),
                        r.g_label.clone().unwrap_or_else(|| r.g_item.to_string()),
                        r.g_score.to_string(),
                        r.h_label.clone().unwrap_or_else(|| r.h_item.to_string()),
                        r.h_score.to_string(),
                        r.difference.to_string(),
                    ]
                })
                .collect(),
        ),
    }
}

/// Merges input, split and command-specific parameters into one object.
fn input_parameters(input: &InputArgs, split: serde_json::Value, extra: serde_json::Value) -> serde_json::Value {
    let mut p = json!({
        "header": input.header,
        "delimiter": input.delimiter.to_string(),
        "split": split,
    });
    if let (Some(obj), serde_json::Value::Object(more)) = (p.as_object_mut(), extra) {
        obj.extend(more);
    }
    p
}

#[derive(Serialize)]
struct ReliabilityOutput {
    provenance: Provenance,
    stats: TestStats,
    split: SplitSummary,
    reliability: ReliabilityReport,
    histograms: ScoreHistograms,
}

fn histogram_rows(h: &ScoreHistograms) -> Vec<Vec<String>> {
    let series = |name: &str, hist: &Histogram| -> Vec<Vec<String>> {
        hist.bins
            .iter()
            .map(|b| vec![name.to_string(), b.low.to_string(), b.high.to_string(), b.count.to_string()])
            .collect()
    };
    let mut rows = series("total", &h.total);
    rows.extend(series("g", &h.g));
    rows.extend(series("h", &h.h));
    rows
}

const HISTOGRAM_HEADER: [&str; 4] = ["series", "low", "high", "count"];

pub fn reliability(c: ReliabilityCmd) -> CmdResult {
    let delimiter = delimiter_byte(c.input.delimiter)?;
    let loaded = load_matrix(&c.input.input, c.input.header, delimiter)?;
    let m = &loaded.matrix;
    let a = run_analysis(&c.input.input, m, &c.split)?;
    let histograms = score_histograms(&a.subtests, a.split.assignment.n_rows(), c.bin_width)
        .map_err(|e| Failure::from_lib("--bin-width", e))?;
    if let Some(path) = &c.histograms {
        write_rows(&Some(path.clone()), delimiter, &HISTOGRAM_HEADER, histogram_rows(&histograms))?;
    }
    match c.out.format {
        Format::Json => write_json(
            &c.out,
            &ReliabilityOutput {
                provenance: Provenance::new(
                    "reliability",
                    vec![loaded.digest],
                    input_parameters(
                        &c.input,
                        split_parameters(&c.split, m.n_items()),
                        json!({ "bin_width": c.bin_width }),
                    ),
                ),
                stats: a.stats.clone(),
                split: split_summary(&a),
                reliability: a.reliability.clone(),
                histograms,
            },
        ),
        Format::Csv => {
            let r = &a.reliability;
            let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
            let rows = [
                ("n_examinees", r.n_examinees.to_string()),
                ("n_items_used", a.stats.n_items.to_string()),
                ("mean", a.stats.mean.to_string()),
                ("test_variance", r.test_variance.to_string()),
                ("error_variance", r.error_variance.to_string()),
                ("true_score_variance", r.true_score_variance.to_string()),
                ("r_tt", r.r_tt.to_string()),
                ("r_tt_symmetric", r.r_tt_symmetric.to_string()),
                ("r_gh", opt(r.r_gh)),
                ("r_xt", opt(r.r_xt)),
                ("f_stat", opt(r.f_test.map(|f| f.f_stat))),
                ("f_p_value", opt(r.f_test.map(|f| f.p_value))),
                ("abs_s", a.split.abs_s.to_string()),
            ];
            write_rows(
                &c.out.output,
                delimiter,
                &["metric", "value"],
                rows.into_iter().map(|(k, v)| vec![k.to_string(), v]).collect(),
            )
        }
    }
}

#[derive(Serialize)]
struct TruescoreOutput {
    provenance: Provenance,
    r_tt: f64,
    r_gh: Option<f64>,
    table: TrueScoreTable,
    bins: Vec<EstimateBin>,
    comparison: Option<EstimatorComparison>,
}

pub fn truescore(c: TruescoreCmd) -> CmdResult {
    let delimiter = delimiter_byte(c.input.delimiter)?;
    let loaded = load_matrix(&c.input.input, c.input.header, delimiter)?;
    let m = &loaded.matrix;
    let a = run_analysis(&c.input.input, m, &c.split)?;
    let context = c.input.input.display().to_string();
    let r_tt = a.reliability.r_tt;
    let r_gh = a.reliability.r_gh;
    let (kind, r) = match c.reliability {
        ReliabilityArg::Classical => (ReliabilityKind::Classical, r_tt),
        ReliabilityArg::SplitHalf => (
            ReliabilityKind::SplitHalf,
            r_gh.ok_or_else(|| {
                Failure::from_lib(&context, Error::Undefined("split-half correlation with a zero-variance half"))
            })?,
        ),
    };
    let x = ExamineeScores::new(a.subtests.combined());
    let mut table = estimate_true_scores_with_ids(&x, &a.stats, r, kind, m.examinee_ids())
        .map_err(|e| Failure::from_lib(&context, e))?;
    let mut bins = estimate_bins(&table, c.bin_width).map_err(|e| Failure::from_lib("--bin-width", e))?;
    let mut comparison = r_gh.map(|g| compare_estimators(&x, &a.stats, r_tt, g));

    // reports number examinees from 1
    table.rows.iter_mut().for_each(|row| row.examinee += 1);
    bins.iter_mut().flat_map(|b| b.examinees.iter_mut()).for_each(|e| *e += 1);
    if let Some(cmp) = comparison.as_mut() {
        cmp.rows.iter_mut().for_each(|row| row.examinee += 1);
    }

    match c.out.format {
        Format::Json => write_json(
            &c.out,
            &TruescoreOutput {
                provenance: Provenance::new(
                    "truescore",
                    vec![loaded.digest],
                    input_parameters(
                        &c.input,
                        split_parameters(&c.split, m.n_items()),
                        json!({ "reliability": kind, "bin_width": c.bin_width }),
                    ),
                ),
                r_tt,
                r_gh,
                table,
                bins,
                comparison,
            },
        ),
        Format::Csv => write_rows(
            &c.out.output,
            delimiter,
            &[
                "examinee",
                "examinee_id",
                "observed",
                "estimate",
                "low",
                "high",
                "prediction_error",
                "out_of_range",
            ],
            table
                .rows
                .iter()
                .map(|r| {
                    vec![
                        r.examinee.to_string(),
                        r.examinee_id.clone().unwrap_or_default(),
                        r.observed.to_string(),
                        r.estimate.to_string(),
                        r.low.to_string(),
                        r.high.to_string(),
                        r.prediction_error.to_string(),
                        r.out_of_range.to_string(),
                    ]
                })
                .collect(),
        ),
    }
}

#[derive(Serialize)]
struct ComponentSummary {
    path: String,
    n_items: usize,
    r_tt: f64,
    abs_s: u64,
}

#[derive(Serialize)]
struct BatteryOutput {
    provenance: Provenance,
    components: Vec<ComponentSummary>,
    report: BatteryReport,
}

/// Reads a square matrix of numbers, one row per line.
fn load_covariance(path: &Path, delimiter: u8) -> CmdResult<(CovMatrix, InputDigest)> {
    let bytes = read_bytes(path)?;
    let ctx = path.display().to_string();
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .delimiter(delimiter)
        .trim(csv::Trim::All)
        .flexible(true)
        .from_reader(&bytes[..]);
    let mut rows = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| Failure::Invalid(format!("{ctx}: {e}")))?;
        let line = record.position().map_or(0, |p| p.line());
        let row = record
            .iter()
            .map(|cell| {
                cell.parse::<f64>()
                    .map_err(|_| Failure::Invalid(format!("{ctx}: line {line}: {cell:?} is not a number")))
            })
            .collect::<CmdResult<Vec<f64>>>()?;
        rows.push(row);
    }
    let d = CovMatrix::from_rows(&rows).map_err(|e| Failure::from_lib(&ctx, e))?;
    Ok((d, InputDigest::of(path, &bytes)))
}

pub fn battery(c: BatteryCmd) -> CmdResult {
    let delimiter = delimiter_byte(c.delimiter)?;
    let mut digests = Vec::new();
    let mut components = Vec::new();
    let (d, reliabilities) = if let Some(path) = &c.covariance {
        let (d, digest) = load_covariance(path, delimiter)?;
        digests.push(digest);
        (d, c.reliabilities.clone().unwrap_or_default())
    } else {
        let mut tests = Vec::new();
        for path in &c.inputs {
            let loaded = load_matrix(path, c.header, delimiter)?;
            let a = run_analysis(path, &loaded.matrix, &c.split)?;
            components.push(ComponentSummary {
                path: path.display().to_string(),
                n_items: loaded.matrix.n_items(),
                r_tt: a.reliability.r_tt,
                abs_s: a.split.abs_s,
            });
            tests.push(ComponentTest {
                scores: ExamineeScores::new(a.subtests.combined()),
                reliability: a.reliability.r_tt,
            });
            digests.push(loaded.digest);
        }
        let input = BatteryInput { tests };
        let d = covariance_matrix(&input).map_err(|e| Failure::from_lib("--inputs", e))?;
        let rel = c.reliabilities.clone().unwrap_or_else(|| input.reliabilities());
        (d, rel)
    };

    let weights: WeightVector = match c.weights {
        WeightsArg::Optimal => optimal_weights(&d),
        WeightsArg::Nonneg => nonnegative_weights(&d),
        WeightsArg::EigenCov => eigen_weights(&d, EigenVariant::CovProportional),
        WeightsArg::EigenCorr => eigen_weights(&d, EigenVariant::CorrScaled),
        WeightsArg::Equal => Ok(WeightVector::equal(d.dim())),
    }
    .map_err(|e| Failure::from_lib("battery weights", e))?;
    let report = weighted_reliability(&reliabilities, &d, &weights)
        .map_err(|e| Failure::from_lib("battery reliability", e))?;

    let parameters = json!({
        "weights": format!("{:?}", c.weights).to_lowercase(),
        "reliabilities": reliabilities,
        "header": c.header,
        "delimiter": c.delimiter.to_string(),
        "split": c.covariance.is_none().then(|| split_parameters(&c.split, 0)),
    });
    match c.out.format {
        Format::Json => write_json(
            &c.out,
            &BatteryOutput {
                provenance: Provenance::new("battery", digests, parameters),
                components,
                report,
            },
        ),
        Format::Csv => write_rows(
            &c.out.output,
            delimiter,
            &["test", "weight", "reliability", "r_battery"],
            report
                .weights
                .w
                .iter()
                .zip(&report.reliabilities)
                .enumerate()
                .map(|(i, (w, r))| vec![(i + 1).to_string(), w.to_string(), r.to_string(), report.r_battery.to_string()])
                .collect(),
        ),
    }
}

#[derive(Serialize)]
struct SimulateMeta {
    provenance: Provenance,
    model: splithalf::simulate::ModelKind,
    n_examinees: usize,
    n_items: usize,
    seed: u64,
    generator: &'static str,
    output: String,
    output_sha256: String,
}

pub fn meta_path(output: &Path) -> PathBuf {
    output.with_extension("meta.json")
}

pub fn simulate(c: SimulateCmd) -> CmdResult {
    let delimiter = delimiter_byte(c.delimiter)?;
    let model = SimModel::new(c.model, c.n_examinees, c.n_items, c.seed);
    let m = generate(&model).map_err(|e| Failure::from_lib("simulate", e))?;
    let mut csv = Vec::new();
    m.write_delimited(&mut csv, delimiter)
        .map_err(|e| Failure::from_lib("simulate", e))?;
    fs::write(&c.output, &csv).map_err(|e| Failure::Invalid(format!("{}: {e}", c.output.display())))?;

    let meta = SimulateMeta {
        provenance: Provenance::new(
            "simulate",
            Vec::new(),
            json!({
                "model": c.model,
                "N": c.n_examinees,
                "n": c.n_items,
                "seed": c.seed,
                "delimiter": c.delimiter.to_string(),
            }),
        ),
        model: c.model,
        n_examinees: c.n_examinees,
        n_items: c.n_items,
        seed: c.seed,
        generator: GENERATOR_ID,
        output: c.output.display().to_string(),
        output_sha256: sha256_hex(&csv),
    };
    write_json(
        &OutputArgs {
            format: Format::Json,
            output: Some(meta_path(&c.output)),
        },
        &meta,
    )
}

fn parse_size(s: &str) -> CmdResult<(usize, usize)> {
    let bad = || Failure::Invalid(format!("--sizes: {s:?} is not of the form NxN_items"));
    let (a, b) = s.trim().split_once(['x', 'X']).ok_or_else(bad)?;
    Ok((a.parse().map_err(|_| bad())?, b.parse().map_err(|_| bad())?))
}

#[derive(Serialize)]
struct ScaleOutput {
    provenance: Provenance,
    generator: &'static str,
    rows: Vec<ScaleRow>,
}

pub fn scale(c: ScaleCmd) -> CmdResult {
    let delimiter = delimiter_byte(c.delimiter)?;
    let sizes = c.sizes.iter().map(|s| parse_size(s)).collect::<CmdResult<Vec<_>>>()?;
    let rows = scaling_suite(&sizes, c.model, c.seed).map_err(|e| Failure::from_lib("scale", e))?;
    match c.out.format {
        Format::Json => write_json(
            &c.out,
            &ScaleOutput {
                provenance: Provenance::new(
                    "scale",
                    Vec::new(),
                    json!({ "model": c.model, "sizes": c.sizes, "seed": c.seed }),
                ),
                generator: GENERATOR_ID,
                rows,
            },
        ),
        Format::Csv => write_rows(
            &c.out.output,
            delimiter,
            &[
                "n_examinees",
                "n_items",
                "r_tt",
                "abs_s",
                "iterations",
                "generate_seconds",
                "split_seconds",
                "refine_seconds",
                "total_seconds",
            ],
            rows.iter()
                .map(|r| {
                    vec![
                        r.n_examinees.to_string(),
                        r.n_items.to_string(),
                        r.r_tt.to_string(),
                        r.abs_s.to_string(),
                        r.iterations.to_string(),
                        r.generate_seconds.to_string(),
                        r.split_seconds.to_string(),
                        r.refine_seconds.to_string(),
                        r.total_seconds.to_string(),
                    ]
                })
                .collect(),
        ),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_sizes() {
        assert_eq!(parse_size("1000x50").unwrap(), (1000, 50));
        assert_eq!(parse_size(" 20X4").unwrap(), (20, 4));
        assert!(parse_size("1000").is_err());
        assert!(parse_size("ax4").is_err());
    }

    #[test]
    fn delimiters_must_be_ascii() {
        assert_eq!(delimiter_byte(';').unwrap(), b';');
        assert!(delimiter_byte('§').is_err());
    }

    #[test]
    fn sidecar_sits_next_to_the_matrix() {
        assert_eq!(meta_path(Path::new("out/sim.csv")), PathBuf::from("out/sim.meta.json"));
    }

    #[test]
    fn failures_map_to_exit_codes() {
        assert_eq!(Failure::from_lib("f", Error::SingularMatrix).exit_code(), 2);
        assert_eq!(Failure::from_lib("f", Error::Shape("x".into())).exit_code(), 1);
    }
}
