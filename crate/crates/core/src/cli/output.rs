//! CSV and JSON writers for run results, and the run manifest.

use std::collections::BTreeMap;
use std::fs::File;
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::metrics::{MetricReport, METRIC_COLUMNS};
use crate::runner::{EvalRow, RunRecord, TradeoffPoint};

/// Leading columns of the result and curve CSVs; the metric columns
/// (percentage points, `prule` on [0, 100]) and `flags` follow.
pub const RUN_COLUMNS: [&str; 9] = [
    "method",
    "lambda",
    "seed",
    "step",
    "lr",
    "loss_total",
    "loss_utility",
    "loss_fairness",
    "final",
];

/// Shortest representation that parses back to the same value.
pub fn num(v: f64) -> String {
    format!("{v}")
}

pub fn result_header() -> Vec<String> {
    RUN_COLUMNS
        .iter()
        .chain(METRIC_COLUMNS.iter())
        .chain(std::iter::once(&"flags"))
        .map(|s| s.to_string())
        .collect()
}

fn run_row(record: &RunRecord, row: &EvalRow) -> Vec<String> {
    let m = &record.config.method;
    let mut out = vec![
        m.kind.name().to_string(),
        num(m.lambda),
        record.config.seed.to_string(),
        row.step.to_string(),
        num(row.lr),
        num(row.loss_total),
        num(row.loss_utility),
        num(row.loss_fairness),
        u8::from(row.is_final).to_string(),
    ];
    out.extend(row.metrics.presented().iter().map(|&v| num(v)));
    out.push(row.metrics.flags.0.to_string());
    out
}

pub fn create_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

fn csv_writer(path: &Path) -> Result<csv::Writer<File>> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    Ok(csv::Writer::from_writer(file))
}

/// Appends every evaluation row of each run and flushes after each run.
pub struct ResultWriter {
    path: PathBuf,
    inner: csv::Writer<File>,
}

impl ResultWriter {
    pub fn create(path: &Path) -> Result<Self> {
        let mut inner = csv_writer(path)?;
        inner.write_record(result_header())?;
        inner.flush().map_err(|e| Error::io(path, e))?;
        Ok(Self {
            path: path.to_path_buf(),
            inner,
        })
    }

    pub fn write_run(&mut self, record: &RunRecord) -> Result<()> {
        for row in &record.rows {
            self.inner.write_record(run_row(record, row))?;
        }
        self.inner.flush().map_err(|e| Error::io(&self.path, e))
    }
}

pub fn write_runs(path: &Path, records: &[&RunRecord]) -> Result<()> {
    let mut w = ResultWriter::create(path)?;
    for r in records {
        w.write_run(r)?;
    }
    Ok(())
}

pub const CURVE_COLUMNS: [&str; 12] = [
    "method",
    "lambda",
    "seed",
    "step",
    "lr",
    "loss_total",
    "loss_utility",
    "loss_fairness",
    "acc",
    "auc",
    "dp",
    "abcc",
];

/// Training curves: losses and the plotted metrics per evaluation step.
pub fn write_curves(path: &Path, records: &[&RunRecord]) -> Result<()> {
    let mut w = csv_writer(path)?;
    w.write_record(CURVE_COLUMNS)?;
    for r in records {
        for row in &r.rows {
            let m = &row.metrics;
            w.write_record([
                r.config.method.kind.name().to_string(),
                num(r.config.method.lambda),
                r.config.seed.to_string(),
                row.step.to_string(),
                num(row.lr),
                num(row.loss_total),
                num(row.loss_utility),
                num(row.loss_fairness),
                num(m.acc * 100.0),
                num(m.auc * 100.0),
                num(m.dp * 100.0),
                num(m.abcc * 100.0),
            ])?;
        }
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub const TRADEOFF_COLUMNS: [&str; 8] = ["method", "lambda", "seed", "acc", "auc", "dp", "abcc", "normalized"];

pub fn write_tradeoff(path: &Path, points: &[TradeoffPoint]) -> Result<()> {
    let mut w = csv_writer(path)?;
    w.write_record(TRADEOFF_COLUMNS)?;
    for p in points {
        w.write_record([
            p.method.name().to_string(),
            num(p.lambda),
            p.seed.to_string(),
            num(p.acc),
            num(p.auc),
            num(p.dp),
            num(p.abcc),
            u8::from(p.normalized).to_string(),
        ])?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// `(metric, lambda, median, runs)` rows.
pub fn write_medians(path: &Path, rows: &[(&str, f64, f64, usize)]) -> Result<()> {
    let mut w = csv_writer(path)?;
    w.write_record(["metric", "lambda", "median", "runs"])?;
    for (metric, lambda, median, runs) in rows {
        w.write_record([metric.to_string(), num(*lambda), num(*median), runs.to_string()])?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Per-trial metrics of a bias examination.
pub fn write_trials(path: &Path, reports: &[MetricReport]) -> Result<()> {
    let mut w = csv_writer(path)?;
    let mut header = vec!["trial".to_string()];
    header.extend(METRIC_COLUMNS.iter().map(|s| s.to_string()));
    header.push("flags".into());
    w.write_record(&header)?;
    for (t, r) in reports.iter().enumerate() {
        let mut row = vec![t.to_string()];
        row.extend(r.presented().iter().map(|&v| num(v)));
        row.push(r.flags.0.to_string());
        w.write_record(&row)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Final-row values of a result CSV, one per run.
#[derive(Debug, Clone, PartialEq)]
pub struct FinalRow {
    pub method: String,
    pub lambda: f64,
    pub seed: u64,
    pub metrics: MetricReport,
}

/// Read the final rows of a CSV written by [`ResultWriter`].
pub fn read_final_rows(path: &Path) -> Result<Vec<FinalRow>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut rdr = csv::Reader::from_reader(file);
    let header: Vec<String> = rdr.headers()?.iter().map(str::to_owned).collect();
    if header != result_header() {
        return Err(Error::Schema(format!("{} is not a sweep result file", path.display())));
    }
    let col = |name: &str| header.iter().position(|h| h == name).expect("known column");
    let parse = |rec: &csv::StringRecord, name: &str| -> Result<f64> {
        let cell = &rec[col(name)];
        cell.parse()
            .map_err(|_| Error::Schema(format!("column `{name}`: `{cell}` is not a number")))
    };
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        if &rec[col("final")] != "1" {
            continue;
        }
        let mut values = [0.0; 14];
        for (k, name) in METRIC_COLUMNS.iter().enumerate() {
            values[k] = parse(&rec, name)?;
        }
        let flags = rec[col("flags")]
            .parse()
            .map_err(|_| Error::Schema(format!("bad flags `{}`", &rec[col("flags")])))?;
        let seed = rec[col("seed")]
            .parse()
            .map_err(|_| Error::Schema(format!("bad seed `{}`", &rec[col("seed")])))?;
        out.push(FinalRow {
            method: rec[col("method")].to_string(),
            lambda: parse(&rec, "lambda")?,
            seed,
            metrics: MetricReport::from_presented(values, crate::metrics::Flags(flags)),
        });
    }
    Ok(out)
}

pub fn sha256_file(path: &Path) -> Result<String> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

/// Replay record written next to every output set.
#[derive(Debug, Clone, Serialize)]
pub struct Manifest {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: String,
    /// Fully resolved options; usable as a `--config` file.
    pub config: serde_json::Map<String, serde_json::Value>,
    /// SHA-256 of each input file.
    pub inputs: BTreeMap<String, String>,
    /// SHA-256 of each output file, by file name.
    pub outputs: BTreeMap<String, String>,
}

impl Manifest {
    pub fn new(command: &str, config: serde_json::Map<String, serde_json::Value>) -> Self {
        Self {
            tool: env!("CARGO_PKG_NAME"),
            version: env!("CARGO_PKG_VERSION"),
            command: command.to_string(),
            config,
            inputs: BTreeMap::new(),
            outputs: BTreeMap::new(),
        }
    }

    pub fn add_input(&mut self, path: &Path) -> Result<()> {
        self.inputs.insert(path.display().to_string(), sha256_file(path)?);
        Ok(())
    }

    /// Hash the named files in `dir` and write `manifest.json` there.
    pub fn finish(mut self, dir: &Path, files: &[&str]) -> Result<()> {
        for f in files {
            self.outputs.insert(f.to_string(), sha256_file(&dir.join(f))?);
        }
        write_json(&dir.join("manifest.json"), &self)
    }
}
