use std::fmt;

use serde::{Deserialize, Serialize};

use super::config::{DataSource, ExperimentConfig};
use super::train::train_one;
use crate::error::{Error, Result};
use crate::methods::{MethodConfig, MethodKind};
use crate::metrics::{Flags, MetricReport, METRIC_COLUMNS};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Verdict {
    Biased,
    Unstable,
    NotBiased,
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Verdict::Biased => "BIASED",
            Verdict::Unstable => "UNSTABLE",
            Verdict::NotBiased => "NOT_BIASED",
        })
    }
}

/// Thresholds on the internal `[0, 1]` scale.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VerdictRule {
    /// Both mean dp and mean abcc below this: not biased.
    pub floor: f64,
    /// Mean above `sigmas * std` for dp or abcc: biased.
    pub sigmas: f64,
}

impl Default for VerdictRule {
    fn default() -> Self {
        Self { floor: 0.03, sigmas: 3.0 }
    }
}

impl VerdictRule {
    pub fn apply(&self, mean: &MetricReport, std: &MetricReport) -> Verdict {
        if mean.dp < self.floor && mean.abcc < self.floor {
            Verdict::NotBiased
        } else if mean.dp > self.sigmas * std.dp || mean.abcc > self.sigmas * std.abcc {
            Verdict::Biased
        } else {
            Verdict::Unstable
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BiasExamReport {
    pub dataset: String,
    pub sensitive_attr: String,
    pub trials: usize,
    pub mean: MetricReport,
    /// Sample standard deviation over trials.
    pub std: MetricReport,
    pub verdict: Verdict,
    pub rule: VerdictRule,
}

fn sorted_sum(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    v.into_iter().sum()
}

/// Mean and sample standard deviation of each metric. Values are sorted
/// before summation so the result does not depend on trial order.
pub fn mean_std(reports: &[MetricReport]) -> Result<(MetricReport, MetricReport)> {
    if reports.len() < 2 {
        return Err(Error::Config(format!("need at least 2 trials, got {}", reports.len())));
    }
    let n = reports.len() as f64;
    let mut mean = [0.0; 14];
    let mut std = [0.0; 14];
    let mut flags = 0;
    for r in reports {
        flags |= r.flags.0;
    }
    for k in 0..METRIC_COLUMNS.len() {
        let col: Vec<f64> = reports.iter().map(|r| r.values()[k]).collect();
        let m = sorted_sum(col.clone()) / n;
        let ss = sorted_sum(col.iter().map(|v| (v - m) * (v - m)).collect());
        mean[k] = m;
        std[k] = (ss / (n - 1.0)).sqrt();
    }
    Ok((MetricReport::from_values(mean, Flags(flags)), MetricReport::from_values(std, Flags(flags))))
}

pub fn summarize_bias(
    dataset: &str,
    sensitive_attr: &str,
    reports: &[MetricReport],
    rule: VerdictRule,
) -> Result<BiasExamReport> {
    let (mean, std) = mean_std(reports)?;
    Ok(BiasExamReport {
        dataset: dataset.to_string(),
        sensitive_attr: sensitive_attr.to_string(),
        trials: reports.len(),
        verdict: rule.apply(&mean, &std),
        mean,
        std,
        rule,
    })
}

/// Train ERM `trials` times; trial `t` uses seed `t` for its split,
/// initialization and batches. Only the final step is evaluated.
pub fn bias_examination(
    base: &ExperimentConfig,
    source: &DataSource,
    trials: usize,
    rule: VerdictRule,
) -> Result<(BiasExamReport, Vec<MetricReport>)> {
    if trials < 2 {
        return Err(Error::Config(format!("bias examination needs at least 2 trials, got {trials}")));
    }
    let mut reports = Vec::with_capacity(trials);
    let mut sensitive = String::new();
    for t in 0..trials {
        let mut cfg = base.clone();
        cfg.method = MethodConfig::erm();
        cfg.seed = t as u64;
        cfg.eval_every = cfg.total_steps;
        let data = source.materialize(cfg.split_ratio, cfg.seed)?;
        sensitive = data.preprocessor.sensitive.clone();
        let out = train_one(&cfg, &data)?;
        reports.push(out.record.final_row().metrics);
    }
    Ok((summarize_bias(source.name(), &sensitive, &reports, rule)?, reports))
}

/// Final metrics of one run, the input to trade-off normalization.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub method: MethodKind,
    pub lambda: f64,
    pub seed: u64,
    pub metrics: MetricReport,
}

/// Utility (`acc`, `auc`) and fairness (`dp`, `abcc`) of a run divided by
/// the ERM values, or raw values when `normalized` is false.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TradeoffPoint {
    pub method: MethodKind,
    pub lambda: f64,
    pub seed: u64,
    pub acc: f64,
    pub auc: f64,
    pub dp: f64,
    pub abcc: f64,
    pub normalized: bool,
}

fn axes(m: &MetricReport) -> [(&'static str, f64); 4] {
    [("acc", m.acc), ("auc", m.auc), ("dp", m.dp), ("abcc", m.abcc)]
}

pub fn normalize_tradeoff(runs: &[RunSummary], baseline: &MetricReport) -> Result<Vec<TradeoffPoint>> {
    for (name, v) in axes(baseline) {
        if !(v > 0.0 && v.is_finite()) {
            return Err(Error::Normalization(format!("ERM {name} is {v}; cannot normalize by it")));
        }
    }
    Ok(runs
        .iter()
        .map(|r| TradeoffPoint {
            method: r.method,
            lambda: r.lambda,
            seed: r.seed,
            acc: r.metrics.acc / baseline.acc,
            auc: r.metrics.auc / baseline.auc,
            dp: r.metrics.dp / baseline.dp,
            abcc: r.metrics.abcc / baseline.abcc,
            normalized: true,
        })
        .collect())
}

pub fn raw_tradeoff(runs: &[RunSummary]) -> Vec<TradeoffPoint> {
    runs.iter()
        .map(|r| TradeoffPoint {
            method: r.method,
            lambda: r.lambda,
            seed: r.seed,
            acc: r.metrics.acc,
            auc: r.metrics.auc,
            dp: r.metrics.dp,
            abcc: r.metrics.abcc,
            normalized: false,
        })
        .collect()
}

/// Normalize every run by the ERM run of the same seed. Seeds without a
/// usable ERM baseline keep raw values, flagged.
pub fn normalize_against_erm(runs: &[RunSummary]) -> Vec<TradeoffPoint> {
    runs.iter()
        .map(|r| {
            let baseline = runs.iter().find(|b| b.method == MethodKind::Erm && b.seed == r.seed);
            let normalized = baseline.and_then(|b| normalize_tradeoff(std::slice::from_ref(r), &b.metrics).ok());
            match normalized {
                Some(p) => p[0],
                None => raw_tradeoff(std::slice::from_ref(r))[0],
            }
        })
        .collect()
}

/// Ranks starting at 1, ties sharing the mean of their positions.
pub fn midranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        let r = (i + j) as f64 / 2.0 + 1.0;
        for &k in &order[i..=j] {
            ranks[k] = r;
        }
        i = j + 1;
    }
    ranks
}

/// Pearson correlation of midranks; `None` if either side is constant.
pub fn spearman(a: &[f64], b: &[f64]) -> Option<f64> {
    assert_eq!(a.len(), b.len(), "spearman inputs differ in length");
    let (ra, rb) = (midranks(a), midranks(b));
    let n = a.len() as f64;
    let (ma, mb) = (ra.iter().sum::<f64>() / n, rb.iter().sum::<f64>() / n);
    let mut sab = 0.0;
    let mut saa = 0.0;
    let mut sbb = 0.0;
    for (x, y) in ra.iter().zip(&rb) {
        sab += (x - ma) * (y - mb);
        saa += (x - ma) * (x - ma);
        sbb += (y - mb) * (y - mb);
    }
    (saa > 0.0 && sbb > 0.0).then(|| sab / (saa * sbb).sqrt())
}

pub fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let m = v.len();
    if m % 2 == 1 {
        v[m / 2]
    } else {
        (v[m / 2 - 1] + v[m / 2]) / 2.0
    }
}

/// `(lambda, median value, count)` per distinct lambda, ascending.
pub fn per_lambda_medians(points: &[(f64, f64)]) -> Vec<(f64, f64, usize)> {
    let mut lambdas: Vec<f64> = points.iter().map(|p| p.0).collect();
    lambdas.sort_by(f64::total_cmp);
    lambdas.dedup();
    lambdas
        .into_iter()
        .map(|l| {
            let vals: Vec<f64> = points.iter().filter(|p| p.0 == l).map(|p| p.1).collect();
            (l, median(&vals), vals.len())
        })
        .collect()
}

/// Spearman correlation between lambda and the per-lambda median of a
/// final fairness metric. Needs 5 lambdas with 3 values each. Constant
/// medians give 0.
pub fn controllability_stat(points: &[(f64, f64)]) -> Result<f64> {
    let med = per_lambda_medians(points);
    if med.len() < 5 {
        return Err(Error::Config(format!("controllability needs at least 5 lambda values, got {}", med.len())));
    }
    if let Some(&(l, _, c)) = med.iter().find(|m| m.2 < 3) {
        return Err(Error::Config(format!("lambda {l} has {c} runs; at least 3 seeds are needed")));
    }
    let xs: Vec<f64> = med.iter().map(|m| m.0).collect();
    let ys: Vec<f64> = med.iter().map(|m| m.1).collect();
    Ok(spearman(&xs, &ys).unwrap_or(0.0))
}
