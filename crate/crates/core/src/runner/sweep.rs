use std::collections::BTreeMap;

use serde::Serialize;

use super::config::{DataSource, ExperimentConfig};
use super::train::{train_one, RunRecord};
use crate::data::Prepared;
use crate::error::{Error, Result};
use crate::methods::{MethodConfig, MethodKind};

/// Why a sweep cell produced no record.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunFailure {
    /// The loss or parameters became non-finite.
    pub numerical: bool,
    pub message: String,
}

impl From<Error> for RunFailure {
    fn from(e: Error) -> Self {
        Self {
            numerical: matches!(e, Error::Numerical { .. }),
            message: e.to_string(),
        }
    }
}

/// Result of one `(lambda, seed)` cell of a sweep.
#[derive(Debug, Clone)]
pub struct SweepEntry {
    pub method: MethodConfig,
    pub seed: u64,
    pub outcome: std::result::Result<RunRecord, RunFailure>,
}

/// Configurations of a sweep in output order: lambda-major, then seed.
pub fn sweep_configs(base: &ExperimentConfig, grid: &[f64], seeds: &[u64]) -> Result<Vec<ExperimentConfig>> {
    if grid.is_empty() {
        return Err(Error::Config("lambda grid is empty".into()));
    }
    if seeds.is_empty() {
        return Err(Error::Config("seed list is empty".into()));
    }
    let mut out = Vec::with_capacity(grid.len() * seeds.len());
    for &lambda in grid {
        let mut method = base.method;
        method.lambda = if method.kind == MethodKind::Erm { 0.0 } else { lambda };
        for &seed in seeds {
            let mut cfg = base.clone();
            cfg.method = method;
            cfg.seed = seed;
            cfg.validate()?;
            out.push(cfg);
        }
    }
    Ok(out)
}

/// Train every configuration, `jobs` at a time, handing each finished entry
/// to `sink` in input order. Failed runs are reported, not fatal; an error
/// returned by `sink` stops the sweep.
pub fn run_configs(
    configs: &[ExperimentConfig],
    source: &DataSource,
    jobs: usize,
    mut sink: impl FnMut(&SweepEntry) -> Result<()>,
) -> Result<Vec<SweepEntry>> {
    let jobs = jobs.max(1);
    // One split per distinct (seed, ratio); shared across lambdas.
    let mut splits: BTreeMap<(u64, u64), Prepared> = BTreeMap::new();
    for cfg in configs {
        let key = (cfg.seed, cfg.split_ratio.to_bits());
        if let std::collections::btree_map::Entry::Vacant(e) = splits.entry(key) {
            e.insert(source.materialize(cfg.split_ratio, cfg.seed)?);
        }
    }
    let run = |cfg: &ExperimentConfig| {
        let data = &splits[&(cfg.seed, cfg.split_ratio.to_bits())];
        SweepEntry {
            method: cfg.method,
            seed: cfg.seed,
            outcome: train_one(cfg, data).map(|o| o.record).map_err(RunFailure::from),
        }
    };
    let mut entries = Vec::with_capacity(configs.len());
    for chunk in configs.chunks(jobs) {
        let done: Vec<SweepEntry> = if jobs == 1 {
            chunk.iter().map(run).collect()
        } else {
            std::thread::scope(|scope| {
                let handles: Vec<_> = chunk.iter().map(|cfg| scope.spawn(|| run(cfg))).collect();
                handles.into_iter().map(|h| h.join().expect("training thread panicked")).collect()
            })
        };
        for entry in done {
            if let Err(f) = &entry.outcome {
                log::warn!(
                    "{} lambda={} seed={} failed: {}",
                    entry.method.kind,
                    entry.method.lambda,
                    entry.seed,
                    f.message
                );
            }
            sink(&entry)?;
            entries.push(entry);
        }
    }
    Ok(entries)
}

/// Cartesian sweep of `grid x seeds` around `base`.
pub fn run_sweep(
    base: &ExperimentConfig,
    source: &DataSource,
    grid: &[f64],
    seeds: &[u64],
    jobs: usize,
    sink: impl FnMut(&SweepEntry) -> Result<()>,
) -> Result<Vec<SweepEntry>> {
    let configs = sweep_configs(base, grid, seeds)?;
    run_configs(&configs, source, jobs, sink)
}
