use serde::{Deserialize, Serialize};

use crate::autodiff::{LrSchedule, DEFAULT_HIDDEN};
use crate::data::{prepare, Prepared, RawTable, SyntheticSpec};
use crate::data::synthetic_table;
use crate::error::{Error, Result};
use crate::methods::MethodConfig;

pub const DEFAULT_TOTAL_STEPS: usize = 150;
pub const DEFAULT_EVAL_EVERY: usize = 10;
pub const DEFAULT_SPLIT_RATIO: f64 = 0.8;
/// Batch size for datasets without a listed default.
pub const FALLBACK_BATCH_SIZE: usize = 256;

/// Per-dataset default batch size.
pub fn default_batch_size(dataset: &str) -> usize {
    match dataset.to_ascii_lowercase().as_str() {
        "adult" | "bank" => 1024,
        "german" | "compas" => 32,
        "kddcensus" | "acs" => 4096,
        _ => FALLBACK_BATCH_SIZE,
    }
}

/// Everything that determines one training run apart from the data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub dataset: String,
    pub sensitive_attr: Option<String>,
    pub method: MethodConfig,
    pub seed: u64,
    pub batch_size: usize,
    pub total_steps: usize,
    pub eval_every: usize,
    pub schedule: LrSchedule,
    pub split_ratio: f64,
    pub hidden: Vec<usize>,
}

impl ExperimentConfig {
    pub fn new(dataset: impl Into<String>, method: MethodConfig) -> Self {
        let dataset = dataset.into();
        Self {
            batch_size: default_batch_size(&dataset),
            dataset,
            sensitive_attr: None,
            method,
            seed: 0,
            total_steps: DEFAULT_TOTAL_STEPS,
            eval_every: DEFAULT_EVAL_EVERY,
            schedule: LrSchedule::default(),
            split_ratio: DEFAULT_SPLIT_RATIO,
            hidden: DEFAULT_HIDDEN.to_vec(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.method.validate()?;
        self.schedule.validate()?;
        if self.total_steps == 0 {
            return Err(Error::Config("total_steps must be at least 1".into()));
        }
        if self.eval_every == 0 {
            return Err(Error::Config("eval_every must be at least 1".into()));
        }
        if self.batch_size == 0 {
            return Err(Error::Config("batch_size must be at least 1".into()));
        }
        if !(self.split_ratio > 0.0 && self.split_ratio < 1.0) {
            return Err(Error::Config(format!("split ratio must lie in (0, 1), got {}", self.split_ratio)));
        }
        if self.hidden.contains(&0) {
            return Err(Error::Config("hidden widths must be positive".into()));
        }
        Ok(())
    }
}

/// Where training data comes from. Synthetic data is materialized as a raw
/// table so it goes through the same split and preprocessing as CSV data.
#[derive(Debug, Clone)]
pub struct DataSource {
    pub raw: RawTable,
    pub sensitive: Option<String>,
}

impl DataSource {
    pub fn table(raw: RawTable, sensitive: Option<String>) -> Self {
        Self { raw, sensitive }
    }

    pub fn synthetic(spec: &SyntheticSpec) -> Result<Self> {
        Ok(Self {
            raw: synthetic_table(spec)?,
            sensitive: None,
        })
    }

    pub fn name(&self) -> &str {
        &self.raw.schema.dataset_name
    }

    /// Split with `seed` and fit preprocessing on the training part.
    pub fn materialize(&self, ratio: f64, seed: u64) -> Result<Prepared> {
        prepare(&self.raw, self.sensitive.as_deref(), ratio, seed)
    }
}
