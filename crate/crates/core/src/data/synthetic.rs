//! Seeded generator for data with a controllable label bias.
//!
//! Per row, in draw order: `s ~ Bernoulli(0.5)`, then each feature
//! `x_j ~ Normal(group_shift * s, 1)`, then the bias coin. The base label is
//! `1[w . (x - group_shift / 2) > 0]` for a rule vector `w ~ Normal(0, I)`
//! drawn once from a separate stream; with probability `label_bias` the
//! label is replaced by `s`.

use serde::{Deserialize, Serialize};

use super::dataset::Dataset;
use super::schema::{ColumnKind, ColumnSpec, TableSchema};
use super::table::RawTable;
use crate::autodiff::Tensor;
use crate::error::{Error, Result};
use crate::rng::{SeededRng, Stream};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub n: usize,
    pub d_num: usize,
    pub group_shift: f64,
    pub label_bias: f64,
    pub seed: u64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        Self {
            n: 4000,
            d_num: 8,
            group_shift: 1.0,
            label_bias: 0.4,
            seed: 0,
        }
    }
}

impl SyntheticSpec {
    pub fn validate(&self) -> Result<()> {
        if self.n < 10 {
            return Err(Error::Config(format!("synthetic n must be >= 10, got {}", self.n)));
        }
        if self.d_num == 0 {
            return Err(Error::Config("synthetic data needs at least one feature".into()));
        }
        if !(0.0..=0.5).contains(&self.label_bias) {
            return Err(Error::Config(format!(
                "label bias must be in [0, 0.5], got {}",
                self.label_bias
            )));
        }
        if !self.group_shift.is_finite() {
            return Err(Error::Config("group shift must be finite".into()));
        }
        Ok(())
    }

    pub fn schema(&self) -> TableSchema {
        let bin = [("0", 0u8), ("1", 1u8)];
        let mut columns: Vec<ColumnSpec> = (1..=self.d_num)
            .map(|j| ColumnSpec::new(format!("x{j}"), ColumnKind::Numerical))
            .collect();
        columns.push(ColumnSpec::new("y", ColumnKind::Target).with_map(&bin));
        columns.push(ColumnSpec::new("s", ColumnKind::Sensitive).with_map(&bin));
        TableSchema {
            dataset_name: "synthetic".into(),
            file_columns: Vec::new(),
            columns,
        }
    }
}

pub fn generate_synthetic(spec: &SyntheticSpec) -> Result<Dataset> {
    spec.validate()?;
    let d = spec.d_num;
    let mut rule_rng = SeededRng::new(spec.seed, Stream::SyntheticRule);
    let w: Vec<f64> = (0..d).map(|_| rule_rng.normal()).collect();

    let mut rng = SeededRng::new(spec.seed, Stream::Synthetic);
    let mut x = Vec::with_capacity(spec.n * d);
    let mut y = Vec::with_capacity(spec.n);
    let mut s = Vec::with_capacity(spec.n);
    let center = spec.group_shift / 2.0;
    for _ in 0..spec.n {
        let si = u8::from(rng.bernoulli(0.5));
        let offset = spec.group_shift * si as f64;
        let mut score = 0.0;
        for wj in &w {
            let v = offset + rng.normal();
            score += wj * (v - center);
            x.push(v);
        }
        let base = u8::from(score > 0.0);
        let yi = if rng.bernoulli(spec.label_bias) { si } else { base };
        s.push(si);
        y.push(yi);
    }
    let names = (1..=d).map(|j| format!("x{j}")).collect();
    Dataset::new(Tensor::from_vec(spec.n, d, x)?, y, s, names)
}

/// The generated data as a raw table under [`SyntheticSpec::schema`].
/// Numbers are written in shortest round-trip form, so re-parsing is exact.
pub fn synthetic_table(spec: &SyntheticSpec) -> Result<RawTable> {
    let ds = generate_synthetic(spec)?;
    let rows = (0..ds.len())
        .map(|i| {
            let mut row: Vec<String> = ds.x.row(i).iter().map(|v| v.to_string()).collect();
            row.push(ds.y[i].to_string());
            row.push(ds.s[i].to_string());
            row
        })
        .collect();
    Ok(RawTable {
        schema: spec.schema(),
        rows,
        dropped: 0,
    })
}
