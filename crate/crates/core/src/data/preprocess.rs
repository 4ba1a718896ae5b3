//! Standardization of numerical columns and one-hot encoding of
//! categorical ones, fitted on training rows only.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::dataset::Dataset;
use super::schema::ColumnKind;
use super::table::RawTable;
use crate::autodiff::Tensor;
use crate::error::{Error, Result};
use crate::rng::{SeededRng, Stream};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NumericStat {
    pub column: String,
    pub mean: f64,
    /// Population standard deviation, always > 0.
    pub std: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Vocabulary {
    pub column: String,
    /// Sorted distinct training values; position = one-hot slot.
    pub values: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Preprocessor {
    pub dataset_name: String,
    pub target: String,
    pub sensitive: String,
    pub numerical: Vec<NumericStat>,
    pub categorical: Vec<Vocabulary>,
    /// Numerical columns with zero training variance.
    pub dropped_columns: Vec<String>,
}

impl Preprocessor {
    pub fn dim(&self) -> usize {
        self.numerical.len() + self.categorical.iter().map(|v| v.values.len()).sum::<usize>()
    }

    pub fn feature_names(&self) -> Vec<String> {
        let mut names: Vec<String> = self.numerical.iter().map(|n| n.column.clone()).collect();
        for vocab in &self.categorical {
            names.extend(vocab.values.iter().map(|v| format!("{}={v}", vocab.column)));
        }
        names
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn write_json(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()?).map_err(|e| Error::io(path, e))
    }
}

fn column_index(raw: &RawTable, name: &str) -> usize {
    raw.schema.columns.iter().position(|c| c.name == name).expect("column from this schema")
}

/// Fit statistics on `train`. Only `train` is read.
pub fn fit_preprocess(train: &RawTable, sensitive: Option<&str>) -> Result<Preprocessor> {
    if train.len() < 2 {
        return Err(Error::Config(format!(
            "need at least 2 training rows to fit preprocessing, got {}",
            train.len()
        )));
    }
    let schema = &train.schema;
    let s_idx = schema.sensitive_index(sensitive)?;
    let mut numerical = Vec::new();
    let mut categorical = Vec::new();
    let mut dropped_columns = Vec::new();
    for (j, col) in schema.columns.iter().enumerate() {
        match col.kind {
            ColumnKind::Numerical => {
                let vals: Vec<f64> = train
                    .rows
                    .iter()
                    .map(|r| r[j].parse::<f64>().expect("validated at load"))
                    .collect();
                let n = vals.len() as f64;
                let mean = vals.iter().sum::<f64>() / n;
                let var = vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
                let std = var.sqrt();
                if std > 0.0 {
                    numerical.push(NumericStat {
                        column: col.name.clone(),
                        mean,
                        std,
                    });
                } else {
                    log::warn!("column `{}` is constant on the training split; dropped", col.name);
                    dropped_columns.push(col.name.clone());
                }
            }
            ColumnKind::Categorical => {
                let mut values: Vec<String> = train.rows.iter().map(|r| r[j].clone()).collect();
                values.sort();
                values.dedup();
                categorical.push(Vocabulary {
                    column: col.name.clone(),
                    values,
                });
            }
            ColumnKind::Target | ColumnKind::Sensitive => {}
        }
    }
    Ok(Preprocessor {
        dataset_name: schema.dataset_name.clone(),
        target: schema.columns[schema.target_index()].name.clone(),
        sensitive: schema.columns[s_idx].name.clone(),
        numerical,
        categorical,
        dropped_columns,
    })
}

/// Encode rows: standardized numericals in schema order, then one-hot
/// blocks in schema order. Unseen categories encode as all zeros.
pub fn transform(rows: &RawTable, pre: &Preprocessor) -> Result<Dataset> {
    let num_idx: Vec<usize> = pre.numerical.iter().map(|n| column_index(rows, &n.column)).collect();
    let cat_idx: Vec<usize> = pre.categorical.iter().map(|v| column_index(rows, &v.column)).collect();
    let t_idx = column_index(rows, &pre.target);
    let s_idx = column_index(rows, &pre.sensitive);
    let t_col = &rows.schema.columns[t_idx];
    let s_col = &rows.schema.columns[s_idx];

    let d = pre.dim();
    if d == 0 {
        return Err(Error::Config("no usable feature columns".into()));
    }
    let n = rows.len();
    if n == 0 {
        return Err(Error::Config("cannot transform an empty table".into()));
    }
    let mut x = Vec::with_capacity(n * d);
    let mut y = Vec::with_capacity(n);
    let mut s = Vec::with_capacity(n);
    for row in &rows.rows {
        for (stat, &j) in pre.numerical.iter().zip(&num_idx) {
            let v: f64 = row[j]
                .parse()
                .map_err(|_| Error::Schema(format!("column `{}`: `{}` is not a number", stat.column, row[j])))?;
            x.push((v - stat.mean) / stat.std);
        }
        for (vocab, &j) in pre.categorical.iter().zip(&cat_idx) {
            let hot = vocab.values.binary_search(&row[j]).ok();
            x.extend((0..vocab.values.len()).map(|k| if Some(k) == hot { 1.0 } else { 0.0 }));
        }
        y.push(t_col.code(&row[t_idx])?);
        s.push(s_col.code(&row[s_idx])?);
    }
    Dataset::new(Tensor::from_vec(n, d, x)?, y, s, pre.feature_names())
}

/// Seeded shuffle, then the first `round(n * ratio)` indices train.
pub fn split_indices(n: usize, ratio: f64, seed: u64) -> Result<(Vec<usize>, Vec<usize>)> {
    if !(ratio > 0.0 && ratio < 1.0) {
        return Err(Error::Config(format!("split ratio must be in (0, 1), got {ratio}")));
    }
    let n_train = (n as f64 * ratio).round() as usize;
    if n_train == 0 || n_train >= n {
        return Err(Error::Config(format!(
            "split ratio {ratio} on {n} rows leaves one side empty"
        )));
    }
    let mut rng = SeededRng::new(seed, Stream::Split);
    let perm = rng.permutation(n);
    let (train, test) = perm.split_at(n_train);
    Ok((train.to_vec(), test.to_vec()))
}

pub fn split(raw: &RawTable, ratio: f64, seed: u64) -> Result<(RawTable, RawTable)> {
    let (tr, te) = split_indices(raw.len(), ratio, seed)?;
    Ok((raw.subset(&tr), raw.subset(&te)))
}

/// Encoded train/test pair plus the statistics used to encode it.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub train: Dataset,
    pub test: Dataset,
    pub preprocessor: Preprocessor,
}

/// Split, fit on train, transform both sides.
pub fn prepare(raw: &RawTable, sensitive: Option<&str>, ratio: f64, seed: u64) -> Result<Prepared> {
    let (train_rows, test_rows) = split(raw, ratio, seed)?;
    let preprocessor = fit_preprocess(&train_rows, sensitive)?;
    Ok(Prepared {
        train: transform(&train_rows, &preprocessor)?,
        test: transform(&test_rows, &preprocessor)?,
        preprocessor,
    })
}
