use std::path::Path;

use crate::autodiff::Tensor;
use crate::error::{Error, Result};

/// Encoded design matrix with binary target and sensitive attribute.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub x: Tensor<f64>,
    pub y: Vec<u8>,
    pub s: Vec<u8>,
    pub feature_names: Vec<String>,
}

impl Dataset {
    pub fn new(x: Tensor<f64>, y: Vec<u8>, s: Vec<u8>, feature_names: Vec<String>) -> Result<Self> {
        let n = x.rows();
        if y.len() != n || s.len() != n || feature_names.len() != x.cols() {
            return Err(Error::Contract("dataset parts have inconsistent sizes".into()));
        }
        if y.iter().chain(&s).any(|&v| v > 1) {
            return Err(Error::Contract("labels and sensitive codes must be binary".into()));
        }
        if !x.all_finite() {
            return Err(Error::Contract("feature matrix contains non-finite values".into()));
        }
        Ok(Self { x, y, s, feature_names })
    }

    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.x.cols()
    }

    pub fn subset(&self, idx: &[usize]) -> Self {
        Self {
            x: self.x.select_rows(idx),
            y: idx.iter().map(|&i| self.y[i]).collect(),
            s: idx.iter().map(|&i| self.s[i]).collect(),
            feature_names: self.feature_names.clone(),
        }
    }

    /// Feature columns followed by `y` and `s`.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        let mut header: Vec<&str> = self.feature_names.iter().map(String::as_str).collect();
        header.extend(["y", "s"]);
        w.write_record(&header)?;
        for i in 0..self.len() {
            let mut rec: Vec<String> = self.x.row(i).iter().map(|v| v.to_string()).collect();
            rec.push(self.y[i].to_string());
            rec.push(self.s[i].to_string());
            w.write_record(&rec)?;
        }
        w.flush().map_err(|e| Error::io(path, e))?;
        Ok(())
    }
}
