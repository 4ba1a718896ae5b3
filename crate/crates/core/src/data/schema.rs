use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ColumnKind {
    Numerical,
    Categorical,
    Target,
    Sensitive,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColumnSpec {
    pub name: String,
    pub kind: ColumnKind,
    /// Raw value to binary code, for target and sensitive columns.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub map: Option<BTreeMap<String, u8>>,
    /// Code for raw values absent from `map`; without it they are an error.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub default: Option<u8>,
    /// Other accepted header names; for sensitive columns also accepted
    /// when selecting the active attribute.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub aliases: Vec<String>,
}

impl ColumnSpec {
    pub fn new(name: impl Into<String>, kind: ColumnKind) -> Self {
        Self {
            name: name.into(),
            kind,
            map: None,
            default: None,
            aliases: Vec::new(),
        }
    }

    pub fn with_map(mut self, pairs: &[(&str, u8)]) -> Self {
        self.map = Some(pairs.iter().map(|(k, v)| (k.to_string(), *v)).collect());
        self
    }

    /// Binary code of a raw target/sensitive value.
    pub fn code(&self, raw: &str) -> Result<u8> {
        let mapped = self.map.as_ref().and_then(|m| m.get(raw)).copied();
        mapped.or(self.default).ok_or_else(|| {
            Error::Schema(format!("column `{}`: unmapped value `{raw}`", self.name))
        })
    }
}

/// Column inventory of one table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableSchema {
    pub dataset_name: String,
    pub columns: Vec<ColumnSpec>,
    /// Column names, in file order, for files without a header row.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub file_columns: Vec<String>,
}

impl TableSchema {
    pub fn from_json_str(text: &str) -> Result<Self> {
        let schema: Self = serde_json::from_str(text)?;
        schema.validate()?;
        Ok(schema)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json_str(&text)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn validate(&self) -> Result<()> {
        let targets = self.columns.iter().filter(|c| c.kind == ColumnKind::Target).count();
        if targets != 1 {
            return Err(Error::Schema(format!("expected exactly one target column, found {targets}")));
        }
        if !self.columns.iter().any(|c| c.kind == ColumnKind::Sensitive) {
            return Err(Error::Schema("no sensitive column declared".into()));
        }
        for (i, c) in self.columns.iter().enumerate() {
            if self.columns[..i].iter().any(|o| o.name == c.name) {
                return Err(Error::Schema(format!("duplicate column `{}`", c.name)));
            }
            let binary = matches!(c.kind, ColumnKind::Target | ColumnKind::Sensitive);
            if binary && c.map.is_none() && c.default.is_none() {
                return Err(Error::Schema(format!("column `{}` needs a value map", c.name)));
            }
            let codes = c.map.iter().flat_map(|m| m.values()).chain(c.default.iter());
            if codes.into_iter().any(|&v| v > 1) {
                return Err(Error::Schema(format!("column `{}` maps to a non-binary code", c.name)));
            }
            if !self.file_columns.is_empty() && !self.file_columns.contains(&c.name) {
                return Err(Error::Schema(format!("file_columns does not list `{}`", c.name)));
            }
        }
        Ok(())
    }

    pub fn target_index(&self) -> usize {
        self.columns
            .iter()
            .position(|c| c.kind == ColumnKind::Target)
            .expect("validated schema has a target")
    }

    /// Index of the named sensitive column; `None` picks the first one.
    pub fn sensitive_index(&self, name: Option<&str>) -> Result<usize> {
        let found = self.columns.iter().position(|c| {
            c.kind == ColumnKind::Sensitive && name.is_none_or(|n| c.name == n || c.aliases.iter().any(|a| a == n))
        });
        found.ok_or_else(|| match name {
            Some(n) => Error::Schema(format!("`{n}` is not a sensitive column of `{}`", self.dataset_name)),
            None => Error::Schema("no sensitive column declared".into()),
        })
    }

    pub fn sensitive_names(&self) -> Vec<&str> {
        self.columns
            .iter()
            .filter(|c| c.kind == ColumnKind::Sensitive)
            .map(|c| c.name.as_str())
            .collect()
    }
}
