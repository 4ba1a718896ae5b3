use std::io::Read;
use std::path::Path;

use super::schema::{ColumnKind, TableSchema};
use crate::error::{Error, Result};

/// Rows restricted to the schema's columns, in schema order, as trimmed
/// strings. Rows with a missing cell have already been dropped.
#[derive(Debug, Clone, PartialEq)]
pub struct RawTable {
    pub schema: TableSchema,
    pub rows: Vec<Vec<String>>,
    /// Rows dropped because a schema column was empty or `?`.
    pub dropped: usize,
}

fn is_missing(cell: &str) -> bool {
    cell.is_empty() || cell == "?"
}

impl RawTable {
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// Same schema, rows picked by index.
    pub fn subset(&self, idx: &[usize]) -> Self {
        Self {
            schema: self.schema.clone(),
            rows: idx.iter().map(|&i| self.rows[i].clone()).collect(),
            dropped: 0,
        }
    }

    /// Parse CSV text. The first row is a header unless it names none of
    /// the schema columns and the schema lists `file_columns`, in which
    /// case every row is data. Lines starting with `|` are comments.
    pub fn from_reader<R: Read>(reader: R, schema: &TableSchema) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(false)
            .trim(csv::Trim::All)
            .flexible(false)
            .comment(Some(b'|'))
            .from_reader(reader);
        let mut records = rdr.records();
        let first = match records.next() {
            Some(r) => r?,
            None => return Err(Error::Schema("CSV input is empty".into())),
        };
        let first: Vec<String> = first.iter().map(str::to_owned).collect();
        let matches = |header: &[String], c: &super::schema::ColumnSpec| {
            header.iter().position(|h| h == &c.name || c.aliases.iter().any(|a| a == h))
        };
        let headerless = !schema.file_columns.is_empty()
            && first.len() == schema.file_columns.len()
            && schema.columns.iter().all(|c| matches(&first, c).is_none());
        let header = if headerless { schema.file_columns.clone() } else { first.clone() };
        let positions = schema
            .columns
            .iter()
            .map(|c| matches(&header, c).ok_or_else(|| Error::Schema(format!("header has no column `{}`", c.name))))
            .collect::<Result<Vec<_>>>()?;
        let leading = headerless.then(|| csv::StringRecord::from(first));

        let mut rows = Vec::new();
        let mut dropped = 0;
        for record in leading.into_iter().map(Ok).chain(records) {
            let record = record?;
            let row: Vec<String> = positions.iter().map(|&p| record[p].to_owned()).collect();
            if row.iter().any(|c| is_missing(c)) {
                dropped += 1;
                continue;
            }
            for (cell, col) in row.iter().zip(&schema.columns) {
                match col.kind {
                    ColumnKind::Target | ColumnKind::Sensitive => {
                        col.code(cell)?;
                    }
                    ColumnKind::Numerical => {
                        let v: f64 = cell.parse().map_err(|_| {
                            Error::Schema(format!("column `{}`: `{cell}` is not a number", col.name))
                        })?;
                        if !v.is_finite() {
                            return Err(Error::Schema(format!("column `{}`: non-finite value", col.name)));
                        }
                    }
                    ColumnKind::Categorical => {}
                }
            }
            rows.push(row);
        }
        if dropped > 0 {
            log::info!("{}: dropped {dropped} rows with missing values", schema.dataset_name);
        }
        Ok(Self {
            schema: schema.clone(),
            rows,
            dropped,
        })
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(self.schema.columns.iter().map(|c| c.name.as_str()))?;
        for row in &self.rows {
            w.write_record(row)?;
        }
        w.flush().map_err(|e| Error::io(path, e))?;
        Ok(())
    }
}

/// Read a CSV file against `schema`.
pub fn load_table(path: &Path, schema: &TableSchema) -> Result<RawTable> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    RawTable::from_reader(std::io::BufReader::new(file), schema)
}
