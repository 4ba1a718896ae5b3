//! Tabular ingestion, preprocessing, splitting and synthetic data.

pub mod dataset;
pub mod preprocess;
pub mod schema;
pub mod synthetic;
pub mod table;

pub use dataset::Dataset;
pub use preprocess::{
    fit_preprocess, prepare, split, split_indices, transform, NumericStat, Prepared, Preprocessor, Vocabulary,
};
pub use schema::{ColumnKind, ColumnSpec, TableSchema};
pub use synthetic::{generate_synthetic, synthetic_table, SyntheticSpec};
pub use table::{load_table, RawTable};
