//! In-processing fairness objectives.

pub mod config;
pub mod losses;
pub mod model;

pub use config::{MethodConfig, MethodKind};
pub use losses::GapKind;
pub use model::{assemble_total, FairModel, LossOutput, LossParts};
