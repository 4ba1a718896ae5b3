//! Group-fairness benchmarking for tabular classifiers.
//!
//! The numeric core ([`autodiff`], [`metrics`], [`methods`]) is generic
//! over [`Scalar`] (`f32` or `f64`). Data loading and the experiment
//! runner work in `f64`; the aliases below name the `f64` instantiations.

pub mod autodiff;
pub mod cli;
pub mod data;
pub mod error;
pub mod methods;
pub mod metrics;
pub mod rng;
pub mod runner;
pub mod scalar;

pub use error::{Error, Result};
pub use scalar::Scalar;

pub type Tensor64 = autodiff::Tensor<f64>;
pub type Tape64 = autodiff::Tape<f64>;
pub type ModelParams64 = autodiff::ModelParams<f64>;
pub type EvalBatch64 = metrics::EvalBatch<f64>;
pub type FairModel64 = methods::FairModel<f64>;
