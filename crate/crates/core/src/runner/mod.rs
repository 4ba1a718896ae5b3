//! Training loop, sweeps and benchmarking protocols.

pub mod config;
pub mod protocols;
pub mod sweep;
pub mod train;

pub use config::{default_batch_size, DataSource, ExperimentConfig};
pub use protocols::{
    bias_examination, controllability_stat, mean_std, normalize_against_erm, normalize_tradeoff, per_lambda_medians,
    raw_tradeoff, spearman, summarize_bias, BiasExamReport, RunSummary, TradeoffPoint, Verdict, VerdictRule,
};
pub use sweep::{run_configs, run_sweep, sweep_configs, RunFailure, SweepEntry};
pub use train::{evaluate_model, load_params, save_params, train_one, BatchSampler, EvalRow, RunRecord, TrainOutcome};
