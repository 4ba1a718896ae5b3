//! Reverse-mode differentiation, the MLP, Adam and the step-decay schedule.

pub mod nn;
pub mod optim;
pub mod tape;
pub mod tensor;

pub use nn::{init_mlp_params, Bound, Mlp, ModelParams, Param, ParamId, DEFAULT_HIDDEN};
pub use optim::{below_min_lr, scheduled_lr, Adam, LrSchedule, MIN_LR};
pub use tape::{Gradients, Tape, Var};
pub use tensor::Tensor;
