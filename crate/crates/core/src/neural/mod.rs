//! Tensors, layers with analytic backward passes, Adam, and gradient checks.

mod activation;
mod adam;
mod batchnorm;
mod conv;
mod dense;
mod gradcheck;
mod layer;
mod tensor;

pub use activation::{Dropout, LeakyRelu};
pub use adam::{AdamConfig, LrSchedule, OptimizerState};
pub use batchnorm::{BatchNorm, BatchNormCache, DEFAULT_EPS as BATCHNORM_EPS, DEFAULT_MOMENTUM as BATCHNORM_MOMENTUM};
pub use conv::{Conv1d, Conv1dCache, ConvTranspose1d, ConvTranspose1dCache};
pub use dense::{Dense, DenseCache};
pub use gradcheck::{grad_check, grad_check_with_step, relative_error, BlockError, Differentiable, GradCheckReport, FD_STEP};
pub use layer::{Layer, LayerCache, Mode, Sequential};
pub use tensor::Tensor;
