//! Layers with explicit forward/backward passes.
//!
//! Every layer follows the same protocol: `forward(x, train)` caches what the
//! backward pass needs when `train` is set, `infer(x)` is the cache-free
//! evaluation path usable through a shared reference, and `backward(grad)`
//! accumulates parameter gradients and returns the gradient w.r.t. the input
//! of the most recent training forward.

mod conv;
mod linear;
mod norm;
mod ops;
mod param;
mod pool;

pub use conv::Conv2d;
pub use linear::Linear;
pub use norm::BatchNorm2d;
pub use ops::{global_avg_pool, global_avg_pool_backward, sigmoid, upsample_nearest2x, upsample_nearest2x_backward, Relu};
pub use param::{count_params, join, zero_grads, Module, Param, ParamKind};
pub use pool::{AvgPool2x2, MaxPool3x3s2};
