//! U-Net with swappable ResNet/DenseNet encoders, a pooled-bottleneck
//! multi-label classification head, joint BCE training and evaluation.
//!
//! `no_std` with `alloc`. File formats, the CLI and the experiment harness
//! live in the `tlunet` crate.

#![no_std]
extern crate alloc;
#[cfg(test)]
extern crate std;

mod error;
mod scalar;
mod tensor;

pub mod compare;
pub mod data;
pub mod metrics;
pub mod model;
pub mod nn;
pub mod objective;
pub mod train;

pub use error::{Error, Result};
pub use scalar::Scalar;
pub use tensor::Tensor;
