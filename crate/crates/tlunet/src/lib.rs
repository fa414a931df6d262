//! Filesystem, configuration and reporting layer for the `tlunet_core`
//! segmentation model: dataset loading, weight archives, experiment runs and
//! the artifacts they write.

pub mod archive;
pub mod config;
pub mod dataset;
pub mod error;
pub mod experiment;
pub mod kv;
pub mod overlay;
pub mod report;

pub use error::{Error, Result};
