use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use super::unet::UNet;
use crate::error::{bail, Result};
use crate::nn::{Module, Param};
use crate::scalar::Scalar;

/// A named tensor as stored in weight archives and checkpoints.
#[derive(Debug, Clone, PartialEq)]
pub struct NamedTensor<T> {
    pub name: String,
    pub shape: Vec<usize>,
    pub values: Vec<T>,
}

impl<T: Scalar> NamedTensor<T> {
    fn of(name: &str, p: &Param<T>) -> Self {
        Self { name: name.to_string(), shape: p.shape().to_vec(), values: p.value.clone() }
    }
}

/// Outcome of an encoder weight transfer.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct LoadReport {
    /// Encoder tensors overwritten from the archive.
    pub loaded: Vec<String>,
    /// Archive tensors with no counterpart in the encoder (e.g. a classifier).
    pub skipped: Vec<String>,
}

impl<T: Scalar> UNet<T> {
    /// All state (parameters and batch-norm statistics) under full model names.
    pub fn state(&self) -> Vec<NamedTensor<T>> {
        let mut out = Vec::new();
        self.visit("", &mut |name, p| out.push(NamedTensor::of(name, p)));
        out
    }

    /// Encoder state under archive names (without the `encoder.` prefix).
    pub fn encoder_state(&self) -> Vec<NamedTensor<T>> {
        let mut out = Vec::new();
        self.encoder.visit("", &mut |name, p| out.push(NamedTensor::of(name, p)));
        out
    }

    /// Restores full model state; every model tensor must be present with the
    /// same shape.
    pub fn load_state(&mut self, tensors: &[NamedTensor<T>]) -> Result<()> {
        assign(self, "", tensors).map(|_| ())
    }
}

/// Replaces every encoder tensor with the archived tensor of the same name.
/// Decoder and heads are left untouched. Nothing is modified on error.
pub fn load_pretrained<T: Scalar>(model: &mut UNet<T>, archive: &[NamedTensor<T>]) -> Result<LoadReport> {
    assign(&mut model.encoder, "", archive)
}

/// Validates every name and shape before touching any value.
fn assign<T: Scalar, M: Module<T> + ?Sized>(module: &mut M, prefix: &str, tensors: &[NamedTensor<T>]) -> Result<LoadReport> {
    let by_name: BTreeMap<&str, &NamedTensor<T>> = tensors.iter().map(|t| (t.name.as_str(), t)).collect();
    let mut missing = Vec::new();
    let mut mismatched = Vec::new();
    module.visit(prefix, &mut |name, p| match by_name.get(name) {
        None => missing.push(name.to_string()),
        Some(t) if t.shape != p.shape() || t.values.len() != p.numel() => {
            mismatched.push(alloc::format!("{name}: expected {:?}, archive has {:?}", p.shape(), t.shape))
        }
        Some(_) => {}
    });
    if !missing.is_empty() {
        let shown: Vec<&str> = missing.iter().take(8).map(String::as_str).collect();
        bail!(Load, "{} tensor(s) missing from archive: {}{}", missing.len(), shown.join(", "), if missing.len() > 8 { ", ..." } else { "" });
    }
    if !mismatched.is_empty() {
        bail!(Load, "shape mismatch: {}", mismatched.join("; "));
    }
    let mut loaded = Vec::new();
    module.visit_mut(prefix, &mut |name, p| {
        let t = by_name[name];
        p.value.copy_from_slice(&t.values);
        loaded.push(name.to_string());
    });
    let used: alloc::collections::BTreeSet<&str> = loaded.iter().map(String::as_str).collect();
    let skipped = tensors.iter().filter(|t| !used.contains(t.name.as_str())).map(|t| t.name.clone()).collect();
    Ok(LoadReport { loaded, skipped })
}

