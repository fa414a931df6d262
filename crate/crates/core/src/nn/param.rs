use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ParamKind {
    /// Updated by the optimizer, has a gradient.
    Trainable,
    /// State that is persisted but never trained (batch-norm running statistics).
    Buffer,
}

/// A named tensor of model state together with its gradient accumulator.
#[derive(Debug, Clone, PartialEq)]
pub struct Param<T> {
    pub value: Vec<T>,
    pub grad: Vec<T>,
    shape: Vec<usize>,
    kind: ParamKind,
}

impl<T: Scalar> Param<T> {
    pub fn trainable(shape: &[usize], value: Vec<T>) -> Self {
        debug_assert_eq!(value.len(), shape.iter().product::<usize>());
        let grad = vec![T::zero(); value.len()];
        Self { value, grad, shape: shape.to_vec(), kind: ParamKind::Trainable }
    }

    pub fn buffer(shape: &[usize], value: Vec<T>) -> Self {
        debug_assert_eq!(value.len(), shape.iter().product::<usize>());
        Self { value, grad: Vec::new(), shape: shape.to_vec(), kind: ParamKind::Buffer }
    }

    pub fn filled(shape: &[usize], v: T, kind: ParamKind) -> Self {
        let value = vec![v; shape.iter().product()];
        match kind {
            ParamKind::Trainable => Self::trainable(shape, value),
            ParamKind::Buffer => Self::buffer(shape, value),
        }
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }
    pub fn kind(&self) -> ParamKind {
        self.kind
    }
    pub fn numel(&self) -> usize {
        self.value.len()
    }
    pub fn zero_grad(&mut self) {
        self.grad.iter_mut().for_each(|g| *g = T::zero());
    }
}

/// Hierarchical traversal of named state, using torch-style dotted names.
pub trait Module<T: Scalar> {
    fn visit(&self, prefix: &str, f: &mut dyn FnMut(&str, &Param<T>));
    fn visit_mut(&mut self, prefix: &str, f: &mut dyn FnMut(&str, &mut Param<T>));
}

pub fn join(prefix: &str, name: &str) -> String {
    if prefix.is_empty() {
        String::from(name)
    } else {
        format!("{prefix}.{name}")
    }
}

/// Number of trainable scalars reachable from `module`.
pub fn count_params<T: Scalar, M: Module<T> + ?Sized>(module: &M) -> usize {
    let mut total = 0;
    module.visit("", &mut |_, p| {
        if p.kind() == ParamKind::Trainable {
            total += p.numel();
        }
    });
    total
}

pub fn zero_grads<T: Scalar, M: Module<T> + ?Sized>(module: &mut M) {
    module.visit_mut("", &mut |_, p| p.zero_grad());
}
