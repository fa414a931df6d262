use alloc::vec;
use alloc::vec::Vec;

use num_traits::Float;
use rand::Rng;

use super::param::{join, Module, Param};
use crate::scalar::Scalar;
use crate::tensor::gemm;

/// Affine map `y = W x + b` over row-major `[batch, in]` inputs.
#[derive(Debug, Clone)]
pub struct Linear<T> {
    pub weight: Param<T>,
    pub bias: Param<T>,
    in_features: usize,
    out_features: usize,
    cache: Option<Vec<T>>,
}

impl<T: Scalar> Linear<T> {
    /// Weights from `U(-1/sqrt(in), 1/sqrt(in))`, zero bias.
    pub fn new<R: Rng + ?Sized>(in_features: usize, out_features: usize, rng: &mut R) -> Self {
        let bound = 1.0 / Float::sqrt(in_features as f64);
        let weight = (0..in_features * out_features).map(|_| T::from_f64(rng.random_range(-bound..bound))).collect();
        Self {
            weight: Param::trainable(&[out_features, in_features], weight),
            bias: Param::trainable(&[out_features], vec![T::zero(); out_features]),
            in_features,
            out_features,
            cache: None,
        }
    }

    pub fn in_features(&self) -> usize {
        self.in_features
    }
    pub fn out_features(&self) -> usize {
        self.out_features
    }

    pub fn infer(&self, x: &[T]) -> Vec<T> {
        assert_eq!(x.len() % self.in_features, 0, "linear input width");
        let batch = x.len() / self.in_features;
        let mut y: Vec<T> = (0..batch).flat_map(|_| self.bias.value.iter().copied()).collect();
        let (i, o) = (self.in_features, self.out_features);
        gemm(batch, i, o, T::one(), x, (i, 1), &self.weight.value, (1, i), T::one(), &mut y, (o, 1));
        y
    }

    pub fn forward(&mut self, x: &[T], train: bool) -> Vec<T> {
        self.cache = train.then(|| x.to_vec());
        self.infer(x)
    }

    pub fn backward(&mut self, gy: &[T]) -> Vec<T> {
        let x = self.cache.take().expect("linear backward without training forward");
        let (i, o) = (self.in_features, self.out_features);
        let batch = x.len() / i;
        for row in gy.chunks(o) {
            for (g, &v) in self.bias.grad.iter_mut().zip(row) {
                *g = *g + v;
            }
        }
        gemm(o, batch, i, T::one(), gy, (1, o), &x, (i, 1), T::one(), &mut self.weight.grad, (i, 1));
        let mut gx = vec![T::zero(); x.len()];
        gemm(batch, o, i, T::one(), gy, (o, 1), &self.weight.value, (i, 1), T::zero(), &mut gx, (i, 1));
        gx
    }
}

impl<T: Scalar> Module<T> for Linear<T> {
    fn visit(&self, prefix: &str, f: &mut dyn FnMut(&str, &Param<T>)) {
        f(&join(prefix, "weight"), &self.weight);
        f(&join(prefix, "bias"), &self.bias);
    }
    fn visit_mut(&mut self, prefix: &str, f: &mut dyn FnMut(&str, &mut Param<T>)) {
        f(&join(prefix, "weight"), &mut self.weight);
        f(&join(prefix, "bias"), &mut self.bias);
    }
}
