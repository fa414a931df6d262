use alloc::vec;
use alloc::vec::Vec;

use num_traits::Float;

use super::param::{join, Module, Param, ParamKind};
use crate::scalar::Scalar;
use crate::tensor::Tensor;

const EPS: f64 = 1e-5;
const MOMENTUM: f64 = 0.1;

/// Per-channel batch normalization over (N, H, W).
///
/// Training uses batch statistics and updates the running estimates
/// (unbiased variance); evaluation uses the running estimates.
#[derive(Debug, Clone)]
pub struct BatchNorm2d<T> {
    pub weight: Param<T>,
    pub bias: Param<T>,
    pub running_mean: Param<T>,
    pub running_var: Param<T>,
    cache: Option<(Tensor<T>, Vec<T>)>,
}

impl<T: Scalar> BatchNorm2d<T> {
    pub fn new(channels: usize) -> Self {
        Self {
            weight: Param::filled(&[channels], T::one(), ParamKind::Trainable),
            bias: Param::filled(&[channels], T::zero(), ParamKind::Trainable),
            running_mean: Param::filled(&[channels], T::zero(), ParamKind::Buffer),
            running_var: Param::filled(&[channels], T::one(), ParamKind::Buffer),
            cache: None,
        }
    }

    pub fn channels(&self) -> usize {
        self.weight.numel()
    }

    pub fn forward(&mut self, x: &Tensor<T>, train: bool) -> Tensor<T> {
        if !train {
            self.cache = None;
            return self.infer(x);
        }
        let [n, c, h, w] = x.shape();
        assert_eq!(c, self.channels(), "batch-norm channels");
        let count = (n * h * w) as f64;
        let mut x_hat = Tensor::zeros(x.shape());
        let mut inv_stds = Vec::with_capacity(c);
        let mut y = Tensor::zeros(x.shape());
        for ch in 0..c {
            let mut sum = 0.0;
            for b in 0..n {
                sum += x.plane(b, ch).iter().map(|v| v.as_f64()).sum::<f64>();
            }
            let mean = sum / count;
            let mut sq = 0.0;
            for b in 0..n {
                sq += x.plane(b, ch).iter().map(|v| (v.as_f64() - mean) * (v.as_f64() - mean)).sum::<f64>();
            }
            let var = sq / count;
            let inv_std = 1.0 / Float::sqrt(var + EPS);
            let unbiased = if count > 1.0 { sq / (count - 1.0) } else { var };
            let rm = &mut self.running_mean.value[ch];
            *rm = T::from_f64((1.0 - MOMENTUM) * rm.as_f64() + MOMENTUM * mean);
            let rv = &mut self.running_var.value[ch];
            *rv = T::from_f64((1.0 - MOMENTUM) * rv.as_f64() + MOMENTUM * unbiased);

            let (mean_t, inv_t) = (T::from_f64(mean), T::from_f64(inv_std));
            let (gamma, beta) = (self.weight.value[ch], self.bias.value[ch]);
            for b in 0..n {
                let src = x.plane(b, ch);
                let xh = x_hat.plane_mut(b, ch);
                for (d, &s) in xh.iter_mut().zip(src) {
                    *d = (s - mean_t) * inv_t;
                }
                let xh = x_hat.plane(b, ch);
                for (d, &s) in y.plane_mut(b, ch).iter_mut().zip(xh) {
                    *d = gamma * s + beta;
                }
            }
            inv_stds.push(inv_t);
        }
        self.cache = Some((x_hat, inv_stds));
        y
    }

    pub fn infer(&self, x: &Tensor<T>) -> Tensor<T> {
        let [n, c, _, _] = x.shape();
        assert_eq!(c, self.channels(), "batch-norm channels");
        let mut y = x.clone();
        for ch in 0..c {
            let inv = T::from_f64(1.0 / Float::sqrt(self.running_var.value[ch].as_f64() + EPS));
            let scale = self.weight.value[ch] * inv;
            let shift = self.bias.value[ch] - self.running_mean.value[ch] * scale;
            for b in 0..n {
                y.plane_mut(b, ch).iter_mut().for_each(|v| *v = *v * scale + shift);
            }
        }
        y
    }

    pub fn backward(&mut self, gy: &Tensor<T>) -> Tensor<T> {
        let (x_hat, inv_stds) = self.cache.take().expect("batch-norm backward without training forward");
        let [n, c, h, w] = gy.shape();
        let m = T::from_f64((n * h * w) as f64);
        let mut gx = Tensor::zeros(gy.shape());
        let mut sums = vec![(T::zero(), T::zero()); c];
        for (ch, (sum_dy, sum_dy_xh)) in sums.iter_mut().enumerate() {
            for b in 0..n {
                for (&g, &xh) in gy.plane(b, ch).iter().zip(x_hat.plane(b, ch)) {
                    *sum_dy = *sum_dy + g;
                    *sum_dy_xh = *sum_dy_xh + g * xh;
                }
            }
        }
        for (ch, &(sum_dy, sum_dy_xh)) in sums.iter().enumerate() {
            self.weight.grad[ch] = self.weight.grad[ch] + sum_dy_xh;
            self.bias.grad[ch] = self.bias.grad[ch] + sum_dy;
            let k = self.weight.value[ch] * inv_stds[ch] / m;
            for b in 0..n {
                let g = gy.plane(b, ch);
                let xh = x_hat.plane(b, ch);
                for ((d, &gv), &xv) in gx.plane_mut(b, ch).iter_mut().zip(g).zip(xh) {
                    *d = k * (m * gv - sum_dy - xv * sum_dy_xh);
                }
            }
        }
        gx
    }
}

impl<T: Scalar> Module<T> for BatchNorm2d<T> {
    fn visit(&self, prefix: &str, f: &mut dyn FnMut(&str, &Param<T>)) {
        f(&join(prefix, "weight"), &self.weight);
        f(&join(prefix, "bias"), &self.bias);
        f(&join(prefix, "running_mean"), &self.running_mean);
        f(&join(prefix, "running_var"), &self.running_var);
    }
    fn visit_mut(&mut self, prefix: &str, f: &mut dyn FnMut(&str, &mut Param<T>)) {
        f(&join(prefix, "weight"), &mut self.weight);
        f(&join(prefix, "bias"), &mut self.bias);
        f(&join(prefix, "running_mean"), &mut self.running_mean);
        f(&join(prefix, "running_var"), &mut self.running_var);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn training_output_is_standardized_per_channel() {
        let mut bn = BatchNorm2d::<f64>::new(2);
        let x = Tensor::from_vec([2, 2, 1, 2], alloc::vec![1.0, 3.0, 10.0, 10.0, 5.0, 7.0, 20.0, 40.0]).unwrap();
        let y = bn.forward(&x, true);
        for ch in 0..2 {
            let vals: Vec<f64> = (0..2).flat_map(|b| y.plane(b, ch).to_vec()).collect();
            let mean = vals.iter().sum::<f64>() / 4.0;
            let var = vals.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / 4.0;
            assert!(mean.abs() < 1e-12);
            assert!((var - 1.0).abs() < 1e-4);
        }
        // channel 0 values {1,3,5,7}: mean 4, unbiased var 20/3
        assert!((bn.running_mean.value[0] - 0.4).abs() < 1e-12);
        assert!((bn.running_var.value[0] - (0.9 + 0.1 * 20.0 / 3.0)).abs() < 1e-12);
    }

    #[test]
    fn eval_mode_uses_running_statistics() {
        let mut bn = BatchNorm2d::<f64>::new(1);
        bn.running_mean.value[0] = 2.0;
        bn.running_var.value[0] = 4.0 - EPS;
        bn.weight.value[0] = 3.0;
        bn.bias.value[0] = 1.0;
        let x = Tensor::from_vec([1, 1, 1, 2], alloc::vec![2.0, 6.0]).unwrap();
        let y = bn.forward(&x, false);
        assert!((y.data()[0] - 1.0).abs() < 1e-12);
        assert!((y.data()[1] - 7.0).abs() < 1e-12);
    }
}
