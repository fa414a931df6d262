use alloc::vec::Vec;

use crate::scalar::Scalar;
use crate::tensor::Tensor;

/// 3×3 max pooling, stride 2, padding 1 (the ResNet/DenseNet stem pool).
#[derive(Debug, Clone, Default)]
pub struct MaxPool3x3s2 {
    cache: Option<([usize; 4], Vec<usize>)>,
}

impl MaxPool3x3s2 {
    pub fn new() -> Self {
        Self::default()
    }

    fn run<T: Scalar>(x: &Tensor<T>, mut argmax: Option<&mut Vec<usize>>) -> Tensor<T> {
        let [n, c, h, w] = x.shape();
        let (oh, ow) = ((h + 2 - 3) / 2 + 1, (w + 2 - 3) / 2 + 1);
        let mut y = Tensor::zeros([n, c, oh, ow]);
        for b in 0..n {
            for ch in 0..c {
                let src = x.plane(b, ch);
                let base = (b * c + ch) * h * w;
                let dst = y.plane_mut(b, ch);
                for r in 0..oh {
                    for q in 0..ow {
                        let mut best = T::neg_infinity();
                        let mut best_idx = 0;
                        for i in (2 * r).saturating_sub(1)..(2 * r + 2).min(h) {
                            for j in (2 * q).saturating_sub(1)..(2 * q + 2).min(w) {
                                let v = src[i * w + j];
                                if v > best {
                                    best = v;
                                    best_idx = i * w + j;
                                }
                            }
                        }
                        dst[r * ow + q] = best;
                        if let Some(am) = argmax.as_deref_mut() {
                            am.push(base + best_idx);
                        }
                    }
                }
            }
        }
        y
    }

    pub fn forward<T: Scalar>(&mut self, x: &Tensor<T>, train: bool) -> Tensor<T> {
        if !train {
            self.cache = None;
            return Self::run(x, None);
        }
        let mut argmax = Vec::new();
        let y = Self::run(x, Some(&mut argmax));
        self.cache = Some((x.shape(), argmax));
        y
    }

    pub fn infer<T: Scalar>(&self, x: &Tensor<T>) -> Tensor<T> {
        Self::run(x, None)
    }

    pub fn backward<T: Scalar>(&mut self, gy: &Tensor<T>) -> Tensor<T> {
        let (shape, argmax) = self.cache.take().expect("max-pool backward without training forward");
        let mut gx = Tensor::zeros(shape);
        let data = gx.data_mut();
        for (&idx, &g) in argmax.iter().zip(gy.data()) {
            data[idx] = data[idx] + g;
        }
        gx
    }
}

/// 2×2 average pooling with stride 2 (DenseNet transitions). Requires even H and W.
#[derive(Debug, Clone, Copy, Default)]
pub struct AvgPool2x2;

impl AvgPool2x2 {
    pub fn infer<T: Scalar>(&self, x: &Tensor<T>) -> Tensor<T> {
        let [n, c, h, w] = x.shape();
        let (oh, ow) = (h / 2, w / 2);
        let quarter = T::from_f64(0.25);
        let mut y = Tensor::zeros([n, c, oh, ow]);
        for b in 0..n {
            for ch in 0..c {
                let src = x.plane(b, ch);
                let dst = y.plane_mut(b, ch);
                for r in 0..oh {
                    for q in 0..ow {
                        let i = 2 * r * w + 2 * q;
                        dst[r * ow + q] = (src[i] + src[i + 1] + src[i + w] + src[i + w + 1]) * quarter;
                    }
                }
            }
        }
        y
    }

    pub fn backward<T: Scalar>(&self, gy: &Tensor<T>) -> Tensor<T> {
        let [n, c, oh, ow] = gy.shape();
        let (h, w) = (oh * 2, ow * 2);
        let quarter = T::from_f64(0.25);
        let mut gx = Tensor::zeros([n, c, h, w]);
        for b in 0..n {
            for ch in 0..c {
                let g = gy.plane(b, ch);
                let dst = gx.plane_mut(b, ch);
                for r in 0..h {
                    for q in 0..w {
                        dst[r * w + q] = g[(r / 2) * ow + q / 2] * quarter;
                    }
                }
            }
        }
        gx
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn max_pool_halves_even_inputs_and_routes_gradient_to_argmax() {
        let x = Tensor::<f64>::from_vec([1, 1, 4, 4], (0..16).map(|v| v as f64).collect()).unwrap();
        let mut pool = MaxPool3x3s2::new();
        let y = pool.forward(&x, true);
        assert_eq!(y.shape(), [1, 1, 2, 2]);
        assert_eq!(y.data(), &[5.0, 7.0, 13.0, 15.0]);
        let gx = pool.backward(&Tensor::from_vec([1, 1, 2, 2], vec![1.0, 2.0, 3.0, 4.0]).unwrap());
        assert_eq!(gx.data()[5], 1.0);
        assert_eq!(gx.data()[15], 4.0);
        assert_eq!(gx.data().iter().sum::<f64>(), 10.0);
    }

    #[test]
    fn avg_pool_backward_spreads_evenly() {
        let x = Tensor::<f64>::from_vec([1, 1, 2, 2], vec![1.0, 2.0, 3.0, 6.0]).unwrap();
        let y = AvgPool2x2.infer(&x);
        assert_eq!(y.data(), &[3.0]);
        let gx = AvgPool2x2.backward(&Tensor::from_vec([1, 1, 1, 1], vec![4.0]).unwrap());
        assert_eq!(gx.data(), &[1.0, 1.0, 1.0, 1.0]);
    }
}
