use alloc::vec;
use alloc::vec::Vec;

use crate::scalar::Scalar;
use crate::tensor::Tensor;

#[derive(Debug, Clone, Default)]
pub struct Relu<T> {
    cache: Option<Tensor<T>>,
}

impl<T: Scalar> Relu<T> {
    pub fn new() -> Self {
        Self { cache: None }
    }

    pub fn infer(&self, x: &Tensor<T>) -> Tensor<T> {
        x.map(|v| v.max(T::zero()))
    }

    pub fn forward(&mut self, x: &Tensor<T>, train: bool) -> Tensor<T> {
        let y = self.infer(x);
        self.cache = train.then(|| y.clone());
        y
    }

    pub fn backward(&mut self, gy: &Tensor<T>) -> Tensor<T> {
        let y = self.cache.take().expect("relu backward without training forward");
        let mut gx = gy.clone();
        for (g, &v) in gx.data_mut().iter_mut().zip(y.data()) {
            if v <= T::zero() {
                *g = T::zero();
            }
        }
        gx
    }
}

pub fn sigmoid<T: Scalar>(x: T) -> T {
    if x >= T::zero() {
        T::one() / (T::one() + (-x).exp())
    } else {
        let e = x.exp();
        e / (T::one() + e)
    }
}

pub fn upsample_nearest2x<T: Scalar>(x: &Tensor<T>) -> Tensor<T> {
    let [n, c, h, w] = x.shape();
    let ow = 2 * w;
    let mut y = Tensor::zeros([n, c, 2 * h, ow]);
    for b in 0..n {
        for ch in 0..c {
            let src = x.plane(b, ch);
            let dst = y.plane_mut(b, ch);
            for r in 0..h {
                let row = &src[r * w..(r + 1) * w];
                let out = &mut dst[2 * r * ow..(2 * r + 1) * ow];
                for (q, &v) in row.iter().enumerate() {
                    out[2 * q] = v;
                    out[2 * q + 1] = v;
                }
                dst.copy_within(2 * r * ow..(2 * r + 1) * ow, (2 * r + 1) * ow);
            }
        }
    }
    y
}

pub fn upsample_nearest2x_backward<T: Scalar>(gy: &Tensor<T>) -> Tensor<T> {
    let [n, c, oh, ow] = gy.shape();
    let (h, w) = (oh / 2, ow / 2);
    let mut gx = Tensor::zeros([n, c, h, w]);
    for b in 0..n {
        for ch in 0..c {
            let src = gy.plane(b, ch);
            let dst = gx.plane_mut(b, ch);
            for r in 0..oh {
                for q in 0..ow {
                    let d = &mut dst[(r / 2) * w + q / 2];
                    *d = *d + src[r * ow + q];
                }
            }
        }
    }
    gx
}

/// Spatial mean of every channel: `[N, C, H, W] -> [N*C]` (row-major `[N, C]`).
pub fn global_avg_pool<T: Scalar>(x: &Tensor<T>) -> Vec<T> {
    let [n, c, h, w] = x.shape();
    let count = T::from_f64((h * w) as f64);
    let mut out = Vec::with_capacity(n * c);
    for b in 0..n {
        for ch in 0..c {
            out.push(x.plane(b, ch).iter().copied().sum::<T>() / count);
        }
    }
    out
}

pub fn global_avg_pool_backward<T: Scalar>(g: &[T], shape: [usize; 4]) -> Tensor<T> {
    let [n, c, h, w] = shape;
    let count = T::from_f64((h * w) as f64);
    let mut data = vec![T::zero(); n * c * h * w];
    for (plane, &gv) in data.chunks_mut(h * w).zip(g) {
        plane.fill(gv / count);
    }
    Tensor::from_vec([n, c, h, w], data).expect("shape")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sigmoid_is_stable_at_extremes() {
        assert_eq!(sigmoid(0.0f64), 0.5);
        assert!(sigmoid(-1000.0f64) >= 0.0);
        assert!(sigmoid(1000.0f64) <= 1.0);
        assert!((sigmoid(2.0f64) + sigmoid(-2.0f64) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn upsample_backward_sums_blocks() {
        let x = Tensor::<f64>::from_vec([1, 1, 1, 2], vec![1.0, 2.0]).unwrap();
        let y = upsample_nearest2x(&x);
        assert_eq!(y.data(), &[1.0, 1.0, 2.0, 2.0, 1.0, 1.0, 2.0, 2.0]);
        let g = upsample_nearest2x_backward(&y);
        assert_eq!(g.data(), &[4.0, 8.0]);
    }

    #[test]
    fn global_pool_of_constant_plane_is_the_constant() {
        let x = Tensor::<f64>::from_vec([1, 2, 2, 2], vec![3.0, 3.0, 3.0, 3.0, 1.0, 2.0, 3.0, 6.0]).unwrap();
        assert_eq!(global_avg_pool(&x), vec![3.0, 3.0]);
    }
}
