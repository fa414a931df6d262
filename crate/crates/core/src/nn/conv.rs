use alloc::vec;
use alloc::vec::Vec;

use num_traits::Float;
use rand::Rng;

use super::param::{join, Module, Param};
use crate::scalar::Scalar;
use crate::tensor::{gemm, Tensor};

/// Upper bound on the im2col scratch buffer, in elements. Large images are
/// processed in bands of output rows so full-resolution inference stays within
/// a modest memory budget.
const COLUMN_BUDGET: usize = 1 << 22;

/// 2-D convolution with square kernel, symmetric zero padding and square stride.
#[derive(Debug, Clone)]
pub struct Conv2d<T> {
    pub weight: Param<T>,
    pub bias: Option<Param<T>>,
    in_channels: usize,
    out_channels: usize,
    kernel: usize,
    stride: usize,
    padding: usize,
    cache: Option<Tensor<T>>,
}

impl<T: Scalar> Conv2d<T> {
    /// Weights are drawn from `U(-b, b)` with `b = sqrt(6 / fan_in)`, biases start at zero.
    pub fn new<R: Rng + ?Sized>(
        in_channels: usize,
        out_channels: usize,
        kernel: usize,
        stride: usize,
        padding: usize,
        bias: bool,
        rng: &mut R,
    ) -> Self {
        let fan_in = in_channels * kernel * kernel;
        let bound = Float::sqrt(6.0 / fan_in as f64);
        let weight = (0..out_channels * fan_in).map(|_| T::from_f64(rng.random_range(-bound..bound))).collect();
        Self {
            weight: Param::trainable(&[out_channels, in_channels, kernel, kernel], weight),
            bias: bias.then(|| Param::trainable(&[out_channels], vec![T::zero(); out_channels])),
            in_channels,
            out_channels,
            kernel,
            stride,
            padding,
            cache: None,
        }
    }

    pub fn in_channels(&self) -> usize {
        self.in_channels
    }
    pub fn out_channels(&self) -> usize {
        self.out_channels
    }

    pub fn output_hw(&self, h: usize, w: usize) -> (usize, usize) {
        (
            (h + 2 * self.padding - self.kernel) / self.stride + 1,
            (w + 2 * self.padding - self.kernel) / self.stride + 1,
        )
    }

    fn is_pointwise(&self) -> bool {
        self.kernel == 1 && self.stride == 1 && self.padding == 0
    }

    fn band_rows(&self, ow: usize) -> usize {
        let k = self.in_channels * self.kernel * self.kernel;
        (COLUMN_BUDGET / (k * ow).max(1)).max(1)
    }

    pub fn forward(&mut self, x: &Tensor<T>, train: bool) -> Tensor<T> {
        let y = self.infer(x);
        self.cache = train.then(|| x.clone());
        y
    }

    pub fn infer(&self, x: &Tensor<T>) -> Tensor<T> {
        let [n, c, h, w] = x.shape();
        assert_eq!(c, self.in_channels, "conv input channels");
        let (oh, ow) = self.output_hw(h, w);
        let ohw = oh * ow;
        let k = self.in_channels * self.kernel * self.kernel;
        let mut y = Tensor::zeros([n, self.out_channels, oh, ow]);
        let wt = &self.weight.value;
        let mut cols = Vec::new();
        for b in 0..n {
            let xi = x.item(b);
            let yi = y.item_mut(b);
            if self.is_pointwise() {
                gemm(self.out_channels, k, ohw, T::one(), wt, (k, 1), xi, (ohw, 1), T::zero(), yi, (ohw, 1));
            } else {
                let band = self.band_rows(ow);
                let mut r0 = 0;
                while r0 < oh {
                    let r1 = (r0 + band).min(oh);
                    let pc = (r1 - r0) * ow;
                    cols.resize(k * pc, T::zero());
                    self.im2col(xi, h, w, r0, r1, ow, &mut cols);
                    gemm(
                        self.out_channels,
                        k,
                        pc,
                        T::one(),
                        wt,
                        (k, 1),
                        &cols,
                        (pc, 1),
                        T::zero(),
                        &mut yi[r0 * ow..],
                        (ohw, 1),
                    );
                    r0 = r1;
                }
            }
            if let Some(bias) = &self.bias {
                for (o, &bv) in bias.value.iter().enumerate() {
                    yi[o * ohw..(o + 1) * ohw].iter_mut().for_each(|v| *v = *v + bv);
                }
            }
        }
        y
    }

    pub fn backward(&mut self, gy: &Tensor<T>) -> Tensor<T> {
        let x = self.cache.take().expect("conv backward without training forward");
        let [n, _, h, w] = x.shape();
        let [_, _, oh, ow] = gy.shape();
        let ohw = oh * ow;
        let k = self.in_channels * self.kernel * self.kernel;
        let mut gx = Tensor::zeros(x.shape());
        let mut cols = Vec::new();
        let mut gcols = Vec::new();
        for b in 0..n {
            let xi = x.item(b);
            let gyi = gy.item(b);
            if let Some(bias) = &mut self.bias {
                for (o, g) in bias.grad.iter_mut().enumerate() {
                    *g = *g + gyi[o * ohw..(o + 1) * ohw].iter().copied().sum::<T>();
                }
            }
            if self.is_pointwise() {
                gemm(self.out_channels, ohw, k, T::one(), gyi, (ohw, 1), xi, (1, ohw), T::one(), &mut self.weight.grad, (k, 1));
                gemm(k, self.out_channels, ohw, T::one(), &self.weight.value, (1, k), gyi, (ohw, 1), T::zero(), gx.item_mut(b), (ohw, 1));
                continue;
            }
            let band = self.band_rows(ow);
            let mut r0 = 0;
            while r0 < oh {
                let r1 = (r0 + band).min(oh);
                let pc = (r1 - r0) * ow;
                cols.resize(k * pc, T::zero());
                gcols.resize(k * pc, T::zero());
                self.im2col(xi, h, w, r0, r1, ow, &mut cols);
                let gband = &gyi[r0 * ow..];
                gemm(self.out_channels, pc, k, T::one(), gband, (ohw, 1), &cols, (1, pc), T::one(), &mut self.weight.grad, (k, 1));
                gemm(k, self.out_channels, pc, T::one(), &self.weight.value, (1, k), gband, (ohw, 1), T::zero(), &mut gcols, (pc, 1));
                self.col2im(&gcols, h, w, r0, r1, ow, gx.item_mut(b));
                r0 = r1;
            }
        }
        gx
    }

    /// Valid output-column range `[lo, hi)` for kernel column `kj`: those whose
    /// input column falls inside `[0, w)`.
    fn valid_cols(&self, kj: usize, w: usize, ow: usize) -> (usize, usize) {
        let (s, p) = (self.stride, self.padding);
        let lo = if kj >= p { 0 } else { (p - kj).div_ceil(s) };
        let hi = if w + p > kj { (w + p - kj).div_ceil(s).min(ow) } else { 0 };
        (lo.min(hi), hi)
    }

    #[allow(clippy::too_many_arguments)]
    fn im2col(&self, x: &[T], h: usize, w: usize, r0: usize, r1: usize, ow: usize, cols: &mut [T]) {
        let (k, s, p) = (self.kernel, self.stride, self.padding);
        let pc = (r1 - r0) * ow;
        for c in 0..self.in_channels {
            let plane = &x[c * h * w..(c + 1) * h * w];
            for ki in 0..k {
                for kj in 0..k {
                    let row = (c * k + ki) * k + kj;
                    let dst = &mut cols[row * pc..(row + 1) * pc];
                    let (lo, hi) = self.valid_cols(kj, w, ow);
                    for (r, orow) in (r0..r1).enumerate() {
                        let drow = &mut dst[r * ow..(r + 1) * ow];
                        let ih = (orow * s + ki) as isize - p as isize;
                        if ih < 0 || ih >= h as isize || lo >= hi {
                            drow.fill(T::zero());
                            continue;
                        }
                        let src = &plane[ih as usize * w..(ih as usize + 1) * w];
                        drow[..lo].fill(T::zero());
                        drow[hi..].fill(T::zero());
                        let first = lo * s + kj - p;
                        if s == 1 {
                            drow[lo..hi].copy_from_slice(&src[first..first + (hi - lo)]);
                        } else {
                            for (j, d) in drow[lo..hi].iter_mut().enumerate() {
                                *d = src[first + j * s];
                            }
                        }
                    }
                }
            }
        }
    }

    #[allow(clippy::too_many_arguments)]
    fn col2im(&self, cols: &[T], h: usize, w: usize, r0: usize, r1: usize, ow: usize, gx: &mut [T]) {
        let (k, s, p) = (self.kernel, self.stride, self.padding);
        let pc = (r1 - r0) * ow;
        for c in 0..self.in_channels {
            let plane = &mut gx[c * h * w..(c + 1) * h * w];
            for ki in 0..k {
                for kj in 0..k {
                    let row = (c * k + ki) * k + kj;
                    let src = &cols[row * pc..(row + 1) * pc];
                    let (lo, hi) = self.valid_cols(kj, w, ow);
                    if lo >= hi {
                        continue;
                    }
                    for (r, orow) in (r0..r1).enumerate() {
                        let ih = (orow * s + ki) as isize - p as isize;
                        if ih < 0 || ih >= h as isize {
                            continue;
                        }
                        let dst = &mut plane[ih as usize * w..(ih as usize + 1) * w];
                        let first = lo * s + kj - p;
                        for (j, &v) in src[r * ow + lo..r * ow + hi].iter().enumerate() {
                            let d = &mut dst[first + j * s];
                            *d = *d + v;
                        }
                    }
                }
            }
        }
    }
}

impl<T: Scalar> Module<T> for Conv2d<T> {
    fn visit(&self, prefix: &str, f: &mut dyn FnMut(&str, &Param<T>)) {
        f(&join(prefix, "weight"), &self.weight);
        if let Some(b) = &self.bias {
            f(&join(prefix, "bias"), b);
        }
    }
    fn visit_mut(&mut self, prefix: &str, f: &mut dyn FnMut(&str, &mut Param<T>)) {
        f(&join(prefix, "weight"), &mut self.weight);
        if let Some(b) = &mut self.bias {
            f(&join(prefix, "bias"), b);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::count_params;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    /// Direct 7-loop convolution used as an oracle.
    fn naive(conv: &Conv2d<f64>, x: &Tensor<f64>) -> Tensor<f64> {
        let [n, c, h, w] = x.shape();
        let (oh, ow) = conv.output_hw(h, w);
        let k = conv.kernel;
        let mut y = Tensor::zeros([n, conv.out_channels, oh, ow]);
        for b in 0..n {
            for o in 0..conv.out_channels {
                for r in 0..oh {
                    for q in 0..ow {
                        let mut acc = conv.bias.as_ref().map_or(0.0, |bb| bb.value[o]);
                        for ci in 0..c {
                            for ki in 0..k {
                                for kj in 0..k {
                                    let ih = (r * conv.stride + ki) as isize - conv.padding as isize;
                                    let iw = (q * conv.stride + kj) as isize - conv.padding as isize;
                                    if ih < 0 || iw < 0 || ih >= h as isize || iw >= w as isize {
                                        continue;
                                    }
                                    acc += conv.weight.value[((o * c + ci) * k + ki) * k + kj]
                                        * x.get(b, ci, ih as usize, iw as usize);
                                }
                            }
                        }
                        y.item_mut(b)[(o * oh + r) * ow + q] = acc;
                    }
                }
            }
        }
        y
    }

    fn random_input(shape: [usize; 4], rng: &mut ChaCha8Rng) -> Tensor<f64> {
        let n = shape.iter().product();
        Tensor::from_vec(shape, (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap()
    }

    #[test]
    fn matches_naive_convolution_across_geometries() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for &(k, s, p) in &[(3, 1, 1), (7, 2, 3), (1, 1, 0), (1, 2, 0), (3, 2, 1)] {
            let mut conv = Conv2d::<f64>::new(3, 5, k, s, p, true, &mut rng);
            conv.bias.as_mut().unwrap().value.iter_mut().for_each(|b| *b = rng.random_range(-1.0..1.0));
            let x = random_input([2, 3, 9, 10], &mut rng);
            let got = conv.infer(&x);
            let want = naive(&conv, &x);
            assert_eq!(got.shape(), want.shape());
            for (a, b) in got.data().iter().zip(want.data()) {
                assert!((a - b).abs() < 1e-12, "k={k} s={s} p={p}: {a} vs {b}");
            }
        }
    }

    #[test]
    fn backward_is_adjoint_of_forward() {
        // <conv(x), g> is linear in x and W, so its gradients are exact adjoints.
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for &(k, s, p) in &[(3, 1, 1), (7, 2, 3), (1, 1, 0), (3, 2, 1)] {
            let mut conv = Conv2d::<f64>::new(2, 3, k, s, p, true, &mut rng);
            let x = random_input([2, 2, 8, 6], &mut rng);
            let y = conv.forward(&x, true);
            let g = random_input(y.shape(), &mut rng);
            let gx = conv.backward(&g);
            let probe = random_input(x.shape(), &mut rng);
            let lhs: f64 = conv.infer(&probe).data().iter().zip(g.data()).map(|(a, b)| a * b).sum();
            let bias_part: f64 = (0..y.batch())
                .map(|b| {
                    (0..3)
                        .map(|o| {
                            let bv = conv.bias.as_ref().unwrap().value[o];
                            bv * g.plane(b, o).iter().sum::<f64>()
                        })
                        .sum::<f64>()
                })
                .sum();
            let rhs: f64 = probe.data().iter().zip(gx.data()).map(|(a, b)| a * b).sum::<f64>() + bias_part;
            assert!((lhs - rhs).abs() < 1e-10, "k={k}: {lhs} vs {rhs}");
            // weight gradient: <conv_W(x), g> = <W, dW> + bias part
            let wdot: f64 = conv.weight.value.iter().zip(&conv.weight.grad).map(|(a, b)| a * b).sum();
            let ydot: f64 = y.data().iter().zip(g.data()).map(|(a, b)| a * b).sum();
            assert!((ydot - wdot - bias_part).abs() < 1e-10);
        }
    }

    #[test]
    fn banded_forward_matches_single_band() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let conv = Conv2d::<f64>::new(4, 2, 3, 1, 1, false, &mut rng);
        let x = random_input([1, 4, 40, 33], &mut rng);
        let want = naive(&conv, &x);
        // Force many bands by asking for rows one at a time.
        let (oh, ow) = conv.output_hw(40, 33);
        let k = 4 * 9;
        let mut cols = vec![0.0; k * ow];
        let mut y = vec![0.0; 2 * oh * ow];
        for r in 0..oh {
            conv.im2col(x.item(0), 40, 33, r, r + 1, ow, &mut cols);
            gemm(2, k, ow, 1.0, &conv.weight.value, (k, 1), &cols, (ow, 1), 0.0, &mut y[r * ow..], (oh * ow, 1));
        }
        for (a, b) in y.iter().zip(want.data()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn parameter_count_of_3x3_conv_with_bias() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let conv = Conv2d::<f32>::new(3, 8, 3, 1, 1, true, &mut rng);
        assert_eq!(count_params(&conv), 224);
    }
}
