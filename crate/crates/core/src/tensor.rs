use alloc::vec;
use alloc::vec::Vec;

use crate::error::{bail, Result};
use crate::scalar::Scalar;

/// Dense 4-D tensor in NCHW layout (batch, channel, row, column).
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor<T> {
    shape: [usize; 4],
    data: Vec<T>,
}

impl<T: Scalar> Tensor<T> {
    pub fn zeros(shape: [usize; 4]) -> Self {
        Self { shape, data: vec![T::zero(); shape.iter().product()] }
    }

    pub fn from_vec(shape: [usize; 4], data: Vec<T>) -> Result<Self> {
        let expected: usize = shape.iter().product();
        if data.len() != expected {
            bail!(Validation, "tensor data length {} does not match shape {:?}", data.len(), shape);
        }
        Ok(Self { shape, data })
    }

    #[inline]
    pub fn shape(&self) -> [usize; 4] {
        self.shape
    }
    #[inline]
    pub fn batch(&self) -> usize {
        self.shape[0]
    }
    #[inline]
    pub fn channels(&self) -> usize {
        self.shape[1]
    }
    #[inline]
    pub fn height(&self) -> usize {
        self.shape[2]
    }
    #[inline]
    pub fn width(&self) -> usize {
        self.shape[3]
    }
    #[inline]
    pub fn data(&self) -> &[T] {
        &self.data
    }
    #[inline]
    pub fn data_mut(&mut self) -> &mut [T] {
        &mut self.data
    }
    pub fn into_vec(self) -> Vec<T> {
        self.data
    }

    /// Elements of one batch item (`C*H*W` values).
    #[inline]
    pub fn item(&self, n: usize) -> &[T] {
        let len = self.shape[1] * self.shape[2] * self.shape[3];
        &self.data[n * len..(n + 1) * len]
    }
    #[inline]
    pub fn item_mut(&mut self, n: usize) -> &mut [T] {
        let len = self.shape[1] * self.shape[2] * self.shape[3];
        &mut self.data[n * len..(n + 1) * len]
    }

    /// One `H*W` plane.
    #[inline]
    pub fn plane(&self, n: usize, c: usize) -> &[T] {
        let hw = self.shape[2] * self.shape[3];
        let start = (n * self.shape[1] + c) * hw;
        &self.data[start..start + hw]
    }
    #[inline]
    pub fn plane_mut(&mut self, n: usize, c: usize) -> &mut [T] {
        let hw = self.shape[2] * self.shape[3];
        let start = (n * self.shape[1] + c) * hw;
        &mut self.data[start..start + hw]
    }

    #[inline]
    pub fn get(&self, n: usize, c: usize, h: usize, w: usize) -> T {
        let [_, cs, hs, ws] = self.shape;
        self.data[((n * cs + c) * hs + h) * ws + w]
    }

    pub fn add_assign(&mut self, other: &Self) {
        assert_eq!(self.shape, other.shape, "add_assign shape mismatch");
        for (a, &b) in self.data.iter_mut().zip(&other.data) {
            *a = *a + b;
        }
    }

    pub fn map(&self, f: impl Fn(T) -> T) -> Self {
        Self { shape: self.shape, data: self.data.iter().map(|&v| f(v)).collect() }
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// Concatenates along the channel axis. All inputs must agree on N, H, W.
    pub fn concat_channels(parts: &[&Self]) -> Self {
        let first = parts[0];
        let [n, _, h, w] = first.shape;
        let total_c: usize = parts.iter().map(|p| p.shape[1]).sum();
        for p in parts {
            assert!(p.shape[0] == n && p.shape[2] == h && p.shape[3] == w, "concat shape mismatch");
        }
        let mut data = Vec::with_capacity(n * total_c * h * w);
        for b in 0..n {
            for p in parts {
                data.extend_from_slice(p.item(b));
            }
        }
        Self { shape: [n, total_c, h, w], data }
    }

    /// Splits channels `[0, at)` and `[at, C)` into two tensors.
    pub fn split_channels(&self, at: usize) -> (Self, Self) {
        let [n, c, h, w] = self.shape;
        assert!(at <= c);
        let hw = h * w;
        let mut left = Vec::with_capacity(n * at * hw);
        let mut right = Vec::with_capacity(n * (c - at) * hw);
        for b in 0..n {
            let item = self.item(b);
            left.extend_from_slice(&item[..at * hw]);
            right.extend_from_slice(&item[at * hw..]);
        }
        (Self { shape: [n, at, h, w], data: left }, Self { shape: [n, c - at, h, w], data: right })
    }

    /// Copy of a contiguous range of batch items.
    pub fn slice_batch(&self, start: usize, end: usize) -> Self {
        let len = self.shape[1] * self.shape[2] * self.shape[3];
        Self {
            shape: [end - start, self.shape[1], self.shape[2], self.shape[3]],
            data: self.data[start * len..end * len].to_vec(),
        }
    }

    pub fn cast<U: Scalar>(&self) -> Tensor<U> {
        Tensor { shape: self.shape, data: self.data.iter().map(|v| U::from_f64(v.as_f64())).collect() }
    }
}

/// Safe wrapper over the strided GEMM kernel: `C <- alpha*A*B + beta*C`,
/// with `A: m×k`, `B: k×n`, `C: m×n` and `(row_stride, col_stride)` layouts.
#[allow(clippy::too_many_arguments)]
pub(crate) fn gemm<T: Scalar>(
    m: usize,
    k: usize,
    n: usize,
    alpha: T,
    a: &[T],
    a_strides: (usize, usize),
    b: &[T],
    b_strides: (usize, usize),
    beta: T,
    c: &mut [T],
    c_strides: (usize, usize),
) {
    if m == 0 || n == 0 {
        return;
    }
    let last = |rows: usize, cols: usize, (rs, cs): (usize, usize)| (rows - 1) * rs + (cols - 1) * cs;
    if k > 0 {
        assert!(last(m, k, a_strides) < a.len(), "gemm: A out of bounds");
        assert!(last(k, n, b_strides) < b.len(), "gemm: B out of bounds");
    }
    assert!(last(m, n, c_strides) < c.len(), "gemm: C out of bounds");
    // SAFETY: bounds asserted above; `c` is a unique borrow so it cannot alias `a` or `b`.
    unsafe {
        T::gemm(
            m,
            k,
            n,
            alpha,
            a.as_ptr(),
            a_strides.0 as isize,
            a_strides.1 as isize,
            b.as_ptr(),
            b_strides.0 as isize,
            b_strides.1 as isize,
            beta,
            c.as_mut_ptr(),
            c_strides.0 as isize,
            c_strides.1 as isize,
        )
    }
}
