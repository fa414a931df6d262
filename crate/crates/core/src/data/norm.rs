use num_traits::Float;

use super::record::Image;
use crate::error::{bail, Result};
use crate::scalar::Scalar;

/// Per-channel intensity mean and population standard deviation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NormStats {
    pub mean: [f64; 3],
    pub std: [f64; 3],
}

/// Statistics over every pixel of the given (training) images. Sums are
/// accumulated exactly in integers.
pub fn compute_norm_stats<'a>(images: impl IntoIterator<Item = &'a Image>) -> Result<NormStats> {
    let mut count = 0u64;
    let mut sum = [0u64; 3];
    let mut sq = [0u128; 3];
    for img in images {
        for px in img.data().chunks_exact(3) {
            for c in 0..3 {
                let v = px[c] as u64;
                sum[c] += v;
                sq[c] += (v * v) as u128;
            }
        }
        count += (img.height() * img.width()) as u64;
    }
    if count == 0 {
        bail!(Validation, "normalization statistics need at least one training pixel");
    }
    let n = count as f64;
    let mut stats = NormStats { mean: [0.0; 3], std: [0.0; 3] };
    for c in 0..3 {
        let mean = sum[c] as f64 / n;
        // n*Σx² - (Σx)² is exact in integers.
        let num = count as i128 * sq[c] as i128 - (sum[c] as i128) * (sum[c] as i128);
        let var = num as f64 / (n * n);
        if num <= 0 {
            bail!(Degenerate, "channel {c} has zero variance over the training set");
        }
        stats.mean[c] = mean;
        stats.std[c] = Float::sqrt(var);
    }
    Ok(stats)
}

impl NormStats {
    /// Writes the normalized image in planar `3 × H × W` layout into `out`.
    pub fn normalize_into<T: Scalar>(&self, image: &Image, out: &mut [T]) {
        let hw = image.height() * image.width();
        assert_eq!(out.len(), 3 * hw, "normalization output size");
        let scale = self.std.map(|s| 1.0 / s);
        for (i, px) in image.data().chunks_exact(3).enumerate() {
            for c in 0..3 {
                out[c * hw + i] = T::from_f64((px[c] as f64 - self.mean[c]) * scale[c]);
            }
        }
    }
}
