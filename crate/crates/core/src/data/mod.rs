//! Records, mask codec, dataset splits, normalization and augmentation.

mod augment;
mod mask;
mod norm;
mod record;
mod rle;
mod split;
pub mod synth;

pub use augment::{augment_pair, Flips};
pub use mask::{Mask, MaskSet};
pub use norm::{compute_norm_stats, NormStats};
pub use record::{Image, ImageRecord};
pub use rle::{rle_decode, rle_encode, RleString};
pub use split::{build_splits, subsample_training, DatasetSplit, Fractions};

use alloc::vec;

use crate::error::{bail, Result};
use crate::scalar::Scalar;
use crate::tensor::Tensor;

/// Stacks normalized images into a `[B, 3, H, W]` tensor.
pub fn images_to_tensor<T: Scalar>(images: &[&Image], norm: &NormStats) -> Result<Tensor<T>> {
    let Some(first) = images.first() else {
        bail!(Validation, "empty image batch");
    };
    let (h, w) = (first.height(), first.width());
    if images.iter().any(|i| i.height() != h || i.width() != w) {
        bail!(Validation, "images in a batch must share one shape");
    }
    let mut data = vec![T::zero(); images.len() * 3 * h * w];
    for (img, out) in images.iter().zip(data.chunks_mut(3 * h * w)) {
        norm.normalize_into(img, out);
    }
    Tensor::from_vec([images.len(), 3, h, w], data)
}
