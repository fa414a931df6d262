use alloc::vec::Vec;

use rand::Rng;

use super::mask::{Mask, MaskSet};
use super::record::Image;
use crate::error::{bail, Result};

/// Which flips to apply; each is drawn independently with probability 0.5.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Flips {
    /// Mirror columns: `(r, c) -> (r, W-1-c)`.
    pub horizontal: bool,
    /// Mirror rows: `(r, c) -> (H-1-r, c)`.
    pub vertical: bool,
}

impl Flips {
    pub fn draw<R: Rng + ?Sized>(rng: &mut R) -> Self {
        let horizontal = rng.random_bool(0.5);
        let vertical = rng.random_bool(0.5);
        Self { horizontal, vertical }
    }

    #[inline]
    fn source(&self, row: usize, col: usize, h: usize, w: usize) -> (usize, usize) {
        (if self.vertical { h - 1 - row } else { row }, if self.horizontal { w - 1 - col } else { col })
    }

    pub fn apply_image(&self, image: &Image) -> Image {
        if !self.horizontal && !self.vertical {
            return image.clone();
        }
        let (h, w) = (image.height(), image.width());
        let mut data = Vec::with_capacity(h * w * 3);
        for r in 0..h {
            for c in 0..w {
                let (sr, sc) = self.source(r, c, h, w);
                data.extend_from_slice(&image.pixel(sr, sc));
            }
        }
        Image::new(h, w, data).expect("same shape")
    }

    pub fn apply_mask(&self, mask: &Mask) -> Mask {
        if !self.horizontal && !self.vertical {
            return mask.clone();
        }
        let (h, w) = (mask.height(), mask.width());
        let mut out = Mask::zeros(h, w);
        for r in 0..h {
            for c in 0..w {
                let (sr, sc) = self.source(r, c, h, w);
                out.set(r, c, mask.get(sr, sc));
            }
        }
        out
    }

    pub fn apply_masks(&self, masks: &MaskSet) -> MaskSet {
        let flipped = masks.masks().iter().map(|m| self.apply_mask(m)).collect();
        MaskSet::new(masks.height(), masks.width(), flipped).expect("same shape")
    }
}

/// Random horizontal/vertical flip applied identically to an image and all of its masks.
pub fn augment_pair<R: Rng + ?Sized>(image: &Image, masks: &MaskSet, rng: &mut R) -> Result<(Image, MaskSet)> {
    if image.height() != masks.height() || image.width() != masks.width() {
        bail!(
            Validation,
            "image {}x{} and masks {}x{} differ in shape",
            image.height(),
            image.width(),
            masks.height(),
            masks.width()
        );
    }
    let flips = Flips::draw(rng);
    Ok((flips.apply_image(image), flips.apply_masks(masks)))
}
