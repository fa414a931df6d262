use alloc::string::String;
use alloc::vec::Vec;

use super::mask::MaskSet;
use crate::error::{bail, Result};

/// 8-bit RGB image, row-major with interleaved channels (`H × W × 3`).
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Image {
    height: usize,
    width: usize,
    data: Vec<u8>,
}

impl Image {
    pub fn new(height: usize, width: usize, data: Vec<u8>) -> Result<Self> {
        if data.len() != height * width * 3 {
            bail!(Validation, "image data has {} bytes, expected {height}x{width}x3", data.len());
        }
        Ok(Self { height, width, data })
    }

    /// Replicates a single-channel image into three channels.
    pub fn from_gray(height: usize, width: usize, gray: &[u8]) -> Result<Self> {
        if gray.len() != height * width {
            bail!(Validation, "gray image has {} bytes, expected {height}x{width}", gray.len());
        }
        Ok(Self { height, width, data: gray.iter().flat_map(|&v| [v, v, v]).collect() })
    }

    pub fn height(&self) -> usize {
        self.height
    }
    pub fn width(&self) -> usize {
        self.width
    }
    pub fn data(&self) -> &[u8] {
        &self.data
    }
    pub fn data_mut(&mut self) -> &mut [u8] {
        &mut self.data
    }
    #[inline]
    pub fn pixel(&self, row: usize, col: usize) -> [u8; 3] {
        let i = (row * self.width + col) * 3;
        [self.data[i], self.data[i + 1], self.data[i + 2]]
    }
}

/// One annotated image: pixels, per-class ground-truth masks and the
/// image-level labels derived from them.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct ImageRecord {
    image_id: String,
    image: Image,
    masks: MaskSet,
    labels: Vec<u8>,
}

impl ImageRecord {
    pub fn new(image_id: impl Into<String>, image: Image, masks: MaskSet) -> Result<Self> {
        if image.height != masks.height() || image.width != masks.width() {
            bail!(
                Validation,
                "image {}x{} and masks {}x{} differ in shape",
                image.height,
                image.width,
                masks.height(),
                masks.width()
            );
        }
        let labels = masks.labels();
        Ok(Self { image_id: image_id.into(), image, masks, labels })
    }

    pub fn image_id(&self) -> &str {
        &self.image_id
    }
    pub fn image(&self) -> &Image {
        &self.image
    }
    pub fn masks(&self) -> &MaskSet {
        &self.masks
    }
    pub fn labels(&self) -> &[u8] {
        &self.labels
    }
    pub fn num_classes(&self) -> usize {
        self.labels.len()
    }
}
