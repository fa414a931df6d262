use alloc::vec;
use alloc::vec::Vec;

use crate::error::{bail, Result};

/// Binary `H × W` mask, row-major, entries in `{0, 1}`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Mask {
    height: usize,
    width: usize,
    data: Vec<u8>,
}

impl Mask {
    pub fn zeros(height: usize, width: usize) -> Self {
        Self { height, width, data: vec![0; height * width] }
    }

    pub fn from_vec(height: usize, width: usize, data: Vec<u8>) -> Result<Self> {
        if data.len() != height * width {
            bail!(Validation, "mask has {} entries, expected {height}x{width}", data.len());
        }
        if let Some(v) = data.iter().find(|&&v| v > 1) {
            bail!(Validation, "mask is not binary (found value {v})");
        }
        Ok(Self { height, width, data })
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
    #[inline]
    pub fn get(&self, row: usize, col: usize) -> bool {
        self.data[row * self.width + col] != 0
    }
    #[inline]
    pub fn set(&mut self, row: usize, col: usize, on: bool) {
        self.data[row * self.width + col] = on as u8;
    }
    pub fn count(&self) -> usize {
        self.data.iter().filter(|&&v| v != 0).count()
    }
    pub fn is_empty(&self) -> bool {
        self.data.iter().all(|&v| v == 0)
    }
}

/// `N` binary masks sharing one `H × W` grid (one per defect class).
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct MaskSet {
    height: usize,
    width: usize,
    masks: Vec<Mask>,
}

impl MaskSet {
    pub fn empty(height: usize, width: usize, classes: usize) -> Self {
        Self { height, width, masks: vec![Mask::zeros(height, width); classes] }
    }

    pub fn new(height: usize, width: usize, masks: Vec<Mask>) -> Result<Self> {
        if let Some(m) = masks.iter().find(|m| m.height != height || m.width != width) {
            bail!(Validation, "mask {}x{} does not match set shape {height}x{width}", m.height, m.width);
        }
        Ok(Self { height, width, masks })
    }

    pub fn height(&self) -> usize {
        self.height
    }
    pub fn width(&self) -> usize {
        self.width
    }
    pub fn num_classes(&self) -> usize {
        self.masks.len()
    }
    pub fn masks(&self) -> &[Mask] {
        &self.masks
    }
    pub fn mask(&self, class: usize) -> &Mask {
        &self.masks[class]
    }
    pub fn mask_mut(&mut self, class: usize) -> &mut Mask {
        &mut self.masks[class]
    }
    /// `labels[m] = 1` iff mask `m` has at least one set pixel.
    pub fn labels(&self) -> Vec<u8> {
        self.masks.iter().map(|m| (!m.is_empty()) as u8).collect()
    }
}
