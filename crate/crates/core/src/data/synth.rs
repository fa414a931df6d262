//! Synthetic surface-defect corpus for desk-scale experiments.
//!
//! Textured gray backgrounds with up to four defect types, one per class:
//! bright filled rectangles, thin dark scratches, dark elliptical blobs and
//! salt-and-pepper speckle patches. Each class is present independently
//! with probability `defect_probability`.

use alloc::format;
use alloc::vec::Vec;

use num_traits::Float;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::mask::{Mask, MaskSet};
use super::record::{Image, ImageRecord};

pub const SYNTH_CLASSES: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SynthConfig {
    pub count: usize,
    pub height: usize,
    pub width: usize,
    pub seed: u64,
    pub defect_probability: f64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self { count: 200, height: 64, width: 64, seed: 0, defect_probability: 0.5 }
    }
}

pub fn generate_corpus(config: &SynthConfig) -> Vec<ImageRecord> {
    (0..config.count).map(|i| synth_record(config, i)).collect()
}

/// Record `index` of the corpus; independent of every other index.
pub fn synth_record(config: &SynthConfig, index: usize) -> ImageRecord {
    let (h, w) = (config.height, config.width);
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed.wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ index as u64);

    let base = rng.random_range(90.0..130.0);
    let row_offsets: Vec<f64> = (0..h).map(|_| rng.random_range(-4.0..4.0)).collect();
    let mut canvas: Vec<f64> =
        (0..h * w).map(|i| base + row_offsets[i / w] + rng.random_range(-12.0..12.0)).collect();
    let mut masks = Vec::with_capacity(SYNTH_CLASSES);

    for class in 0..SYNTH_CLASSES {
        let mut mask = Mask::zeros(h, w);
        if rng.random_bool(config.defect_probability) {
            match class {
                0 => rectangle(&mut rng, &mut canvas, &mut mask),
                1 => scratch(&mut rng, &mut canvas, &mut mask),
                2 => blob(&mut rng, &mut canvas, &mut mask),
                _ => speckle(&mut rng, &mut canvas, &mut mask),
            }
        }
        masks.push(mask);
    }

    let gray: Vec<u8> = canvas.iter().map(|v| Float::round(v.clamp(0.0, 255.0)) as u8).collect();
    let image = Image::from_gray(h, w, &gray).expect("canvas size");
    let masks = MaskSet::new(h, w, masks).expect("mask size");
    ImageRecord::new(format!("synth_{:03}_{index:05}.png", config.seed % 1000), image, masks).expect("shapes agree")
}

fn rectangle(rng: &mut ChaCha8Rng, canvas: &mut [f64], mask: &mut Mask) {
    let (h, w) = (mask.height(), mask.width());
    let rh = rng.random_range(h / 8..=h / 3).max(2);
    let rw = rng.random_range(w / 6..=w * 2 / 5).max(2);
    let r0 = rng.random_range(0..=h - rh);
    let c0 = rng.random_range(0..=w - rw);
    for r in r0..r0 + rh {
        for c in c0..c0 + rw {
            canvas[r * w + c] += 75.0;
            mask.set(r, c, true);
        }
    }
}

fn scratch(rng: &mut ChaCha8Rng, canvas: &mut [f64], mask: &mut Mask) {
    let (h, w) = (mask.height(), mask.width());
    let (hf, wf) = (h as f64, w as f64);
    // Endpoints on opposite halves so the scratch spans most of the image.
    let (r0, c0) = (rng.random_range(0.0..hf), rng.random_range(0.0..wf * 0.3));
    let (r1, c1) = (rng.random_range(0.0..hf), rng.random_range(wf * 0.7..wf));
    let thick = rng.random_range(2..=3usize);
    let steps = (4.0 * wf) as usize;
    for s in 0..=steps {
        let t = s as f64 / steps as f64;
        let r = Float::round(r0 + (r1 - r0) * t) as usize;
        let c = Float::round(c0 + (c1 - c0) * t) as usize;
        for dr in 0..thick {
            let rr = (r + dr).min(h - 1);
            let cc = c.min(w - 1);
            if !mask.get(rr, cc) {
                canvas[rr * w + cc] -= 80.0;
                mask.set(rr, cc, true);
            }
        }
    }
}

fn blob(rng: &mut ChaCha8Rng, canvas: &mut [f64], mask: &mut Mask) {
    let (h, w) = (mask.height(), mask.width());
    let ry = rng.random_range(h as f64 / 10.0..h as f64 / 5.0);
    let rx = rng.random_range(w as f64 / 10.0..w as f64 / 5.0);
    let cy = rng.random_range(ry..h as f64 - ry);
    let cx = rng.random_range(rx..w as f64 - rx);
    for r in 0..h {
        for c in 0..w {
            let dy = (r as f64 + 0.5 - cy) / ry;
            let dx = (c as f64 + 0.5 - cx) / rx;
            if dy * dy + dx * dx <= 1.0 {
                canvas[r * w + c] -= 60.0;
                mask.set(r, c, true);
            }
        }
    }
}

fn speckle(rng: &mut ChaCha8Rng, canvas: &mut [f64], mask: &mut Mask) {
    let (h, w) = (mask.height(), mask.width());
    let rad = rng.random_range(h.min(w) as f64 / 8.0..h.min(w) as f64 / 5.0);
    let cy = rng.random_range(rad..h as f64 - rad);
    let cx = rng.random_range(rad..w as f64 - rad);
    for r in 0..h {
        for c in 0..w {
            let dy = r as f64 + 0.5 - cy;
            let dx = c as f64 + 0.5 - cx;
            if dy * dy + dx * dx <= rad * rad {
                mask.set(r, c, true);
                if rng.random_bool(0.5) {
                    canvas[r * w + c] = if rng.random_bool(0.5) { 235.0 } else { 15.0 };
                }
            }
        }
    }
}
