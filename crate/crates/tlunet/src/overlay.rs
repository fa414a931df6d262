//! Mask overlays: ground-truth and predicted contours drawn over the input
//! image, with per-class DICE in a title strip above it.

use std::path::Path;

use font8x8::legacy::BASIC_LEGACY;
use image::{Rgb, RgbImage};
use tlunet_core::data::{Image, Mask, MaskSet};
use tlunet_core::metrics::dice;

use crate::error::{Error, Result};

const GLYPH: u32 = 8;
const TITLE_HEIGHT: u32 = GLYPH + 4;
const TITLE_BG: Rgb<u8> = Rgb([24, 24, 24]);
const TITLE_FG: Rgb<u8> = Rgb([240, 240, 240]);

const TRUTH_COLORS: [[u8; 3]; 4] = [[230, 25, 75], [60, 180, 75], [0, 130, 200], [255, 225, 25]];
const PRED_COLORS: [[u8; 3]; 4] = [[245, 130, 48], [70, 240, 240], [240, 50, 230], [255, 255, 255]];

pub fn truth_color(class: usize) -> [u8; 3] {
    TRUTH_COLORS[class % TRUTH_COLORS.len()]
}

pub fn pred_color(class: usize) -> [u8; 3] {
    PRED_COLORS[class % PRED_COLORS.len()]
}

/// Title line listing DICE per class, e.g. `DICE 1:1.00 2:0.53`.
pub fn title(truth: &MaskSet, pred: &MaskSet) -> Result<String> {
    let mut s = String::from("DICE");
    for m in 0..truth.num_classes() {
        let d = dice(truth.mask(m), pred.mask(m))?;
        s.push_str(&format!(" {}:{d:.2}", m + 1));
    }
    Ok(s)
}

/// Pixels inside the mask with a 4-neighbour outside it (or on the border).
pub fn contour(mask: &Mask) -> Vec<(usize, usize)> {
    let (h, w) = (mask.height(), mask.width());
    let mut out = Vec::new();
    for r in 0..h {
        for c in 0..w {
            if !mask.get(r, c) {
                continue;
            }
            let edge = r == 0
                || c == 0
                || r + 1 == h
                || c + 1 == w
                || !mask.get(r - 1, c)
                || !mask.get(r + 1, c)
                || !mask.get(r, c - 1)
                || !mask.get(r, c + 1);
            if edge {
                out.push((r, c));
            }
        }
    }
    out
}

fn draw_text(canvas: &mut RgbImage, x0: u32, y0: u32, text: &str) {
    for (i, ch) in text.chars().enumerate() {
        let glyph = BASIC_LEGACY.get(ch as usize).copied().unwrap_or([0; 8]);
        for (dy, bits) in glyph.iter().enumerate() {
            for dx in 0..GLYPH {
                if bits >> dx & 1 == 1 {
                    let (x, y) = (x0 + i as u32 * GLYPH + dx, y0 + dy as u32);
                    if x < canvas.width() && y < canvas.height() {
                        canvas.put_pixel(x, y, TITLE_FG);
                    }
                }
            }
        }
    }
}

/// Renders the overlay. The canvas is widened when the title needs more room
/// than the image provides; the image sits at the top-left under the title.
pub fn overlay_masks(image: &Image, truth: &MaskSet, pred: &MaskSet) -> Result<RgbImage> {
    let (h, w) = (image.height(), image.width());
    let dims_ok = truth.height() == h
        && truth.width() == w
        && pred.height() == h
        && pred.width() == w
        && truth.num_classes() == pred.num_classes();
    if !dims_ok {
        return Err(tlunet_core::Error::Validation(format!(
            "overlay shape mismatch: image {h}x{w}, truth {}x{}x{}, prediction {}x{}x{}",
            truth.height(),
            truth.width(),
            truth.num_classes(),
            pred.height(),
            pred.width(),
            pred.num_classes()
        ))
        .into());
    }
    let text = title(truth, pred)?;
    let text_w = text.chars().count() as u32 * GLYPH + 4;
    let cw = (w as u32).max(text_w);
    let mut canvas = RgbImage::from_pixel(cw, h as u32 + TITLE_HEIGHT, TITLE_BG);
    draw_text(&mut canvas, 2, 2, &text);

    let mut layer: Vec<Option<[u8; 3]>> = vec![None; h * w];
    for m in 0..truth.num_classes() {
        for (r, c) in contour(truth.mask(m)) {
            layer[r * w + c] = Some(truth_color(m));
        }
    }
    for m in 0..pred.num_classes() {
        let p = pred_color(m);
        for (r, c) in contour(pred.mask(m)) {
            let px = &mut layer[r * w + c];
            // Where contours coincide, blend so both remain visible.
            *px = Some(match *px {
                Some(t) => [0, 1, 2].map(|k| ((t[k] as u16 + p[k] as u16) / 2) as u8),
                None => p,
            });
        }
    }
    for r in 0..h {
        for c in 0..w {
            let rgb = layer[r * w + c].unwrap_or_else(|| image.pixel(r, c));
            canvas.put_pixel(c as u32, r as u32 + TITLE_HEIGHT, Rgb(rgb));
        }
    }
    Ok(canvas)
}

pub fn save_overlay(path: &Path, image: &Image, truth: &MaskSet, pred: &MaskSet) -> Result<()> {
    overlay_masks(image, truth, pred)?
        .save(path)
        .map_err(|source| Error::Image { path: path.to_path_buf(), source })
}
