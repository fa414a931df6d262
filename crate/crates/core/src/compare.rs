//! Paired comparison of two evaluations over the same test images.

use alloc::string::String;
use alloc::vec::Vec;

use num_traits::Float;

use crate::error::{bail, Result};
use crate::metrics::MetricReport;

pub const HISTOGRAM_BINS: usize = 20;

/// Counts over `HISTOGRAM_BINS` equal bins spanning `[-1, 1]`; the last bin
/// is closed on the right.
#[derive(Debug, Clone, PartialEq)]
pub struct Histogram {
    pub edges: Vec<f64>,
    pub counts: Vec<usize>,
}

impl Histogram {
    pub fn of(values: &[f64]) -> Self {
        let width = 2.0 / HISTOGRAM_BINS as f64;
        let edges = (0..=HISTOGRAM_BINS).map(|i| -1.0 + i as f64 * width).collect();
        let mut counts = alloc::vec![0; HISTOGRAM_BINS];
        for &v in values {
            let bin = Float::floor((v.clamp(-1.0, 1.0) + 1.0) / width) as usize;
            counts[bin.min(HISTOGRAM_BINS - 1)] += 1;
        }
        Self { edges, counts }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Comparison {
    /// `(image_id, dice_a - dice_b)` in the order of report `a`; per-image
    /// DICE is the mean over classes.
    pub deltas: Vec<(String, f64)>,
    pub histogram: Histogram,
    /// Share of images with a strictly positive delta.
    pub improved_fraction: f64,
    pub mean_delta: f64,
    pub mean_abs_delta: f64,
    /// `(mean_a - mean_b) / mean_b`; `None` when `mean_b` is zero.
    pub relative_delta: Option<f64>,
    pub mean_dice_a: f64,
    pub mean_dice_b: f64,
    pub mla_a: f64,
    pub mla_b: f64,
}

pub fn compare(a: &MetricReport, b: &MetricReport) -> Result<Comparison> {
    let mut ids_a: Vec<&str> = a.image_ids().collect();
    let mut ids_b: Vec<&str> = b.image_ids().collect();
    ids_a.sort_unstable();
    ids_b.sort_unstable();
    if ids_a != ids_b {
        bail!(Validation, "reports cover different test images ({} vs {})", ids_a.len(), ids_b.len());
    }
    if ids_a.windows(2).any(|w| w[0] == w[1]) {
        bail!(Validation, "duplicate image ids in report");
    }
    let mut lookup: Vec<(&str, f64)> = b.rows.iter().map(|r| (r.image_id.as_str(), r.mean_dice())).collect();
    lookup.sort_unstable_by(|x, y| x.0.cmp(y.0));

    let deltas: Vec<(String, f64)> = a
        .rows
        .iter()
        .map(|r| {
            let i = lookup.binary_search_by(|e| e.0.cmp(&r.image_id)).expect("membership checked");
            (r.image_id.clone(), r.mean_dice() - lookup[i].1)
        })
        .collect();
    let n = deltas.len() as f64;
    let values: Vec<f64> = deltas.iter().map(|d| d.1).collect();
    let mean_a = a.rows.iter().map(|r| r.mean_dice()).sum::<f64>() / n;
    let mean_b = b.rows.iter().map(|r| r.mean_dice()).sum::<f64>() / n;
    Ok(Comparison {
        histogram: Histogram::of(&values),
        improved_fraction: values.iter().filter(|&&d| d > 0.0).count() as f64 / n,
        mean_delta: values.iter().sum::<f64>() / n,
        mean_abs_delta: values.iter().map(|d| d.abs()).sum::<f64>() / n,
        relative_delta: (mean_b != 0.0).then(|| (mean_a - mean_b) / mean_b),
        mean_dice_a: mean_a,
        mean_dice_b: mean_b,
        mla_a: a.mla,
        mla_b: b.mla,
        deltas,
    })
}
