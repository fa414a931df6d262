use alloc::vec::Vec;

use crate::data::{images_to_tensor, Image, ImageRecord, MaskSet, NormStats, RleString};
use crate::error::{bail, Result};
use crate::metrics::{ImageRow, MetricReport, DECISION_THRESHOLD};
use crate::model::{Prediction, UNet};
use crate::objective::{joint_loss_logits, threshold_prediction, LossConfig, Target};
use crate::scalar::Scalar;

/// Pixel probability at or above which a pixel is marked defective.
pub const PIXEL_THRESHOLD: f64 = 0.5;

#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub report: MetricReport,
    /// Joint loss averaged over images.
    pub mean_loss: f64,
}

/// Evaluation-mode pass over `records` in chunks of `batch_size`.
pub fn evaluate<T: Scalar>(
    model: &UNet<T>,
    records: &[ImageRecord],
    norm: &NormStats,
    loss_cfg: &LossConfig,
    batch_size: usize,
) -> Result<Evaluation> {
    if records.is_empty() {
        bail!(Validation, "nothing to evaluate");
    }
    let mut rows = Vec::with_capacity(records.len());
    let mut total = 0.0;
    for chunk in records.chunks(batch_size.max(1)) {
        let images: Vec<&Image> = chunk.iter().map(|r| r.image()).collect();
        let x = images_to_tensor::<T>(&images, norm)?;
        let out = model.infer(&x)?;
        let targets: Vec<Target<'_>> = chunk.iter().map(Target::from).collect();
        total += joint_loss_logits(&out.pixel_logits, &out.class_logits, &targets, loss_cfg)?.loss.total;
        for (rec, pred) in chunk.iter().zip(out.predictions()) {
            let masks = threshold_prediction(&pred, PIXEL_THRESHOLD)?;
            let probs = pred.class_probs.iter().map(|p| p.as_f64()).collect();
            rows.push(ImageRow::new(rec.image_id(), rec.masks(), &masks, probs)?);
        }
    }
    Ok(Evaluation { report: MetricReport::from_rows(rows)?, mean_loss: total / records.len() as f64 })
}

/// Inference output for a single image.
#[derive(Debug, Clone, PartialEq)]
pub struct ImagePrediction<T> {
    pub prediction: Prediction<T>,
    pub masks: MaskSet,
    /// One encoded mask per class.
    pub rles: Vec<RleString>,
    pub class_probs: Vec<f64>,
    pub labels: Vec<u8>,
}

pub fn predict<T: Scalar>(model: &UNet<T>, image: &Image, norm: &NormStats) -> Result<ImagePrediction<T>> {
    let x = images_to_tensor::<T>(&[image], norm)?;
    let prediction = model.infer(&x)?.predictions().remove(0);
    let masks = threshold_prediction(&prediction, PIXEL_THRESHOLD)?;
    let rles = masks.masks().iter().map(|m| m.to_rle()).collect();
    let class_probs: Vec<f64> = prediction.class_probs.iter().map(|p| p.as_f64()).collect();
    let labels = class_probs.iter().map(|&p| u8::from(p >= DECISION_THRESHOLD)).collect();
    Ok(ImagePrediction { prediction, masks, rles, class_probs, labels })
}
