//! Joint image-label and pixel-mask binary cross-entropy.

use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use num_traits::Float;

use crate::data::{Mask, MaskSet};
use crate::error::{bail, Error, Result};
use crate::model::Prediction;
use crate::nn::sigmoid;
use crate::scalar::Scalar;
use crate::tensor::Tensor;

/// Probabilities are clamped to `[EPS, 1 - EPS]` before taking logarithms.
pub const BCE_EPS: f64 = 1e-7;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PixelReduction {
    Sum,
    /// Divide each class's pixel sum by `H * W`.
    #[default]
    Mean,
}

impl PixelReduction {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Sum => "sum",
            Self::Mean => "mean",
        }
    }
}

impl fmt::Display for PixelReduction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for PixelReduction {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "sum" => Ok(Self::Sum),
            "mean" => Ok(Self::Mean),
            other => Err(Error::Validation(alloc::format!("unknown pixel reduction `{other}` (expected sum or mean)"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossConfig {
    pub lambda_cls: f64,
    pub lambda_seg: f64,
    pub pixel_reduction: PixelReduction,
}

impl Default for LossConfig {
    fn default() -> Self {
        Self { lambda_cls: 1.0, lambda_seg: 1.0, pixel_reduction: PixelReduction::Mean }
    }
}

impl LossConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("lambda_cls", self.lambda_cls), ("lambda_seg", self.lambda_seg)] {
            if !v.is_finite() || v < 0.0 {
                bail!(Validation, "{name} must be finite and >= 0, got {v}");
            }
        }
        if self.lambda_cls == 0.0 && self.lambda_seg == 0.0 {
            bail!(Validation, "lambda_cls and lambda_seg cannot both be zero");
        }
        Ok(())
    }

    fn pixel_scale(&self, hw: usize) -> f64 {
        match self.pixel_reduction {
            PixelReduction::Sum => 1.0,
            PixelReduction::Mean => 1.0 / hw as f64,
        }
    }
}

/// Ground truth for one image.
#[derive(Debug, Clone, Copy)]
pub struct Target<'a> {
    pub masks: &'a MaskSet,
    pub labels: &'a [u8],
}

impl<'a> From<&'a crate::data::ImageRecord> for Target<'a> {
    fn from(r: &'a crate::data::ImageRecord) -> Self {
        Self { masks: r.masks(), labels: r.labels() }
    }
}

/// `-[y ln p + (1 - y) ln(1 - p)]` with `p` clamped to `[EPS, 1 - EPS]`.
pub fn bce(p: f64, y: f64) -> Result<f64> {
    if !p.is_finite() || !y.is_finite() {
        bail!(Numeric, "bce of non-finite input (p={p}, y={y})");
    }
    let p = p.clamp(BCE_EPS, 1.0 - BCE_EPS);
    Ok(-(y * Float::ln(p) + (1.0 - y) * Float::ln(1.0 - p)))
}

/// Derivative of [`bce`] with respect to `p`: `(p - y) / (p (1 - p))`.
pub fn bce_grad(p: f64, y: f64) -> Result<f64> {
    if !p.is_finite() || !y.is_finite() {
        bail!(Numeric, "bce gradient of non-finite input (p={p}, y={y})");
    }
    let p = p.clamp(BCE_EPS, 1.0 - BCE_EPS);
    Ok((p - y) / (p * (1.0 - p)))
}

/// Loss value split into its two weighted terms.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct LossBreakdown {
    pub total: f64,
    pub classification: f64,
    pub segmentation: f64,
}

fn check_target(t: &Target<'_>, n: usize, h: usize, w: usize) -> Result<()> {
    if t.masks.num_classes() != n || t.labels.len() != n {
        bail!(
            Validation,
            "target has {} masks and {} labels, prediction has {n} classes",
            t.masks.num_classes(),
            t.labels.len()
        );
    }
    if t.masks.height() != h || t.masks.width() != w {
        bail!(Validation, "target masks are {}x{}, prediction is {h}x{w}", t.masks.height(), t.masks.width());
    }
    Ok(())
}

/// Joint loss over a batch of probability outputs, summed over images and classes.
pub fn joint_loss<T: Scalar>(preds: &[Prediction<T>], truths: &[Target<'_>], cfg: &LossConfig) -> Result<LossBreakdown> {
    cfg.validate()?;
    if preds.len() != truths.len() || preds.is_empty() {
        bail!(Validation, "{} predictions for {} targets", preds.len(), truths.len());
    }
    let mut cls = 0.0;
    let mut seg = 0.0;
    for (p, t) in preds.iter().zip(truths) {
        let n = p.num_classes();
        check_target(t, n, p.height, p.width)?;
        let scale = cfg.pixel_scale(p.height * p.width);
        for m in 0..n {
            cls += bce(p.class_probs[m].as_f64(), t.labels[m] as f64)?;
            let mut s = 0.0;
            for (&q, &y) in p.class_plane(m).iter().zip(t.masks.mask(m).data()) {
                s += bce(q.as_f64(), y as f64)?;
            }
            seg += s * scale;
        }
    }
    let classification = cfg.lambda_cls * cls;
    let segmentation = cfg.lambda_seg * seg;
    Ok(LossBreakdown { total: classification + segmentation, classification, segmentation })
}

/// Loss and logit gradients for one training batch.
#[derive(Debug, Clone)]
pub struct LogitLoss<T> {
    pub loss: LossBreakdown,
    /// Same shape as the pixel logits, `[B, N, H, W]`.
    pub grad_pixel: Tensor<T>,
    /// Row-major `[B, N]`.
    pub grad_class: Vec<T>,
}

/// Stable `bce(sigmoid(x), y)` computed from the logit.
fn bce_logit(x: f64, y: f64) -> f64 {
    x.max(0.0) - x * y + Float::ln_1p(Float::exp(-Float::abs(x)))
}

/// Joint loss evaluated from logits, with its gradient with respect to them.
///
/// Works in logit space, so no clamping is needed and the gradient is
/// `sigmoid(x) - y` scaled by the term weight.
pub fn joint_loss_logits<T: Scalar>(
    pixel_logits: &Tensor<T>,
    class_logits: &[T],
    truths: &[Target<'_>],
    cfg: &LossConfig,
) -> Result<LogitLoss<T>> {
    cfg.validate()?;
    let [b, n, h, w] = pixel_logits.shape();
    if truths.len() != b || b == 0 {
        bail!(Validation, "{b} predictions for {} targets", truths.len());
    }
    if class_logits.len() != b * n {
        bail!(Validation, "expected {} class logits, got {}", b * n, class_logits.len());
    }
    let scale = cfg.pixel_scale(h * w);
    let mut grad_pixel = Tensor::zeros(pixel_logits.shape());
    let mut grad_class = Vec::with_capacity(b * n);
    let mut cls = 0.0;
    let mut seg = 0.0;
    for (k, t) in truths.iter().enumerate() {
        check_target(t, n, h, w)?;
        for m in 0..n {
            let x = class_logits[k * n + m].as_f64();
            let y = t.labels[m] as f64;
            cls += bce_logit(x, y);
            grad_class.push(T::from_f64(cfg.lambda_cls * (sigmoid(x) - y)));

            let g_scale = cfg.lambda_seg * scale;
            let mut s = 0.0;
            let logits = pixel_logits.plane(k, m);
            let truth = t.masks.mask(m).data();
            for ((g, &x), &y) in grad_pixel.plane_mut(k, m).iter_mut().zip(logits).zip(truth) {
                let (x, y) = (x.as_f64(), y as f64);
                s += bce_logit(x, y);
                *g = T::from_f64(g_scale * (sigmoid(x) - y));
            }
            seg += s * scale;
        }
    }
    let classification = cfg.lambda_cls * cls;
    let segmentation = cfg.lambda_seg * seg;
    let total = classification + segmentation;
    if !total.is_finite() {
        bail!(Numeric, "non-finite loss {total}");
    }
    Ok(LogitLoss { loss: LossBreakdown { total, classification, segmentation }, grad_pixel, grad_class })
}

/// Binary mask: 1 where `prob >= t`.
pub fn threshold<T: Scalar>(probs: &[T], t: f64) -> Result<Vec<u8>> {
    if !(0.0..=1.0).contains(&t) {
        bail!(Validation, "threshold {t} outside [0, 1]");
    }
    Ok(probs.iter().map(|p| u8::from(p.as_f64() >= t)).collect())
}

/// Thresholds every class plane of a prediction into a mask set.
pub fn threshold_prediction<T: Scalar>(pred: &Prediction<T>, t: f64) -> Result<MaskSet> {
    let masks = (0..pred.num_classes())
        .map(|m| Mask::from_vec(pred.height, pred.width, threshold(pred.class_plane(m), t)?))
        .collect::<Result<Vec<_>>>()?;
    MaskSet::new(pred.height, pred.width, masks)
}
