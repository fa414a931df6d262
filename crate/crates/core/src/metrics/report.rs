use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use super::aggregate::{aggregate, Aggregate};
use super::auc::auc;
use super::overlap::{dice, iou, mla};
use crate::data::MaskSet;
use crate::error::{bail, Error, Result};

/// Class label is predicted present when its probability reaches this value.
pub const DECISION_THRESHOLD: f64 = 0.5;

/// Metrics for one evaluated image.
#[derive(Debug, Clone, PartialEq)]
pub struct ImageRow {
    pub image_id: String,
    pub dice: Vec<f64>,
    pub iou: Vec<f64>,
    pub true_labels: Vec<u8>,
    pub pred_labels: Vec<u8>,
    pub class_probs: Vec<f64>,
}

impl ImageRow {
    pub fn new(image_id: impl Into<String>, truth: &MaskSet, pred: &MaskSet, class_probs: Vec<f64>) -> Result<Self> {
        let n = truth.num_classes();
        if pred.num_classes() != n || class_probs.len() != n {
            bail!(
                Validation,
                "truth has {n} classes, prediction {} masks and {} probabilities",
                pred.num_classes(),
                class_probs.len()
            );
        }
        let mut row = Self {
            image_id: image_id.into(),
            dice: Vec::with_capacity(n),
            iou: Vec::with_capacity(n),
            true_labels: truth.labels(),
            pred_labels: class_probs.iter().map(|&p| u8::from(p >= DECISION_THRESHOLD)).collect(),
            class_probs,
        };
        for (t, p) in truth.masks().iter().zip(pred.masks()) {
            row.dice.push(dice(p, t)?);
            row.iou.push(iou(p, t)?);
        }
        Ok(row)
    }

    pub fn num_classes(&self) -> usize {
        self.dice.len()
    }

    /// Mean DICE over classes.
    pub fn mean_dice(&self) -> f64 {
        self.dice.iter().sum::<f64>() / self.dice.len() as f64
    }
}

/// Aggregated evaluation of a set of images.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricReport {
    pub rows: Vec<ImageRow>,
    pub mla: f64,
    /// `None` where a class has only one label value in the evaluated set.
    pub auc_per_class: Vec<Option<f64>>,
    /// Mean over the defined per-class AUCs.
    pub auc_macro: Option<f64>,
    /// Mean DICE over all images and classes.
    pub mean_dice: f64,
    pub mean_iou: f64,
    /// Mean DICE over (image, class) pairs whose true mask is non-empty.
    pub mean_dice_present: Option<f64>,
    pub dice_by_class: Vec<Aggregate>,
    pub iou_by_class: Vec<Aggregate>,
    /// Same statistics restricted to images where the class is present.
    pub dice_present_by_class: Vec<Option<Aggregate>>,
    pub iou_present_by_class: Vec<Option<Aggregate>>,
    pub warnings: Vec<String>,
}

impl MetricReport {
    pub fn from_rows(rows: Vec<ImageRow>) -> Result<Self> {
        let Some(first) = rows.first() else {
            bail!(Validation, "metric report over zero images");
        };
        let n = first.num_classes();
        for r in &rows {
            let ok = r.dice.len() == n
                && r.iou.len() == n
                && r.true_labels.len() == n
                && r.pred_labels.len() == n
                && r.class_probs.len() == n;
            if !ok {
                bail!(Validation, "row `{}` does not have {n} classes", r.image_id);
            }
        }

        let pred: Vec<&[u8]> = rows.iter().map(|r| r.pred_labels.as_slice()).collect();
        let truth: Vec<&[u8]> = rows.iter().map(|r| r.true_labels.as_slice()).collect();
        let mla = mla(&pred, &truth)?;

        let mut warnings = Vec::new();
        let mut auc_per_class = Vec::with_capacity(n);
        for m in 0..n {
            let scores: Vec<f64> = rows.iter().map(|r| r.class_probs[m]).collect();
            let labels: Vec<u8> = rows.iter().map(|r| r.true_labels[m]).collect();
            match auc(&scores, &labels) {
                Ok(a) => auc_per_class.push(Some(a)),
                Err(Error::UndefinedAuc(missing)) => {
                    warnings.push(format!("class {}: AUC undefined (no {missing}); excluded from macro AUC", m + 1));
                    auc_per_class.push(None);
                }
                Err(e) => return Err(e),
            }
        }
        let defined: Vec<f64> = auc_per_class.iter().flatten().copied().collect();
        let auc_macro = (!defined.is_empty()).then(|| defined.iter().sum::<f64>() / defined.len() as f64);

        let column = |f: &dyn Fn(&ImageRow) -> f64, only_present: Option<usize>| -> Vec<f64> {
            rows.iter().filter(|r| only_present.is_none_or(|m| r.true_labels[m] != 0)).map(f).collect()
        };
        let mut dice_by_class = Vec::with_capacity(n);
        let mut iou_by_class = Vec::with_capacity(n);
        let mut dice_present_by_class = Vec::with_capacity(n);
        let mut iou_present_by_class = Vec::with_capacity(n);
        let mut present = Vec::new();
        for m in 0..n {
            dice_by_class.push(aggregate(&column(&|r| r.dice[m], None))?);
            iou_by_class.push(aggregate(&column(&|r| r.iou[m], None))?);
            let d = column(&|r| r.dice[m], Some(m));
            present.extend_from_slice(&d);
            dice_present_by_class.push(if d.is_empty() { None } else { Some(aggregate(&d)?) });
            let i = column(&|r| r.iou[m], Some(m));
            iou_present_by_class.push(if i.is_empty() { None } else { Some(aggregate(&i)?) });
        }

        let cells = (rows.len() * n) as f64;
        let mean_dice = rows.iter().flat_map(|r| &r.dice).sum::<f64>() / cells;
        let mean_iou = rows.iter().flat_map(|r| &r.iou).sum::<f64>() / cells;
        let mean_dice_present = (!present.is_empty()).then(|| present.iter().sum::<f64>() / present.len() as f64);

        Ok(Self {
            rows,
            mla,
            auc_per_class,
            auc_macro,
            mean_dice,
            mean_iou,
            mean_dice_present,
            dice_by_class,
            iou_by_class,
            dice_present_by_class,
            iou_present_by_class,
            warnings,
        })
    }

    pub fn num_classes(&self) -> usize {
        self.rows[0].num_classes()
    }

    pub fn image_ids(&self) -> impl Iterator<Item = &str> {
        self.rows.iter().map(|r| r.image_id.as_str())
    }
}
