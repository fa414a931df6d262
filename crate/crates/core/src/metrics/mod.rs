//! Overlap, label and ranking metrics, plus per-image reports.

mod aggregate;
mod auc;
mod overlap;
mod report;

pub use aggregate::{aggregate, percentile, Aggregate};
pub use auc::{auc, roc_curve, RocPoint};
pub use overlap::{dice, dice_from_counts, iou, iou_from_counts, mla};
pub use report::{ImageRow, MetricReport, DECISION_THRESHOLD};
