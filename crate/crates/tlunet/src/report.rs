//! Text artifacts: split manifests, histories, per-image metrics, summaries
//! and plot-data tables. Floats use Rust's shortest round-trip formatting so
//! files re-parse exactly and are byte-stable across runs.

use std::fmt::Write as _;

use serde::Serialize;
use tlunet_core::compare::Comparison;
use tlunet_core::data::{DatasetSplit, ImageRecord, NormStats};
use tlunet_core::metrics::{roc_curve, Aggregate, ImageRow, MetricReport};
use tlunet_core::train::TrainingHistory;

use crate::error::{Error, Result};

/// Image ids per partition under `TRAIN`, `VAL` and `TEST` headings.
pub fn split_manifest(split: &DatasetSplit<ImageRecord>) -> String {
    let mut s = format!("# seed {}\n", split.seed);
    for (title, part) in [("TRAIN", &split.train), ("VAL", &split.val), ("TEST", &split.test)] {
        let _ = writeln!(s, "{title}");
        for r in part {
            let _ = writeln!(s, "{}", r.image_id());
        }
    }
    s
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct SplitIds {
    pub train: Vec<String>,
    pub val: Vec<String>,
    pub test: Vec<String>,
}

pub fn parse_split_manifest(text: &str) -> Result<SplitIds> {
    let mut ids = SplitIds::default();
    let mut current: Option<&mut Vec<String>> = None;
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        match line {
            "TRAIN" => current = Some(&mut ids.train),
            "VAL" => current = Some(&mut ids.val),
            "TEST" => current = Some(&mut ids.test),
            id => match current.as_deref_mut() {
                Some(v) => v.push(id.to_string()),
                None => return Err(Error::Parse(format!("split manifest line {}: id before any section", i + 1))),
            },
        }
    }
    Ok(ids)
}

pub fn norm_text(norm: &NormStats) -> String {
    let j = |v: &[f64; 3]| v.iter().map(ToString::to_string).collect::<Vec<_>>().join(",");
    format!("mean = {}\nstd = {}\n", j(&norm.mean), j(&norm.std))
}

pub fn history_csv(h: &TrainingHistory) -> String {
    let mut s = String::from("epoch,train_loss,val_loss,val_dice,val_mla\n");
    for e in &h.epochs {
        let _ = writeln!(s, "{},{},{},{},{}", e.epoch, e.train_loss, e.val_loss, e.val_dice, e.val_mla);
    }
    s
}

/// Wall-clock seconds per epoch; kept apart from the reproducible files.
pub fn timing_csv(h: &TrainingHistory) -> String {
    let mut s = String::from("epoch,seconds\n");
    for e in &h.epochs {
        let _ = writeln!(s, "{},{:.3}", e.epoch, e.seconds);
    }
    s
}

/// Long format: one row per (image, class), class ids 1-based.
pub fn per_image_csv(report: &MetricReport) -> String {
    let mut s = String::from("image_id,class_id,dice,iou,true_label,pred_label,class_prob\n");
    for r in &report.rows {
        for m in 0..r.num_classes() {
            let _ = writeln!(
                s,
                "{},{},{},{},{},{},{}",
                r.image_id,
                m + 1,
                r.dice[m],
                r.iou[m],
                r.true_labels[m],
                r.pred_labels[m],
                r.class_probs[m]
            );
        }
    }
    s
}

/// Rebuilds a report from [`per_image_csv`] output.
pub fn parse_per_image_csv(text: &str) -> Result<MetricReport> {
    let mut reader = csv::Reader::from_reader(text.as_bytes());
    let mut rows: Vec<ImageRow> = Vec::new();
    for (i, rec) in reader.records().enumerate() {
        let line = i + 2;
        let rec = rec.map_err(|e| Error::Parse(format!("per-image csv line {line}: {e}")))?;
        let bad = |what: &str| Error::Parse(format!("per-image csv line {line}: bad {what}"));
        let get = |k: usize| rec.get(k).ok_or_else(|| bad("column count"));
        let id = get(0)?;
        let class: usize = get(1)?.parse().map_err(|_| bad("class_id"))?;
        let f = |k: usize, n: &str| -> Result<f64> { get(k)?.parse().map_err(|_| bad(n)) };
        let u = |k: usize, n: &str| -> Result<u8> { get(k)?.parse().map_err(|_| bad(n)) };
        if rows.last().is_none_or(|r| r.image_id != id) {
            rows.push(ImageRow {
                image_id: id.to_string(),
                dice: vec![],
                iou: vec![],
                true_labels: vec![],
                pred_labels: vec![],
                class_probs: vec![],
            });
        }
        let row = rows.last_mut().expect("just pushed");
        if class != row.dice.len() + 1 {
            return Err(bad("class order"));
        }
        row.dice.push(f(2, "dice")?);
        row.iou.push(f(3, "iou")?);
        row.true_labels.push(u(4, "true_label")?);
        row.pred_labels.push(u(5, "pred_label")?);
        row.class_probs.push(f(6, "class_prob")?);
    }
    Ok(MetricReport::from_rows(rows)?)
}

#[derive(Serialize)]
struct AggregateJson {
    count: usize,
    mean: f64,
    median: f64,
    ci75: [f64; 2],
    ci95: [f64; 2],
    min: f64,
    max: f64,
}

impl From<&Aggregate> for AggregateJson {
    fn from(a: &Aggregate) -> Self {
        Self {
            count: a.count,
            mean: a.mean,
            median: a.median,
            ci75: [a.ci75.0, a.ci75.1],
            ci95: [a.ci95.0, a.ci95.1],
            min: a.min,
            max: a.max,
        }
    }
}

#[derive(Serialize)]
struct ClassJson {
    class_id: usize,
    auc: Option<f64>,
    dice: AggregateJson,
    iou: AggregateJson,
    dice_defect_present: Option<AggregateJson>,
    iou_defect_present: Option<AggregateJson>,
}

#[derive(Serialize)]
struct SummaryJson<'a> {
    images: usize,
    mla: f64,
    mean_dice: f64,
    mean_iou: f64,
    mean_dice_defect_present: Option<f64>,
    auc_macro: Option<f64>,
    classes: Vec<ClassJson>,
    warnings: &'a [String],
}

pub fn summary_json(report: &MetricReport) -> String {
    let classes = (0..report.num_classes())
        .map(|m| ClassJson {
            class_id: m + 1,
            auc: report.auc_per_class[m],
            dice: (&report.dice_by_class[m]).into(),
            iou: (&report.iou_by_class[m]).into(),
            dice_defect_present: report.dice_present_by_class[m].as_ref().map(Into::into),
            iou_defect_present: report.iou_present_by_class[m].as_ref().map(Into::into),
        })
        .collect();
    let s = SummaryJson {
        images: report.rows.len(),
        mla: report.mla,
        mean_dice: report.mean_dice,
        mean_iou: report.mean_iou,
        mean_dice_defect_present: report.mean_dice_present,
        auc_macro: report.auc_macro,
        classes,
        warnings: &report.warnings,
    };
    serde_json::to_string_pretty(&s).expect("serializable") + "\n"
}

const BOX_HEADER: &str = "label,class_id,metric,subset,count,mean,median,ci75_lo,ci75_hi,ci95_lo,ci95_hi,min,max\n";

fn box_row(s: &mut String, label: &str, class: usize, metric: &str, subset: &str, a: &Aggregate) {
    let _ = writeln!(
        s,
        "{label},{class},{metric},{subset},{},{},{},{},{},{},{},{},{}",
        a.count, a.mean, a.median, a.ci75.0, a.ci75.1, a.ci95.0, a.ci95.1, a.min, a.max
    );
}

/// Box-plot statistics per labelled report, class, metric and subset.
pub fn box_stats_csv(reports: &[(&str, &MetricReport)]) -> String {
    let mut s = String::from(BOX_HEADER);
    for (label, r) in reports {
        for m in 0..r.num_classes() {
            box_row(&mut s, label, m + 1, "dice", "all", &r.dice_by_class[m]);
            box_row(&mut s, label, m + 1, "iou", "all", &r.iou_by_class[m]);
            if let Some(a) = &r.dice_present_by_class[m] {
                box_row(&mut s, label, m + 1, "dice", "defect_present", a);
            }
            if let Some(a) = &r.iou_present_by_class[m] {
                box_row(&mut s, label, m + 1, "iou", "defect_present", a);
            }
        }
    }
    s
}

/// ROC points per class; classes with undefined AUC are omitted.
pub fn roc_csv(report: &MetricReport) -> String {
    let mut s = String::from("class_id,threshold,fpr,tpr\n");
    for m in 0..report.num_classes() {
        let scores: Vec<f64> = report.rows.iter().map(|r| r.class_probs[m]).collect();
        let labels: Vec<u8> = report.rows.iter().map(|r| r.true_labels[m]).collect();
        if let Ok(points) = roc_curve(&scores, &labels) {
            for p in points {
                let _ = writeln!(s, "{},{},{},{}", m + 1, p.threshold, p.fpr, p.tpr);
            }
        }
    }
    s
}

/// Per-epoch curves for several labelled runs.
pub fn convergence_csv(histories: &[(&str, &TrainingHistory)]) -> String {
    let mut s = String::from("label,epoch,train_loss,val_loss,val_dice,val_mla\n");
    for (label, h) in histories {
        for e in &h.epochs {
            let _ = writeln!(s, "{label},{},{},{},{},{}", e.epoch, e.train_loss, e.val_loss, e.val_dice, e.val_mla);
        }
    }
    s
}

/// Parses [`history_csv`] output back into epoch records (timings zero).
pub fn parse_history_csv(text: &str) -> Result<TrainingHistory> {
    let mut reader = csv::Reader::from_reader(text.as_bytes());
    let mut epochs = Vec::new();
    for (i, rec) in reader.records().enumerate() {
        let line = i + 2;
        let rec = rec.map_err(|e| Error::Parse(format!("history line {line}: {e}")))?;
        let bad = || Error::Parse(format!("history line {line}: bad value"));
        let f = |k: usize| -> Result<f64> { rec.get(k).ok_or_else(bad)?.parse().map_err(|_| bad()) };
        epochs.push(tlunet_core::train::EpochRecord {
            epoch: rec.get(0).ok_or_else(bad)?.parse().map_err(|_| bad())?,
            train_loss: f(1)?,
            val_loss: f(2)?,
            val_dice: f(3)?,
            val_mla: f(4)?,
            seconds: 0.0,
        });
    }
    if epochs.is_empty() {
        return Err(Error::Parse("history has no epochs".into()));
    }
    Ok(TrainingHistory { epochs, best_epoch: 0, stopped_early: false })
}

#[derive(Serialize)]
struct ComparisonJson<'a> {
    label_a: &'a str,
    label_b: &'a str,
    images: usize,
    improved_fraction: f64,
    mean_delta: f64,
    mean_abs_delta: f64,
    relative_delta: Option<f64>,
    mean_dice_a: f64,
    mean_dice_b: f64,
    mla_a: f64,
    mla_b: f64,
    mla_delta: f64,
}

pub fn comparison_json(label_a: &str, label_b: &str, c: &Comparison) -> String {
    let j = ComparisonJson {
        label_a,
        label_b,
        images: c.deltas.len(),
        improved_fraction: c.improved_fraction,
        mean_delta: c.mean_delta,
        mean_abs_delta: c.mean_abs_delta,
        relative_delta: c.relative_delta,
        mean_dice_a: c.mean_dice_a,
        mean_dice_b: c.mean_dice_b,
        mla_a: c.mla_a,
        mla_b: c.mla_b,
        mla_delta: c.mla_a - c.mla_b,
    };
    serde_json::to_string_pretty(&j).expect("serializable") + "\n"
}

pub fn dice_diff_csv(c: &Comparison) -> String {
    let mut s = String::from("image_id,dice_delta\n");
    for (id, d) in &c.deltas {
        let _ = writeln!(s, "{id},{d}");
    }
    s
}

pub fn dice_diff_hist_csv(c: &Comparison) -> String {
    let mut s = String::from("bin_lo,bin_hi,count\n");
    for (i, n) in c.histogram.counts.iter().enumerate() {
        let _ = writeln!(s, "{},{},{n}", c.histogram.edges[i], c.histogram.edges[i + 1]);
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use tlunet_core::train::EpochRecord;

    fn report() -> MetricReport {
        let rows = vec![
            ImageRow {
                image_id: "a.png".into(),
                dice: vec![0.25, 1.0],
                iou: vec![0.25 / 1.75, 1.0],
                true_labels: vec![1, 0],
                pred_labels: vec![1, 0],
                class_probs: vec![0.9, 0.1],
            },
            ImageRow {
                image_id: "b.png".into(),
                dice: vec![1.0, 0.0],
                iou: vec![1.0, 0.0],
                true_labels: vec![0, 1],
                pred_labels: vec![0, 0],
                class_probs: vec![0.3, 0.45],
            },
        ];
        MetricReport::from_rows(rows).unwrap()
    }

    #[test]
    fn per_image_csv_roundtrips() {
        let r = report();
        assert_eq!(parse_per_image_csv(&per_image_csv(&r)).unwrap(), r);
    }

    #[test]
    fn split_manifest_roundtrip() {
        let ids = parse_split_manifest("# seed 1\nTRAIN\na\nb\nVAL\nc\nTEST\nd\n").unwrap();
        assert_eq!((ids.train.len(), ids.val, ids.test), (2, vec!["c".to_string()], vec!["d".to_string()]));
        assert!(parse_split_manifest("x\nTRAIN\n").is_err());
    }

    #[test]
    fn box_stats_match_aggregates() {
        let r = report();
        let csv = box_stats_csv(&[("run", &r)]);
        let line = csv.lines().nth(1).unwrap();
        let a = &r.dice_by_class[0];
        let expect = format!(
            "run,1,dice,all,{},{},{},{},{},{},{},{},{}",
            a.count, a.mean, a.median, a.ci75.0, a.ci75.1, a.ci95.0, a.ci95.1, a.min, a.max
        );
        assert_eq!(line, expect);
    }

    #[test]
    fn single_epoch_convergence_is_one_row() {
        let h = TrainingHistory {
            epochs: vec![EpochRecord { epoch: 1, train_loss: 1.0, val_loss: 2.0, val_dice: 0.5, val_mla: 0.75, seconds: 3.0 }],
            best_epoch: 1,
            stopped_early: false,
        };
        let csv = convergence_csv(&[("x", &h)]);
        assert_eq!(csv.lines().count(), 2);
        assert_eq!(parse_history_csv(&history_csv(&h)).unwrap().epochs[0].val_mla, 0.75);
    }

    #[test]
    fn perfect_roc_passes_through_corner() {
        let r = report();
        let roc = roc_csv(&r);
        assert!(roc.lines().any(|l| l.starts_with("1,") && l.ends_with(",0,1")), "{roc}");
    }
}
