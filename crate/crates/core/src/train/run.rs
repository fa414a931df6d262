use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::adam::{Adam, AdamConfig};
use super::config::{EarlyStopMetric, TrainConfig};
use super::eval::evaluate;
use crate::data::{augment_pair, images_to_tensor, DatasetSplit, Image, ImageRecord, MaskSet, NormStats};
use crate::error::{bail, Result};
use crate::model::UNet;
use crate::nn::{zero_grads, Module};
use crate::objective::{joint_loss_logits, LossBreakdown, LossConfig, Target};
use crate::scalar::Scalar;
use crate::tensor::Tensor;

/// Source of wall-clock time in seconds.
pub trait Clock {
    fn now(&self) -> f64;
}

/// Clock that always reads zero.
#[derive(Debug, Clone, Copy, Default)]
pub struct NoClock;

impl Clock for NoClock {
    fn now(&self) -> f64 {
        0.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochRecord {
    /// 1-based.
    pub epoch: usize,
    /// Joint loss per training image, under augmentation and training-mode batch norm.
    pub train_loss: f64,
    pub val_loss: f64,
    pub val_dice: f64,
    pub val_mla: f64,
    pub seconds: f64,
}

impl EpochRecord {
    pub fn monitored(&self, metric: EarlyStopMetric) -> f64 {
        match metric {
            EarlyStopMetric::ValLoss => self.val_loss,
            EarlyStopMetric::ValDice => self.val_dice,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainingHistory {
    pub epochs: Vec<EpochRecord>,
    /// 1-based epoch whose weights the model holds after training.
    pub best_epoch: usize,
    pub stopped_early: bool,
}

/// Copies of every parameter and buffer, in visiting order.
pub fn snapshot<T: Scalar, M: Module<T> + ?Sized>(module: &M) -> Vec<Vec<T>> {
    let mut out = Vec::new();
    module.visit("", &mut |_, p| out.push(p.value.clone()));
    out
}

pub fn restore<T: Scalar, M: Module<T> + ?Sized>(module: &mut M, state: &[Vec<T>]) {
    let mut it = state.iter();
    module.visit_mut("", &mut |_, p| p.value.clone_from(it.next().expect("snapshot of this module")));
}

/// Forward, joint loss, backward and one optimizer update.
pub fn train_step<T: Scalar>(
    model: &mut UNet<T>,
    adam: &mut Adam<T>,
    x: &Tensor<T>,
    targets: &[Target<'_>],
    loss_cfg: &LossConfig,
) -> Result<LossBreakdown> {
    let out = model.forward(x, true)?;
    let l = joint_loss_logits(&out.pixel_logits, &out.class_logits, targets, loss_cfg)?;
    drop(out);
    zero_grads(model);
    model.backward(&l.grad_pixel, &l.grad_class);
    adam.step(model)?;
    Ok(l.loss)
}

fn fnv1a(bytes: &[u8]) -> u64 {
    bytes.iter().fold(0xcbf2_9ce4_8422_2325, |h, &b| (h ^ b as u64).wrapping_mul(0x0100_0000_01b3))
}

/// Augmentation stream for one record in one epoch, independent of batch order.
fn augment_rng(seed: u64, epoch: usize, image_id: &str) -> ChaCha8Rng {
    let s = seed.wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ (epoch as u64).wrapping_mul(0xC2B2_AE3D_27D4_EB4F) ^ fnv1a(image_id.as_bytes());
    ChaCha8Rng::seed_from_u64(s)
}

/// [`train_with`] without timing or progress reporting.
pub fn train<T: Scalar>(
    model: &mut UNet<T>,
    split: &DatasetSplit<ImageRecord>,
    norm: &NormStats,
    cfg: &TrainConfig,
    loss_cfg: &LossConfig,
) -> Result<TrainingHistory> {
    train_with(model, split, norm, cfg, loss_cfg, &NoClock, &mut |_| {})
}

/// Shuffled mini-batch training with flip augmentation, per-epoch validation
/// and early stopping. On return the model holds the best epoch's weights.
pub fn train_with<T: Scalar>(
    model: &mut UNet<T>,
    split: &DatasetSplit<ImageRecord>,
    norm: &NormStats,
    cfg: &TrainConfig,
    loss_cfg: &LossConfig,
    clock: &dyn Clock,
    on_epoch: &mut dyn FnMut(&EpochRecord),
) -> Result<TrainingHistory> {
    cfg.validate()?;
    loss_cfg.validate()?;
    if split.train.is_empty() {
        bail!(Validation, "training split is empty");
    }
    if split.val.is_empty() {
        bail!(Validation, "validation split is empty; early stopping needs it");
    }

    let mut adam = Adam::new(AdamConfig::new(cfg.learning_rate, cfg.beta1, cfg.beta2));
    let mut epochs = Vec::new();
    let mut best: Option<(usize, f64, Vec<Vec<T>>)> = None;
    let mut since_best = 0;
    let mut stopped_early = false;

    for epoch in 1..=cfg.max_epochs {
        let start = clock.now();
        let mut order: Vec<usize> = (0..split.train.len()).collect();
        order.shuffle(&mut ChaCha8Rng::seed_from_u64(cfg.seed ^ (epoch as u64).wrapping_mul(0xA076_1D64_78BD_642F)));

        let mut total = 0.0;
        for idx in order.chunks(cfg.batch_size) {
            let mut images: Vec<Image> = Vec::with_capacity(idx.len());
            let mut masks: Vec<MaskSet> = Vec::with_capacity(idx.len());
            for &i in idx {
                let r = &split.train[i];
                let (img, m) = augment_pair(r.image(), r.masks(), &mut augment_rng(cfg.seed, epoch, r.image_id()))?;
                images.push(img);
                masks.push(m);
            }
            let labels: Vec<Vec<u8>> = masks.iter().map(MaskSet::labels).collect();
            let targets: Vec<Target<'_>> =
                masks.iter().zip(&labels).map(|(m, l)| Target { masks: m, labels: l }).collect();
            let refs: Vec<&Image> = images.iter().collect();
            let x = images_to_tensor::<T>(&refs, norm)?;
            total += train_step(model, &mut adam, &x, &targets, loss_cfg)?.total;
        }

        let val = evaluate(model, &split.val, norm, loss_cfg, cfg.batch_size)?;
        let record = EpochRecord {
            epoch,
            train_loss: total / split.train.len() as f64,
            val_loss: val.mean_loss,
            val_dice: val.report.mean_dice,
            val_mla: val.report.mla,
            seconds: clock.now() - start,
        };
        on_epoch(&record);
        epochs.push(record);

        let score = record.monitored(cfg.early_stop_metric);
        let improved = best.as_ref().is_none_or(|(_, b, _)| cfg.early_stop_metric.improves(score, *b));
        if improved {
            best = Some((epoch, score, snapshot(model)));
            since_best = 0;
        } else {
            since_best += 1;
            if since_best >= cfg.patience && epoch < cfg.max_epochs {
                stopped_early = true;
                break;
            }
        }
    }

    let (best_epoch, _, weights) = best.expect("at least one epoch ran");
    restore(model, &weights);
    Ok(TrainingHistory { epochs, best_epoch, stopped_early })
}
