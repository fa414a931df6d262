use alloc::vec::Vec;

use num_traits::Float;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{bail, Result};

/// Train/validation/test proportions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Fractions {
    pub train: f64,
    pub val: f64,
    pub test: f64,
}

impl Default for Fractions {
    fn default() -> Self {
        Self { train: 0.75, val: 0.125, test: 0.125 }
    }
}

impl Fractions {
    fn validate(&self) -> Result<()> {
        let parts = [self.train, self.val, self.test];
        if parts.iter().any(|f| !f.is_finite() || *f < 0.0) || (parts.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
            bail!(Validation, "split fractions {parts:?} must be non-negative and sum to 1");
        }
        Ok(())
    }
}

/// Image-level partition of a dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct DatasetSplit<R> {
    pub train: Vec<R>,
    pub val: Vec<R>,
    pub test: Vec<R>,
    pub seed: u64,
    pub fractions: Fractions,
}

/// `floor(fraction * n)`, tolerant of representation error in the product.
fn portion(fraction: f64, n: usize) -> usize {
    Float::floor(fraction * n as f64 + 1e-9) as usize
}

/// Seeded shuffle, then validation and test take `floor(fraction * n)` records
/// each and training takes the remainder.
pub fn build_splits<R>(records: Vec<R>, seed: u64, fractions: Fractions) -> Result<DatasetSplit<R>> {
    fractions.validate()?;
    if records.is_empty() {
        bail!(Validation, "cannot split an empty record list");
    }
    let n = records.len();
    let n_val = portion(fractions.val, n);
    let n_test = portion(fractions.test, n);
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));

    let mut slots: Vec<Option<R>> = records.into_iter().map(Some).collect();
    let mut take = |idx: &[usize]| -> Vec<R> { idx.iter().map(|&i| slots[i].take().expect("each index once")).collect() };
    let val = take(&order[..n_val]);
    let test = take(&order[n_val..n_val + n_test]);
    let train = take(&order[n_val + n_test..]);
    Ok(DatasetSplit { train, val, test, seed, fractions })
}

/// Keeps `floor(fraction * |train|)` training records chosen by a seeded
/// draw (original order preserved); validation and test are untouched.
pub fn subsample_training<R: Clone>(split: &DatasetSplit<R>, fraction: f64) -> Result<DatasetSplit<R>> {
    if !(fraction > 0.0 && fraction <= 1.0) {
        bail!(Validation, "training fraction must be in (0, 1], got {fraction}");
    }
    let keep = portion(fraction, split.train.len());
    let mut order: Vec<usize> = (0..split.train.len()).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(split.seed ^ 0x5EED_5AB5_A3F1_u64));
    let mut chosen = order[..keep].to_vec();
    chosen.sort_unstable();
    Ok(DatasetSplit {
        train: chosen.iter().map(|&i| split.train[i].clone()).collect(),
        val: split.val.clone(),
        test: split.test.clone(),
        seed: split.seed,
        fractions: split.fractions,
    })
}
