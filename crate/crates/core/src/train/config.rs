use core::fmt;
use core::str::FromStr;

use crate::error::{bail, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum EarlyStopMetric {
    #[default]
    ValLoss,
    ValDice,
}

impl EarlyStopMetric {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::ValLoss => "val_loss",
            Self::ValDice => "val_dice",
        }
    }

    /// Whether `candidate` is strictly better than `best`.
    pub fn improves(self, candidate: f64, best: f64) -> bool {
        match self {
            Self::ValLoss => candidate < best,
            Self::ValDice => candidate > best,
        }
    }
}

impl fmt::Display for EarlyStopMetric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for EarlyStopMetric {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "val_loss" => Ok(Self::ValLoss),
            "val_dice" => Ok(Self::ValDice),
            other => Err(Error::Validation(alloc::format!("unknown early-stop metric `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub max_epochs: usize,
    pub early_stop_metric: EarlyStopMetric,
    /// Epochs without improvement tolerated before stopping.
    pub patience: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            batch_size: 16,
            learning_rate: 5e-4,
            beta1: 0.99,
            beta2: 0.99,
            max_epochs: 10,
            early_stop_metric: EarlyStopMetric::ValLoss,
            patience: 3,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            bail!(Validation, "batch_size must be >= 1");
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            bail!(Validation, "learning_rate must be positive, got {}", self.learning_rate);
        }
        for (name, b) in [("beta1", self.beta1), ("beta2", self.beta2)] {
            if !(0.0..1.0).contains(&b) {
                bail!(Validation, "{name} must lie in [0, 1), got {b}");
            }
        }
        if self.max_epochs == 0 {
            bail!(Validation, "max_epochs must be >= 1");
        }
        Ok(())
    }
}
