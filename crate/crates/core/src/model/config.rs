use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use crate::error::{bail, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum EncoderFamily {
    ResNet,
    DenseNet,
}

impl EncoderFamily {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::ResNet => "resnet",
            Self::DenseNet => "densenet",
        }
    }
}

impl fmt::Display for EncoderFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for EncoderFamily {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "resnet" => Ok(Self::ResNet),
            "densenet" => Ok(Self::DenseNet),
            other => bail!(Validation, "unknown encoder family `{other}` (expected resnet or densenet)"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum InitMode {
    Random,
    Pretrained,
}

impl InitMode {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Random => "random",
            Self::Pretrained => "pretrained",
        }
    }
}

impl fmt::Display for InitMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for InitMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "random" => Ok(Self::Random),
            "pretrained" | "imagenet" => Ok(Self::Pretrained),
            other => bail!(Validation, "unknown init mode `{other}` (expected random or pretrained)"),
        }
    }
}

/// Depth and width of an encoder. Stage `s` (1-based) of the encoder halves
/// the resolution `s` times.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum EncoderSpec {
    /// Stem convolution width, per-layer widths and basic-block counts.
    ResNet { stem: usize, widths: [usize; 4], blocks: [usize; 4] },
    /// Stem width, growth rate, bottleneck multiplier and layers per dense block.
    DenseNet { init_features: usize, growth: usize, bn_size: usize, block_layers: [usize; 4] },
}

impl EncoderSpec {
    pub const fn resnet18() -> Self {
        Self::ResNet { stem: 64, widths: [64, 128, 256, 512], blocks: [2, 2, 2, 2] }
    }

    pub const fn densenet121() -> Self {
        Self::DenseNet { init_features: 64, growth: 32, bn_size: 4, block_layers: [6, 12, 24, 16] }
    }

    pub fn family(&self) -> EncoderFamily {
        match self {
            Self::ResNet { .. } => EncoderFamily::ResNet,
            Self::DenseNet { .. } => EncoderFamily::DenseNet,
        }
    }

    /// Channel count of each encoder feature map, stages `1..=stages`.
    pub fn feature_channels(&self, stages: usize) -> Vec<usize> {
        let all: Vec<usize> = match *self {
            Self::ResNet { stem, widths, .. } => [stem, widths[0], widths[1], widths[2], widths[3]].to_vec(),
            Self::DenseNet { init_features, growth, block_layers, .. } => {
                let mut out = alloc::vec![init_features];
                let mut c = init_features;
                for (i, &layers) in block_layers.iter().enumerate() {
                    let after = c + layers * growth;
                    out.push(after);
                    if i < 3 {
                        c = after / 2;
                    }
                }
                out
            }
        };
        all[..stages].to_vec()
    }
}

/// Everything needed to build a [`UNet`](super::UNet).
#[derive(Debug, Clone, PartialEq)]
pub struct ModelConfig {
    pub encoder: EncoderSpec,
    pub init_mode: InitMode,
    /// Number of encoder (and decoder) stages, `2..=5`.
    pub stages: usize,
    pub num_classes: usize,
    pub input_height: usize,
    pub input_width: usize,
    /// Output width of each decoder stage, deepest first; length must equal `stages`.
    pub decoder_channels: Vec<usize>,
    /// Location of the encoder weight archive; required when `init_mode` is pretrained.
    pub pretrained_source: Option<String>,
    /// Seed for random weight initialization.
    pub seed: u64,
}

pub const DEFAULT_DECODER_CHANNELS: [usize; 5] = [256, 128, 64, 32, 16];
pub const MAX_STAGES: usize = 5;

impl ModelConfig {
    /// Five-stage model for `height × width` RGB input with the default decoder.
    pub fn new(encoder: EncoderSpec, height: usize, width: usize) -> Self {
        Self {
            encoder,
            init_mode: InitMode::Random,
            stages: MAX_STAGES,
            num_classes: 4,
            input_height: height,
            input_width: width,
            decoder_channels: DEFAULT_DECODER_CHANNELS.to_vec(),
            pretrained_source: None,
            seed: 0,
        }
    }

    /// Sets the stage count and picks the last `stages` default decoder widths.
    pub fn with_stages(mut self, stages: usize) -> Self {
        self.stages = stages;
        let n = stages.min(MAX_STAGES);
        self.decoder_channels = DEFAULT_DECODER_CHANNELS[MAX_STAGES - n..].to_vec();
        self
    }

    pub fn family(&self) -> EncoderFamily {
        self.encoder.family()
    }

    pub fn validate(&self) -> Result<()> {
        if !(2..=MAX_STAGES).contains(&self.stages) {
            bail!(Validation, "stages must be in 2..={MAX_STAGES}, got {}", self.stages);
        }
        if self.num_classes == 0 {
            bail!(Validation, "num_classes must be at least 1");
        }
        if self.decoder_channels.len() != self.stages {
            bail!(
                Validation,
                "decoder_channels has {} entries but the model has {} stages",
                self.decoder_channels.len(),
                self.stages
            );
        }
        if self.decoder_channels.contains(&0) {
            bail!(Validation, "decoder channel widths must be positive");
        }
        let ok = match &self.encoder {
            EncoderSpec::ResNet { stem, widths, blocks } => {
                *stem > 0 && widths.iter().all(|&w| w > 0) && blocks.iter().all(|&b| b > 0)
            }
            EncoderSpec::DenseNet { init_features, growth, bn_size, block_layers } => {
                *init_features > 0 && *growth > 0 && *bn_size > 0 && block_layers.iter().all(|&l| l > 0)
            }
        };
        if !ok {
            bail!(Validation, "encoder widths, depths and growth must be positive");
        }
        let factor = 1usize << self.stages;
        if self.input_height == 0
            || self.input_width == 0
            || !self.input_height.is_multiple_of(factor)
            || !self.input_width.is_multiple_of(factor)
        {
            bail!(
                Construction,
                "input {}x{} is not divisible by 2^{} = {factor}",
                self.input_height,
                self.input_width,
                self.stages
            );
        }
        if self.init_mode == InitMode::Pretrained && self.pretrained_source.is_none() {
            bail!(Validation, "pretrained initialization requires a pretrained_source");
        }
        Ok(())
    }
}
