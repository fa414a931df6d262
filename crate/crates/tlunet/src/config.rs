//! Experiment configuration in flat key-value text.
//!
//! | key | default |
//! |-----|---------|
//! | `label` | required |
//! | `output_dir` | `runs` |
//! | `data.source` | `synthetic` or `directory` (default `synthetic`) |
//! | `data.root` | none; overridden by `TLUNET_DATA_ROOT` |
//! | `data.images`, `data.annotations` | required for `directory` |
//! | `data.fraction` | `1.0` |
//! | `data.split_seed` | `0` |
//! | `synth.count`, `synth.height`, `synth.width`, `synth.seed`, `synth.defect_probability` | `200`, `64`, `64`, `0`, `0.5` |
//! | `model.encoder` | `resnet18` (`resnet18`, `densenet121`, `resnet`, `densenet`) |
//! | `model.resnet.stem`, `model.resnet.widths`, `model.resnet.blocks` | ResNet-18 |
//! | `model.densenet.init_features`, `.growth`, `.bn_size`, `.block_layers` | DenseNet-121 |
//! | `model.init` | `random` or `pretrained` |
//! | `model.pretrained` | archive path, required when pretrained |
//! | `model.stages`, `model.num_classes` | `5`, `4` |
//! | `model.decoder_channels` | last `stages` of `256,128,64,32,16` |
//! | `model.input_height`, `model.input_width` | taken from the data |
//! | `model.seed` | `0` |
//! | `train.batch_size`, `train.learning_rate`, `train.beta1`, `train.beta2` | `16`, `5e-4`, `0.99`, `0.99` |
//! | `train.max_epochs`, `train.early_stop`, `train.patience`, `train.seed` | `10`, `val_loss`, `3`, `0` |
//! | `loss.lambda_cls`, `loss.lambda_seg`, `loss.pixel_reduction` | `1`, `1`, `mean` |
//! | `eval.batch_size` | `16` |

use std::path::{Path, PathBuf};

use tlunet_core::data::synth::SynthConfig;
use tlunet_core::model::{EncoderSpec, InitMode, ModelConfig};
use tlunet_core::objective::LossConfig;
use tlunet_core::train::TrainConfig;

use crate::error::{fs, Error, Result};
use crate::kv::{join_list, KvMap};

pub const DATA_ROOT_ENV: &str = "TLUNET_DATA_ROOT";

#[derive(Debug, Clone, PartialEq)]
pub enum DataSource {
    Synthetic(SynthConfig),
    Directory { images: PathBuf, annotations: PathBuf },
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub label: String,
    pub output_dir: PathBuf,
    pub data: DataSource,
    pub data_fraction: f64,
    pub split_seed: u64,
    /// Input height and width of zero are filled in from the data.
    pub model: ModelConfig,
    pub train: TrainConfig,
    pub loss: LossConfig,
    pub eval_batch_size: usize,
}

impl ExperimentConfig {
    /// Defaults for a synthetic-corpus run.
    pub fn synthetic(label: impl Into<String>, synth: SynthConfig) -> Self {
        let mut model = ModelConfig::new(EncoderSpec::resnet18(), synth.height, synth.width);
        model.input_height = synth.height;
        model.input_width = synth.width;
        Self {
            label: label.into(),
            output_dir: PathBuf::from("runs"),
            data: DataSource::Synthetic(synth),
            data_fraction: 1.0,
            split_seed: 0,
            model,
            train: TrainConfig::default(),
            loss: LossConfig::default(),
            eval_batch_size: 16,
        }
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)?;
        let kv = KvMap::parse(&text, &path.display().to_string())?;
        let root = std::env::var_os(DATA_ROOT_ENV).map(PathBuf::from);
        Self::from_kv(&kv, root)
    }

    /// `env_root`, when set, replaces `data.root`.
    pub fn from_kv(kv: &KvMap, env_root: Option<PathBuf>) -> Result<Self> {
        let label: String = kv.get("label")?.ok_or_else(|| Error::Config("`label` is required".into()))?;
        if label.is_empty() || label.contains(['/', '\\']) || label == "." || label == ".." {
            return Err(Error::Config(format!("label `{label}` must be a plain directory name")));
        }
        let root: Option<PathBuf> = match env_root {
            Some(r) => {
                kv.raw("data.root");
                Some(r)
            }
            None => kv.get("data.root")?,
        };
        let resolve = |p: PathBuf| match &root {
            Some(r) if p.is_relative() => r.join(p),
            _ => p,
        };
        let source = kv.get_or("data.source", "synthetic".to_string())?;
        let data = match source.as_str() {
            "synthetic" => {
                let d = SynthConfig::default();
                DataSource::Synthetic(SynthConfig {
                    count: kv.get_or("synth.count", d.count)?,
                    height: kv.get_or("synth.height", d.height)?,
                    width: kv.get_or("synth.width", d.width)?,
                    seed: kv.get_or("synth.seed", d.seed)?,
                    defect_probability: kv.get_or("synth.defect_probability", d.defect_probability)?,
                })
            }
            "directory" => {
                let need = |k: &str| -> Result<PathBuf> {
                    kv.get::<PathBuf>(k)?.map(resolve).ok_or_else(|| Error::Config(format!("`{k}` is required for directory data")))
                };
                DataSource::Directory { images: need("data.images")?, annotations: need("data.annotations")? }
            }
            other => return Err(Error::Config(format!("unknown data.source `{other}`"))),
        };

        let (h, w) = match &data {
            DataSource::Synthetic(s) => (s.height, s.width),
            DataSource::Directory { .. } => (0, 0),
        };
        let mut model = model_config_from_kv(kv)?;
        if model.input_height == 0 {
            model.input_height = h;
        }
        if model.input_width == 0 {
            model.input_width = w;
        }

        let t = TrainConfig::default();
        let train = TrainConfig {
            batch_size: kv.get_or("train.batch_size", t.batch_size)?,
            learning_rate: kv.get_or("train.learning_rate", t.learning_rate)?,
            beta1: kv.get_or("train.beta1", t.beta1)?,
            beta2: kv.get_or("train.beta2", t.beta2)?,
            max_epochs: kv.get_or("train.max_epochs", t.max_epochs)?,
            early_stop_metric: kv.get_or("train.early_stop", t.early_stop_metric)?,
            patience: kv.get_or("train.patience", t.patience)?,
            seed: kv.get_or("train.seed", t.seed)?,
        };
        train.validate()?;
        let l = LossConfig::default();
        let loss = LossConfig {
            lambda_cls: kv.get_or("loss.lambda_cls", l.lambda_cls)?,
            lambda_seg: kv.get_or("loss.lambda_seg", l.lambda_seg)?,
            pixel_reduction: kv.get_or("loss.pixel_reduction", l.pixel_reduction)?,
        };
        loss.validate()?;

        let cfg = Self {
            label,
            output_dir: kv.get_or("output_dir", PathBuf::from("runs"))?,
            data,
            data_fraction: kv.get_or("data.fraction", 1.0)?,
            split_seed: kv.get_or("data.split_seed", 0)?,
            model,
            train,
            loss,
            eval_batch_size: kv.get_or("eval.batch_size", 16)?,
        };
        kv.reject_unused()?;
        if !(cfg.data_fraction > 0.0 && cfg.data_fraction <= 1.0) {
            return Err(Error::Config(format!("data.fraction must be in (0, 1], got {}", cfg.data_fraction)));
        }
        Ok(cfg)
    }

    pub fn to_kv(&self) -> KvMap {
        let mut kv = KvMap::default();
        kv.insert("label", &self.label);
        kv.insert("output_dir", self.output_dir.display());
        match &self.data {
            DataSource::Synthetic(s) => {
                kv.insert("data.source", "synthetic");
                kv.insert("synth.count", s.count);
                kv.insert("synth.height", s.height);
                kv.insert("synth.width", s.width);
                kv.insert("synth.seed", s.seed);
                kv.insert("synth.defect_probability", s.defect_probability);
            }
            DataSource::Directory { images, annotations } => {
                kv.insert("data.source", "directory");
                kv.insert("data.images", images.display());
                kv.insert("data.annotations", annotations.display());
            }
        }
        kv.insert("data.fraction", self.data_fraction);
        kv.insert("data.split_seed", self.split_seed);
        model_config_to_kv(&self.model, &mut kv);
        let t = &self.train;
        kv.insert("train.batch_size", t.batch_size);
        kv.insert("train.learning_rate", t.learning_rate);
        kv.insert("train.beta1", t.beta1);
        kv.insert("train.beta2", t.beta2);
        kv.insert("train.max_epochs", t.max_epochs);
        kv.insert("train.early_stop", t.early_stop_metric);
        kv.insert("train.patience", t.patience);
        kv.insert("train.seed", t.seed);
        kv.insert("loss.lambda_cls", self.loss.lambda_cls);
        kv.insert("loss.lambda_seg", self.loss.lambda_seg);
        kv.insert("loss.pixel_reduction", self.loss.pixel_reduction);
        kv.insert("eval.batch_size", self.eval_batch_size);
        kv
    }

    pub fn run_dir(&self) -> PathBuf {
        self.output_dir.join(&self.label)
    }
}

pub fn model_config_from_kv(kv: &KvMap) -> Result<ModelConfig> {
    let name = kv.get_or("model.encoder", "resnet18".to_string())?;
    let mut encoder = match name.as_str() {
        "resnet18" | "resnet" => EncoderSpec::resnet18(),
        "densenet121" | "densenet" => EncoderSpec::densenet121(),
        other => return Err(tlunet_core::Error::Validation(format!("unknown encoder `{other}`")).into()),
    };
    let arr4 = |key: &str| -> Result<Option<[usize; 4]>> {
        kv.list::<usize>(key)?
            .map(|v| v.try_into().map_err(|_| Error::Config(format!("`{key}` needs exactly 4 values"))))
            .transpose()
    };
    match &mut encoder {
        EncoderSpec::ResNet { stem, widths, blocks } => {
            *stem = kv.get_or("model.resnet.stem", *stem)?;
            *widths = arr4("model.resnet.widths")?.unwrap_or(*widths);
            *blocks = arr4("model.resnet.blocks")?.unwrap_or(*blocks);
        }
        EncoderSpec::DenseNet { init_features, growth, bn_size, block_layers } => {
            *init_features = kv.get_or("model.densenet.init_features", *init_features)?;
            *growth = kv.get_or("model.densenet.growth", *growth)?;
            *bn_size = kv.get_or("model.densenet.bn_size", *bn_size)?;
            *block_layers = arr4("model.densenet.block_layers")?.unwrap_or(*block_layers);
        }
    }
    let stages = kv.get_or("model.stages", 5)?;
    let mut cfg = ModelConfig::new(encoder, kv.get_or("model.input_height", 0)?, kv.get_or("model.input_width", 0)?)
        .with_stages(stages);
    if let Some(d) = kv.list("model.decoder_channels")? {
        cfg.decoder_channels = d;
    }
    cfg.num_classes = kv.get_or("model.num_classes", 4)?;
    cfg.init_mode = kv.get_or("model.init", InitMode::Random)?;
    cfg.pretrained_source = kv.get("model.pretrained")?;
    cfg.seed = kv.get_or("model.seed", 0)?;
    Ok(cfg)
}

pub fn model_config_to_kv(cfg: &ModelConfig, kv: &mut KvMap) {
    match &cfg.encoder {
        EncoderSpec::ResNet { stem, widths, blocks } => {
            kv.insert("model.encoder", "resnet");
            kv.insert("model.resnet.stem", stem);
            kv.insert("model.resnet.widths", join_list(widths));
            kv.insert("model.resnet.blocks", join_list(blocks));
        }
        EncoderSpec::DenseNet { init_features, growth, bn_size, block_layers } => {
            kv.insert("model.encoder", "densenet");
            kv.insert("model.densenet.init_features", init_features);
            kv.insert("model.densenet.growth", growth);
            kv.insert("model.densenet.bn_size", bn_size);
            kv.insert("model.densenet.block_layers", join_list(block_layers));
        }
    }
    kv.insert("model.init", cfg.init_mode);
    if let Some(p) = &cfg.pretrained_source {
        kv.insert("model.pretrained", p);
    }
    kv.insert("model.stages", cfg.stages);
    kv.insert("model.num_classes", cfg.num_classes);
    kv.insert("model.decoder_channels", join_list(&cfg.decoder_channels));
    kv.insert("model.input_height", cfg.input_height);
    kv.insert("model.input_width", cfg.input_width);
    kv.insert("model.seed", cfg.seed);
}
