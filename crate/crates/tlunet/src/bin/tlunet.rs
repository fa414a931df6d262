use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use tlunet::archive::{encoder_archive, load_checkpoint};
use tlunet::config::ExperimentConfig;
use tlunet::dataset::{load_dataset, load_image, write_dataset};
use tlunet::error::{Error, Result};
use tlunet::experiment::{self, GridArm};
use tlunet::kv::KvMap;
use tlunet::overlay::save_overlay;
use tlunet::report;
use tlunet_core::data::synth::{generate_corpus, SynthConfig};
use tlunet_core::data::MaskSet;
use tlunet_core::model::EncoderSpec;
use tlunet_core::objective::LossConfig;
use tlunet_core::train::{evaluate, predict, EpochRecord};

#[derive(Parser)]
#[command(name = "tlunet", version, about = "U-Net defect segmentation with transferable encoders")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

/// Config file plus `key=value` overrides.
#[derive(Args)]
struct ConfigArgs {
    /// Flat key-value config file.
    #[arg(short, long)]
    config: Option<PathBuf>,
    /// Override a config key, e.g. `--set train.max_epochs=3`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    #[arg(long)]
    label: Option<String>,
    #[arg(long)]
    output_dir: Option<PathBuf>,
    #[arg(long)]
    encoder: Option<String>,
    /// `random` or `pretrained`.
    #[arg(long)]
    init: Option<String>,
    /// Encoder archive for pretrained initialization.
    #[arg(long)]
    pretrained: Option<PathBuf>,
    #[arg(long)]
    data_fraction: Option<f64>,
}

impl ConfigArgs {
    fn load(&self) -> Result<ExperimentConfig> {
        let mut kv = match &self.config {
            Some(p) => {
                let text = std::fs::read_to_string(p).map_err(|e| Error::io(p, e))?;
                KvMap::parse(&text, &p.display().to_string())?
            }
            None => KvMap::default(),
        };
        for o in &self.overrides {
            let (k, v) = o.split_once('=').ok_or_else(|| Error::Config(format!("override `{o}` is not KEY=VALUE")))?;
            kv.insert(k.trim(), v.trim());
        }
        let flags = [
            ("label", self.label.clone()),
            ("output_dir", self.output_dir.as_ref().map(|p| p.display().to_string())),
            ("model.encoder", self.encoder.clone()),
            ("model.init", self.init.clone()),
            ("model.pretrained", self.pretrained.as_ref().map(|p| p.display().to_string())),
            ("data.fraction", self.data_fraction.map(|f| f.to_string())),
        ];
        for (k, v) in flags {
            if let Some(v) = v {
                kv.insert(k, v);
            }
        }
        let root = std::env::var_os(tlunet::config::DATA_ROOT_ENV).map(PathBuf::from);
        ExperimentConfig::from_kv(&kv, root)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Split the data and compute normalization statistics.
    Prepare(ConfigArgs),
    /// Train one configuration and evaluate it on the test split.
    Train(ConfigArgs),
    /// Run random and pretrained variants of both encoder families.
    Grid {
        #[command(flatten)]
        config: ConfigArgs,
        #[arg(long)]
        resnet_archive: PathBuf,
        #[arg(long)]
        densenet_archive: PathBuf,
        /// Encoder specs come from these config files instead of the reference ones.
        #[arg(long)]
        resnet_config: Option<PathBuf>,
        #[arg(long)]
        densenet_config: Option<PathBuf>,
    },
    /// Evaluate a checkpoint on an annotated image directory.
    Evaluate {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        images: PathBuf,
        #[arg(long)]
        annotations: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 16)]
        batch_size: usize,
    },
    /// Predict masks for images; prints annotation-format CSV.
    Predict {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(required = true)]
        images: Vec<PathBuf>,
        /// Ground truth for overlays (annotation CSV).
        #[arg(long)]
        truth: Option<PathBuf>,
        /// Directory for overlay PNGs.
        #[arg(long)]
        overlay_dir: Option<PathBuf>,
    },
    /// Compare two runs' test metrics (a minus b).
    Compare {
        run_a: PathBuf,
        run_b: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value = "comparison")]
        name: String,
    },
    /// Regenerate plot data from finished run directories.
    Report {
        #[arg(required = true)]
        runs: Vec<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Write a synthetic corpus as PNG files plus annotation CSV.
    Synth {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 200)]
        count: usize,
        #[arg(long, default_value_t = 64)]
        height: usize,
        #[arg(long, default_value_t = 64)]
        width: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Extract encoder weights from a checkpoint into an encoder archive.
    ExportEncoder {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

fn print_epoch(label: &str, e: &EpochRecord) {
    eprintln!(
        "[{label}] epoch {:>2}  train {:.4}  val {:.4}  dice {:.4}  mla {:.4}  ({:.1}s)",
        e.epoch, e.train_loss, e.val_loss, e.val_dice, e.val_mla, e.seconds
    );
}

fn encoder_from(path: &Option<PathBuf>, default: EncoderSpec) -> Result<EncoderSpec> {
    match path {
        None => Ok(default),
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| Error::io(p, e))?;
            let kv = KvMap::parse(&text, &p.display().to_string())?;
            Ok(tlunet::config::model_config_from_kv(&kv)?.encoder)
        }
    }
}

fn class_count_of(checkpoint: &Path) -> Result<(tlunet_core::model::UNet<f32>, tlunet_core::data::NormStats, usize)> {
    let (model, norm) = load_checkpoint::<f32>(checkpoint)?;
    let n = model.config().num_classes;
    Ok((model, norm, n))
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Prepare(args) => {
            let cfg = args.load()?;
            let p = experiment::prepare(&cfg)?;
            let dir = experiment::write_prepared(&p)?;
            println!(
                "{}: train {} val {} test {}",
                dir.display(),
                p.split.train.len(),
                p.split.val.len(),
                p.split.test.len()
            );
        }
        Command::Train(args) => {
            let cfg = args.load()?;
            let label = cfg.label.clone();
            let out = experiment::run_experiment(&cfg, &mut |e| print_epoch(&label, e))?;
            let r = &out.test.report;
            println!(
                "{}: best epoch {}  test dice {:.4}  iou {:.4}  mla {:.4}",
                out.run_dir.display(),
                out.history.best_epoch,
                r.mean_dice,
                r.mean_iou,
                r.mla
            );
        }
        Command::Grid { config, resnet_archive, densenet_archive, resnet_config, densenet_config } => {
            let base = config.load()?;
            let arms = [
                GridArm { encoder: encoder_from(&resnet_config, EncoderSpec::resnet18())?, pretrained: resnet_archive },
                GridArm {
                    encoder: encoder_from(&densenet_config, EncoderSpec::densenet121())?,
                    pretrained: densenet_archive,
                },
            ];
            let out = experiment::run_grid(&base, &arms, &mut |l, e| print_epoch(l, e))?;
            for (stem, c) in &out.comparisons {
                println!(
                    "{stem}: improved {:.3}  mean delta {:.4}  mla {:.4} vs {:.4}",
                    c.improved_fraction, c.mean_delta, c.mla_a, c.mla_b
                );
            }
        }
        Command::Evaluate { checkpoint, images, annotations, out, batch_size } => {
            let (model, norm, n) = class_count_of(&checkpoint)?;
            let records = load_dataset(&images, &annotations, n)?;
            let eval = evaluate(&model, &records, &norm, &LossConfig::default(), batch_size)?;
            std::fs::create_dir_all(&out).map_err(|e| Error::io(&out, e))?;
            let write = |name: &str, text: String| {
                let p = out.join(name);
                std::fs::write(&p, text).map_err(|e| Error::io(&p, e))
            };
            write(experiment::METRICS_FILE, report::per_image_csv(&eval.report))?;
            write(experiment::SUMMARY_FILE, report::summary_json(&eval.report))?;
            write("roc.csv", report::roc_csv(&eval.report))?;
            println!("dice {:.4}  iou {:.4}  mla {:.4}  loss {:.4}", eval.report.mean_dice, eval.report.mean_iou, eval.report.mla, eval.mean_loss);
        }
        Command::Predict { checkpoint, images, truth, overlay_dir } => {
            let (model, norm, n) = class_count_of(&checkpoint)?;
            let truth_rows = match &truth {
                Some(p) => {
                    let text = std::fs::read_to_string(p).map_err(|e| Error::io(p, e))?;
                    tlunet::dataset::parse_annotations(&text, n)?
                }
                None => Vec::new(),
            };
            if let Some(d) = &overlay_dir {
                std::fs::create_dir_all(d).map_err(|e| Error::io(d, e))?;
            }
            let mut w = csv::Writer::from_writer(std::io::stdout().lock());
            let csv_err = |e: csv::Error| Error::Parse(format!("writing output: {e}"));
            w.write_record(["ImageId", "ClassId", "EncodedPixels", "ClassProb"]).map_err(csv_err)?;
            for path in &images {
                let image = load_image(path)?;
                let id = path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
                let p = predict(&model, &image, &norm)?;
                for m in 0..n {
                    w.write_record([id.clone(), (m + 1).to_string(), p.rles[m].to_string(), p.class_probs[m].to_string()])
                        .map_err(csv_err)?;
                }
                if let Some(d) = &overlay_dir {
                    let mut t = MaskSet::empty(image.height(), image.width(), n);
                    for a in truth_rows.iter().filter(|a| a.image_id == id) {
                        *t.mask_mut(a.class_id - 1) =
                            tlunet_core::data::rle_decode(&a.rle, image.height(), image.width())?;
                    }
                    let stem = Path::new(&id).file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or(id.clone());
                    save_overlay(&d.join(format!("{stem}_overlay.png")), &image, &t, &p.masks)?;
                }
            }
            w.flush().map_err(|e| Error::io("stdout", e))?;
        }
        Command::Compare { run_a, run_b, out, name } => {
            let a = experiment::read_run(&run_a)?;
            let b = experiment::read_run(&run_b)?;
            let c = experiment::write_comparison(&a, &b, &out, &name)?;
            println!(
                "{} vs {}: improved {:.3}  mean delta {:.4}  mean |delta| {:.4}",
                a.label, b.label, c.improved_fraction, c.mean_delta, c.mean_abs_delta
            );
        }
        Command::Report { runs, out } => {
            let stored = runs.iter().map(|d| experiment::read_run(d)).collect::<Result<Vec<_>>>()?;
            experiment::write_reports(&stored, &out)?;
            println!("wrote {}", out.display());
        }
        Command::Synth { out, count, height, width, seed } => {
            let cfg = SynthConfig { count, height, width, seed, ..SynthConfig::default() };
            let records = generate_corpus(&cfg);
            write_dataset(&records, &out.join("images"), &out.join("annotations.csv"))?;
            println!("wrote {count} images to {}", out.display());
        }
        Command::ExportEncoder { checkpoint, out } => {
            let (model, _) = load_checkpoint::<f32>(&checkpoint)?;
            encoder_archive(&model).save(&out)?;
            println!("wrote {}", out.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
