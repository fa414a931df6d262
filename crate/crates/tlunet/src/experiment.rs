//! Experiment orchestration: data preparation, training, evaluation and the
//! artifacts each run leaves in `output_dir/label`.
//!
//! Run directory layout:
//!
//! ```text
//! config.txt          resolved configuration
//! split.txt           TRAIN / VAL / TEST image ids
//! norm.txt            per-channel normalization
//! history.csv         per-epoch losses and validation metrics
//! timing.csv          per-epoch wall-clock seconds
//! checkpoint.tlar     best-epoch weights (+ checkpoint.manifest)
//! test_metrics.csv    per-image, per-class test metrics
//! test_summary.json   aggregated test metrics
//! plots/              box statistics, ROC points, convergence curve
//! ```
//!
//! Everything except `timing.csv` is byte-identical across reruns of the same
//! configuration.

use std::path::{Path, PathBuf};
use std::time::Instant;

use tlunet_core::compare::compare;
use tlunet_core::data::synth::generate_corpus;
use tlunet_core::data::{build_splits, compute_norm_stats, subsample_training, DatasetSplit, Fractions, ImageRecord, NormStats};
use tlunet_core::metrics::MetricReport;
use tlunet_core::model::{build_model, load_pretrained, EncoderSpec, InitMode, LoadReport, UNet};
use tlunet_core::train::{evaluate, train_with, Clock, EpochRecord, Evaluation, TrainingHistory};

use crate::archive::{load_encoder_archive, save_checkpoint};
use crate::config::{DataSource, ExperimentConfig};
use crate::dataset::load_dataset;
use crate::error::{fs, Error, Result};
use crate::kv::KvMap;
use crate::report;

pub const CONFIG_FILE: &str = "config.txt";
pub const SPLIT_FILE: &str = "split.txt";
pub const NORM_FILE: &str = "norm.txt";
pub const HISTORY_FILE: &str = "history.csv";
pub const TIMING_FILE: &str = "timing.csv";
pub const CHECKPOINT_FILE: &str = "checkpoint.tlar";
pub const METRICS_FILE: &str = "test_metrics.csv";
pub const SUMMARY_FILE: &str = "test_summary.json";
pub const PLOTS_DIR: &str = "plots";

/// Wall-clock time since construction.
#[derive(Debug)]
pub struct SystemClock(Instant);

impl Default for SystemClock {
    fn default() -> Self {
        Self(Instant::now())
    }
}

impl Clock for SystemClock {
    fn now(&self) -> f64 {
        self.0.elapsed().as_secs_f64()
    }
}

/// Data ready for training: splits after subsampling plus normalization.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub split: DatasetSplit<ImageRecord>,
    pub norm: NormStats,
    /// Model configuration with input size filled in from the data.
    pub config: ExperimentConfig,
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub run_dir: PathBuf,
    pub history: TrainingHistory,
    pub test: Evaluation,
    pub load_report: Option<LoadReport>,
}

/// Fails before any work if inputs named by the config are missing.
pub fn check_inputs(cfg: &ExperimentConfig) -> Result<()> {
    let mut paths: Vec<&Path> = Vec::new();
    if let DataSource::Directory { images, annotations } = &cfg.data {
        paths.push(images);
        paths.push(annotations);
    }
    if cfg.model.init_mode == InitMode::Pretrained {
        match &cfg.model.pretrained_source {
            Some(p) => paths.push(Path::new(p)),
            None => return Err(Error::Config("model.init = pretrained needs model.pretrained".into())),
        }
    }
    for p in paths {
        if !p.exists() {
            return Err(Error::io(p, std::io::Error::new(std::io::ErrorKind::NotFound, "input not found")));
        }
    }
    Ok(())
}

pub fn load_records(cfg: &ExperimentConfig) -> Result<Vec<ImageRecord>> {
    match &cfg.data {
        DataSource::Synthetic(s) => Ok(generate_corpus(s)),
        DataSource::Directory { images, annotations } => load_dataset(images, annotations, cfg.model.num_classes),
    }
}

/// Loads data, splits it, applies the training fraction and computes
/// normalization statistics on the remaining training images.
pub fn prepare(cfg: &ExperimentConfig) -> Result<Prepared> {
    check_inputs(cfg)?;
    let records = load_records(cfg)?;
    let first = records[0].image();
    let (h, w) = (first.height(), first.width());
    if let Some(r) = records.iter().find(|r| r.image().height() != h || r.image().width() != w) {
        return Err(tlunet_core::Error::Validation(format!(
            "{} is {}x{}, expected {h}x{w} like the other images",
            r.image_id(),
            r.image().height(),
            r.image().width()
        ))
        .into());
    }
    let mut config = cfg.clone();
    if config.model.input_height == 0 {
        config.model.input_height = h;
    }
    if config.model.input_width == 0 {
        config.model.input_width = w;
    }
    if (config.model.input_height, config.model.input_width) != (h, w) {
        return Err(Error::Config(format!(
            "model input {}x{} does not match data {h}x{w}",
            config.model.input_height, config.model.input_width
        )));
    }
    config.model.validate()?;
    let split = build_splits(records, cfg.split_seed, Fractions::default())?;
    let split = if cfg.data_fraction < 1.0 { subsample_training(&split, cfg.data_fraction)? } else { split };
    let norm = compute_norm_stats(split.train.iter().map(ImageRecord::image))?;
    Ok(Prepared { split, norm, config })
}

fn prepare_files(p: &Prepared) -> [(&'static str, String); 3] {
    [
        (CONFIG_FILE, p.config.to_kv().to_text()),
        (SPLIT_FILE, report::split_manifest(&p.split)),
        (NORM_FILE, report::norm_text(&p.norm)),
    ]
}

fn dir_entries(dir: &Path) -> Result<Vec<String>> {
    if !dir.exists() {
        return Ok(Vec::new());
    }
    let mut names = Vec::new();
    for e in std::fs::read_dir(dir).map_err(|e| Error::io(dir, e))? {
        let e = e.map_err(|e| Error::io(dir, e))?;
        names.push(e.file_name().to_string_lossy().into_owned());
    }
    names.sort();
    Ok(names)
}

/// Writes the preparation artifacts into a fresh run directory.
pub fn write_prepared(p: &Prepared) -> Result<PathBuf> {
    let dir = p.config.run_dir();
    if !dir_entries(&dir)?.is_empty() {
        return Err(Error::Config(format!("run directory {} is not empty; resuming is not supported", dir.display())));
    }
    fs::create_dir_all(&dir)?;
    for (name, text) in prepare_files(p) {
        fs::write(&dir.join(name), text)?;
    }
    Ok(dir)
}

/// Accepts an empty directory, or one holding exactly the output of
/// [`write_prepared`] for the same configuration.
fn claim_run_dir(p: &Prepared) -> Result<PathBuf> {
    let dir = p.config.run_dir();
    let entries = dir_entries(&dir)?;
    if entries.is_empty() {
        return write_prepared(p);
    }
    let files = prepare_files(p);
    let mut expected: Vec<&str> = files.iter().map(|f| f.0).collect();
    expected.sort_unstable();
    if entries != expected {
        return Err(Error::Config(format!("run directory {} is not empty; resuming is not supported", dir.display())));
    }
    for (name, text) in files {
        if fs::read_to_string(&dir.join(name))? != text {
            return Err(Error::Config(format!("{} was prepared with a different configuration", dir.join(name).display())));
        }
    }
    Ok(dir)
}

fn build_initial_model(cfg: &ExperimentConfig) -> Result<(UNet<f32>, Option<LoadReport>)> {
    let mut model = build_model::<f32>(&cfg.model)?;
    let load = match (cfg.model.init_mode, &cfg.model.pretrained_source) {
        (InitMode::Pretrained, Some(src)) => {
            let tensors = load_encoder_archive::<f32>(Path::new(src), cfg.model.family())?;
            Some(load_pretrained(&mut model, &tensors)?)
        }
        _ => None,
    };
    Ok((model, load))
}

/// Writes the per-run plot-data files.
pub fn write_run_plots(dir: &Path, label: &str, history: &TrainingHistory, test: &MetricReport) -> Result<()> {
    let plots = dir.join(PLOTS_DIR);
    fs::create_dir_all(&plots)?;
    fs::write(&plots.join("box_stats.csv"), report::box_stats_csv(&[(label, test)]))?;
    fs::write(&plots.join("roc.csv"), report::roc_csv(test))?;
    fs::write(&plots.join("convergence.csv"), report::convergence_csv(&[(label, history)]))
}

/// Full pipeline for one configuration. `on_epoch` sees each epoch as it ends.
pub fn run_experiment(cfg: &ExperimentConfig, on_epoch: &mut dyn FnMut(&EpochRecord)) -> Result<RunOutcome> {
    let prepared = prepare(cfg)?;
    let (mut model, load_report) = build_initial_model(&prepared.config)?;
    let dir = claim_run_dir(&prepared)?;
    if let Some(lr) = &load_report {
        let mut text = format!("loaded {}\n", lr.loaded.len());
        for name in &lr.skipped {
            text.push_str(&format!("skipped {name}\n"));
        }
        fs::write(&dir.join("pretrained_load.txt"), text)?;
    }
    let c = &prepared.config;
    let history = train_with(&mut model, &prepared.split, &prepared.norm, &c.train, &c.loss, &SystemClock::default(), on_epoch)?;
    fs::write(&dir.join(HISTORY_FILE), report::history_csv(&history))?;
    fs::write(&dir.join(TIMING_FILE), report::timing_csv(&history))?;
    save_checkpoint(&dir.join(CHECKPOINT_FILE), &model, &prepared.norm)?;

    let test = evaluate(&model, &prepared.split.test, &prepared.norm, &c.loss, c.eval_batch_size)?;
    fs::write(&dir.join(METRICS_FILE), report::per_image_csv(&test.report))?;
    fs::write(&dir.join(SUMMARY_FILE), report::summary_json(&test.report))?;
    write_run_plots(&dir, &c.label, &history, &test.report)?;
    Ok(RunOutcome { run_dir: dir, history, test, load_report })
}

/// A finished run read back from disk.
#[derive(Debug, Clone)]
pub struct StoredRun {
    pub label: String,
    pub history: TrainingHistory,
    pub report: MetricReport,
}

pub fn read_run(dir: &Path) -> Result<StoredRun> {
    let label = match KvMap::parse(&fs::read_to_string(&dir.join(CONFIG_FILE))?, "config.txt")?.raw("label") {
        Some(l) => l.to_string(),
        None => dir.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default(),
    };
    let history = report::parse_history_csv(&fs::read_to_string(&dir.join(HISTORY_FILE))?)?;
    let report = report::parse_per_image_csv(&fs::read_to_string(&dir.join(METRICS_FILE))?)?;
    Ok(StoredRun { label, history, report })
}

/// Cross-run plot data computed only from persisted run files.
pub fn write_reports(runs: &[StoredRun], out: &Path) -> Result<()> {
    if runs.is_empty() {
        return Err(tlunet_core::Error::Validation("no runs to report".into()).into());
    }
    fs::create_dir_all(out)?;
    let reports: Vec<(&str, &MetricReport)> = runs.iter().map(|r| (r.label.as_str(), &r.report)).collect();
    let histories: Vec<(&str, &TrainingHistory)> = runs.iter().map(|r| (r.label.as_str(), &r.history)).collect();
    fs::write(&out.join("box_stats.csv"), report::box_stats_csv(&reports))?;
    fs::write(&out.join("convergence.csv"), report::convergence_csv(&histories))?;
    for r in runs {
        fs::write(&out.join(format!("roc_{}.csv", r.label)), report::roc_csv(&r.report))?;
    }
    Ok(())
}

/// Writes `a` versus `b` comparison files named `{stem}.json`,
/// `{stem}_dice_diff.csv` and `{stem}_dice_hist.csv`.
pub fn write_comparison(a: &StoredRun, b: &StoredRun, out: &Path, stem: &str) -> Result<tlunet_core::compare::Comparison> {
    let c = compare(&a.report, &b.report)?;
    fs::create_dir_all(out)?;
    fs::write(&out.join(format!("{stem}.json")), report::comparison_json(&a.label, &b.label, &c))?;
    fs::write(&out.join(format!("{stem}_dice_diff.csv")), report::dice_diff_csv(&c))?;
    fs::write(&out.join(format!("{stem}_dice_hist.csv")), report::dice_diff_hist_csv(&c))?;
    Ok(c)
}

/// One encoder family in the grid, with its pretrained archive.
#[derive(Debug, Clone)]
pub struct GridArm {
    pub encoder: EncoderSpec,
    pub pretrained: PathBuf,
}

/// Random and pretrained variants of `base` for each arm, labelled
/// `{family}-{init}` under `base.output_dir/base.label`.
pub fn grid_configs(base: &ExperimentConfig, arms: &[GridArm]) -> Vec<ExperimentConfig> {
    let mut out = Vec::new();
    for arm in arms {
        for init in [InitMode::Random, InitMode::Pretrained] {
            let mut c = base.clone();
            c.output_dir = base.run_dir();
            c.label = format!("{}-{}", arm.encoder.family(), init);
            c.model.encoder = arm.encoder.clone();
            c.model.init_mode = init;
            c.model.pretrained_source = (init == InitMode::Pretrained).then(|| arm.pretrained.display().to_string());
            out.push(c);
        }
    }
    out
}

#[derive(Debug, Clone)]
pub struct GridOutcome {
    pub runs: Vec<RunOutcome>,
    pub comparisons: Vec<(String, tlunet_core::compare::Comparison)>,
}

/// Runs the grid sequentially, then writes cross-run plot data to
/// `report/` and pretrained-versus-random comparisons to `compare/`, all
/// computed from the persisted run files.
pub fn run_grid(
    base: &ExperimentConfig,
    arms: &[GridArm],
    on_epoch: &mut dyn FnMut(&str, &EpochRecord),
) -> Result<GridOutcome> {
    let configs = grid_configs(base, arms);
    for c in &configs {
        check_inputs(c)?;
    }
    let mut runs = Vec::new();
    for c in &configs {
        runs.push(run_experiment(c, &mut |e| on_epoch(&c.label, e))?);
    }
    let stored = runs.iter().map(|r| read_run(&r.run_dir)).collect::<Result<Vec<_>>>()?;
    let root = base.run_dir();
    write_reports(&stored, &root.join("report"))?;
    let mut comparisons = Vec::new();
    for pair in stored.chunks(2) {
        let (random, pretrained) = (&pair[0], &pair[1]);
        let stem = format!("{}_vs_{}", pretrained.label, random.label);
        let c = write_comparison(pretrained, random, &root.join("compare"), &stem)?;
        comparisons.push((stem, c));
    }
    Ok(GridOutcome { runs, comparisons })
}
