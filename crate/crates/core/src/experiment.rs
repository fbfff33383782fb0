//! Configuration and orchestration behind the `rrr-ecg` binary.
//!
//! An output directory looks like
//!
//! ```text
//! config.txt              effective configuration
//! run_00/manifest.csv     split, one line per segment
//! run_00/train_log.csv
//! run_00/checkpoint.rrr
//! run_00/confusion_counts.csv  confusion_probability.csv  class_metrics.csv
//! run_00/roc_class_<c>.csv     summary.csv
//! summary.csv  aggregate.csv  run_status.csv
//! index.txt               `sha256  path` for every file above
//! ```

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::beats::{rrr_segment, BeatSegment, SegmentError, SpanCensus};
use crate::datasets::{
    balance_normals, cap_per_class, class_counts, derive_seed, make_cv_runs, parse_manifest,
    write_manifest, DatasetError, DatasetSplit, LabelScheme, LabeledSegment, SchemeId,
};
use crate::metrics::{
    class_metrics, confusion, roc_auc, write_class_metrics, write_confusion_counts,
    write_confusion_probabilities, write_roc, write_summary, MetricsError, SummaryRow,
};
use crate::tensornet::{
    evaluate, read_checkpoint, train, write_checkpoint, Architecture, CheckpointError,
    PlateauDecay, ShapeError, TrainConfig, TrainError, TrainLogEntry,
};
use crate::wfdb::{code_symbol, list_records, to_physical, Record, WfdbError, MITBIH_RECORDS};
use crate::{Labeled, Model};

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("{path}:{line}: {message}")]
    ConfigLine { path: PathBuf, line: usize, message: String },
    #[error("unknown configuration key `{0}`")]
    UnknownKey(String),
    #[error("invalid value `{value}` for `{key}`: {reason}")]
    Value { key: String, value: String, reason: String },
    #[error("records missing from {dir}: {names}")]
    MissingRecords { dir: PathBuf, names: String },
    #[error("record {record} has no channel {channel}")]
    Channel { record: String, channel: usize },
    #[error("manifest: {0}")]
    Manifest(String),
    #[error("no segments left after labeling and subsampling")]
    NoSegments,
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error(transparent)]
    Wfdb(#[from] WfdbError),
    #[error(transparent)]
    Segment(#[from] SegmentError),
    #[error(transparent)]
    Dataset(#[from] DatasetError),
    #[error(transparent)]
    Train(#[from] TrainError),
    #[error(transparent)]
    Checkpoint(#[from] CheckpointError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error(transparent)]
    Shape(#[from] ShapeError),
}

pub type Result<T, E = ExperimentError> = std::result::Result<T, E>;

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> ExperimentError + '_ {
    move |source| ExperimentError::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path).map(BufWriter::new).map_err(io_err(path))
}

fn create_dir(path: &Path) -> Result<()> {
    fs::create_dir_all(path).map_err(io_err(path))
}

/// Which set drives checkpoint selection and learning-rate decay.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Selection {
    /// The held-out 20% test split.
    Test,
    /// A stratified slice carved out of the training split.
    Validation,
}

impl fmt::Display for Selection {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Selection::Test => "test",
            Selection::Validation => "validation",
        })
    }
}

impl FromStr for Selection {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "test" => Ok(Selection::Test),
            "validation" => Ok(Selection::Validation),
            _ => Err("expected `test` or `validation`".into()),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub data_dir: PathBuf,
    pub output_dir: PathBuf,
    pub scheme: SchemeId,
    pub channel: usize,
    pub window_length: usize,
    pub balance_fraction: f64,
    pub seed: u64,
    pub n_runs: usize,
    pub epochs: usize,
    pub batch_size: usize,
    pub eval_interval: Option<usize>,
    pub learning_rate: f64,
    pub decay: PlateauDecay,
    /// Restrict to these records. Setting this (or `max_per_class`) turns on
    /// subset mode, where missing records only warn.
    pub records: Option<Vec<String>>,
    pub max_per_class: Option<usize>,
    pub select_on: Selection,
    pub validation_fraction: f64,
    /// Worker threads; 0 lets rayon decide.
    pub threads: usize,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        let t = TrainConfig::default();
        ExperimentConfig {
            data_dir: PathBuf::from("mitdb"),
            output_dir: PathBuf::from("results"),
            scheme: SchemeId::Mitbih5,
            channel: 0,
            window_length: crate::beats::WINDOW_LENGTH,
            balance_fraction: 0.10,
            seed: 1,
            n_runs: 7,
            epochs: t.epochs,
            batch_size: t.batch_size,
            eval_interval: t.eval_interval,
            learning_rate: t.learning_rate,
            decay: t.decay,
            records: None,
            max_per_class: None,
            select_on: Selection::Test,
            validation_fraction: 0.1,
            threads: 0,
        }
    }
}

/// Keys accepted by [`ExperimentConfig::set`], in `config.txt` order.
pub const CONFIG_KEYS: [&str; 20] = [
    "data_dir",
    "output_dir",
    "scheme",
    "channel",
    "window_length",
    "balance_fraction",
    "seed",
    "n_runs",
    "epochs",
    "batch_size",
    "eval_interval",
    "learning_rate",
    "lr_decay_factor",
    "lr_patience",
    "lr_floor",
    "records",
    "max_per_class",
    "select_on",
    "validation_fraction",
    "threads",
];

fn parse_value<V: FromStr>(key: &str, value: &str) -> Result<V>
where
    V::Err: fmt::Display,
{
    value.parse().map_err(|e: V::Err| ExperimentError::Value {
        key: key.to_owned(),
        value: value.to_owned(),
        reason: e.to_string(),
    })
}

impl ExperimentConfig {
    /// Sets one field from its textual form. `-` and `_` are interchangeable
    /// in keys. `eval_interval` and `max_per_class` take `none`; `records`
    /// takes a comma-separated list or `all`.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let key = key.trim().replace('-', "_");
        let value = value.trim();
        let k = key.as_str();
        let optional = |v: &str| -> Result<Option<usize>> {
            if v.eq_ignore_ascii_case("none") || v.eq_ignore_ascii_case("epoch") {
                Ok(None)
            } else {
                parse_value(k, v).map(Some)
            }
        };
        match k {
            "data_dir" => self.data_dir = PathBuf::from(value),
            "output_dir" => self.output_dir = PathBuf::from(value),
            "scheme" => self.scheme = parse_value(k, value)?,
            "channel" => self.channel = parse_value(k, value)?,
            "window_length" => self.window_length = parse_value(k, value)?,
            "balance_fraction" => self.balance_fraction = parse_value(k, value)?,
            "seed" => self.seed = parse_value(k, value)?,
            "n_runs" => self.n_runs = parse_value(k, value)?,
            "epochs" => self.epochs = parse_value(k, value)?,
            "batch_size" => self.batch_size = parse_value(k, value)?,
            "eval_interval" => self.eval_interval = optional(value)?,
            "learning_rate" => self.learning_rate = parse_value(k, value)?,
            "lr_decay_factor" => self.decay.factor = parse_value(k, value)?,
            "lr_patience" => self.decay.patience = parse_value(k, value)?,
            "lr_floor" => self.decay.floor = parse_value(k, value)?,
            "records" => {
                self.records = if value.eq_ignore_ascii_case("all") {
                    None
                } else {
                    Some(
                        value
                            .split(',')
                            .map(str::trim)
                            .filter(|s| !s.is_empty())
                            .map(String::from)
                            .collect(),
                    )
                }
            }
            "max_per_class" => self.max_per_class = optional(value)?,
            "select_on" => self.select_on = parse_value(k, value)?,
            "validation_fraction" => self.validation_fraction = parse_value(k, value)?,
            "threads" => self.threads = parse_value(k, value)?,
            _ => return Err(ExperimentError::UnknownKey(key)),
        }
        Ok(())
    }

    /// Applies `key = value` lines; `#` starts a comment.
    pub fn apply_text(&mut self, text: &str, path: &Path) -> Result<()> {
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let at = |message: String| ExperimentError::ConfigLine {
                path: path.to_path_buf(),
                line: n + 1,
                message,
            };
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| at("expected `key = value`".into()))?;
            self.set(key, value).map_err(|e| at(e.to_string()))?;
        }
        Ok(())
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(io_err(path))?;
        let mut config = ExperimentConfig::default();
        config.apply_text(&text, path)?;
        Ok(config)
    }

    pub fn get(&self, key: &str) -> Option<String> {
        let opt = |v: Option<usize>| v.map_or_else(|| "none".to_owned(), |n| n.to_string());
        Some(match key {
            "data_dir" => self.data_dir.display().to_string(),
            "output_dir" => self.output_dir.display().to_string(),
            "scheme" => self.scheme.to_string(),
            "channel" => self.channel.to_string(),
            "window_length" => self.window_length.to_string(),
            "balance_fraction" => self.balance_fraction.to_string(),
            "seed" => self.seed.to_string(),
            "n_runs" => self.n_runs.to_string(),
            "epochs" => self.epochs.to_string(),
            "batch_size" => self.batch_size.to_string(),
            "eval_interval" => opt(self.eval_interval),
            "learning_rate" => self.learning_rate.to_string(),
            "lr_decay_factor" => self.decay.factor.to_string(),
            "lr_patience" => self.decay.patience.to_string(),
            "lr_floor" => self.decay.floor.to_string(),
            "records" => self.records.as_ref().map_or_else(|| "all".to_owned(), |r| r.join(",")),
            "max_per_class" => opt(self.max_per_class),
            "select_on" => self.select_on.to_string(),
            "validation_fraction" => self.validation_fraction.to_string(),
            "threads" => self.threads.to_string(),
            _ => return None,
        })
    }

    /// Every key as a `key = value` line; parses back to the same config.
    pub fn to_text(&self) -> String {
        CONFIG_KEYS
            .iter()
            .map(|k| format!("{k} = {}\n", self.get(k).unwrap()))
            .collect()
    }

    pub fn subset_mode(&self) -> bool {
        self.records.is_some() || self.max_per_class.is_some()
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |key: &str, value: String, reason: &str| {
            Err(ExperimentError::Value {
                key: key.into(),
                value,
                reason: reason.into(),
            })
        };
        if self.window_length < 3 {
            return bad("window_length", self.window_length.to_string(), "must be at least 3");
        }
        if !(self.balance_fraction > 0.0 && self.balance_fraction <= 1.0) {
            return bad("balance_fraction", self.balance_fraction.to_string(), "must be in (0, 1]");
        }
        if self.n_runs == 0 {
            return bad("n_runs", "0".into(), "must be at least 1");
        }
        if self.select_on == Selection::Validation
            && !(self.validation_fraction > 0.0 && self.validation_fraction < 1.0)
        {
            return bad(
                "validation_fraction",
                self.validation_fraction.to_string(),
                "must be in (0, 1)",
            );
        }
        if self.max_per_class == Some(0) {
            return bad("max_per_class", "0".into(), "must be at least 1");
        }
        Ok(())
    }

    pub fn train_config(&self, seed: u64) -> TrainConfig {
        TrainConfig {
            epochs: self.epochs,
            batch_size: self.batch_size,
            eval_interval: self.eval_interval,
            learning_rate: self.learning_rate,
            decay: self.decay,
            seed,
        }
    }

    pub fn architecture(&self) -> Architecture {
        Architecture {
            input_len: self.window_length,
            ..Architecture::canonical(LabelScheme::new(self.scheme).n_classes())
        }
    }
}

/// One record reduced to what segmentation needs.
#[derive(Debug, Clone)]
pub struct LoadedRecord {
    pub name: String,
    /// Selected lead in physical units.
    pub channel: Vec<f32>,
    pub beats: Vec<(usize, u8)>,
    pub checksums_ok: bool,
}

pub fn load_record(dir: &Path, name: &str, channel: usize) -> Result<LoadedRecord> {
    let record = Record::load(dir, name)?;
    let mut leads = to_physical::<f32>(&record.signal, &record.header)?;
    if channel >= leads.len() {
        return Err(ExperimentError::Channel {
            record: name.to_owned(),
            channel,
        });
    }
    Ok(LoadedRecord {
        name: name.to_owned(),
        channel: leads.swap_remove(channel),
        beats: record.beat_events(),
        checksums_ok: record.checks.iter().all(|c| c.passed()),
    })
}

/// Records to read for `config`, minus those excluded by `scheme`. In full
/// mode every MIT-BIH record must be present.
pub fn resolve_records(config: &ExperimentConfig, scheme: Option<&LabelScheme>) -> Result<Vec<String>> {
    let present = list_records(&config.data_dir)?;
    let wanted: Vec<String> = match &config.records {
        Some(r) => r.clone(),
        None if config.subset_mode() => present.clone(),
        None => MITBIH_RECORDS.iter().map(|s| s.to_string()).collect(),
    };
    let missing: Vec<&str> = wanted
        .iter()
        .filter(|w| !present.contains(w))
        .map(String::as_str)
        .collect();
    if !missing.is_empty() {
        if !config.subset_mode() {
            return Err(ExperimentError::MissingRecords {
                dir: config.data_dir.clone(),
                names: missing.join(" "),
            });
        }
        log::warn!("skipping records missing from {}: {}", config.data_dir.display(), missing.join(" "));
    }
    Ok(wanted
        .into_iter()
        .filter(|w| present.contains(w))
        .filter(|w| {
            let keep = scheme.is_none_or(|s| s.includes_record(w));
            if !keep {
                log::info!("record {w} excluded by the label scheme");
            }
            keep
        })
        .collect())
}

pub fn load_records(config: &ExperimentConfig, names: &[String]) -> Result<Vec<LoadedRecord>> {
    names
        .par_iter()
        .map(|n| load_record(&config.data_dir, n, config.channel))
        .collect()
}

/// Position of the beat at `r_index` with `code` in a sorted beat list.
fn locate(beats: &[(usize, u8)], r_index: usize, code: u8) -> Option<usize> {
    let start = beats.partition_point(|b| b.0 < r_index);
    beats[start..]
        .iter()
        .take_while(|b| b.0 == r_index)
        .position(|b| b.1 == code)
        .map(|p| start + p)
}

/// Window for an interior beat, or `None` when it lacks a neighbour.
fn window_for(record: &LoadedRecord, r_index: usize, code: u8, window_length: usize) -> Option<BeatSegment<f32>> {
    let i = locate(&record.beats, r_index, code)?;
    if i == 0 || i + 1 >= record.beats.len() || record.beats[i + 1].0 >= record.channel.len() {
        return None;
    }
    Some(rrr_segment(
        &record.name,
        &record.channel,
        record.beats[i - 1].0,
        record.beats[i],
        record.beats[i + 1].0,
        window_length,
    ))
}

/// Labeled segments for one experiment plus the splits of every run.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub scheme: LabelScheme,
    pub records: Vec<String>,
    pub items: Vec<Labeled>,
    pub splits: Vec<DatasetSplit>,
}

/// Loads the records, labels every interior beat, subsamples normals (and
/// caps classes in subset mode), then cuts windows for the survivors only.
pub fn build_dataset(config: &ExperimentConfig) -> Result<Dataset> {
    config.validate()?;
    let scheme = LabelScheme::new(config.scheme);
    let names = resolve_records(config, Some(&scheme))?;
    let records = load_records(config, &names)?;

    let mut items: Vec<Labeled> = Vec::new();
    for rec in &records {
        for w in rec.beats.windows(3).filter(|w| w[2].0 < rec.channel.len()) {
            if let Some(class) = scheme.map_label(w[1].1) {
                items.push(LabeledSegment {
                    segment: BeatSegment {
                        record_name: rec.name.clone(),
                        r_index: w[1].0,
                        code: w[1].1,
                        window: Vec::new(),
                        left_extent: 0,
                        right_extent: 0,
                    },
                    class,
                });
            }
        }
    }
    log::info!(
        "{} labeled beats from {} records, per class {:?}",
        items.len(),
        records.len(),
        class_counts(&items, scheme.n_classes())
    );
    let mut items = balance_normals(items, config.balance_fraction, config.seed)?;
    if let Some(cap) = config.max_per_class {
        items = cap_per_class(items, scheme.n_classes(), cap, config.seed);
    }
    if items.is_empty() {
        return Err(ExperimentError::NoSegments);
    }

    let by_name: HashMap<&str, &LoadedRecord> = records.iter().map(|r| (r.name.as_str(), r)).collect();
    items.par_iter_mut().for_each(|item| {
        let rec = by_name[item.segment.record_name.as_str()];
        item.segment = window_for(rec, item.segment.r_index, item.segment.code, config.window_length)
            .expect("interior beat located in its own record");
    });
    log::info!("dataset: per class {:?}", class_counts(&items, scheme.n_classes()));

    let splits = make_cv_runs(&items, &scheme, config.n_runs, config.seed)?;
    Ok(Dataset {
        scheme,
        records: names,
        items,
        splits,
    })
}

/// Stratified slice of `train` held out for checkpoint selection.
/// Returns `(fit, validation)`, both sorted.
pub fn carve_validation(items: &[Labeled], train: &[usize], fraction: f64, seed: u64) -> (Vec<usize>, Vec<usize>) {
    let mut by_class: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for &i in train {
        by_class.entry(items[i].class).or_default().push(i);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(1);
    let (mut fit, mut val) = (Vec::new(), Vec::new());
    for (_, mut members) in by_class {
        members.shuffle(&mut rng);
        let n_val = ((fraction * members.len() as f64).round() as usize).min(members.len().saturating_sub(1));
        val.extend_from_slice(&members[..n_val]);
        fit.extend_from_slice(&members[n_val..]);
    }
    fit.sort_unstable();
    val.sort_unstable();
    (fit, val)
}

fn write_train_log(path: &Path, log: &[TrainLogEntry]) -> Result<()> {
    let mut out = create(path)?;
    let mut body = String::from("epoch,step,train_loss,eval_accuracy,learning_rate\n");
    for e in log {
        body.push_str(&format!(
            "{},{},{:.8},{:.6},{:e}\n",
            e.epoch, e.step, e.train_loss, e.eval_accuracy, e.learning_rate
        ));
    }
    out.write_all(body.as_bytes()).and_then(|_| out.flush()).map_err(io_err(path))
}

/// Scores `model` on `inputs` and writes the confusion, class-metric, ROC and
/// summary files into `dir`.
pub fn score_and_write(
    dir: &Path,
    scheme: &LabelScheme,
    run: usize,
    model: &Model,
    inputs: &[&[f32]],
    targets: &[usize],
) -> Result<SummaryRow> {
    let eval = evaluate(model, inputs)?;
    let k = scheme.n_classes();
    let cm = confusion(targets, &eval.predictions, k)?;
    let metrics = class_metrics(&cm);
    let names = &scheme.class_names;
    let codes: Vec<Vec<u8>> = (0..k).map(|c| scheme.codes_of(c)).collect();

    let mut aucs = Vec::with_capacity(k);
    for c in 0..k {
        let path = dir.join(format!("roc_class_{c}.csv"));
        match roc_auc(&eval.probabilities, targets, c) {
            Ok(roc) => {
                if roc.grade().worse_than_chance() {
                    log::warn!("run {run}: class {} AUC {:.4} is worse than chance", names[c], roc.auc);
                }
                let mut out = create(&path)?;
                write_roc(&mut out, &roc).and_then(|_| out.flush()).map_err(io_err(&path))?;
                aucs.push(Some(roc.auc));
            }
            Err(MetricsError::UndefinedAuc { .. }) => {
                log::warn!("run {run}: AUC undefined for class {}", names[c]);
                aucs.push(None);
            }
            Err(e) => return Err(e.into()),
        }
    }

    let write = |name: &str, f: &dyn Fn(&mut BufWriter<File>) -> io::Result<()>| -> Result<()> {
        let path = dir.join(name);
        let mut out = create(&path)?;
        f(&mut out).and_then(|_| out.flush()).map_err(io_err(&path))
    };
    write("confusion_counts.csv", &|o| write_confusion_counts(o, &cm, names))?;
    write("confusion_probability.csv", &|o| write_confusion_probabilities(o, &cm, names))?;
    write("class_metrics.csv", &|o| write_class_metrics(o, &metrics, names, &codes, &aucs))?;

    let defined: Vec<f64> = aucs.iter().flatten().copied().collect();
    let row = SummaryRow {
        scheme: scheme.id.to_string(),
        run,
        n_test: targets.len(),
        accuracy: metrics.accuracy,
        macro_precision: metrics.macro_precision,
        macro_sensitivity: metrics.macro_sensitivity,
        macro_f1: metrics.macro_f1,
        macro_auc: if defined.is_empty() {
            f64::NAN
        } else {
            defined.iter().sum::<f64>() / defined.len() as f64
        },
    };
    write("summary.csv", &|o| write_summary(o, std::slice::from_ref(&row)))?;
    Ok(row)
}

/// Result of one run: its summary, or why it failed.
#[derive(Debug, Clone, PartialEq)]
pub struct RunOutcome {
    pub run: usize,
    pub result: Result<SummaryRow, String>,
}

fn run_one(config: &ExperimentConfig, data: &Dataset, run: usize) -> Result<SummaryRow> {
    let split = &data.splits[run];
    let dir = config.output_dir.join(format!("run_{run:02}"));
    create_dir(&dir)?;
    let manifest = dir.join("manifest.csv");
    let mut out = create(&manifest)?;
    write_manifest(&mut out, &data.items, split)
        .and_then(|_| out.flush())
        .map_err(io_err(&manifest))?;

    let pair = |i: &usize| (data.items[*i].segment.window.as_slice(), data.items[*i].class);
    let test: Vec<(&[f32], usize)> = split.test.iter().map(pair).collect();
    let (fit_idx, eval_set) = match config.select_on {
        Selection::Test => (split.train.clone(), test.clone()),
        Selection::Validation => {
            let (fit, val) = carve_validation(&data.items, &split.train, config.validation_fraction, split.seed);
            (fit, val.iter().map(pair).collect())
        }
    };
    let fit: Vec<(&[f32], usize)> = fit_idx.iter().map(pair).collect();

    let model = Model::init(&config.architecture(), split.seed);
    log::info!(
        "run {run}: training on {} segments, selecting on {} ({}), testing on {}",
        fit.len(),
        eval_set.len(),
        config.select_on,
        test.len()
    );
    let outcome = match train(model, &fit, &eval_set, &config.train_config(split.seed)) {
        Ok(o) => o,
        Err(TrainError::Diverged { step, log }) => {
            write_train_log(&dir.join("train_log.csv"), &log)?;
            return Err(TrainError::Diverged { step, log }.into());
        }
        Err(e) => return Err(e.into()),
    };
    write_train_log(&dir.join("train_log.csv"), &outcome.log)?;
    write_checkpoint(&dir.join("checkpoint.rrr"), &outcome.best, Some(&outcome.optimizer))?;

    let inputs: Vec<&[f32]> = test.iter().map(|t| t.0).collect();
    let targets: Vec<usize> = test.iter().map(|t| t.1).collect();
    let row = score_and_write(&dir, &data.scheme, run, &outcome.best, &inputs, &targets)?;
    log::info!(
        "run {run}: accuracy {:.4}, macro F1 {:.4}, macro AUC {:.4}",
        row.accuracy,
        row.macro_f1,
        row.macro_auc
    );
    Ok(row)
}

/// Builds the dataset, trains and scores every run in sequence, then writes
/// the aggregate files and the index. A diverged or failed run is recorded
/// and the remaining runs continue.
pub fn run_experiment(config: &ExperimentConfig) -> Result<Vec<RunOutcome>> {
    let data = build_dataset(config)?;
    create_dir(&config.output_dir)?;
    let cfg_path = config.output_dir.join("config.txt");
    fs::write(&cfg_path, config.to_text()).map_err(io_err(&cfg_path))?;

    let mut outcomes = Vec::with_capacity(config.n_runs);
    for run in 0..config.n_runs {
        let result = run_one(config, &data, run).map_err(|e| {
            log::error!("run {run} failed: {e}");
            e.to_string()
        });
        outcomes.push(RunOutcome { run, result });
    }
    write_outcomes(&config.output_dir, &outcomes)?;
    write_index(&config.output_dir)?;
    Ok(outcomes)
}

fn write_outcomes(dir: &Path, outcomes: &[RunOutcome]) -> Result<()> {
    let path = dir.join("run_status.csv");
    let mut text = String::from("run,status,message\n");
    for o in outcomes {
        match &o.result {
            Ok(_) => text.push_str(&format!("{},ok,\n", o.run)),
            Err(e) => text.push_str(&format!("{},failed,\"{}\"\n", o.run, e.replace('"', "'"))),
        }
    }
    fs::write(&path, text).map_err(io_err(&path))?;
    let rows: Vec<SummaryRow> = outcomes.iter().filter_map(|o| o.result.clone().ok()).collect();
    write_aggregate(dir, &rows)
}

/// Mean and sample standard deviation (0 for a single value).
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    if values.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// Writes `summary.csv` (all runs) and `aggregate.csv` (mean ± std).
pub fn write_aggregate(dir: &Path, rows: &[SummaryRow]) -> Result<()> {
    let path = dir.join("summary.csv");
    let mut out = create(&path)?;
    write_summary(&mut out, rows).and_then(|_| out.flush()).map_err(io_err(&path))?;

    let columns: [(&str, fn(&SummaryRow) -> f64); 5] = [
        ("accuracy", |r| r.accuracy),
        ("macro_precision", |r| r.macro_precision),
        ("macro_sensitivity", |r| r.macro_sensitivity),
        ("macro_f1", |r| r.macro_f1),
        ("macro_auc", |r| r.macro_auc),
    ];
    let scheme = rows.first().map_or("", |r| r.scheme.as_str());
    let mut text = String::from("scheme,metric,mean,std,n_runs\n");
    for (name, f) in columns {
        let values: Vec<f64> = rows.iter().map(f).filter(|v| v.is_finite()).collect();
        let (mean, std) = mean_std(&values);
        text.push_str(&format!("{scheme},{name},{mean:.6},{std:.6},{}\n", values.len()));
    }
    let path = dir.join("aggregate.csv");
    fs::write(&path, text).map_err(io_err(&path))
}

/// Re-aggregates the `run_*/summary.csv` files under `dir`.
pub fn report(dir: &Path) -> Result<Vec<SummaryRow>> {
    let mut runs: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(io_err(dir))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            p.is_dir()
                && p.file_name()
                    .and_then(|n| n.to_str())
                    .is_some_and(|n| n.starts_with("run_"))
        })
        .collect();
    runs.sort();
    let mut rows = Vec::new();
    for run in runs {
        let path = run.join("summary.csv");
        if !path.exists() {
            log::warn!("{} has no summary.csv", run.display());
            continue;
        }
        let text = fs::read_to_string(&path).map_err(io_err(&path))?;
        rows.extend(text.lines().skip(1).filter_map(SummaryRow::parse));
    }
    write_aggregate(dir, &rows)?;
    write_index(dir)?;
    Ok(rows)
}

/// Re-scores a checkpoint on the test partition of a manifest, writing the
/// metric files into `out_dir`.
pub fn evaluate_checkpoint(
    config: &ExperimentConfig,
    checkpoint: &Path,
    manifest: &Path,
    out_dir: &Path,
) -> Result<SummaryRow> {
    let scheme = LabelScheme::new(config.scheme);
    let ckpt = read_checkpoint::<f32>(checkpoint, Some(&config.architecture()))?;
    let text = fs::read_to_string(manifest).map_err(io_err(manifest))?;
    let entries: Vec<_> = parse_manifest(&text)
        .map_err(ExperimentError::Manifest)?
        .into_iter()
        .filter(|e| !e.train)
        .collect();

    let mut names: Vec<String> = entries.iter().map(|e| e.record_name.clone()).collect();
    names.sort();
    names.dedup();
    let records = load_records(config, &names)?;
    let by_name: HashMap<&str, &LoadedRecord> = records.iter().map(|r| (r.name.as_str(), r)).collect();

    let mut windows = Vec::with_capacity(entries.len());
    let mut targets = Vec::with_capacity(entries.len());
    for e in &entries {
        if e.class >= scheme.n_classes() || scheme.map_label(e.code) != Some(e.class) {
            return Err(ExperimentError::Manifest(format!(
                "record {} sample {}: code {} class {} does not fit {}",
                e.record_name, e.r_index, e.code, e.class, scheme.id
            )));
        }
        let seg = window_for(by_name[e.record_name.as_str()], e.r_index, e.code, config.window_length)
            .ok_or_else(|| {
                ExperimentError::Manifest(format!(
                    "record {} has no interior beat {} at sample {}",
                    e.record_name,
                    code_symbol(e.code),
                    e.r_index
                ))
            })?;
        windows.push(seg.window);
        targets.push(e.class);
    }
    create_dir(out_dir)?;
    let inputs: Vec<&[f32]> = windows.iter().map(Vec::as_slice).collect();
    let row = score_and_write(out_dir, &scheme, 0, &ckpt.model, &inputs, &targets)?;
    write_index(out_dir)?;
    Ok(row)
}

/// Beat statistics over a set of records.
#[derive(Debug, Clone, PartialEq)]
pub struct Census {
    pub records: Vec<String>,
    /// Beat annotations per code.
    pub code_counts: BTreeMap<u8, usize>,
    /// Beat annotations per class, for each scheme (respecting its record
    /// exclusions).
    pub class_counts: Vec<(SchemeId, Vec<usize>)>,
    pub spans: SpanCensus,
    /// Records whose stored checksums did not match.
    pub checksum_failures: Vec<String>,
}

pub fn census(config: &ExperimentConfig) -> Result<Census> {
    let names = resolve_records(config, None)?;
    let records = load_records(config, &names)?;
    let mut code_counts = BTreeMap::new();
    let mut spans = SpanCensus::new(100);
    for r in &records {
        for &(_, code) in &r.beats {
            *code_counts.entry(code).or_insert(0) += 1;
        }
        let idx: Vec<usize> = r.beats.iter().map(|b| b.0).collect();
        spans.add_record(&idx, config.window_length);
    }
    let class_counts = SchemeId::ALL
        .iter()
        .map(|&id| {
            let scheme = LabelScheme::new(id);
            let mut counts = vec![0; scheme.n_classes()];
            for r in records.iter().filter(|r| scheme.includes_record(&r.name)) {
                for &(_, code) in &r.beats {
                    if let Some(c) = scheme.map_label(code) {
                        counts[c] += 1;
                    }
                }
            }
            (id, counts)
        })
        .collect();
    let checksum_failures = records
        .iter()
        .filter(|r| !r.checksums_ok)
        .map(|r| r.name.clone())
        .collect();
    Ok(Census {
        records: names,
        code_counts,
        class_counts,
        spans,
        checksum_failures,
    })
}

/// Writes `census_codes.csv`, `census_classes.csv` and `census_spans.csv`.
pub fn write_census(dir: &Path, c: &Census) -> Result<()> {
    create_dir(dir)?;
    let mut codes = String::from("code,symbol,count\n");
    for (code, n) in &c.code_counts {
        codes.push_str(&format!("{code},{},{n}\n", code_symbol(*code)));
    }
    let mut classes = String::from("scheme,class,symbol,count\n");
    for (id, counts) in &c.class_counts {
        let scheme = LabelScheme::new(*id);
        for (k, n) in counts.iter().enumerate() {
            classes.push_str(&format!("{id},{k},{},{n}\n", scheme.class_names[k]));
        }
    }
    let mut spans = String::from("span_from,span_to,count\n");
    let w = c.spans.bin_width;
    for (b, n) in c.spans.bins.iter().enumerate().filter(|(_, &n)| n > 0) {
        spans.push_str(&format!("{},{},{n}\n", b * w, (b + 1) * w - 1));
    }
    for (name, text) in [
        ("census_codes.csv", codes),
        ("census_classes.csv", classes),
        ("census_spans.csv", spans),
    ] {
        let path = dir.join(name);
        fs::write(&path, text).map_err(io_err(&path))?;
    }
    write_index(dir)
}

fn collect_files(root: &Path, dir: &Path, out: &mut Vec<PathBuf>) -> Result<()> {
    for entry in fs::read_dir(dir).map_err(io_err(dir))? {
        let path = entry.map_err(io_err(dir))?.path();
        if path.is_dir() {
            collect_files(root, &path, out)?;
        } else if path != root.join("index.txt") {
            out.push(path.strip_prefix(root).unwrap().to_path_buf());
        }
    }
    Ok(())
}

/// Writes `index.txt` with one `sha256  relative/path` line per file under
/// `dir`, sorted by path (the layout `sha256sum -c` reads).
pub fn write_index(dir: &Path) -> Result<()> {
    let mut files = Vec::new();
    collect_files(dir, dir, &mut files)?;
    files.sort();
    let mut text = String::new();
    for rel in files {
        let path = dir.join(&rel);
        let bytes = fs::read(&path).map_err(io_err(&path))?;
        let rel = rel.to_string_lossy().replace('\\', "/");
        text.push_str(&format!("{}  {rel}\n", hex::encode(Sha256::digest(&bytes))));
    }
    let path = dir.join("index.txt");
    fs::write(&path, text).map_err(io_err(&path))
}

/// Parses `index.txt` into `(sha256, relative path)` pairs.
pub fn read_index(dir: &Path) -> Result<Vec<(String, PathBuf)>> {
    let path = dir.join("index.txt");
    let text = fs::read_to_string(&path).map_err(io_err(&path))?;
    text.lines()
        .map(|l| {
            l.split_once("  ")
                .map(|(h, p)| (h.to_owned(), PathBuf::from(p)))
                .ok_or_else(|| ExperimentError::Manifest(format!("bad index line `{l}`")))
        })
        .collect()
}

/// Split and initialisation seed of every run.
pub fn run_seeds(config: &ExperimentConfig) -> Vec<u64> {
    (0..config.n_runs).map(|r| derive_seed(config.seed, r)).collect()
}
