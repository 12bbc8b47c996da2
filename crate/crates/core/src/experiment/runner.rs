use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::config::ResolvedExperiment;
use crate::data::{
    contaminate, load_csv, normalize, patch_split, split_train_test, DatasetSplit, InputTransform,
    RawDataset,
};
use crate::error::{Error, Result};
use crate::metrics::{aggregate_trials, ScoreReport, TrialSummary};
use crate::model::{save_checkpoint, Checkpoint, Detector, ModelConfig, TrainingTrace};
use crate::numerics::Tensor;

/// Present in the output directory until every file has been written.
pub const INCOMPLETE_MARKER: &str = "INCOMPLETE";

/// Everything one trial produces.
#[derive(Debug, Clone)]
pub struct TrialOutput {
    pub seed: u64,
    pub split: DatasetSplit,
    pub detector: Detector,
    pub transform: InputTransform,
    pub trace: TrainingTrace,
    pub report: ScoreReport,
    /// Mean attention maps over the normal training rows, one per subset.
    pub attention_maps: Vec<Tensor>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialMetrics {
    pub seed: u64,
    pub auc_pr: f64,
    pub auc_roc: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsFile {
    pub dataset: String,
    pub config_hash: String,
    pub per_trial: Vec<TrialMetrics>,
    pub auc_pr_mean: f64,
    pub auc_pr_std: f64,
    pub auc_roc_mean: f64,
    pub auc_roc_std: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub dataset: String,
    pub config_hash: String,
    pub files: Vec<String>,
}

#[derive(Debug, Clone)]
pub struct ExperimentOutcome {
    pub trials: Vec<TrialOutput>,
    pub summary: TrialSummary,
    pub metrics: MetricsFile,
    pub files: Vec<PathBuf>,
}

/// Progress notifications from [`run_experiment_with`].
#[derive(Debug, Clone, Copy)]
pub enum RunEvent<'a> {
    TrialStarted {
        trial: usize,
        seed: u64,
    },
    TrialFinished {
        trial: usize,
        report: &'a ScoreReport,
    },
}

/// SHA-256 of the config snapshot, hex encoded. Fields that do not affect
/// results (output location, checkpoint saving) are left out.
pub fn config_hash(exp: &ResolvedExperiment) -> String {
    let canonical = ResolvedExperiment {
        output_dir: PathBuf::new(),
        save_checkpoints: false,
        ..exp.clone()
    };
    let digest = Sha256::digest(canonical.to_toml().as_bytes());
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

/// Loads the experiment's dataset and checks it against the expected shape.
pub fn load_experiment_dataset(exp: &ResolvedExperiment) -> Result<RawDataset> {
    let mut ds = load_csv(&exp.dataset_path, &exp.label_column)?;
    ds.name = exp.dataset.clone();
    if let Some((rows, attrs, anomalies)) = exp.expected_shape {
        let found = (ds.num_rows(), ds.num_attributes(), ds.num_anomalies());
        if found != (rows, attrs, anomalies) {
            return Err(Error::Dataset(format!(
                "{}: expected {rows} rows, {attrs} attributes, {anomalies} anomalies; found {} / {} / {}",
                exp.dataset, found.0, found.1, found.2
            )));
        }
    }
    Ok(ds)
}

/// Split, normalize, patch and contaminate `ds` for one trial seed.
pub fn prepare_split(
    exp: &ResolvedExperiment,
    ds: &RawDataset,
    seed: u64,
) -> Result<(DatasetSplit, InputTransform)> {
    let split = split_train_test(ds, seed)?;
    let mut split = match exp.normalization {
        Some(scheme) => normalize(&split, scheme)?,
        None => split,
    };
    split.train = patch_split(&split.train, exp.preprocessing)?;
    split.test = patch_split(&split.test, exp.preprocessing)?;
    let transform = InputTransform {
        normalization: split.normalization.clone(),
        layout: exp.preprocessing,
    };
    Ok((
        contaminate(&split, exp.contamination_ratio, seed)?,
        transform,
    ))
}

/// One full trial: data preparation, training, scoring and attention maps.
pub fn run_trial(exp: &ResolvedExperiment, ds: &RawDataset, seed: u64) -> Result<TrialOutput> {
    let (split, transform) = prepare_split(exp, ds, seed)?;
    let (m, c) = transform.output_dims(ds.num_attributes());
    let config = ModelConfig::new(m, c, seed, exp.hyper);
    let (detector, trace) = Detector::fit(config, &split.train)?;
    let scores = detector.score_samples(&split.test)?;
    let report = ScoreReport::new(seed, scores, split.test_labels.clone())?;
    let clean: Vec<usize> = (0..split.num_train())
        .filter(|&i| !split.contaminants.contains(&split.train_origin[i]))
        .collect();
    let attention_maps = detector.mean_attention_maps(&split.train.select_rows(&clean))?;
    Ok(TrialOutput {
        seed,
        split,
        detector,
        transform,
        trace,
        report,
        attention_maps,
    })
}

/// Runs every trial without progress output. See [`run_experiment_with`].
pub fn run_experiment(exp: &ResolvedExperiment) -> Result<ExperimentOutcome> {
    run_experiment_with(exp, |_| {})
}

/// Runs every trial (concurrently when threads are available) and writes the
/// results bundle into `exp.output_dir`:
///
/// - `config.toml`: the resolved configuration
/// - `scores_trial{i}.csv`: test-row scores and labels
/// - `loss_trace_trial{i}.csv`: per-epoch mean losses
/// - `attention_trial{i}_head{h}.csv`: mean attention map per subset
/// - `checkpoint_trial{i}.ckpt`: only with `save_checkpoints`
/// - `metrics.json` and `manifest.json`
///
/// An `INCOMPLETE` file is present until the run succeeds; on failure it
/// holds the error message.
pub fn run_experiment_with(
    exp: &ResolvedExperiment,
    on_event: impl Fn(RunEvent<'_>) + Sync,
) -> Result<ExperimentOutcome> {
    let dir = &exp.output_dir;
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    clear_previous_outputs(dir)?;
    let marker = dir.join(INCOMPLETE_MARKER);
    write_file(&marker, b"run in progress\n")?;
    let result = run_and_write(exp, &on_event);
    match &result {
        Ok(_) => fs::remove_file(&marker).map_err(|e| Error::io(&marker, e))?,
        Err(e) => {
            let _ = fs::write(&marker, format!("{e}\n"));
        }
    }
    result
}

fn run_and_write(
    exp: &ResolvedExperiment,
    on_event: &(impl Fn(RunEvent<'_>) + Sync),
) -> Result<ExperimentOutcome> {
    let dir = &exp.output_dir;
    let hash = config_hash(exp);
    let mut files = Vec::new();
    let snapshot = dir.join("config.toml");
    write_file(&snapshot, exp.to_toml().as_bytes())?;
    files.push(snapshot);

    let ds = load_experiment_dataset(exp)?;
    let trials: Vec<TrialOutput> = exp
        .trial_seeds
        .par_iter()
        .enumerate()
        .map(|(i, &seed)| {
            on_event(RunEvent::TrialStarted { trial: i, seed });
            let out = run_trial(exp, &ds, seed)?;
            on_event(RunEvent::TrialFinished {
                trial: i,
                report: &out.report,
            });
            Ok(out)
        })
        .collect::<Result<_>>()?;

    for (i, t) in trials.iter().enumerate() {
        files.push(write_scores(dir, i, t)?);
        files.push(write_loss_trace(dir, i, &t.trace)?);
        files.extend(write_attention_maps(
            &t.attention_maps,
            dir,
            &format!("attention_trial{i}"),
        )?);
        if exp.save_checkpoints {
            let path = dir.join(format!("checkpoint_trial{i}.ckpt"));
            save_checkpoint(
                &Checkpoint {
                    detector: t.detector.clone(),
                    transform: t.transform.clone(),
                },
                &path,
            )?;
            files.push(path);
        }
    }

    let reports: Vec<ScoreReport> = trials.iter().map(|t| t.report.clone()).collect();
    let summary = aggregate_trials(&reports)?;
    let metrics = MetricsFile {
        dataset: exp.dataset.clone(),
        config_hash: hash.clone(),
        per_trial: reports
            .iter()
            .map(|r| TrialMetrics {
                seed: r.trial_seed,
                auc_pr: r.auc_pr,
                auc_roc: r.auc_roc,
            })
            .collect(),
        auc_pr_mean: summary.auc_pr.mean,
        auc_pr_std: summary.auc_pr.std,
        auc_roc_mean: summary.auc_roc.mean,
        auc_roc_std: summary.auc_roc.std,
    };
    let metrics_path = dir.join("metrics.json");
    write_file(
        &metrics_path,
        serde_json::to_string_pretty(&metrics)?.as_bytes(),
    )?;
    files.push(metrics_path);

    let manifest_path = dir.join("manifest.json");
    let manifest = Manifest {
        dataset: exp.dataset.clone(),
        config_hash: hash,
        files: files
            .iter()
            .chain(std::iter::once(&manifest_path))
            .map(|p| file_name(p))
            .collect(),
    };
    write_file(
        &manifest_path,
        serde_json::to_string_pretty(&manifest)?.as_bytes(),
    )?;
    files.push(manifest_path);

    Ok(ExperimentOutcome {
        trials,
        summary,
        metrics,
        files,
    })
}

fn file_name(p: &Path) -> String {
    p.file_name()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default()
}

fn is_run_output(name: &str) -> bool {
    matches!(
        name,
        "config.toml" | "metrics.json" | "manifest.json" | INCOMPLETE_MARKER
    ) || [
        "scores_trial",
        "loss_trace_trial",
        "attention_trial",
        "checkpoint_trial",
    ]
    .iter()
    .any(|p| name.starts_with(p))
}

fn clear_previous_outputs(dir: &Path) -> Result<()> {
    for entry in fs::read_dir(dir).map_err(|e| Error::io(dir, e))? {
        let entry = entry.map_err(|e| Error::io(dir, e))?;
        let path = entry.path();
        if path.is_file() && is_run_output(&file_name(&path)) {
            fs::remove_file(&path).map_err(|e| Error::io(&path, e))?;
        }
    }
    Ok(())
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    let mut f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(bytes).map_err(|e| Error::io(path, e))
}

fn csv_writer(path: &Path) -> Result<csv::Writer<fs::File>> {
    csv::Writer::from_path(path).map_err(|e| csv_io(path, e))
}

fn csv_io(path: &Path, e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        other => Error::io(path, std::io::Error::other(format!("{other:?}"))),
    }
}

fn write_scores(dir: &Path, trial: usize, t: &TrialOutput) -> Result<PathBuf> {
    let path = dir.join(format!("scores_trial{trial}.csv"));
    let mut w = csv_writer(&path)?;
    let io = |e| csv_io(&path, e);
    w.write_record(["row", "label", "score"]).map_err(io)?;
    for ((origin, label), score) in t
        .split
        .test_origin
        .iter()
        .zip(&t.report.labels)
        .zip(&t.report.scores)
    {
        w.write_record([origin.to_string(), label.to_string(), format!("{score:?}")])
            .map_err(io)?;
    }
    w.flush().map_err(|e| Error::io(&path, e))?;
    Ok(path)
}

fn write_loss_trace(dir: &Path, trial: usize, trace: &TrainingTrace) -> Result<PathBuf> {
    let path = dir.join(format!("loss_trace_trial{trial}.csv"));
    let mut w = csv_writer(&path)?;
    let io = |e| csv_io(&path, e);
    w.write_record(["epoch", "loss_d", "loss_r", "loss_overall"])
        .map_err(io)?;
    for e in &trace.epochs {
        w.write_record([
            e.epoch.to_string(),
            format!("{:?}", e.loss_d),
            format!("{:?}", e.loss_r),
            format!("{:?}", e.loss_overall),
        ])
        .map_err(io)?;
    }
    w.flush().map_err(|e| Error::io(&path, e))?;
    Ok(path)
}

/// Writes each `M x M` map as a headerless row-major CSV named
/// `{prefix}_head{h}.csv` inside `dir`.
pub fn write_attention_maps(maps: &[Tensor], dir: &Path, prefix: &str) -> Result<Vec<PathBuf>> {
    let mut out = Vec::with_capacity(maps.len());
    for (h, map) in maps.iter().enumerate() {
        let path = dir.join(format!("{prefix}_head{h}.csv"));
        let mut w = csv::WriterBuilder::new()
            .has_headers(false)
            .from_path(&path)
            .map_err(|e| csv_io(&path, e))?;
        for row in map.rows() {
            w.write_record(row.iter().map(|v| format!("{v:?}")))
                .map_err(|e| csv_io(&path, e))?;
        }
        w.flush().map_err(|e| Error::io(&path, e))?;
        out.push(path);
    }
    Ok(out)
}

/// Averages each head's attention map over the rows of `train` (model input
/// `N x M x channels`) and writes one CSV per subset.
pub fn export_attention_maps(
    detector: &Detector,
    train: &Tensor,
    dir: &Path,
    prefix: &str,
) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    write_attention_maps(&detector.mean_attention_maps(train)?, dir, prefix)
}
