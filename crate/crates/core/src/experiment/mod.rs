//! Config-driven experiment runs: per-dataset defaults, validation, the
//! multi-trial protocol and the on-disk results bundle.

mod config;
mod defaults;
mod runner;

pub use config::{
    validate_config, ExperimentConfig, ModelOverrides, ResolvedExperiment, DEFAULT_TRIALS,
};
pub use defaults::{dataset_defaults, DatasetDefaults, DATASET_DEFAULTS};
pub use runner::{
    config_hash, export_attention_maps, load_experiment_dataset, prepare_split, run_experiment,
    run_experiment_with, run_trial, write_attention_maps, ExperimentOutcome, Manifest, MetricsFile,
    RunEvent, TrialMetrics, TrialOutput, INCOMPLETE_MARKER,
};

use std::path::Path;

use crate::data::read_csv_table;
use crate::error::Result;
use crate::model::Checkpoint;

/// Scores every row of a CSV file with a checkpoint. A `label` column, if
/// present, is returned alongside and excluded from the features.
pub fn score_csv(ckpt: &Checkpoint, path: &Path) -> Result<(Vec<f64>, Option<Vec<u8>>)> {
    let table = read_features(path)?;
    let x = ckpt.transform.apply(&table.features)?;
    Ok((ckpt.detector.score_samples(&x)?, table.labels))
}

/// Mean attention maps of a checkpoint over the rows of a CSV file.
pub fn attention_from_csv(ckpt: &Checkpoint, path: &Path) -> Result<Vec<crate::numerics::Tensor>> {
    let table = read_features(path)?;
    let x = ckpt.transform.apply(&table.features)?;
    ckpt.detector.mean_attention_maps(&x)
}

fn read_features(path: &Path) -> Result<crate::data::CsvTable> {
    match read_csv_table(path, Some("label")) {
        Ok(t) => Ok(t),
        Err(crate::Error::Parse { line: 1, .. }) => read_csv_table(path, None),
        Err(e) => Err(e),
    }
}
