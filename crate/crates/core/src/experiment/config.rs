use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::defaults::dataset_defaults;
use crate::data::{data_dir, DatasetRegistry, NormalizationScheme, PatchLayout};
use crate::error::{ConfigIssue, Error, Result};
use crate::model::{Ablation, Hyperparameters};

/// Model overrides. Unset fields fall back to the dataset defaults.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelOverrides {
    pub latent_channels: Option<usize>,
    pub num_heads: Option<usize>,
    pub leaky_slope: Option<f64>,
    pub epochs: Option<usize>,
    pub batch_size: Option<usize>,
    pub learning_rate: Option<f64>,
    pub ablation: Option<Ablation>,
}

/// An experiment file as written by a user. Every field is optional except
/// `dataset`; [`validate_config`] fills the rest.
///
/// ```toml
/// dataset = "thyroid"
/// output_dir = "runs/thyroid"
/// trials = 3
///
/// [model]
/// epochs = 50
/// ```
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Registry name; also selects the default hyperparameters.
    pub dataset: Option<String>,
    /// CSV file to read instead of the registry entry. Relative paths are
    /// resolved against the config file's directory.
    pub dataset_path: Option<PathBuf>,
    pub label_column: Option<String>,
    pub output_dir: Option<PathBuf>,
    pub preprocessing: Option<String>,
    /// `z_score`, `min_max` or `none`.
    pub normalization: Option<String>,
    pub contamination_ratio: Option<f64>,
    pub trials: Option<usize>,
    pub base_seed: Option<u64>,
    pub trial_seeds: Option<Vec<u64>>,
    pub save_checkpoints: Option<bool>,
    #[serde(default)]
    pub model: ModelOverrides,
    /// Directory relative paths are resolved against.
    #[serde(skip)]
    pub base_dir: Option<PathBuf>,
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| {
            let field = e
                .span()
                .map(|s| format!("bytes {}..{}", s.start, s.end))
                .unwrap_or_default();
            Error::InvalidConfig(vec![ConfigIssue {
                field,
                message: e.message().to_owned(),
            }])
        })
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg = Self::from_toml(&text)?;
        cfg.base_dir = path.parent().map(Path::to_path_buf);
        Ok(cfg)
    }

    /// Applies command-line overrides. Changing the seed or the trial count
    /// regenerates the seed list from the base seed.
    pub fn override_with(
        &mut self,
        output_dir: Option<PathBuf>,
        seed: Option<u64>,
        trials: Option<usize>,
    ) {
        if let Some(dir) = output_dir {
            self.output_dir = Some(dir);
        }
        if seed.is_some() || trials.is_some() {
            self.trial_seeds = None;
        }
        if let Some(s) = seed {
            self.base_seed = Some(s);
        }
        if let Some(t) = trials {
            self.trials = Some(t);
        }
    }
}

/// A fully specified experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResolvedExperiment {
    pub dataset: String,
    pub dataset_path: PathBuf,
    pub label_column: String,
    /// Expected `(rows, attributes, anomalies)` when known.
    pub expected_shape: Option<(usize, usize, usize)>,
    pub output_dir: PathBuf,
    pub preprocessing: PatchLayout,
    pub normalization: Option<NormalizationScheme>,
    pub contamination_ratio: f64,
    pub trial_seeds: Vec<u64>,
    pub save_checkpoints: bool,
    pub hyper: Hyperparameters,
}

pub const DEFAULT_TRIALS: usize = 3;

/// Layers `config` over the per-dataset defaults and checks every field.
/// All problems are reported together, each with its field path.
pub fn validate_config(config: &ExperimentConfig) -> Result<ResolvedExperiment> {
    let mut issues = Vec::new();
    let mut bad = |field: &str, message: String| {
        issues.push(ConfigIssue {
            field: field.into(),
            message,
        })
    };

    let registry = DatasetRegistry::discover()?;
    let name = config
        .dataset
        .clone()
        .or_else(|| {
            config
                .dataset_path
                .as_ref()
                .and_then(|p| p.file_stem())
                .map(|s| s.to_string_lossy().into_owned())
        })
        .unwrap_or_default();
    if name.is_empty() {
        bad(
            "dataset",
            "a dataset name or dataset_path is required".into(),
        );
    }
    let entry = registry.entry(&name).cloned();
    let resolve = |p: &Path| match &config.base_dir {
        Some(base) if p.is_relative() => base.join(p),
        _ => p.to_path_buf(),
    };
    let dataset_path = match (&config.dataset_path, &entry) {
        (Some(p), _) => resolve(p),
        (None, Some(e)) => data_dir().join(&e.file),
        (None, None) => {
            if !name.is_empty() {
                bad(
                    "dataset",
                    format!("`{name}` is not in the dataset registry and no dataset_path is given"),
                );
            }
            PathBuf::new()
        }
    };
    let expected_shape = match (&config.dataset_path, &entry) {
        (None, Some(e)) => match (e.rows, e.attributes, e.anomalies) {
            (Some(r), Some(a), Some(n)) => Some((r, a, n)),
            _ => None,
        },
        _ => None,
    };
    let label_column = config
        .label_column
        .clone()
        .or_else(|| entry.as_ref().map(|e| e.label_column.clone()))
        .unwrap_or_else(|| "label".into());

    let defaults = dataset_defaults(&name);
    let mut hyper = defaults.map_or_else(Hyperparameters::default, |d| d.hyperparameters());
    let m = &config.model;
    hyper.latent_channels = m.latent_channels.unwrap_or(hyper.latent_channels);
    hyper.num_heads = m.num_heads.unwrap_or(hyper.num_heads);
    hyper.leaky_slope = m.leaky_slope.unwrap_or(hyper.leaky_slope);
    hyper.epochs = m.epochs.unwrap_or(hyper.epochs);
    hyper.batch_size = m.batch_size.unwrap_or(hyper.batch_size);
    hyper.learning_rate = m.learning_rate.unwrap_or(hyper.learning_rate);
    hyper.ablation = m.ablation.unwrap_or(hyper.ablation);
    if m.num_heads.is_none()
        && matches!(
            hyper.ablation,
            Ablation::OneHeadOneSubset | Ablation::ComplementMask
        )
    {
        hyper.num_heads = 1;
    }
    for issue in hyper.issues("model.") {
        bad(&issue.field, issue.message);
    }

    let preprocessing = match &config.preprocessing {
        None => defaults.map_or(PatchLayout::None, |d| d.preprocessing),
        Some(s) => PatchLayout::parse(s).unwrap_or_else(|| {
            bad(
                "preprocessing",
                format!("unknown layout `{s}` (expected none, patch_3xM2, patch_2xM2, patch_2x3M4 or patch_3xM3)"),
            );
            PatchLayout::None
        }),
    };
    if let (Some((_, d, _)), false) = (expected_shape, preprocessing == PatchLayout::None) {
        if d < 2 {
            bad(
                "preprocessing",
                format!("patch splitting needs at least 2 attributes, dataset has {d}"),
            );
        }
    }
    let normalization = match config.normalization.as_deref() {
        None => Some(NormalizationScheme::ZScore),
        Some("none") => None,
        Some(s) => NormalizationScheme::parse(s).map(Some).unwrap_or_else(|| {
            bad(
                "normalization",
                format!("unknown scheme `{s}` (expected z_score, min_max or none)"),
            );
            None
        }),
    };

    let contamination_ratio = config.contamination_ratio.unwrap_or(0.0);
    if !(0.0..=0.05).contains(&contamination_ratio) {
        bad(
            "contamination_ratio",
            format!("{contamination_ratio} is outside [0, 0.05]"),
        );
    }

    let base_seed = config.base_seed.unwrap_or(0);
    let trial_seeds = match (&config.trial_seeds, config.trials) {
        (Some(seeds), trials) => {
            if seeds.is_empty() {
                bad("trial_seeds", "must list at least one seed".into());
            }
            if let Some(t) = trials {
                if t != seeds.len() {
                    bad(
                        "trial_seeds",
                        format!("{} seeds listed but trials = {t}", seeds.len()),
                    );
                }
            }
            seeds.clone()
        }
        (None, trials) => {
            let t = trials.unwrap_or(DEFAULT_TRIALS);
            if t == 0 {
                bad("trials", "must be at least 1".into());
            }
            (0..t as u64).map(|i| base_seed.wrapping_add(i)).collect()
        }
    };

    let output_dir = config
        .output_dir
        .as_deref()
        .map(resolve)
        .unwrap_or_else(|| PathBuf::from("runs").join(&name));

    if !issues.is_empty() {
        return Err(Error::InvalidConfig(issues));
    }
    Ok(ResolvedExperiment {
        dataset: name.to_ascii_lowercase(),
        dataset_path,
        label_column,
        expected_shape,
        output_dir,
        preprocessing,
        normalization,
        contamination_ratio,
        trial_seeds,
        save_checkpoints: config.save_checkpoints.unwrap_or(false),
        hyper,
    })
}

impl ResolvedExperiment {
    /// Canonical TOML form, written as the run's config snapshot.
    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("resolved experiment serializes")
    }
}
