use serde::{Deserialize, Serialize};

use crate::error::{ConfigIssue, Error, Result};

/// Architecture variants used for ablations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Ablation {
    /// H heads, disentangling loss between every pair of heads.
    #[default]
    Full,
    /// One head, one reconstruction, no disentangling loss.
    OneHeadOneSubset,
    /// One head whose map `w` is paired with the complement `1 - w`.
    ComplementMask,
    /// H heads trained on reconstruction alone.
    NoDisentangle,
}

impl Ablation {
    pub fn as_str(self) -> &'static str {
        match self {
            Ablation::Full => "full",
            Ablation::OneHeadOneSubset => "one_head_one_subset",
            Ablation::ComplementMask => "complement_mask",
            Ablation::NoDisentangle => "no_disentangle",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        [
            Ablation::Full,
            Ablation::OneHeadOneSubset,
            Ablation::ComplementMask,
            Ablation::NoDisentangle,
        ]
        .into_iter()
        .find(|a| a.as_str() == s)
    }
}

/// Dataset-independent training and architecture settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Hyperparameters {
    pub latent_channels: usize,
    pub num_heads: usize,
    pub leaky_slope: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub ablation: Ablation,
}

impl Default for Hyperparameters {
    fn default() -> Self {
        Self {
            latent_channels: 128,
            num_heads: 2,
            leaky_slope: 0.01,
            epochs: 100,
            batch_size: 64,
            learning_rate: 1e-4,
            ablation: Ablation::Full,
        }
    }
}

impl Hyperparameters {
    /// Every violated constraint, each tagged with `prefix.field`.
    pub fn issues(&self, prefix: &str) -> Vec<ConfigIssue> {
        let mut out = Vec::new();
        let mut bad = |field: &str, message: String| {
            out.push(ConfigIssue {
                field: format!("{prefix}{field}"),
                message,
            })
        };
        if self.latent_channels == 0 {
            bad("latent_channels", "must be positive".into());
        }
        if self.num_heads == 0 {
            bad("num_heads", "must be at least 1".into());
        }
        if !(self.leaky_slope > 0.0 && self.leaky_slope < 1.0) {
            bad(
                "leaky_slope",
                format!("{} is outside (0, 1)", self.leaky_slope),
            );
        }
        if self.batch_size == 0 {
            bad("batch_size", "must be positive".into());
        }
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            bad(
                "learning_rate",
                format!("{} is not a positive number", self.learning_rate),
            );
        }
        match self.ablation {
            Ablation::OneHeadOneSubset | Ablation::ComplementMask if self.num_heads != 1 => bad(
                "ablation",
                format!(
                    "{} requires num_heads = 1, got {}",
                    self.ablation.as_str(),
                    self.num_heads
                ),
            ),
            Ablation::NoDisentangle if self.num_heads > 2 => bad(
                "ablation",
                format!("runs with {} heads must use the full model", self.num_heads),
            ),
            _ => {}
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    /// Attributes per sample after preprocessing.
    pub num_attributes: usize,
    /// Feature channels per attribute: 1 for raw rows, the patch width after
    /// patch splitting.
    pub channels_in: usize,
    pub seed: u64,
    pub hyper: Hyperparameters,
}

impl ModelConfig {
    pub fn new(
        num_attributes: usize,
        channels_in: usize,
        seed: u64,
        hyper: Hyperparameters,
    ) -> Self {
        Self {
            num_attributes,
            channels_in,
            seed,
            hyper,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let mut issues = self.hyper.issues("");
        if self.num_attributes == 0 {
            issues.push(ConfigIssue {
                field: "num_attributes".into(),
                message: "must be positive".into(),
            });
        }
        if self.channels_in == 0 {
            issues.push(ConfigIssue {
                field: "channels_in".into(),
                message: "must be positive".into(),
            });
        }
        if issues.is_empty() {
            Ok(())
        } else {
            Err(Error::InvalidConfig(issues))
        }
    }

    /// Number of reconstructions the architecture produces per sample.
    pub fn num_subsets(&self) -> usize {
        match self.hyper.ablation {
            Ablation::OneHeadOneSubset => 1,
            Ablation::ComplementMask => 2,
            Ablation::Full | Ablation::NoDisentangle => self.hyper.num_heads,
        }
    }
}
