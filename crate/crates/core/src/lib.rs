//! One-class anomaly detection for tabular data.
//!
//! A shared encoder lifts every attribute to a latent vector. Two (or more)
//! self-attention heads each mix those vectors into a view built from one
//! subset of attributes, and a shared decoder reconstructs the full row from
//! each view. Training on normal rows only, a cosine penalty between the
//! heads' attention maps pushes them onto disjoint, internally correlated
//! attribute subsets. Rows that break those correlations reconstruct badly,
//! and the summed squared error is the anomaly score.
//!
//! The crate is self-contained: a small tape-based autodiff engine and Adam
//! ([`numerics`]), the network ([`model`]), dataset handling ([`data`]),
//! ranking metrics ([`metrics`]) and a config-driven experiment runner
//! ([`experiment`]).
//!
//! ```no_run
//! use tabdisent::data::{load_dataset, normalize, patch_split, split_train_test, NormalizationScheme, PatchLayout};
//! use tabdisent::model::{Detector, Hyperparameters, ModelConfig};
//! use tabdisent::metrics::auc_roc;
//!
//! let ds = load_dataset("wine")?;
//! let split = normalize(&split_train_test(&ds, 0)?, NormalizationScheme::ZScore)?;
//! let train = patch_split(&split.train, PatchLayout::None)?;
//! let test = patch_split(&split.test, PatchLayout::None)?;
//! let config = ModelConfig::new(ds.num_attributes(), 1, 0, Hyperparameters::default());
//! let (detector, _trace) = Detector::fit(config, &train)?;
//! let scores = detector.score_samples(&test)?;
//! println!("AUC-ROC {:.3}", auc_roc(&scores, &split.test_labels)?);
//! # Ok::<(), tabdisent::Error>(())
//! ```

pub mod data;
mod error;
pub mod experiment;
pub mod metrics;
pub mod model;
pub mod numerics;

pub use error::{ConfigIssue, Error, Result};
