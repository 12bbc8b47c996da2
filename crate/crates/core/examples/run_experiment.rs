//! Runs a full multi-trial experiment from a TOML config and writes the
//! results bundle.
//!
//! ```text
//! cargo run --release --example run_experiment -- configs/wine.toml
//! ```

use std::path::PathBuf;

use tabdisent::experiment::{run_experiment_with, validate_config, ExperimentConfig, RunEvent};

fn main() -> tabdisent::Result<()> {
    let path = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("configs/wine.toml"));
    let exp = validate_config(&ExperimentConfig::from_file(&path)?)?;
    let outcome = run_experiment_with(&exp, |e| {
        if let RunEvent::TrialFinished { trial, report } = e {
            println!(
                "trial {trial}: AUC-PR {:.4}  AUC-ROC {:.4}",
                report.auc_pr, report.auc_roc
            );
        }
    })?;
    println!(
        "mean AUC-PR {:.4} ± {:.4}, AUC-ROC {:.4} ± {:.4}",
        outcome.summary.auc_pr.mean,
        outcome.summary.auc_pr.std,
        outcome.summary.auc_roc.mean,
        outcome.summary.auc_roc.std
    );
    for f in &outcome.files {
        println!("  {}", f.display());
    }
    Ok(())
}
