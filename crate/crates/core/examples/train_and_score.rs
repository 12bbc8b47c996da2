//! Trains on one bundled dataset and reports test AUCs.
//!
//! ```text
//! cargo run --example train_and_score -- breastw 0
//! ```

use std::time::Instant;

use tabdisent::experiment::{dataset_defaults, run_trial, validate_config, ExperimentConfig};

fn main() -> tabdisent::Result<()> {
    let mut args = std::env::args().skip(1);
    let name = args.next().unwrap_or_else(|| "wine".into());
    let seed: u64 = args.next().and_then(|s| s.parse().ok()).unwrap_or(0);
    let config = ExperimentConfig {
        dataset: Some(name.clone()),
        ..Default::default()
    };
    let exp = validate_config(&config)?;
    if let Some(d) = dataset_defaults(&name) {
        println!(
            "{name}: {} epochs, batch {}, C = {}",
            d.epochs, d.batch_size, d.latent_channels
        );
    }
    let ds = tabdisent::experiment::load_experiment_dataset(&exp)?;
    let start = Instant::now();
    let trial = run_trial(&exp, &ds, seed)?;
    let last = trial.trace.epochs.last().expect("at least one epoch");
    println!(
        "seed {seed}: AUC-PR {:.4}  AUC-ROC {:.4}  final loss_d {:.4}  loss_r {:.4}  ({:.1?})",
        trial.report.auc_pr,
        trial.report.auc_roc,
        last.loss_d,
        last.loss_r,
        start.elapsed()
    );
    Ok(())
}
