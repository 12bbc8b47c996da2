//! Trains the full model and the three ablated variants on one dataset with
//! one seed, and compares test metrics.
//!
//! ```text
//! cargo run --release --example ablation -- wine
//! ```

use tabdisent::experiment::{
    load_experiment_dataset, run_trial, validate_config, ExperimentConfig,
};
use tabdisent::model::Ablation;

fn main() -> tabdisent::Result<()> {
    let name = std::env::args().nth(1).unwrap_or_else(|| "wine".into());
    for ablation in [
        Ablation::Full,
        Ablation::NoDisentangle,
        Ablation::OneHeadOneSubset,
        Ablation::ComplementMask,
    ] {
        let mut cfg = ExperimentConfig {
            dataset: Some(name.clone()),
            ..Default::default()
        };
        cfg.model.ablation = Some(ablation);
        let exp = validate_config(&cfg)?;
        let ds = load_experiment_dataset(&exp)?;
        let t = run_trial(&exp, &ds, 0)?;
        println!(
            "{:<20} heads {}  AUC-PR {:.4}  AUC-ROC {:.4}",
            ablation.as_str(),
            exp.hyper.num_heads,
            t.report.auc_pr,
            t.report.auc_roc
        );
    }
    Ok(())
}
