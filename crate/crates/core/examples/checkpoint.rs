//! Trains briefly, saves a checkpoint, reloads it and checks that scores are
//! reproduced exactly.
//!
//! ```text
//! cargo run --example checkpoint
//! ```

use tabdisent::experiment::{
    load_experiment_dataset, run_trial, validate_config, ExperimentConfig,
};
use tabdisent::model::{load_checkpoint, save_checkpoint, Checkpoint};

fn main() -> tabdisent::Result<()> {
    let mut cfg = ExperimentConfig {
        dataset: Some("wine".into()),
        ..Default::default()
    };
    cfg.model.epochs = Some(10);
    cfg.model.latent_channels = Some(32);
    let exp = validate_config(&cfg)?;
    let ds = load_experiment_dataset(&exp)?;
    let trial = run_trial(&exp, &ds, 0)?;

    let path = std::env::temp_dir().join("tabdisent-example.ckpt");
    let ckpt = Checkpoint {
        detector: trial.detector.clone(),
        transform: trial.transform.clone(),
    };
    save_checkpoint(&ckpt, &path)?;
    let restored = load_checkpoint(&path)?;
    let raw = ds.features.select_rows(&trial.split.test_origin);
    let scores = restored
        .detector
        .score_samples(&restored.transform.apply(&raw)?)?;
    println!(
        "saved {} ({} parameters); reloaded scores identical: {}",
        path.display(),
        restored.detector.params.num_values(),
        scores == trial.report.scores
    );
    Ok(())
}
