//! Trains on a bundled dataset and prints each head's attention map
//! averaged over the normal training rows, plus their cosine similarity.
//!
//! ```text
//! cargo run --release --example attention_maps -- breastw
//! ```

use tabdisent::experiment::{
    load_experiment_dataset, run_trial, validate_config, ExperimentConfig,
};
use tabdisent::model::disentangling_loss;

fn main() -> tabdisent::Result<()> {
    let name = std::env::args().nth(1).unwrap_or_else(|| "wine".into());
    let exp = validate_config(&ExperimentConfig {
        dataset: Some(name),
        ..Default::default()
    })?;
    let ds = load_experiment_dataset(&exp)?;
    let trial = run_trial(&exp, &ds, 0)?;
    for (h, map) in trial.attention_maps.iter().enumerate() {
        println!("head {h}:");
        for row in map.rows() {
            let cells: Vec<String> = row.iter().map(|v| format!("{v:.2}")).collect();
            println!("  {}", cells.join(" "));
        }
    }
    println!(
        "cosine between mean maps: {:.4}",
        disentangling_loss(&trial.attention_maps)?
    );
    Ok(())
}
