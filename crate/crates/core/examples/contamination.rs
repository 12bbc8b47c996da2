//! Splits a bundled dataset and injects unlabeled anomalies into training.
//!
//! ```text
//! cargo run --example contamination -- breastw
//! ```

use tabdisent::data::{contaminate, load_dataset, split_train_test};

fn main() -> tabdisent::Result<()> {
    let name = std::env::args().nth(1).unwrap_or_else(|| "breastw".into());
    let ds = load_dataset(&name)?;
    let split = split_train_test(&ds, 0)?;
    println!(
        "{name}: {} rows, {} anomalies; train {} normals, test {} rows",
        ds.num_rows(),
        ds.num_anomalies(),
        split.num_train(),
        split.num_test()
    );
    for ratio in [0.0, 0.01, 0.03, 0.05] {
        let c = contaminate(&split, ratio, 0)?;
        let anomalies_left = c.test_labels.iter().filter(|&&l| l == 1).count();
        println!(
            "ratio {ratio:.2}: {:>3} anomalies injected, train {}, test {} ({} anomalies)",
            c.contaminants.len(),
            c.num_train(),
            c.num_test(),
            anomalies_left
        );
    }
    Ok(())
}
