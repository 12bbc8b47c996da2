//! AUC-ROC and AUC-PR on a small hand-made ranking, including ties.
//!
//! ```text
//! cargo run --example metrics
//! ```

use tabdisent::metrics::{aggregate_trials, auc_pr, auc_roc, ScoreReport};

fn main() -> tabdisent::Result<()> {
    let scores = [0.1, 0.4, 0.35, 0.8, 0.8, 0.9, 0.2];
    let labels = [0, 0, 1, 1, 0, 1, 0];
    println!("AUC-ROC {:.4}", auc_roc(&scores, &labels)?);
    println!("AUC-PR  {:.4}", auc_pr(&scores, &labels)?);

    let reversed: Vec<f64> = scores.iter().map(|s| -s).collect();
    println!(
        "AUC-ROC of negated scores {:.4}",
        auc_roc(&reversed, &labels)?
    );

    let reports = [
        ScoreReport::new(0, scores.to_vec(), labels.to_vec())?,
        ScoreReport::new(1, vec![0.0, 0.1, 0.9, 0.8, 0.2, 0.7, 0.3], labels.to_vec())?,
    ];
    let summary = aggregate_trials(&reports)?;
    println!(
        "over {} trials: AUC-PR {:.4} ± {:.4}, AUC-ROC {:.4} ± {:.4}",
        reports.len(),
        summary.auc_pr.mean,
        summary.auc_pr.std,
        summary.auc_roc.mean,
        summary.auc_roc.std
    );
    Ok(())
}
