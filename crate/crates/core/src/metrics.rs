//! Threshold-free ranking metrics.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

fn check(scores: &[f64], labels: &[u8]) -> Result<(usize, usize)> {
    if scores.len() != labels.len() {
        return Err(Error::shape(
            "metric",
            format!("{} scores but {} labels", scores.len(), labels.len()),
        ));
    }
    if let Some(s) = scores.iter().find(|s| !s.is_finite()) {
        return Err(Error::NonFinite(format!("score {s}")));
    }
    let positives = labels.iter().filter(|&&l| l == 1).count();
    let negatives = labels.len() - positives;
    if positives == 0 || negatives == 0 {
        return Err(Error::SingleClass {
            positives,
            negatives,
        });
    }
    Ok((positives, negatives))
}

/// Indices sorted by ascending score, grouped into blocks of equal score.
fn tie_blocks(scores: &[f64]) -> Vec<Vec<usize>> {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    let mut blocks: Vec<Vec<usize>> = Vec::new();
    for i in order {
        match blocks.last_mut() {
            Some(b) if scores[b[0]] == scores[i] => b.push(i),
            _ => blocks.push(vec![i]),
        }
    }
    blocks
}

/// Area under the ROC curve: the probability that a random anomaly (label 1)
/// outscores a random normal, counting ties as one half.
pub fn auc_roc(scores: &[f64], labels: &[u8]) -> Result<f64> {
    let (pos, neg) = check(scores, labels)?;
    let mut rank_sum = 0.0;
    let mut next_rank = 1.0;
    for block in tie_blocks(scores) {
        let len = block.len() as f64;
        let midrank = next_rank + (len - 1.0) / 2.0;
        let block_pos = block.iter().filter(|&&i| labels[i] == 1).count() as f64;
        rank_sum += midrank * block_pos;
        next_rank += len;
    }
    let (p, n) = (pos as f64, neg as f64);
    Ok((rank_sum - p * (p + 1.0) / 2.0) / (p * n))
}

/// Average precision: the sum over descending-score tie blocks of the recall
/// gained in the block times the precision after taking the whole block.
pub fn auc_pr(scores: &[f64], labels: &[u8]) -> Result<f64> {
    let (pos, _) = check(scores, labels)?;
    let mut tp = 0usize;
    let mut seen = 0usize;
    let mut ap = 0.0;
    for block in tie_blocks(scores).into_iter().rev() {
        let block_pos = block.iter().filter(|&&i| labels[i] == 1).count();
        tp += block_pos;
        seen += block.len();
        if block_pos > 0 {
            ap += (block_pos as f64 / pos as f64) * (tp as f64 / seen as f64);
        }
    }
    Ok(ap)
}

/// Scores and metrics of one trial.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreReport {
    pub trial_seed: u64,
    pub scores: Vec<f64>,
    pub labels: Vec<u8>,
    pub auc_roc: f64,
    pub auc_pr: f64,
}

impl ScoreReport {
    pub fn new(trial_seed: u64, scores: Vec<f64>, labels: Vec<u8>) -> Result<Self> {
        let auc_roc = auc_roc(&scores, &labels)?;
        let auc_pr = auc_pr(&scores, &labels)?;
        Ok(Self {
            trial_seed,
            scores,
            labels,
            auc_roc,
            auc_pr,
        })
    }
}

/// Arithmetic mean and population standard deviation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanStd {
    pub mean: f64,
    pub std: f64,
}

impl MeanStd {
    pub fn of(values: &[f64]) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::Insufficient {
                what: "values",
                needed: 1,
                available: 0,
            });
        }
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
        Ok(Self {
            mean,
            std: var.sqrt(),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrialSummary {
    pub auc_pr: MeanStd,
    pub auc_roc: MeanStd,
}

pub fn aggregate_trials(reports: &[ScoreReport]) -> Result<TrialSummary> {
    if reports.is_empty() {
        return Err(Error::Insufficient {
            what: "trial reports",
            needed: 1,
            available: 0,
        });
    }
    let pr: Vec<f64> = reports.iter().map(|r| r.auc_pr).collect();
    let roc: Vec<f64> = reports.iter().map(|r| r.auc_roc).collect();
    Ok(TrialSummary {
        auc_pr: MeanStd::of(&pr)?,
        auc_roc: MeanStd::of(&roc)?,
    })
}
