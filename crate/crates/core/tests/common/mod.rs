//! Brute-force metric oracles shared by the metric and acceptance suites.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

/// Fraction of (anomaly, normal) pairs ordered correctly, ties counted half.
pub fn pairwise_auc(scores: &[f64], labels: &[u8]) -> f64 {
    let mut wins = 0.0;
    let mut pairs = 0.0;
    for (i, &si) in scores.iter().enumerate() {
        if labels[i] != 1 {
            continue;
        }
        for (j, &sj) in scores.iter().enumerate() {
            if labels[j] != 0 {
                continue;
            }
            pairs += 1.0;
            if si > sj {
                wins += 1.0;
            } else if si == sj {
                wins += 0.5;
            }
        }
    }
    wins / pairs
}

/// Walks every distinct threshold from high to low, predicting "anomaly"
/// for scores at or above it, and accumulates recall gain times precision.
pub fn threshold_average_precision(scores: &[f64], labels: &[u8]) -> f64 {
    let mut thresholds: Vec<f64> = scores.to_vec();
    thresholds.sort_by(|a, b| b.total_cmp(a));
    thresholds.dedup();
    let positives = labels.iter().filter(|&&l| l == 1).count() as f64;
    let mut prev_recall = 0.0;
    let mut ap = 0.0;
    for t in thresholds {
        let (mut tp, mut predicted) = (0.0, 0.0);
        for (s, l) in scores.iter().zip(labels) {
            if *s >= t {
                predicted += 1.0;
                if *l == 1 {
                    tp += 1.0;
                }
            }
        }
        let recall = tp / positives;
        ap += (recall - prev_recall) * (tp / predicted);
        prev_recall = recall;
    }
    ap
}

pub fn random_instance(rng: &mut ChaCha8Rng) -> (Vec<f64>, Vec<u8>) {
    let n = rng.gen_range(2..=300);
    // Coarse grids force ties on many instances.
    let levels = *[3usize, 10, 50, 1_000_000]
        .get(rng.gen_range(0..4))
        .unwrap();
    let mut labels: Vec<u8> = (0..n).map(|_| u8::from(rng.gen_bool(0.3))).collect();
    labels[0] = 0;
    labels[1] = 1;
    let scores = (0..n)
        .map(|i| rng.gen_range(0..levels) as f64 / levels as f64 + 0.05 * f64::from(labels[i]))
        .collect();
    (scores, labels)
}
