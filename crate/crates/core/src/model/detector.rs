use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::config::ModelConfig;
use super::network::{
    artifacts, attention_on, check_input, encode_on, forward_on, losses_on, BoundParams,
    ForwardArtifacts,
};
use super::params::{init_params, ModelParams};
use crate::error::{Error, Result};
use crate::numerics::{AdamSettings, AdamState, Tape, Tensor};

/// Rows scored per forward pass when no batch size applies.
const SCORING_CHUNK: usize = 256;

/// ChaCha stream used for epoch shuffling; stream 0 initializes weights.
const SHUFFLE_STREAM: u64 = 1;

/// Trained (or freshly initialized) network together with its configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct Detector {
    pub config: ModelConfig,
    pub params: ModelParams,
}

/// Per-epoch mean losses, weighted by batch size.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochStats {
    pub epoch: usize,
    pub loss_d: f64,
    pub loss_r: f64,
    pub loss_overall: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainingTrace {
    pub epochs: Vec<EpochStats>,
}

/// What the training loop reports after every optimizer step.
#[derive(Debug)]
pub struct StepRecord<'a> {
    pub epoch: usize,
    pub step: usize,
    pub batch_rows: &'a [usize],
    pub artifacts: &'a ForwardArtifacts,
}

impl Detector {
    pub fn new(config: ModelConfig) -> Result<Self> {
        config.validate()?;
        Ok(Self {
            params: init_params(&config),
            config,
        })
    }

    pub fn from_parts(config: ModelConfig, params: ModelParams) -> Result<Self> {
        config.validate()?;
        let fresh = init_params(&config);
        let same_layout = fresh.tensors().len() == params.tensors().len()
            && fresh
                .tensors()
                .iter()
                .zip(params.tensors())
                .all(|(a, b)| a.shape() == b.shape());
        if !same_layout {
            return Err(Error::shape(
                "detector",
                "parameter shapes do not match the configuration",
            ));
        }
        Ok(Self { config, params })
    }

    /// Latent features `B x M x C` of a `B x M x channels_in` batch.
    pub fn encode(&self, x: &Tensor) -> Result<Tensor> {
        check_input(&self.config, x)?;
        let tape = Tape::new();
        let bound = BoundParams::bind(&tape, &self.params, false);
        Ok(encode_on(&bound, &self.config, tape.constant(x.clone()))?.value())
    }

    /// Attention map `w` and head features `w · v` for head `h` applied to
    /// latent features `z` (`M x C` or `B x M x C`).
    pub fn attention_head(&self, z: &Tensor, h: usize) -> Result<(Tensor, Tensor)> {
        let tape = Tape::new();
        let bound = BoundParams::bind(&tape, &self.params, false);
        let (w, v) = attention_on(&bound, &self.config, tape.constant(z.clone()), h)?;
        let zhat = w.matmul(v)?;
        Ok((w.value(), zhat.value()))
    }

    /// Full forward pass with both losses, without gradients.
    pub fn forward_batch(&self, x: &Tensor) -> Result<ForwardArtifacts> {
        check_input(&self.config, x)?;
        let tape = Tape::new();
        let bound = BoundParams::bind(&tape, &self.params, false);
        let xv = tape.constant(x.clone());
        let pass = forward_on(&bound, &self.config, xv)?;
        let losses = losses_on(&self.config, xv, &pass)?;
        Ok(artifacts(&pass, &losses))
    }

    /// Runs one forward/backward pass and returns the artifacts together with
    /// gradients for every parameter tensor in optimizer order.
    pub fn gradients(&self, x: &Tensor) -> Result<(ForwardArtifacts, Vec<Option<Vec<f64>>>)> {
        check_input(&self.config, x)?;
        let tape = Tape::new();
        let bound = BoundParams::bind(&tape, &self.params, true);
        let xv = tape.constant(x.clone());
        let pass = forward_on(&bound, &self.config, xv)?;
        let losses = losses_on(&self.config, xv, &pass)?;
        let mut grads = tape.backward(losses.overall)?;
        let out = bound.leaves.iter().map(|v| grads.take(*v)).collect();
        Ok((artifacts(&pass, &losses), out))
    }

    /// Anomaly score of a single `M x channels_in` sample: squared
    /// reconstruction error summed over elements and subsets.
    pub fn anomaly_score(&self, x: &Tensor) -> Result<f64> {
        let mut shape = vec![1];
        shape.extend_from_slice(x.shape());
        let scores = self.score_samples(&x.reshape(&shape)?)?;
        Ok(scores[0])
    }

    /// Anomaly scores for every row of a `N x M x channels_in` tensor.
    pub fn score_samples(&self, x: &Tensor) -> Result<Vec<f64>> {
        check_input(&self.config, x)?;
        let n = x.len_leading();
        let mut scores = Vec::with_capacity(n);
        let rows: Vec<usize> = (0..n).collect();
        for chunk in rows.chunks(SCORING_CHUNK) {
            let batch = x.select_rows(chunk);
            let tape = Tape::new();
            let bound = BoundParams::bind(&tape, &self.params, false);
            let pass = forward_on(&bound, &self.config, tape.constant(batch.clone()))?;
            let recons: Vec<Tensor> = pass.recons.iter().map(|r| r.value()).collect();
            for (i, sample) in batch.rows().enumerate() {
                let mut total = 0.0;
                for r in &recons {
                    total += sample
                        .iter()
                        .zip(r.row(i))
                        .map(|(a, b)| (a - b) * (a - b))
                        .sum::<f64>();
                }
                scores.push(total);
            }
        }
        Ok(scores)
    }

    /// Attention maps averaged over every row of `x`, one `M x M` tensor per
    /// subset.
    pub fn mean_attention_maps(&self, x: &Tensor) -> Result<Vec<Tensor>> {
        check_input(&self.config, x)?;
        let m = self.config.num_attributes;
        let n = x.len_leading();
        let mut sums: Vec<Vec<f64>> = vec![vec![0.0; m * m]; self.config.num_subsets()];
        let rows: Vec<usize> = (0..n).collect();
        for chunk in rows.chunks(SCORING_CHUNK) {
            let tape = Tape::new();
            let bound = BoundParams::bind(&tape, &self.params, false);
            let pass = forward_on(&bound, &self.config, tape.constant(x.select_rows(chunk)))?;
            for (sum, map) in sums.iter_mut().zip(&pass.maps) {
                for sample in map.value().rows() {
                    for (acc, v) in sum.iter_mut().zip(sample) {
                        *acc += v;
                    }
                }
            }
        }
        sums.into_iter()
            .map(|s| Tensor::new(&[m, m], s.into_iter().map(|v| v / n as f64).collect()))
            .collect()
    }

    /// Trains from scratch on `train` (`N x M x channels_in`).
    pub fn fit(config: ModelConfig, train: &Tensor) -> Result<(Self, TrainingTrace)> {
        Self::fit_observed(config, train, |_| {})
    }

    /// Like [`Detector::fit`], calling `observe` after every optimizer step.
    pub fn fit_observed(
        config: ModelConfig,
        train: &Tensor,
        mut observe: impl FnMut(&StepRecord<'_>),
    ) -> Result<(Self, TrainingTrace)> {
        let mut detector = Self::new(config)?;
        check_input(&config, train)?;
        let n = train.len_leading();
        let hyper = config.hyper;
        let mut adam = AdamState::new(AdamSettings::with_learning_rate(hyper.learning_rate));
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        rng.set_stream(SHUFFLE_STREAM);
        let mut order: Vec<usize> = (0..n).collect();
        let mut trace = TrainingTrace::default();
        let mut step = 0;

        for epoch in 0..hyper.epochs {
            order.shuffle(&mut rng);
            let mut sums = [0.0; 3];
            for batch_rows in order.chunks(hyper.batch_size) {
                let batch = train.select_rows(batch_rows);
                let (art, mut grads) = detector
                    .gradients(&batch)
                    .map_err(|e| diverged(e, epoch, step))?;
                adam.update(&mut detector.params.tensors_mut(), &mut grads)
                    .map_err(|e| diverged(e, epoch, step))?;
                if !detector.params.is_finite() {
                    return Err(Error::Diverged {
                        epoch,
                        step,
                        what: "parameter",
                    });
                }
                let w = batch_rows.len() as f64;
                sums[0] += w * art.loss_d;
                sums[1] += w * art.loss_r;
                sums[2] += w * art.loss_overall;
                observe(&StepRecord {
                    epoch,
                    step,
                    batch_rows,
                    artifacts: &art,
                });
                step += 1;
            }
            trace.epochs.push(EpochStats {
                epoch,
                loss_d: sums[0] / n as f64,
                loss_r: sums[1] / n as f64,
                loss_overall: sums[2] / n as f64,
            });
        }
        Ok((detector, trace))
    }
}

fn diverged(e: Error, epoch: usize, step: usize) -> Error {
    match e {
        Error::NonFinite(_) => Error::Diverged {
            epoch,
            step,
            what: "loss or gradient",
        },
        other => other,
    }
}
