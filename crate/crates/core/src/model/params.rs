use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::config::{Ablation, ModelConfig};
use crate::numerics::Tensor;

/// Weight (`fan_in x fan_out`) and bias of one affine layer.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearParams {
    pub weight: Tensor,
    pub bias: Tensor,
}

impl LinearParams {
    pub fn fan_in(&self) -> usize {
        self.weight.shape()[0]
    }

    pub fn fan_out(&self) -> usize {
        self.weight.shape()[1]
    }

    fn uniform(fan_in: usize, fan_out: usize, rng: &mut impl Rng) -> Self {
        let bound = 1.0 / (fan_in as f64).sqrt();
        let data = (0..fan_in * fan_out)
            .map(|_| rng.gen_range(-bound..bound))
            .collect();
        Self {
            weight: Tensor::new(&[fan_in, fan_out], data).expect("finite uniform draws"),
            bias: Tensor::zeros(&[fan_out]),
        }
    }
}

/// Query, key and value projections of one attention head.
#[derive(Debug, Clone, PartialEq)]
pub struct HeadParams {
    pub query: LinearParams,
    pub key: LinearParams,
    pub value: LinearParams,
}

/// Every learnable tensor of the network.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    pub encoder: [LinearParams; 3],
    pub heads: Vec<HeadParams>,
    pub decoder: [LinearParams; 3],
}

/// Number of attention heads the architecture instantiates.
pub fn head_count(config: &ModelConfig) -> usize {
    match config.hyper.ablation {
        Ablation::OneHeadOneSubset | Ablation::ComplementMask => 1,
        Ablation::Full | Ablation::NoDisentangle => config.hyper.num_heads,
    }
}

/// Fan-in scaled uniform weights `U(-1/sqrt(fan_in), 1/sqrt(fan_in))`, zero
/// biases. Layers are drawn in [`ModelParams::named_tensors`] order from a
/// ChaCha stream seeded with `config.seed`.
pub fn init_params(config: &ModelConfig) -> ModelParams {
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let c = config.hyper.latent_channels;
    let cin = config.channels_in;
    let encoder = [
        LinearParams::uniform(cin, c, &mut rng),
        LinearParams::uniform(c, c, &mut rng),
        LinearParams::uniform(c, c, &mut rng),
    ];
    let heads = (0..head_count(config))
        .map(|_| HeadParams {
            query: LinearParams::uniform(c, c, &mut rng),
            key: LinearParams::uniform(c, c, &mut rng),
            value: LinearParams::uniform(c, c, &mut rng),
        })
        .collect();
    let decoder = [
        LinearParams::uniform(c, c, &mut rng),
        LinearParams::uniform(c, c, &mut rng),
        LinearParams::uniform(c, cin, &mut rng),
    ];
    ModelParams {
        encoder,
        heads,
        decoder,
    }
}

impl ModelParams {
    fn layers(&self) -> Vec<(String, &LinearParams)> {
        let mut out = Vec::new();
        for (i, l) in self.encoder.iter().enumerate() {
            out.push((format!("encoder.{i}"), l));
        }
        for (h, head) in self.heads.iter().enumerate() {
            out.push((format!("head.{h}.query"), &head.query));
            out.push((format!("head.{h}.key"), &head.key));
            out.push((format!("head.{h}.value"), &head.value));
        }
        for (i, l) in self.decoder.iter().enumerate() {
            out.push((format!("decoder.{i}"), l));
        }
        out
    }

    /// All tensors with stable names, in optimizer order.
    pub fn named_tensors(&self) -> Vec<(String, &Tensor)> {
        self.layers()
            .into_iter()
            .flat_map(|(name, l)| {
                [
                    (format!("{name}.weight"), &l.weight),
                    (format!("{name}.bias"), &l.bias),
                ]
            })
            .collect()
    }

    pub fn tensors(&self) -> Vec<&Tensor> {
        self.named_tensors().into_iter().map(|(_, t)| t).collect()
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut Tensor> {
        let mut out = Vec::new();
        let layers = self
            .encoder
            .iter_mut()
            .chain(
                self.heads
                    .iter_mut()
                    .flat_map(|h| [&mut h.query, &mut h.key, &mut h.value]),
            )
            .chain(self.decoder.iter_mut());
        for l in layers {
            out.push(&mut l.weight);
            out.push(&mut l.bias);
        }
        out
    }

    pub fn num_values(&self) -> usize {
        self.tensors().iter().map(|t| t.numel()).sum()
    }

    pub fn is_finite(&self) -> bool {
        self.tensors().iter().all(|t| t.is_finite())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::config::Hyperparameters;

    fn config(seed: u64) -> ModelConfig {
        ModelConfig::new(6, 1, seed, Hyperparameters::default())
    }

    #[test]
    fn deterministic_per_seed() {
        assert_eq!(init_params(&config(7)), init_params(&config(7)));
        assert_ne!(init_params(&config(7)), init_params(&config(8)));
    }

    #[test]
    fn layer_shapes() {
        let p = init_params(&config(0));
        let shapes: Vec<_> = p
            .encoder
            .iter()
            .map(|l| l.weight.shape().to_vec())
            .collect();
        assert_eq!(shapes, [vec![1, 128], vec![128, 128], vec![128, 128]]);
        let dec: Vec<_> = p
            .decoder
            .iter()
            .map(|l| (l.fan_in(), l.fan_out()))
            .collect();
        let enc: Vec<_> = p
            .encoder
            .iter()
            .map(|l| (l.fan_out(), l.fan_in()))
            .rev()
            .collect();
        assert_eq!(dec, enc);
        assert_eq!(p.heads.len(), 2);
        assert!(p.tensors().iter().all(|t| t.rank() <= 2));
    }

    #[test]
    fn weights_within_fan_in_bound_and_biases_zero() {
        let p = init_params(&config(3));
        for (name, t) in p.named_tensors() {
            if name.ends_with("bias") {
                assert!(t.data().iter().all(|&v| v == 0.0), "{name}");
            } else {
                let bound = 1.0 / (t.shape()[0] as f64).sqrt();
                assert!(t.data().iter().all(|v| v.abs() <= bound), "{name}");
            }
        }
    }

    #[test]
    fn named_and_mut_orders_agree() {
        let mut p = init_params(&config(1));
        let names: Vec<_> = p
            .named_tensors()
            .into_iter()
            .map(|(_, t)| t.shape().to_vec())
            .collect();
        let muts: Vec<_> = p
            .tensors_mut()
            .into_iter()
            .map(|t| t.shape().to_vec())
            .collect();
        assert_eq!(names, muts);
        assert_eq!(names.len(), 2 * (3 + 3 * 2 + 3));
    }
}
