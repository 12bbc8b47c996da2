//! Forward pass: encoder, attention heads, decoder and both losses.

use super::config::{Ablation, ModelConfig};
use super::params::{LinearParams, ModelParams};
use crate::error::{Error, Result};
use crate::numerics::{Tape, Tensor, Var};

/// Per-batch outputs of one forward pass.
#[derive(Debug, Clone)]
pub struct ForwardArtifacts {
    /// One `B x M x M` tensor per subset.
    pub attention_maps: Vec<Tensor>,
    /// One `B x M x channels_in` tensor per subset.
    pub reconstructions: Vec<Tensor>,
    pub loss_d: f64,
    pub loss_r: f64,
    pub loss_overall: f64,
}

#[derive(Clone, Copy)]
pub(crate) struct BoundLinear<'t> {
    weight: Var<'t>,
    bias: Var<'t>,
}

impl<'t> BoundLinear<'t> {
    fn apply(&self, x: Var<'t>) -> Result<Var<'t>> {
        x.linear(self.weight, self.bias)
    }
}

pub(crate) struct BoundHead<'t> {
    query: BoundLinear<'t>,
    key: BoundLinear<'t>,
    value: BoundLinear<'t>,
}

/// Parameters recorded on a tape, plus the leaf handles in optimizer order.
pub(crate) struct BoundParams<'t> {
    encoder: [BoundLinear<'t>; 3],
    heads: Vec<BoundHead<'t>>,
    decoder: [BoundLinear<'t>; 3],
    pub leaves: Vec<Var<'t>>,
}

impl<'t> BoundParams<'t> {
    pub fn bind(tape: &'t Tape, params: &ModelParams, trainable: bool) -> Self {
        let mut leaves = Vec::new();
        let mut bind = |l: &LinearParams| {
            let record = |t: &Tensor| {
                if trainable {
                    tape.var(t.clone())
                } else {
                    tape.constant(t.clone())
                }
            };
            let b = BoundLinear {
                weight: record(&l.weight),
                bias: record(&l.bias),
            };
            leaves.push(b.weight);
            leaves.push(b.bias);
            b
        };
        let encoder = [
            bind(&params.encoder[0]),
            bind(&params.encoder[1]),
            bind(&params.encoder[2]),
        ];
        let heads = params
            .heads
            .iter()
            .map(|h| BoundHead {
                query: bind(&h.query),
                key: bind(&h.key),
                value: bind(&h.value),
            })
            .collect();
        let decoder = [
            bind(&params.decoder[0]),
            bind(&params.decoder[1]),
            bind(&params.decoder[2]),
        ];
        Self {
            encoder,
            heads,
            decoder,
            leaves,
        }
    }
}

fn mlp<'t>(layers: &[BoundLinear<'t>; 3], x: Var<'t>, slope: f64) -> Result<Var<'t>> {
    let h = layers[0].apply(x)?.leaky_relu(slope)?;
    let h = layers[1].apply(h)?.leaky_relu(slope)?;
    layers[2].apply(h)
}

pub(crate) fn encode_on<'t>(
    bound: &BoundParams<'t>,
    cfg: &ModelConfig,
    x: Var<'t>,
) -> Result<Var<'t>> {
    mlp(&bound.encoder, x, cfg.hyper.leaky_slope)
}

pub(crate) fn decode_on<'t>(
    bound: &BoundParams<'t>,
    cfg: &ModelConfig,
    z: Var<'t>,
) -> Result<Var<'t>> {
    mlp(&bound.decoder, z, cfg.hyper.leaky_slope)
}

/// Returns `(attention map, value projection)` for head `h`.
pub(crate) fn attention_on<'t>(
    bound: &BoundParams<'t>,
    cfg: &ModelConfig,
    z: Var<'t>,
    h: usize,
) -> Result<(Var<'t>, Var<'t>)> {
    let head = bound.heads.get(h).ok_or_else(|| {
        Error::shape(
            "attention_head",
            format!("head {h} of {}", bound.heads.len()),
        )
    })?;
    let q = head.query.apply(z)?;
    let k = head.key.apply(z)?;
    let v = head.value.apply(z)?;
    let inv_sqrt_c = 1.0 / (cfg.hyper.latent_channels as f64).sqrt();
    let w = q.matmul_transposed(k)?.scale(inv_sqrt_c)?.softmax_rows()?;
    Ok((w, v))
}

/// Mean over head pairs of the batch-mean cosine between attention maps.
pub(crate) fn disentangling_on<'t>(maps: &[Var<'t>]) -> Result<Option<Var<'t>>> {
    let mut total: Option<Var<'t>> = None;
    let mut pairs = 0usize;
    for i in 0..maps.len() {
        for j in i + 1..maps.len() {
            let c = maps[i].batch_cosine_mean(maps[j])?;
            total = Some(match total {
                None => c,
                Some(t) => t.add(c)?,
            });
            pairs += 1;
        }
    }
    match total {
        Some(t) if pairs > 1 => Ok(Some(t.scale(1.0 / pairs as f64)?)),
        other => Ok(other),
    }
}

pub(crate) fn reconstruction_on<'t>(x: Var<'t>, recons: &[Var<'t>]) -> Result<Var<'t>> {
    let mut total = recons
        .first()
        .ok_or_else(|| Error::shape("reconstruction_loss", "no reconstructions"))?
        .mse(x)?;
    for r in &recons[1..] {
        total = total.add(r.mse(x)?)?;
    }
    Ok(total)
}

pub(crate) struct Pass<'t> {
    pub maps: Vec<Var<'t>>,
    pub recons: Vec<Var<'t>>,
}

pub(crate) struct Losses<'t> {
    pub loss_d: Option<Var<'t>>,
    pub loss_r: Var<'t>,
    pub overall: Var<'t>,
}

pub(crate) fn artifacts(pass: &Pass<'_>, losses: &Losses<'_>) -> ForwardArtifacts {
    ForwardArtifacts {
        attention_maps: pass.maps.iter().map(Var::value).collect(),
        reconstructions: pass.recons.iter().map(Var::value).collect(),
        loss_d: losses.loss_d.map_or(0.0, |v| v.item()),
        loss_r: losses.loss_r.item(),
        loss_overall: losses.overall.item(),
    }
}

pub(crate) fn check_input(cfg: &ModelConfig, x: &Tensor) -> Result<()> {
    match *x.shape() {
        [_, m, c] if m == cfg.num_attributes && c == cfg.channels_in => Ok(()),
        ref s => Err(Error::shape(
            "model input",
            format!(
                "expected B x {} x {}, got {s:?}",
                cfg.num_attributes, cfg.channels_in
            ),
        )),
    }
}

/// Attention maps and reconstructions for a `B x M x channels_in` batch.
pub(crate) fn forward_on<'t>(
    bound: &BoundParams<'t>,
    cfg: &ModelConfig,
    x: Var<'t>,
) -> Result<Pass<'t>> {
    let z = encode_on(bound, cfg, x)?;
    let mut maps = Vec::new();
    let mut recons = Vec::new();
    match cfg.hyper.ablation {
        Ablation::ComplementMask => {
            let (w, v) = attention_on(bound, cfg, z, 0)?;
            let complement = w.affine(-1.0, 1.0)?;
            for map in [w, complement] {
                recons.push(decode_on(bound, cfg, map.matmul(v)?)?);
                maps.push(map);
            }
        }
        _ => {
            for h in 0..bound.heads.len() {
                let (w, v) = attention_on(bound, cfg, z, h)?;
                recons.push(decode_on(bound, cfg, w.matmul(v)?)?);
                maps.push(w);
            }
        }
    }
    Ok(Pass { maps, recons })
}

/// Training objective: disentangling loss (full model only) plus the
/// reconstruction loss, with unit weights.
pub(crate) fn losses_on<'t>(cfg: &ModelConfig, x: Var<'t>, pass: &Pass<'t>) -> Result<Losses<'t>> {
    let loss_r = reconstruction_on(x, &pass.recons)?;
    let loss_d = match cfg.hyper.ablation {
        Ablation::Full => disentangling_on(&pass.maps)?,
        _ => None,
    };
    let overall = match loss_d {
        Some(d) => d.add(loss_r)?,
        None => loss_r,
    };
    Ok(Losses {
        loss_d,
        loss_r,
        overall,
    })
}

/// Disentangling loss of a set of attention maps, each `M x M` or `B x M x M`.
/// Zero for a single map.
pub fn disentangling_loss(maps: &[Tensor]) -> Result<f64> {
    let tape = Tape::new();
    let vars: Vec<_> = maps.iter().map(|m| tape.constant(batched(m))).collect();
    Ok(disentangling_on(&vars)?.map_or(0.0, |v| v.item()))
}

/// Sum over reconstructions of the per-element mean squared error against `x`.
pub fn reconstruction_loss(x: &Tensor, reconstructions: &[Tensor]) -> Result<f64> {
    let tape = Tape::new();
    let xv = tape.constant(x.clone());
    let rs: Vec<_> = reconstructions
        .iter()
        .map(|r| tape.constant(r.clone()))
        .collect();
    Ok(reconstruction_on(xv, &rs)?.item())
}

fn batched(t: &Tensor) -> Tensor {
    if t.rank() == 2 {
        let mut shape = vec![1];
        shape.extend_from_slice(t.shape());
        t.reshape(&shape).expect("rank 2 plus leading axis")
    } else {
        t.clone()
    }
}
