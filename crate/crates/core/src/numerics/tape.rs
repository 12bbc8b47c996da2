//! Reverse-mode automatic differentiation over a fixed operator set.
//!
//! A [`Tape`] records one forward pass. Values enter it as trainable
//! variables ([`Tape::var`]) or constants ([`Tape::constant`]); every operation
//! on a [`Var`] appends a node. [`Tape::backward`] walks the nodes in reverse
//! and returns the gradients of a scalar with respect to every trainable leaf.
//! The tape is dropped after use.

use std::cell::RefCell;

use super::kernels::{gemm_nn, gemm_nt, gemm_tn};
use super::tensor::Tensor;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy)]
enum Op {
    Leaf,
    MatMul {
        a: usize,
        b: usize,
        batch: usize,
        m: usize,
        k: usize,
        n: usize,
        transpose_b: bool,
    },
    Linear {
        x: usize,
        weight: usize,
        bias: usize,
        rows: usize,
        fan_in: usize,
        fan_out: usize,
    },
    LeakyRelu {
        x: usize,
        slope: f64,
    },
    Affine {
        x: usize,
        mul: f64,
    },
    SoftmaxRows {
        x: usize,
        cols: usize,
    },
    Mse {
        a: usize,
        b: usize,
    },
    BatchCosine {
        a: usize,
        b: usize,
        batch: usize,
    },
    Add {
        a: usize,
        b: usize,
    },
    Sum {
        x: usize,
    },
}

struct Node {
    value: Tensor,
    op: Op,
    needs_grad: bool,
}

/// Recording of a single forward pass.
#[derive(Default)]
pub struct Tape {
    nodes: RefCell<Vec<Node>>,
}

/// Handle to a value recorded on a [`Tape`].
#[derive(Clone, Copy)]
pub struct Var<'t> {
    tape: &'t Tape,
    id: usize,
}

impl std::fmt::Debug for Var<'_> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "Var#{} {:?}", self.id, self.shape())
    }
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.borrow().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Records a leaf that receives a gradient.
    pub fn var(&self, value: Tensor) -> Var<'_> {
        self.leaf(value, true)
    }

    /// Records a leaf that is treated as a constant.
    pub fn constant(&self, value: Tensor) -> Var<'_> {
        self.leaf(value, false)
    }

    fn leaf(&self, value: Tensor, needs_grad: bool) -> Var<'_> {
        let mut nodes = self.nodes.borrow_mut();
        nodes.push(Node {
            value,
            op: Op::Leaf,
            needs_grad,
        });
        Var {
            tape: self,
            id: nodes.len() - 1,
        }
    }

    fn push(&self, op: Op, shape: Vec<usize>, data: Vec<f64>, inputs: &[usize]) -> Result<Var<'_>> {
        if let Some(pos) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!(
                "output of {} at flat index {pos}",
                op_name(&op)
            )));
        }
        let mut nodes = self.nodes.borrow_mut();
        let needs_grad = inputs.iter().any(|&i| nodes[i].needs_grad);
        nodes.push(Node {
            value: Tensor::from_parts(shape, data),
            op,
            needs_grad,
        });
        Ok(Var {
            tape: self,
            id: nodes.len() - 1,
        })
    }

    fn with_value<R>(&self, id: usize, f: impl FnOnce(&Tensor) -> R) -> R {
        f(&self.nodes.borrow()[id].value)
    }

    /// Gradients of the scalar `output` with respect to every trainable leaf.
    pub fn backward(&self, output: Var<'_>) -> Result<Gradients> {
        assert!(
            std::ptr::eq(self, output.tape),
            "variable from another tape"
        );
        let nodes = self.nodes.borrow();
        if nodes[output.id].value.numel() != 1 {
            return Err(Error::shape(
                "backward",
                format!(
                    "output must be a scalar, got shape {:?}",
                    nodes[output.id].value.shape()
                ),
            ));
        }
        let mut grads: Vec<Option<Vec<f64>>> = vec![None; output.id + 1];
        grads[output.id] = Some(vec![1.0]);

        for id in (0..=output.id).rev() {
            let node = &nodes[id];
            if !node.needs_grad || matches!(node.op, Op::Leaf) {
                continue;
            }
            let Some(g) = grads[id].take() else { continue };
            propagate(&nodes, node, &g, &mut grads);
        }

        let leaves = nodes
            .iter()
            .zip(grads)
            .map(|(n, g)| match n.op {
                Op::Leaf if n.needs_grad => Some(g.unwrap_or_else(|| vec![0.0; n.value.numel()])),
                _ => None,
            })
            .collect();
        let shapes = nodes.iter().map(|n| n.value.shape().to_vec()).collect();
        Ok(Gradients {
            grads: leaves,
            shapes,
        })
    }
}

/// Gradients produced by [`Tape::backward`], indexed by leaf variable.
pub struct Gradients {
    grads: Vec<Option<Vec<f64>>>,
    shapes: Vec<Vec<usize>>,
}

impl Gradients {
    /// Gradient buffer for a trainable leaf; `None` for constants and
    /// intermediate values.
    pub fn get(&self, var: Var<'_>) -> Option<&[f64]> {
        self.grads.get(var.id)?.as_deref()
    }

    pub fn take(&mut self, var: Var<'_>) -> Option<Vec<f64>> {
        self.grads.get_mut(var.id)?.take()
    }

    pub fn tensor(&self, var: Var<'_>) -> Option<Tensor> {
        let g = self.get(var)?;
        Some(Tensor::from_parts(self.shapes[var.id].clone(), g.to_vec()))
    }
}

fn op_name(op: &Op) -> &'static str {
    match op {
        Op::Leaf => "leaf",
        Op::MatMul { .. } => "matmul",
        Op::Linear { .. } => "linear",
        Op::LeakyRelu { .. } => "leaky_relu",
        Op::Affine { .. } => "affine",
        Op::SoftmaxRows { .. } => "softmax_rows",
        Op::Mse { .. } => "mse",
        Op::BatchCosine { .. } => "cosine_sim",
        Op::Add { .. } => "add",
        Op::Sum { .. } => "sum",
    }
}

fn accumulate(grads: &mut [Option<Vec<f64>>], id: usize, len: usize) -> &mut [f64] {
    grads[id].get_or_insert_with(|| vec![0.0; len])
}

fn propagate(nodes: &[Node], node: &Node, g: &[f64], grads: &mut [Option<Vec<f64>>]) {
    let wants = |id: usize| nodes[id].needs_grad;
    let val = |id: usize| nodes[id].value.data();
    match node.op {
        Op::Leaf => {}
        Op::MatMul {
            a,
            b,
            batch,
            m,
            k,
            n,
            transpose_b,
        } => {
            let (av, bv) = (val(a), val(b));
            if wants(a) {
                let ga = accumulate(grads, a, batch * m * k);
                for s in 0..batch {
                    let gs = &g[s * m * n..(s + 1) * m * n];
                    let bs = &bv[s * k * n..(s + 1) * k * n];
                    let out = &mut ga[s * m * k..(s + 1) * m * k];
                    if transpose_b {
                        gemm_nn(m, n, k, gs, bs, out);
                    } else {
                        gemm_nt(m, n, k, gs, bs, out);
                    }
                }
            }
            if wants(b) {
                let gb = accumulate(grads, b, batch * k * n);
                for s in 0..batch {
                    let gs = &g[s * m * n..(s + 1) * m * n];
                    let as_ = &av[s * m * k..(s + 1) * m * k];
                    let out = &mut gb[s * k * n..(s + 1) * k * n];
                    if transpose_b {
                        gemm_tn(n, m, k, gs, as_, out);
                    } else {
                        gemm_tn(k, m, n, as_, gs, out);
                    }
                }
            }
        }
        Op::Linear {
            x,
            weight,
            bias,
            rows,
            fan_in,
            fan_out,
        } => {
            if wants(x) {
                let gx = accumulate(grads, x, rows * fan_in);
                gemm_nt(rows, fan_out, fan_in, g, val(weight), gx);
            }
            if wants(weight) {
                let gw = accumulate(grads, weight, fan_in * fan_out);
                gemm_tn(fan_in, rows, fan_out, val(x), g, gw);
            }
            if wants(bias) {
                let gb = accumulate(grads, bias, fan_out);
                for row in g.chunks_exact(fan_out) {
                    for (acc, v) in gb.iter_mut().zip(row) {
                        *acc += v;
                    }
                }
            }
        }
        Op::LeakyRelu { x, slope } => {
            let xv = val(x);
            let gx = accumulate(grads, x, xv.len());
            for ((acc, &xi), &gi) in gx.iter_mut().zip(xv).zip(g) {
                *acc += if xi > 0.0 { gi } else { slope * gi };
            }
        }
        Op::Affine { x, mul } => {
            let gx = accumulate(grads, x, g.len());
            for (acc, &gi) in gx.iter_mut().zip(g) {
                *acc += mul * gi;
            }
        }
        Op::SoftmaxRows { x, cols } => {
            let y = node.value.data();
            let gx = accumulate(grads, x, y.len());
            for ((grow, yrow), acc) in g
                .chunks_exact(cols)
                .zip(y.chunks_exact(cols))
                .zip(gx.chunks_exact_mut(cols))
            {
                let dot: f64 = grow.iter().zip(yrow).map(|(a, b)| a * b).sum();
                for ((acc, &gi), &yi) in acc.iter_mut().zip(grow).zip(yrow) {
                    *acc += yi * (gi - dot);
                }
            }
        }
        Op::Mse { a, b } => {
            let (av, bv) = (val(a), val(b));
            let scale = 2.0 * g[0] / av.len() as f64;
            if wants(a) {
                let ga = accumulate(grads, a, av.len());
                for ((acc, x), y) in ga.iter_mut().zip(av).zip(bv) {
                    *acc += scale * (x - y);
                }
            }
            if wants(b) {
                let gb = accumulate(grads, b, bv.len());
                for ((acc, x), y) in gb.iter_mut().zip(av).zip(bv) {
                    *acc -= scale * (x - y);
                }
            }
        }
        Op::BatchCosine { a, b, batch } => {
            let (av, bv) = (val(a), val(b));
            let width = av.len() / batch;
            let upstream = g[0] / batch as f64;
            let stats: Vec<CosineParts> = av
                .chunks_exact(width)
                .zip(bv.chunks_exact(width))
                .map(|(x, y)| CosineParts::of(x, y))
                .collect();
            for (target, this, other, is_a) in [(a, av, bv, true), (b, bv, av, false)] {
                if !wants(target) {
                    continue;
                }
                let gt = accumulate(grads, target, this.len());
                for (s, p) in stats.iter().enumerate() {
                    let (self_norm, other_norm) = if is_a {
                        (p.norm_a, p.norm_b)
                    } else {
                        (p.norm_b, p.norm_a)
                    };
                    let cos = p.cosine();
                    let inv = 1.0 / (self_norm * other_norm);
                    let self_sq = self_norm * self_norm;
                    let range = s * width..(s + 1) * width;
                    for ((acc, &t), &o) in gt[range.clone()]
                        .iter_mut()
                        .zip(&this[range.clone()])
                        .zip(&other[range])
                    {
                        *acc += upstream * (o * inv - cos * t / self_sq);
                    }
                }
            }
        }
        Op::Add { a, b } => {
            for id in [a, b] {
                if wants(id) {
                    let gi = accumulate(grads, id, g.len());
                    for (acc, v) in gi.iter_mut().zip(g) {
                        *acc += v;
                    }
                }
            }
        }
        Op::Sum { x } => {
            let len = nodes[x].value.numel();
            let gx = accumulate(grads, x, len);
            for acc in gx.iter_mut() {
                *acc += g[0];
            }
        }
    }
}

struct CosineParts {
    dot: f64,
    norm_a: f64,
    norm_b: f64,
}

impl CosineParts {
    fn of(a: &[f64], b: &[f64]) -> Self {
        let mut dot = 0.0;
        let mut aa = 0.0;
        let mut bb = 0.0;
        for (x, y) in a.iter().zip(b) {
            dot += x * y;
            aa += x * x;
            bb += y * y;
        }
        Self {
            dot,
            norm_a: aa.sqrt(),
            norm_b: bb.sqrt(),
        }
    }

    fn cosine(&self) -> f64 {
        self.dot / (self.norm_a * self.norm_b)
    }
}

fn same_shape(op: &'static str, a: &Tensor, b: &Tensor) -> Result<()> {
    if a.shape() == b.shape() {
        Ok(())
    } else {
        Err(Error::shape(
            op,
            format!("{:?} vs {:?}", a.shape(), b.shape()),
        ))
    }
}

/// Splits `[.., m, k]` into (batch, m, k); rank-2 tensors have batch 1.
fn as_batched(op: &'static str, t: &Tensor) -> Result<(usize, usize, usize)> {
    match *t.shape() {
        [m, k] => Ok((1, m, k)),
        [b, m, k] => Ok((b, m, k)),
        ref s => Err(Error::shape(op, format!("needs rank 2 or 3, got {s:?}"))),
    }
}

impl<'t> Var<'t> {
    pub fn id(&self) -> usize {
        self.id
    }

    pub fn tape(&self) -> &'t Tape {
        self.tape
    }

    pub fn shape(&self) -> Vec<usize> {
        self.tape.with_value(self.id, |t| t.shape().to_vec())
    }

    pub fn value(&self) -> Tensor {
        self.tape.with_value(self.id, Tensor::clone)
    }

    /// Value of a one-element variable.
    pub fn item(&self) -> f64 {
        self.tape.with_value(self.id, Tensor::item)
    }

    fn check_tape(&self, other: &Var<'t>) {
        assert!(
            std::ptr::eq(self.tape, other.tape),
            "variables from different tapes"
        );
    }

    /// Matrix product; rank-3 operands are multiplied sample by sample.
    pub fn matmul(self, rhs: Var<'t>) -> Result<Var<'t>> {
        self.matmul_impl(rhs, false)
    }

    /// `self · rhsᵀ` over the last two axes.
    pub fn matmul_transposed(self, rhs: Var<'t>) -> Result<Var<'t>> {
        self.matmul_impl(rhs, true)
    }

    fn matmul_impl(self, rhs: Var<'t>, transpose_b: bool) -> Result<Var<'t>> {
        self.check_tape(&rhs);
        let op_name = if transpose_b {
            "matmul_transposed"
        } else {
            "matmul"
        };
        let nodes = self.tape.nodes.borrow();
        let (a, b) = (&nodes[self.id].value, &nodes[rhs.id].value);
        if a.rank() != b.rank() {
            return Err(Error::shape(
                op_name,
                format!("rank mismatch {:?} vs {:?}", a.shape(), b.shape()),
            ));
        }
        let (batch, m, k) = as_batched(op_name, a)?;
        let (batch_b, r0, r1) = as_batched(op_name, b)?;
        let (kb, n) = if transpose_b { (r1, r0) } else { (r0, r1) };
        if batch != batch_b || k != kb {
            return Err(Error::shape(
                op_name,
                format!("{:?} vs {:?}", a.shape(), b.shape()),
            ));
        }
        let mut out = vec![0.0; batch * m * n];
        for s in 0..batch {
            let asl = &a.data()[s * m * k..(s + 1) * m * k];
            let bsl = &b.data()[s * k * n..(s + 1) * k * n];
            let csl = &mut out[s * m * n..(s + 1) * m * n];
            if transpose_b {
                gemm_nt(m, k, n, asl, bsl, csl);
            } else {
                gemm_nn(m, k, n, asl, bsl, csl);
            }
        }
        let shape = if a.rank() == 2 {
            vec![m, n]
        } else {
            vec![batch, m, n]
        };
        drop(nodes);
        self.tape.push(
            Op::MatMul {
                a: self.id,
                b: rhs.id,
                batch,
                m,
                k,
                n,
                transpose_b,
            },
            shape,
            out,
            &[self.id, rhs.id],
        )
    }

    /// `self · weight + bias` applied along the last axis.
    pub fn linear(self, weight: Var<'t>, bias: Var<'t>) -> Result<Var<'t>> {
        self.check_tape(&weight);
        self.check_tape(&bias);
        let nodes = self.tape.nodes.borrow();
        let (x, w, b) = (
            &nodes[self.id].value,
            &nodes[weight.id].value,
            &nodes[bias.id].value,
        );
        let fan_in = *x
            .shape()
            .last()
            .ok_or_else(|| Error::shape("linear", "input is a scalar"))?;
        let [wp, fan_out] = *w.shape() else {
            return Err(Error::shape(
                "linear",
                format!("weight must be rank 2, got {:?}", w.shape()),
            ));
        };
        if wp != fan_in || b.shape() != [fan_out] {
            return Err(Error::shape(
                "linear",
                format!(
                    "input {:?}, weight {:?}, bias {:?}",
                    x.shape(),
                    w.shape(),
                    b.shape()
                ),
            ));
        }
        let rows = x.numel() / fan_in;
        let mut out = Vec::with_capacity(rows * fan_out);
        for _ in 0..rows {
            out.extend_from_slice(b.data());
        }
        gemm_nn(rows, fan_in, fan_out, x.data(), w.data(), &mut out);
        let mut shape = x.shape().to_vec();
        *shape.last_mut().unwrap() = fan_out;
        drop(nodes);
        self.tape.push(
            Op::Linear {
                x: self.id,
                weight: weight.id,
                bias: bias.id,
                rows,
                fan_in,
                fan_out,
            },
            shape,
            out,
            &[self.id, weight.id, bias.id],
        )
    }

    /// Elementwise `max(x, slope * x)` for `slope` in (0, 1).
    pub fn leaky_relu(self, slope: f64) -> Result<Var<'t>> {
        if !(slope > 0.0 && slope < 1.0) {
            return Err(Error::Degenerate(format!(
                "leaky_relu slope {slope} outside (0, 1)"
            )));
        }
        let (shape, out) = self.tape.with_value(self.id, |x| {
            let out = x
                .data()
                .iter()
                .map(|&v| if v > 0.0 { v } else { slope * v })
                .collect();
            (x.shape().to_vec(), out)
        });
        self.tape
            .push(Op::LeakyRelu { x: self.id, slope }, shape, out, &[self.id])
    }

    /// Elementwise `mul * x + add`.
    pub fn affine(self, mul: f64, add: f64) -> Result<Var<'t>> {
        let (shape, out) = self.tape.with_value(self.id, |x| {
            (
                x.shape().to_vec(),
                x.data().iter().map(|&v| mul * v + add).collect(),
            )
        });
        self.tape
            .push(Op::Affine { x: self.id, mul }, shape, out, &[self.id])
    }

    pub fn scale(self, factor: f64) -> Result<Var<'t>> {
        self.affine(factor, 0.0)
    }

    /// Softmax over the last axis, stabilized by subtracting the row maximum.
    pub fn softmax_rows(self) -> Result<Var<'t>> {
        let (shape, cols, out) = self.tape.with_value(self.id, |x| {
            let cols = x.shape().last().copied().unwrap_or(1);
            let mut out = x.data().to_vec();
            for row in out.chunks_exact_mut(cols) {
                let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                let mut total = 0.0;
                for v in row.iter_mut() {
                    *v = (*v - max).exp();
                    total += *v;
                }
                for v in row.iter_mut() {
                    *v /= total;
                }
            }
            (x.shape().to_vec(), cols, out)
        });
        self.tape
            .push(Op::SoftmaxRows { x: self.id, cols }, shape, out, &[self.id])
    }

    /// Mean of squared differences over all elements.
    pub fn mse(self, target: Var<'t>) -> Result<Var<'t>> {
        self.check_tape(&target);
        let nodes = self.tape.nodes.borrow();
        let (a, b) = (&nodes[self.id].value, &nodes[target.id].value);
        same_shape("mse", a, b)?;
        let total: f64 = a
            .data()
            .iter()
            .zip(b.data())
            .map(|(x, y)| (x - y) * (x - y))
            .sum();
        let value = total / a.numel() as f64;
        drop(nodes);
        self.tape.push(
            Op::Mse {
                a: self.id,
                b: target.id,
            },
            Vec::new(),
            vec![value],
            &[self.id, target.id],
        )
    }

    /// Cosine similarity of the two tensors read as flat vectors.
    pub fn cosine_sim(self, other: Var<'t>) -> Result<Var<'t>> {
        self.cosine_impl(other, false)
    }

    /// Mean over the leading axis of per-slice cosine similarities.
    pub fn batch_cosine_mean(self, other: Var<'t>) -> Result<Var<'t>> {
        self.cosine_impl(other, true)
    }

    fn cosine_impl(self, other: Var<'t>, batched: bool) -> Result<Var<'t>> {
        self.check_tape(&other);
        let nodes = self.tape.nodes.borrow();
        let (a, b) = (&nodes[self.id].value, &nodes[other.id].value);
        same_shape("cosine_sim", a, b)?;
        let batch = if batched { a.len_leading() } else { 1 };
        let width = a.numel() / batch;
        let mut total = 0.0;
        for (s, (x, y)) in a
            .data()
            .chunks_exact(width)
            .zip(b.data().chunks_exact(width))
            .enumerate()
        {
            let parts = CosineParts::of(x, y);
            if parts.norm_a == 0.0 || parts.norm_b == 0.0 {
                return Err(Error::Degenerate(format!(
                    "cosine similarity of a zero-norm tensor (slice {s})"
                )));
            }
            total += parts.cosine();
        }
        drop(nodes);
        self.tape.push(
            Op::BatchCosine {
                a: self.id,
                b: other.id,
                batch,
            },
            Vec::new(),
            vec![total / batch as f64],
            &[self.id, other.id],
        )
    }

    /// Elementwise sum of two same-shaped variables.
    #[allow(clippy::should_implement_trait)]
    pub fn add(self, other: Var<'t>) -> Result<Var<'t>> {
        self.check_tape(&other);
        let nodes = self.tape.nodes.borrow();
        let (a, b) = (&nodes[self.id].value, &nodes[other.id].value);
        same_shape("add", a, b)?;
        let out = a.data().iter().zip(b.data()).map(|(x, y)| x + y).collect();
        let shape = a.shape().to_vec();
        drop(nodes);
        self.tape.push(
            Op::Add {
                a: self.id,
                b: other.id,
            },
            shape,
            out,
            &[self.id, other.id],
        )
    }

    pub fn sum(self) -> Result<Var<'t>> {
        let total = self.tape.with_value(self.id, |x| x.data().iter().sum());
        self.tape
            .push(Op::Sum { x: self.id }, Vec::new(), vec![total], &[self.id])
    }
}
