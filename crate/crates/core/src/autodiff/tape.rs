//! Reverse-mode automatic differentiation over a linear tape.
//!
//! Every operation appends a node holding its value; nodes are only ever
//! appended, so tape order is a topological order and backward is a single
//! reverse sweep. A tape lives for one forward/backward pass.

use rand::Rng;

use super::tensor::{mm_nn, mm_nt, mm_tn};
use super::{ParamId, ParamStore, Tensor};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Handle to a node on a [`Tape`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

/// Lower/upper clamp applied to probabilities inside the BCE loss.
pub const PROB_CLAMP: f64 = 1e-7;

#[derive(Clone, Debug)]
enum Op<S> {
    Leaf,
    Param,
    MatMul(Var, Var),
    Transpose(Var),
    Add(Var, Var),
    AddBroadcast(Var, Var),
    Mul(Var, Var),
    MulRows(Var, Var),
    Scale(Var, S),
    Sigmoid(Var),
    Relu(Var),
    LeakyRelu(Var, S),
    Elu(Var, S),
    Softmax(Var),
    SegmentSoftmax(Var, Vec<usize>),
    SegmentSum(Var, Vec<usize>),
    GatherRows(Var, Vec<usize>),
    Concat(Vec<Var>, usize),
    Reshape(Var),
    Tile(Var, usize),
    Dropout(Var, Vec<S>),
    WeightedBce {
        probs: Var,
        labels: Vec<S>,
        weights: Vec<S>,
    },
    Sum(Var),
    Mean(Var),
}

#[derive(Clone, Debug)]
struct Node<S> {
    value: Tensor<S>,
    op: Op<S>,
    needs_grad: bool,
}

#[derive(Clone, Debug, Default)]
pub struct Tape<S> {
    nodes: Vec<Node<S>>,
    params: Vec<(ParamId, Var)>,
}

/// Gradients produced by [`Tape::backward`].
#[derive(Clone, Debug)]
pub struct Gradients<S> {
    grads: Vec<Option<Tensor<S>>>,
    params: Vec<(ParamId, Var)>,
}

impl<S: Scalar> Gradients<S> {
    pub fn get(&self, var: Var) -> Option<&Tensor<S>> {
        self.grads[var.0].as_ref()
    }

    /// Adds the gradient of every parameter leaf into the store's buffers.
    pub fn accumulate_into(&self, store: &mut ParamStore<S>) {
        for &(id, var) in &self.params {
            if let Some(g) = &self.grads[var.0] {
                store.get_mut(id).grad.add_assign(g);
            }
        }
    }
}

fn shape_err(op: &'static str, detail: String) -> Error {
    Error::shape(op, detail)
}

fn sigmoid<S: Scalar>(x: S) -> S {
    if x >= S::zero() {
        S::one() / (S::one() + (-x).exp())
    } else {
        let e = x.exp();
        e / (S::one() + e)
    }
}

fn softmax_rows<S: Scalar>(data: &[S], cols: usize) -> Vec<S> {
    let mut out = vec![S::zero(); data.len()];
    for (src, dst) in data.chunks(cols).zip(out.chunks_mut(cols)) {
        softmax_into(src, dst);
    }
    out
}

fn softmax_into<S: Scalar>(src: &[S], dst: &mut [S]) {
    let max = src.iter().copied().fold(S::neg_infinity(), S::max);
    let mut total = S::zero();
    for (d, &s) in dst.iter_mut().zip(src) {
        *d = (s - max).exp();
        total += *d;
    }
    for d in dst.iter_mut() {
        *d /= total;
    }
}

fn softmax_backward<S: Scalar>(y: &[S], g: &[S], dx: &mut [S]) {
    let dot: S = y.iter().zip(g).map(|(&a, &b)| a * b).sum();
    for ((d, &yi), &gi) in dx.iter_mut().zip(y).zip(g) {
        *d += yi * (gi - dot);
    }
}

fn check_offsets(op: &'static str, offsets: &[usize], len: usize) -> Result<()> {
    if offsets.first() != Some(&0)
        || offsets.last() != Some(&len)
        || offsets.windows(2).any(|w| w[0] > w[1])
    {
        return Err(shape_err(op, format!("offsets do not partition {len} entries")));
    }
    Ok(())
}

impl<S: Scalar> Tape<S> {
    pub fn new() -> Self {
        Tape {
            nodes: Vec::new(),
            params: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, var: Var) -> &Tensor<S> {
        &self.nodes[var.0].value
    }

    pub fn shape(&self, var: Var) -> &[usize] {
        self.nodes[var.0].value.shape()
    }

    fn needs(&self, vars: &[Var]) -> bool {
        vars.iter().any(|v| self.nodes[v.0].needs_grad)
    }

    fn push(&mut self, name: &'static str, value: Tensor<S>, op: Op<S>, needs_grad: bool) -> Result<Var> {
        if !value.is_finite() {
            return Err(Error::NonFinite { op: name.to_string() });
        }
        self.nodes.push(Node {
            value,
            op,
            needs_grad,
        });
        Ok(Var(self.nodes.len() - 1))
    }

    /// A value that receives no gradient.
    pub fn constant(&mut self, value: Tensor<S>) -> Result<Var> {
        self.push("constant", value, Op::Leaf, false)
    }

    /// A differentiable input leaf that is not a stored parameter.
    pub fn variable(&mut self, value: Tensor<S>) -> Result<Var> {
        self.push("variable", value, Op::Leaf, true)
    }

    /// Registers a parameter leaf; repeated calls return the same node.
    pub fn param(&mut self, store: &ParamStore<S>, id: ParamId) -> Result<Var> {
        if let Some(&(_, var)) = self.params.iter().find(|(p, _)| *p == id) {
            return Ok(var);
        }
        let var = self.push("param", store.value(id).clone(), Op::Param, true)?;
        self.params.push((id, var));
        Ok(var)
    }

    /// Matrix product. Supports `[m,k]·[k,n]`, `[b,m,k]·[k,n]` (shared right
    /// operand) and batched `[b,m,k]·[b,k,n]`.
    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (sa, sb) = (self.shape(a).to_vec(), self.shape(b).to_vec());
        let out_shape = match (sa.as_slice(), sb.as_slice()) {
            ([m, k], [k2, n]) if k == k2 => vec![*m, *n],
            ([bt, m, k], [k2, n]) if k == k2 => vec![*bt, *m, *n],
            ([bt, m, k], [bt2, k2, n]) if k == k2 && bt == bt2 => vec![*bt, *m, *n],
            _ => return Err(shape_err("matmul", format!("{sa:?} x {sb:?}"))),
        };
        let mut out = vec![S::zero(); out_shape.iter().product()];
        {
            let (av, bv) = (self.value(a).data(), self.value(b).data());
            match (sa.len(), sb.len()) {
                (3, 3) => {
                    let (bt, m, k, n) = (sa[0], sa[1], sa[2], sb[2]);
                    for i in 0..bt {
                        mm_nn(
                            &av[i * m * k..(i + 1) * m * k],
                            &bv[i * k * n..(i + 1) * k * n],
                            &mut out[i * m * n..(i + 1) * m * n],
                            m,
                            k,
                            n,
                        );
                    }
                }
                _ => {
                    let k = sb[0];
                    let n = sb[1];
                    let m = av.len() / k;
                    mm_nn(av, bv, &mut out, m, k, n);
                }
            }
        }
        let needs = self.needs(&[a, b]);
        self.push("matmul", Tensor::new(out_shape, out)?, Op::MatMul(a, b), needs)
    }

    /// Swaps the last two axes of a rank-2 or rank-3 tensor.
    pub fn transpose(&mut self, x: Var) -> Result<Var> {
        let shape = self.shape(x).to_vec();
        let (bt, r, c) = match shape.as_slice() {
            [r, c] => (1, *r, *c),
            [b, r, c] => (*b, *r, *c),
            _ => return Err(shape_err("transpose", format!("{shape:?}"))),
        };
        let out = transpose_data(self.value(x).data(), bt, r, c);
        let mut new_shape = shape.clone();
        let n = new_shape.len();
        new_shape.swap(n - 2, n - 1);
        let needs = self.needs(&[x]);
        self.push("transpose", Tensor::new(new_shape, out)?, Op::Transpose(x), needs)
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        if self.shape(a) != self.shape(b) {
            return Err(shape_err(
                "add",
                format!("{:?} + {:?}", self.shape(a), self.shape(b)),
            ));
        }
        let out: Vec<S> = self
            .value(a)
            .data()
            .iter()
            .zip(self.value(b).data())
            .map(|(&x, &y)| x + y)
            .collect();
        let shape = self.shape(a).to_vec();
        let needs = self.needs(&[a, b]);
        self.push("add", Tensor::new(shape, out)?, Op::Add(a, b), needs)
    }

    /// `x + y` where `y`'s shape equals a trailing slice of `x`'s shape.
    pub fn add_broadcast(&mut self, x: Var, y: Var) -> Result<Var> {
        let (sx, sy) = (self.shape(x), self.shape(y));
        if sy.len() > sx.len() || sx[sx.len() - sy.len()..] != *sy {
            return Err(shape_err("add_broadcast", format!("{sx:?} + {sy:?}")));
        }
        let yv = self.value(y).data();
        let inner = yv.len().max(1);
        let out: Vec<S> = self
            .value(x)
            .data()
            .iter()
            .enumerate()
            .map(|(i, &v)| v + yv[i % inner])
            .collect();
        let shape = sx.to_vec();
        let needs = self.needs(&[x, y]);
        self.push("add_broadcast", Tensor::new(shape, out)?, Op::AddBroadcast(x, y), needs)
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        if self.shape(a) != self.shape(b) {
            return Err(shape_err(
                "mul",
                format!("{:?} * {:?}", self.shape(a), self.shape(b)),
            ));
        }
        let out: Vec<S> = self
            .value(a)
            .data()
            .iter()
            .zip(self.value(b).data())
            .map(|(&x, &y)| x * y)
            .collect();
        let shape = self.shape(a).to_vec();
        let needs = self.needs(&[a, b]);
        self.push("mul", Tensor::new(shape, out)?, Op::Mul(a, b), needs)
    }

    /// Scales row `i` of `x` (viewed as `[rows, cols]`) by `w[i]`.
    pub fn mul_rows(&mut self, x: Var, w: Var) -> Result<Var> {
        let cols = self.value(x).cols();
        let rows = self.value(x).numel() / cols.max(1);
        if self.value(w).numel() != rows {
            return Err(shape_err(
                "mul_rows",
                format!("{:?} by {:?}", self.shape(x), self.shape(w)),
            ));
        }
        let wv = self.value(w).data();
        let out: Vec<S> = self
            .value(x)
            .data()
            .iter()
            .enumerate()
            .map(|(i, &v)| v * wv[i / cols])
            .collect();
        let shape = self.shape(x).to_vec();
        let needs = self.needs(&[x, w]);
        self.push("mul_rows", Tensor::new(shape, out)?, Op::MulRows(x, w), needs)
    }

    pub fn scale(&mut self, x: Var, factor: S) -> Result<Var> {
        let value = self.value(x).map(|v| v * factor);
        let needs = self.needs(&[x]);
        self.push("scale", value, Op::Scale(x, factor), needs)
    }

    pub fn sigmoid(&mut self, x: Var) -> Result<Var> {
        let value = self.value(x).map(sigmoid);
        let needs = self.needs(&[x]);
        self.push("sigmoid", value, Op::Sigmoid(x), needs)
    }

    pub fn relu(&mut self, x: Var) -> Result<Var> {
        let value = self.value(x).map(|v| v.max(S::zero()));
        let needs = self.needs(&[x]);
        self.push("relu", value, Op::Relu(x), needs)
    }

    pub fn leaky_relu(&mut self, x: Var, slope: S) -> Result<Var> {
        let value = self
            .value(x)
            .map(|v| if v > S::zero() { v } else { v * slope });
        let needs = self.needs(&[x]);
        self.push("leaky_relu", value, Op::LeakyRelu(x, slope), needs)
    }

    pub fn elu(&mut self, x: Var, alpha: S) -> Result<Var> {
        let value = self.value(x).map(|v| {
            if v > S::zero() {
                v
            } else {
                alpha * (v.exp() - S::one())
            }
        });
        let needs = self.needs(&[x]);
        self.push("elu", value, Op::Elu(x, alpha), needs)
    }

    /// Max-subtracted softmax along the last axis.
    pub fn softmax(&mut self, x: Var) -> Result<Var> {
        let value = self.value(x);
        let out = softmax_rows(value.data(), value.cols());
        let shape = value.shape().to_vec();
        let needs = self.needs(&[x]);
        self.push("softmax", Tensor::new(shape, out)?, Op::Softmax(x), needs)
    }

    /// Softmax of a flat vector within each `offsets[s]..offsets[s+1]`.
    pub fn segment_softmax(&mut self, x: Var, offsets: Vec<usize>) -> Result<Var> {
        let value = self.value(x);
        check_offsets("segment_softmax", &offsets, value.numel())?;
        let mut out = vec![S::zero(); value.numel()];
        for w in offsets.windows(2) {
            if w[0] < w[1] {
                softmax_into(&value.data()[w[0]..w[1]], &mut out[w[0]..w[1]]);
            }
        }
        let shape = value.shape().to_vec();
        let needs = self.needs(&[x]);
        self.push("segment_softmax", Tensor::new(shape, out)?, Op::SegmentSoftmax(x, offsets), needs)
    }

    /// Sums the rows of `x` (`[E, d]`) within each segment into `[S, d]`.
    pub fn segment_sum(&mut self, x: Var, offsets: Vec<usize>) -> Result<Var> {
        let value = self.value(x);
        if value.rank() != 2 {
            return Err(shape_err("segment_sum", format!("{:?}", value.shape())));
        }
        check_offsets("segment_sum", &offsets, value.shape()[0])?;
        let d = value.shape()[1];
        let segments = offsets.len() - 1;
        let mut out = vec![S::zero(); segments * d];
        for s in 0..segments {
            let dst = &mut out[s * d..(s + 1) * d];
            for r in offsets[s]..offsets[s + 1] {
                for (o, &v) in dst.iter_mut().zip(value.row(r)) {
                    *o += v;
                }
            }
        }
        let needs = self.needs(&[x]);
        self.push("segment_sum", Tensor::new([segments, d], out)?, Op::SegmentSum(x, offsets), needs)
    }

    /// Selects rows along the first axis (repeats allowed).
    pub fn gather_rows(&mut self, x: Var, indices: Vec<usize>) -> Result<Var> {
        let value = self.value(x);
        let rows = *value
            .shape()
            .first()
            .ok_or_else(|| shape_err("gather_rows", "scalar input".into()))?;
        let inner = value.numel() / rows.max(1);
        let mut out = Vec::with_capacity(indices.len() * inner);
        for &i in &indices {
            if i >= rows {
                return Err(shape_err("gather_rows", format!("row {i} of {rows}")));
            }
            out.extend_from_slice(&value.data()[i * inner..(i + 1) * inner]);
        }
        let mut shape = value.shape().to_vec();
        shape[0] = indices.len();
        let needs = self.needs(&[x]);
        self.push("gather_rows", Tensor::new(shape, out)?, Op::GatherRows(x, indices), needs)
    }

    /// Concatenation along `axis`; all other axes must agree.
    pub fn concat(&mut self, inputs: &[Var], axis: usize) -> Result<Var> {
        let first = self
            .shape(*inputs.first().ok_or_else(|| shape_err("concat", "no inputs".into()))?)
            .to_vec();
        if axis >= first.len() {
            return Err(shape_err("concat", format!("axis {axis} for {first:?}")));
        }
        let mut total = 0;
        for &v in inputs {
            let s = self.shape(v);
            if s.len() != first.len()
                || s.iter().enumerate().any(|(i, &d)| i != axis && d != first[i])
            {
                return Err(shape_err("concat", format!("{first:?} with {s:?}")));
            }
            total += s[axis];
        }
        let outer: usize = first[..axis].iter().product();
        let tail: usize = first[axis + 1..].iter().product();
        let mut out = Vec::with_capacity(outer * total * tail);
        for o in 0..outer {
            for &v in inputs {
                let chunk = self.shape(v)[axis] * tail;
                out.extend_from_slice(&self.value(v).data()[o * chunk..(o + 1) * chunk]);
            }
        }
        let mut shape = first;
        shape[axis] = total;
        let needs = self.needs(inputs);
        self.push("concat", Tensor::new(shape, out)?, Op::Concat(inputs.to_vec(), axis), needs)
    }

    pub fn reshape(&mut self, x: Var, shape: &[usize]) -> Result<Var> {
        let value = self.value(x).clone().reshaped(shape.to_vec())?;
        let needs = self.needs(&[x]);
        self.push("reshape", value, Op::Reshape(x), needs)
    }

    /// Stacks `copies` copies of `x` along a new leading axis.
    pub fn tile(&mut self, x: Var, copies: usize) -> Result<Var> {
        let value = self.value(x);
        let mut shape = vec![copies];
        shape.extend_from_slice(value.shape());
        let out = value.data().repeat(copies);
        let needs = self.needs(&[x]);
        self.push("tile", Tensor::new(shape, out)?, Op::Tile(x, copies), needs)
    }

    /// Inverted dropout. Identity when `train` is false or `rate` is zero.
    pub fn dropout<R: Rng + ?Sized>(&mut self, x: Var, rate: f64, train: bool, rng: &mut R) -> Result<Var> {
        if !(0.0..1.0).contains(&rate) {
            return Err(Error::InvalidArgument(format!("dropout rate {rate} not in [0, 1)")));
        }
        if !train || rate == 0.0 {
            return Ok(x);
        }
        let keep = S::of(1.0 / (1.0 - rate));
        let mask: Vec<S> = (0..self.value(x).numel())
            .map(|_| if rng.random::<f64>() < rate { S::zero() } else { keep })
            .collect();
        let value = self.value(x);
        let out: Vec<S> = value.data().iter().zip(&mask).map(|(&v, &m)| v * m).collect();
        let shape = value.shape().to_vec();
        let needs = self.needs(&[x]);
        self.push("dropout", Tensor::new(shape, out)?, Op::Dropout(x, mask), needs)
    }

    /// Mean of `-w·[y ln p + (1-y) ln(1-p)]` with `p` clamped to
    /// `[1e-7, 1 - 1e-7]`.
    pub fn weighted_bce(&mut self, probs: Var, labels: &[S], weights: &[S]) -> Result<Var> {
        let p = self.value(probs);
        if p.numel() != labels.len() || labels.len() != weights.len() || labels.is_empty() {
            return Err(shape_err(
                "weighted_bce",
                format!("{} probs, {} labels, {} weights", p.numel(), labels.len(), weights.len()),
            ));
        }
        let lo = S::of(PROB_CLAMP);
        let hi = S::one() - lo;
        let mut total = S::zero();
        for ((&pi, &y), &w) in p.data().iter().zip(labels).zip(weights) {
            let pc = pi.max(lo).min(hi);
            total += -w * (y * pc.ln() + (S::one() - y) * (S::one() - pc).ln());
        }
        let loss = total / S::of(labels.len() as f64);
        let needs = self.needs(&[probs]);
        self.push(
            "weighted_bce",
            Tensor::scalar(loss),
            Op::WeightedBce {
                probs,
                labels: labels.to_vec(),
                weights: weights.to_vec(),
            },
            needs,
        )
    }

    pub fn sum(&mut self, x: Var) -> Result<Var> {
        let total: S = self.value(x).data().iter().copied().sum();
        let needs = self.needs(&[x]);
        self.push("sum", Tensor::scalar(total), Op::Sum(x), needs)
    }

    pub fn mean(&mut self, x: Var) -> Result<Var> {
        let v = self.value(x);
        let total: S = v.data().iter().copied().sum::<S>() / S::of(v.numel() as f64);
        let needs = self.needs(&[x]);
        self.push("mean", Tensor::scalar(total), Op::Mean(x), needs)
    }

    /// Back-propagates from a scalar node.
    pub fn backward(&self, loss: Var) -> Result<Gradients<S>> {
        if self.value(loss).numel() != 1 {
            return Err(Error::InvalidArgument(format!(
                "backward needs a scalar loss, got shape {:?}",
                self.shape(loss)
            )));
        }
        let mut grads: Vec<Option<Tensor<S>>> = vec![None; self.nodes.len()];
        grads[loss.0] = Some(Tensor::full(self.shape(loss).to_vec(), S::one()));
        for idx in (0..=loss.0).rev() {
            let node = &self.nodes[idx];
            if !node.needs_grad {
                continue;
            }
            let Some(g) = grads[idx].take() else { continue };
            self.backward_node(node, &g, &mut grads);
            grads[idx] = Some(g);
        }
        Ok(Gradients {
            grads,
            params: self.params.clone(),
        })
    }

    fn accumulate(&self, grads: &mut [Option<Tensor<S>>], var: Var, f: impl FnOnce(&mut [S])) {
        if !self.nodes[var.0].needs_grad {
            return;
        }
        let slot = &mut grads[var.0];
        if slot.is_none() {
            *slot = Some(Tensor::zeros(self.shape(var).to_vec()));
        }
        f(slot.as_mut().unwrap().data_mut());
    }

    fn backward_node(&self, node: &Node<S>, g: &Tensor<S>, grads: &mut [Option<Tensor<S>>]) {
        let gd = g.data();
        let y = node.value.data();
        match &node.op {
            Op::Leaf | Op::Param => {}
            Op::MatMul(a, b) => {
                let (sa, sb) = (self.shape(*a), self.shape(*b));
                let (av, bv) = (self.value(*a).data(), self.value(*b).data());
                if sa.len() == 3 && sb.len() == 3 {
                    let (bt, m, k, n) = (sa[0], sa[1], sa[2], sb[2]);
                    self.accumulate(grads, *a, |da| {
                        for i in 0..bt {
                            mm_nt(
                                &gd[i * m * n..(i + 1) * m * n],
                                &bv[i * k * n..(i + 1) * k * n],
                                &mut da[i * m * k..(i + 1) * m * k],
                                m,
                                n,
                                k,
                            );
                        }
                    });
                    self.accumulate(grads, *b, |db| {
                        for i in 0..bt {
                            mm_tn(
                                &av[i * m * k..(i + 1) * m * k],
                                &gd[i * m * n..(i + 1) * m * n],
                                &mut db[i * k * n..(i + 1) * k * n],
                                k,
                                m,
                                n,
                            );
                        }
                    });
                } else {
                    let (k, n) = (sb[0], sb[1]);
                    let m = av.len() / k;
                    self.accumulate(grads, *a, |da| mm_nt(gd, bv, da, m, n, k));
                    self.accumulate(grads, *b, |db| mm_tn(av, gd, db, k, m, n));
                }
            }
            Op::Transpose(x) => {
                let s = node.value.shape();
                let (bt, r, c) = match s {
                    [r, c] => (1, *r, *c),
                    [b, r, c] => (*b, *r, *c),
                    _ => unreachable!(),
                };
                let back = transpose_data(gd, bt, r, c);
                self.accumulate(grads, *x, |dx| add_into(dx, &back));
            }
            Op::Add(a, b) => {
                self.accumulate(grads, *a, |da| add_into(da, gd));
                self.accumulate(grads, *b, |db| add_into(db, gd));
            }
            Op::AddBroadcast(x, yv) => {
                self.accumulate(grads, *x, |dx| add_into(dx, gd));
                self.accumulate(grads, *yv, |dy| {
                    let inner = dy.len().max(1);
                    for (i, &gi) in gd.iter().enumerate() {
                        dy[i % inner] += gi;
                    }
                });
            }
            Op::Mul(a, b) => {
                let (av, bv) = (self.value(*a).data(), self.value(*b).data());
                self.accumulate(grads, *a, |da| {
                    for i in 0..da.len() {
                        da[i] += gd[i] * bv[i];
                    }
                });
                self.accumulate(grads, *b, |db| {
                    for i in 0..db.len() {
                        db[i] += gd[i] * av[i];
                    }
                });
            }
            Op::MulRows(x, w) => {
                let (xv, wv) = (self.value(*x).data(), self.value(*w).data());
                let cols = self.value(*x).cols().max(1);
                self.accumulate(grads, *x, |dx| {
                    for i in 0..dx.len() {
                        dx[i] += gd[i] * wv[i / cols];
                    }
                });
                self.accumulate(grads, *w, |dw| {
                    for i in 0..gd.len() {
                        dw[i / cols] += gd[i] * xv[i];
                    }
                });
            }
            Op::Scale(x, f) => {
                self.accumulate(grads, *x, |dx| {
                    for (d, &gi) in dx.iter_mut().zip(gd) {
                        *d += gi * *f;
                    }
                });
            }
            Op::Sigmoid(x) => {
                self.accumulate(grads, *x, |dx| {
                    for i in 0..dx.len() {
                        dx[i] += gd[i] * y[i] * (S::one() - y[i]);
                    }
                });
            }
            Op::Relu(x) => {
                let xv = self.value(*x).data();
                self.accumulate(grads, *x, |dx| {
                    for i in 0..dx.len() {
                        if xv[i] > S::zero() {
                            dx[i] += gd[i];
                        }
                    }
                });
            }
            Op::LeakyRelu(x, slope) => {
                let xv = self.value(*x).data();
                self.accumulate(grads, *x, |dx| {
                    for i in 0..dx.len() {
                        dx[i] += if xv[i] > S::zero() { gd[i] } else { gd[i] * *slope };
                    }
                });
            }
            Op::Elu(x, alpha) => {
                let xv = self.value(*x).data();
                self.accumulate(grads, *x, |dx| {
                    for i in 0..dx.len() {
                        dx[i] += if xv[i] > S::zero() { gd[i] } else { gd[i] * (y[i] + *alpha) };
                    }
                });
            }
            Op::Softmax(x) => {
                let cols = node.value.cols();
                self.accumulate(grads, *x, |dx| {
                    for ((yr, gr), dr) in y.chunks(cols).zip(gd.chunks(cols)).zip(dx.chunks_mut(cols)) {
                        softmax_backward(yr, gr, dr);
                    }
                });
            }
            Op::SegmentSoftmax(x, offsets) => {
                self.accumulate(grads, *x, |dx| {
                    for w in offsets.windows(2) {
                        let r = w[0]..w[1];
                        softmax_backward(&y[r.clone()], &gd[r.clone()], &mut dx[r]);
                    }
                });
            }
            Op::SegmentSum(x, offsets) => {
                let d = node.value.cols();
                self.accumulate(grads, *x, |dx| {
                    for s in 0..offsets.len() - 1 {
                        let gs = &gd[s * d..(s + 1) * d];
                        for r in offsets[s]..offsets[s + 1] {
                            add_into(&mut dx[r * d..(r + 1) * d], gs);
                        }
                    }
                });
            }
            Op::GatherRows(x, indices) => {
                let inner = node.value.numel() / indices.len().max(1);
                self.accumulate(grads, *x, |dx| {
                    for (j, &i) in indices.iter().enumerate() {
                        add_into(&mut dx[i * inner..(i + 1) * inner], &gd[j * inner..(j + 1) * inner]);
                    }
                });
            }
            Op::Concat(inputs, axis) => {
                let shape = node.value.shape();
                let outer: usize = shape[..*axis].iter().product();
                let tail: usize = shape[axis + 1..].iter().product();
                let row = shape[*axis] * tail;
                let mut offset = 0;
                for &v in inputs {
                    let chunk = self.shape(v)[*axis] * tail;
                    self.accumulate(grads, v, |dv| {
                        for o in 0..outer {
                            let src = &gd[o * row + offset..o * row + offset + chunk];
                            add_into(&mut dv[o * chunk..(o + 1) * chunk], src);
                        }
                    });
                    offset += chunk;
                }
            }
            Op::Reshape(x) => self.accumulate(grads, *x, |dx| add_into(dx, gd)),
            Op::Tile(x, copies) => {
                let inner = node.value.numel() / (*copies).max(1);
                self.accumulate(grads, *x, |dx| {
                    for c in 0..*copies {
                        add_into(dx, &gd[c * inner..(c + 1) * inner]);
                    }
                });
            }
            Op::Dropout(x, mask) => {
                self.accumulate(grads, *x, |dx| {
                    for i in 0..dx.len() {
                        dx[i] += gd[i] * mask[i];
                    }
                });
            }
            Op::WeightedBce {
                probs,
                labels,
                weights,
            } => {
                let p = self.value(*probs).data();
                let lo = S::of(PROB_CLAMP);
                let hi = S::one() - lo;
                let n = S::of(labels.len() as f64);
                let scale = gd[0] / n;
                self.accumulate(grads, *probs, |dp| {
                    for i in 0..dp.len() {
                        // the clamp is flat outside [lo, hi]
                        if p[i] > lo && p[i] < hi {
                            let yl = labels[i];
                            dp[i] += -weights[i] * (yl / p[i] - (S::one() - yl) / (S::one() - p[i])) * scale;
                        }
                    }
                });
            }
            Op::Sum(x) => {
                self.accumulate(grads, *x, |dx| dx.iter_mut().for_each(|d| *d += gd[0]));
            }
            Op::Mean(x) => {
                let n = S::of(self.value(*x).numel() as f64);
                self.accumulate(grads, *x, |dx| dx.iter_mut().for_each(|d| *d += gd[0] / n));
            }
        }
    }
}

fn add_into<S: Scalar>(dst: &mut [S], src: &[S]) {
    for (d, &s) in dst.iter_mut().zip(src) {
        *d += s;
    }
}

fn transpose_data<S: Scalar>(data: &[S], batches: usize, rows: usize, cols: usize) -> Vec<S> {
    let mut out = vec![S::zero(); data.len()];
    for b in 0..batches {
        let base = b * rows * cols;
        for r in 0..rows {
            for c in 0..cols {
                out[base + c * rows + r] = data[base + r * cols + c];
            }
        }
    }
    out
}
