//! Reverse-mode differentiation over a flat tape of matrix ops.
//!
//! Forward evaluation is eager: each builder method computes its value and
//! records the op. `backward` walks the tape in reverse with a fixed
//! accumulation order, so gradients are bit-identical across runs. Parameter
//! leaves borrow their values from a [`ParamSet`], which keeps per-example
//! tapes cheap to build.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::mat::Mat;

/// Index of a parameter inside a [`ParamSet`]. Stable across the set's
/// lifetime; insertion order defines gradient accumulation order.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ParamId(pub usize);

/// Named parameter tensors in insertion order.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ParamSet {
    names: Vec<String>,
    tensors: Vec<Mat>,
    by_name: BTreeMap<String, usize>,
}

impl ParamSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, name: impl Into<String>, value: Mat) -> ParamId {
        let name = name.into();
        assert!(
            !self.by_name.contains_key(&name),
            "duplicate parameter {name}"
        );
        let id = self.tensors.len();
        self.by_name.insert(name.clone(), id);
        self.names.push(name);
        self.tensors.push(value);
        ParamId(id)
    }

    pub fn id(&self, name: &str) -> ParamId {
        ParamId(*self
            .by_name
            .get(name)
            .unwrap_or_else(|| panic!("unknown parameter {name}")))
    }

    pub fn get(&self, id: ParamId) -> &Mat {
        &self.tensors[id.0]
    }

    pub fn get_mut(&mut self, id: ParamId) -> &mut Mat {
        &mut self.tensors[id.0]
    }

    pub fn len(&self) -> usize {
        self.tensors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tensors.is_empty()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn tensors(&self) -> &[Mat] {
        &self.tensors
    }

    pub fn tensors_mut(&mut self) -> &mut [Mat] {
        &mut self.tensors
    }

    /// Total number of scalar parameters.
    pub fn count(&self) -> usize {
        self.tensors.iter().map(Mat::len).sum()
    }
}

/// Per-parameter gradient accumulator aligned with a [`ParamSet`].
#[derive(Debug, Clone)]
pub struct ParamGrads {
    grads: Vec<Mat>,
}

impl ParamGrads {
    pub fn zeros(params: &ParamSet) -> Self {
        ParamGrads {
            grads: params
                .tensors()
                .iter()
                .map(|t| Mat::zeros(t.rows(), t.cols()))
                .collect(),
        }
    }

    pub fn get(&self, id: ParamId) -> &Mat {
        &self.grads[id.0]
    }

    pub fn iter(&self) -> impl Iterator<Item = &Mat> {
        self.grads.iter()
    }

    pub fn iter_mut(&mut self) -> impl Iterator<Item = &mut Mat> {
        self.grads.iter_mut()
    }

    /// Accumulate another gradient set in place (fixed, index-major order).
    pub fn add_assign(&mut self, other: &ParamGrads) {
        for (a, b) in self.grads.iter_mut().zip(other.grads.iter()) {
            for (x, &y) in a.data_mut().iter_mut().zip(b.data().iter()) {
                *x += y;
            }
        }
    }

    pub fn scale(&mut self, c: f64) {
        for g in self.grads.iter_mut() {
            for x in g.data_mut() {
                *x *= c;
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NodeId(usize);

enum Slot {
    Owned(Mat),
    Param(ParamId),
}

enum Op {
    Leaf,
    Param,
    Add(NodeId, NodeId),
    AddRow(NodeId, NodeId),
    Sub(NodeId, NodeId),
    Mul(NodeId, NodeId),
    Scale(NodeId, f64),
    AddScalar(NodeId),
    Matmul(NodeId, NodeId),
    Transpose(NodeId),
    Softmax(NodeId),
    LayerNorm {
        x: NodeId,
        gain: NodeId,
        bias: NodeId,
    },
    Gelu(NodeId),
    Sigmoid(NodeId),
    Clamp(NodeId, f64, f64),
    Log(NodeId),
    ConcatRows(Vec<NodeId>),
    SliceRows(NodeId, usize, usize),
    ConcatCols(Vec<NodeId>),
    SliceCols(NodeId, usize, usize),
    MeanRows(NodeId),
    SumAll(NodeId),
    EmbedRows(NodeId, Vec<usize>),
}

struct Node {
    value: Slot,
    op: Op,
}

const LAYER_NORM_EPS: f64 = 1e-5;
const GELU_C: f64 = 0.7978845608028654; // sqrt(2/pi)
const GELU_A: f64 = 0.044715;

pub struct Tape<'p> {
    params: &'p ParamSet,
    nodes: Vec<Node>,
    poisoned: Option<String>,
}

impl<'p> Tape<'p> {
    pub fn new(params: &'p ParamSet) -> Self {
        Tape {
            params,
            nodes: Vec::new(),
            poisoned: None,
        }
    }

    pub fn value(&self, id: NodeId) -> &Mat {
        match &self.nodes[id.0].value {
            Slot::Owned(m) => m,
            Slot::Param(p) => self.params.get(*p),
        }
    }

    /// First non-finite op seen while building, if any. Checked by the
    /// training loops before a step is applied.
    pub fn check_finite(&self) -> Result<()> {
        match &self.poisoned {
            Some(op) => Err(Error::NonFinite(op.clone())),
            None => Ok(()),
        }
    }

    fn push(&mut self, value: Mat, op: Op) -> NodeId {
        if self.poisoned.is_none() && !value.all_finite() {
            self.poisoned = Some(op_name(&op).to_string());
        }
        self.nodes.push(Node {
            value: Slot::Owned(value),
            op,
        });
        NodeId(self.nodes.len() - 1)
    }

    /// Constant input; receives no gradient.
    pub fn leaf(&mut self, value: Mat) -> NodeId {
        self.push(value, Op::Leaf)
    }

    /// Trainable parameter leaf.
    pub fn param(&mut self, id: ParamId) -> NodeId {
        self.nodes.push(Node {
            value: Slot::Param(id),
            op: Op::Param,
        });
        NodeId(self.nodes.len() - 1)
    }

    pub fn add(&mut self, a: NodeId, b: NodeId) -> NodeId {
        let v = self.value(a).add(self.value(b));
        self.push(v, Op::Add(a, b))
    }

    /// `a` (m x c) plus row vector `b` (1 x c) broadcast over rows.
    pub fn add_row(&mut self, a: NodeId, b: NodeId) -> NodeId {
        let (m, c) = self.value(a).shape();
        assert_eq!(self.value(b).shape(), (1, c), "add_row broadcast");
        let bv = self.value(b).row(0).to_vec();
        let av = self.value(a);
        let mut out = Mat::zeros(m, c);
        for i in 0..m {
            let src = av.row(i);
            let dst = out.row_mut(i);
            for j in 0..c {
                dst[j] = src[j] + bv[j];
            }
        }
        self.push(out, Op::AddRow(a, b))
    }

    pub fn sub(&mut self, a: NodeId, b: NodeId) -> NodeId {
        assert_eq!(self.value(a).shape(), self.value(b).shape(), "sub");
        let bv = self.value(b).data().to_vec();
        let mut out = self.value(a).clone();
        for (x, y) in out.data_mut().iter_mut().zip(bv) {
            *x -= y;
        }
        self.push(out, Op::Sub(a, b))
    }

    pub fn mul(&mut self, a: NodeId, b: NodeId) -> NodeId {
        assert_eq!(self.value(a).shape(), self.value(b).shape(), "mul");
        let bv = self.value(b).data().to_vec();
        let mut out = self.value(a).clone();
        for (x, y) in out.data_mut().iter_mut().zip(bv) {
            *x *= y;
        }
        self.push(out, Op::Mul(a, b))
    }

    pub fn scale(&mut self, a: NodeId, c: f64) -> NodeId {
        let v = self.value(a).scale(c);
        self.push(v, Op::Scale(a, c))
    }

    pub fn add_scalar(&mut self, a: NodeId, c: f64) -> NodeId {
        let v = self.value(a).map(|x| x + c);
        self.push(v, Op::AddScalar(a))
    }

    pub fn matmul(&mut self, a: NodeId, b: NodeId) -> NodeId {
        let v = self.value(a).matmul(self.value(b));
        self.push(v, Op::Matmul(a, b))
    }

    pub fn transpose(&mut self, a: NodeId) -> NodeId {
        let v = self.value(a).transpose();
        self.push(v, Op::Transpose(a))
    }

    /// Row-wise softmax with max-subtraction for stability.
    pub fn softmax(&mut self, a: NodeId) -> NodeId {
        let x = self.value(a);
        let mut out = x.clone();
        for i in 0..out.rows() {
            let row = out.row_mut(i);
            let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let mut sum = 0.0;
            for v in row.iter_mut() {
                *v = (*v - max).exp();
                sum += *v;
            }
            for v in row.iter_mut() {
                *v /= sum;
            }
        }
        self.push(out, Op::Softmax(a))
    }

    /// Per-row normalization to mean 0 / variance 1, then an affine map by
    /// `gain` and `bias` row vectors.
    pub fn layer_norm(&mut self, x: NodeId, gain: NodeId, bias: NodeId) -> NodeId {
        let (m, c) = self.value(x).shape();
        assert_eq!(self.value(gain).shape(), (1, c), "layer_norm gain");
        assert_eq!(self.value(bias).shape(), (1, c), "layer_norm bias");
        let g = self.value(gain).row(0).to_vec();
        let b = self.value(bias).row(0).to_vec();
        let xv = self.value(x);
        let mut out = Mat::zeros(m, c);
        for i in 0..m {
            let row = xv.row(i);
            let (mean, inv_std) = row_moments(row);
            let dst = out.row_mut(i);
            for j in 0..c {
                dst[j] = (row[j] - mean) * inv_std * g[j] + b[j];
            }
        }
        self.push(out, Op::LayerNorm { x, gain, bias })
    }

    /// tanh-approximation GELU.
    pub fn gelu(&mut self, a: NodeId) -> NodeId {
        let v = self.value(a).map(gelu_fwd);
        self.push(v, Op::Gelu(a))
    }

    pub fn sigmoid(&mut self, a: NodeId) -> NodeId {
        let v = self.value(a).map(|x| 1.0 / (1.0 + (-x).exp()));
        self.push(v, Op::Sigmoid(a))
    }

    /// Clamp to [lo, hi]; gradient passes only strictly inside the interval's
    /// preimage (inclusive bounds).
    pub fn clamp(&mut self, a: NodeId, lo: f64, hi: f64) -> NodeId {
        let v = self.value(a).map(|x| x.clamp(lo, hi));
        self.push(v, Op::Clamp(a, lo, hi))
    }

    pub fn log(&mut self, a: NodeId) -> NodeId {
        let v = self.value(a).map(f64::ln);
        self.push(v, Op::Log(a))
    }

    pub fn concat_rows(&mut self, parts: &[NodeId]) -> NodeId {
        let cols = self.value(parts[0]).cols();
        let rows: usize = parts.iter().map(|&p| self.value(p).rows()).sum();
        let mut out = Mat::zeros(rows, cols);
        let mut at = 0;
        for &p in parts {
            let v = self.value(p);
            assert_eq!(v.cols(), cols, "concat_rows column mismatch");
            for i in 0..v.rows() {
                out.row_mut(at + i).copy_from_slice(v.row(i));
            }
            at += v.rows();
        }
        self.push(out, Op::ConcatRows(parts.to_vec()))
    }

    pub fn slice_rows(&mut self, a: NodeId, lo: usize, hi: usize) -> NodeId {
        let v = self.value(a).slice_rows(lo, hi);
        self.push(v, Op::SliceRows(a, lo, hi))
    }

    pub fn concat_cols(&mut self, parts: &[NodeId]) -> NodeId {
        let rows = self.value(parts[0]).rows();
        let cols: usize = parts.iter().map(|&p| self.value(p).cols()).sum();
        let mut out = Mat::zeros(rows, cols);
        let mut at = 0;
        for &p in parts {
            let v = self.value(p);
            assert_eq!(v.rows(), rows, "concat_cols row mismatch");
            for i in 0..rows {
                out.row_mut(i)[at..at + v.cols()].copy_from_slice(v.row(i));
            }
            at += v.cols();
        }
        self.push(out, Op::ConcatCols(parts.to_vec()))
    }

    pub fn slice_cols(&mut self, a: NodeId, lo: usize, hi: usize) -> NodeId {
        let v = self.value(a);
        assert!(lo <= hi && hi <= v.cols(), "column slice out of range");
        let mut out = Mat::zeros(v.rows(), hi - lo);
        for i in 0..v.rows() {
            out.row_mut(i).copy_from_slice(&v.row(i)[lo..hi]);
        }
        self.push(out, Op::SliceCols(a, lo, hi))
    }

    /// Mean over rows: (m x c) -> (1 x c). `mean_pool` over tokens.
    pub fn mean_rows(&mut self, a: NodeId) -> NodeId {
        let v = self.value(a);
        let (m, c) = v.shape();
        let mut out = Mat::zeros(1, c);
        for i in 0..m {
            for (j, &x) in v.row(i).iter().enumerate() {
                out.row_mut(0)[j] += x;
            }
        }
        for x in out.data_mut() {
            *x /= m as f64;
        }
        self.push(out, Op::MeanRows(a))
    }

    /// Sum of all entries: -> (1 x 1).
    pub fn sum_all(&mut self, a: NodeId) -> NodeId {
        let s: f64 = self.value(a).data().iter().sum();
        self.push(
            Mat::from_vec(1, 1, vec![s]).expect("scalar"),
            Op::SumAll(a),
        )
    }

    /// Gather rows of `table` by index (embedding lookup).
    pub fn embed_rows(&mut self, table: NodeId, indices: &[usize]) -> NodeId {
        let t = self.value(table);
        let mut out = Mat::zeros(indices.len(), t.cols());
        for (i, &idx) in indices.iter().enumerate() {
            out.row_mut(i).copy_from_slice(t.row(idx));
        }
        self.push(out, Op::EmbedRows(table, indices.to_vec()))
    }

    /// Multi-head scaled dot-product attention over the full token window
    /// (non-causal), composed from primitive ops so gradients come for free.
    pub fn attention(&mut self, q: NodeId, k: NodeId, v: NodeId, heads: usize) -> NodeId {
        let (_, h) = self.value(q).shape();
        assert!(h % heads == 0, "hidden {h} not divisible by {heads} heads");
        let dh = h / heads;
        let scale = 1.0 / (dh as f64).sqrt();
        let mut outs = Vec::with_capacity(heads);
        for i in 0..heads {
            let (lo, hi) = (i * dh, (i + 1) * dh);
            let qi = self.slice_cols(q, lo, hi);
            let ki = self.slice_cols(k, lo, hi);
            let vi = self.slice_cols(v, lo, hi);
            let kt = self.transpose(ki);
            let scores = self.matmul(qi, kt);
            let scaled = self.scale(scores, scale);
            let attn = self.softmax(scaled);
            outs.push(self.matmul(attn, vi));
        }
        self.concat_cols(&outs)
    }

    /// Scalar value of a 1x1 node.
    pub fn scalar(&self, id: NodeId) -> f64 {
        let v = self.value(id);
        assert_eq!(v.shape(), (1, 1), "scalar() on non-scalar node");
        v.get(0, 0)
    }

    /// Reverse-mode gradients of a scalar `loss` node times `seed`, for every
    /// parameter leaf on the tape.
    pub fn backward(&self, loss: NodeId, seed: f64) -> Result<ParamGrads> {
        let shape = self.value(loss).shape();
        if shape != (1, 1) {
            return Err(Error::NonScalarLoss(vec![shape.0, shape.1]));
        }
        self.check_finite()?;

        let mut grads: Vec<Option<Mat>> = vec![None; self.nodes.len()];
        grads[loss.0] = Some(Mat::from_vec(1, 1, vec![seed]).expect("seed"));

        let mut out = ParamGrads::zeros(self.params);
        for idx in (0..self.nodes.len()).rev() {
            let Some(g) = grads[idx].take() else { continue };
            match &self.nodes[idx].op {
                Op::Leaf => {}
                Op::Param => {
                    if let Slot::Param(pid) = &self.nodes[idx].value {
                        let acc = &mut out.grads[pid.0];
                        for (x, &y) in acc.data_mut().iter_mut().zip(g.data()) {
                            *x += y;
                        }
                    }
                }
                Op::Add(a, b) => {
                    accumulate(&mut grads, *a, g.clone());
                    accumulate(&mut grads, *b, g);
                }
                Op::AddRow(a, b) => {
                    let mut db = Mat::zeros(1, g.cols());
                    for i in 0..g.rows() {
                        for (j, &x) in g.row(i).iter().enumerate() {
                            db.row_mut(0)[j] += x;
                        }
                    }
                    accumulate(&mut grads, *b, db);
                    accumulate(&mut grads, *a, g);
                }
                Op::Sub(a, b) => {
                    accumulate(&mut grads, *b, g.scale(-1.0));
                    accumulate(&mut grads, *a, g);
                }
                Op::Mul(a, b) => {
                    let da = hadamard(&g, self.value(*b));
                    let db = hadamard(&g, self.value(*a));
                    accumulate(&mut grads, *a, da);
                    accumulate(&mut grads, *b, db);
                }
                Op::Scale(a, c) => accumulate(&mut grads, *a, g.scale(*c)),
                Op::AddScalar(a) => accumulate(&mut grads, *a, g),
                Op::Matmul(a, b) => {
                    let bt = self.value(*b).transpose();
                    let at = self.value(*a).transpose();
                    accumulate(&mut grads, *a, g.matmul(&bt));
                    accumulate(&mut grads, *b, at.matmul(&g));
                }
                Op::Transpose(a) => accumulate(&mut grads, *a, g.transpose()),
                Op::Softmax(a) => {
                    let y = owned_value(self, idx);
                    let mut dx = Mat::zeros(y.rows(), y.cols());
                    for i in 0..y.rows() {
                        let yr = y.row(i);
                        let gr = g.row(i);
                        let dot: f64 = yr.iter().zip(gr).map(|(&u, &w)| u * w).sum();
                        for (j, d) in dx.row_mut(i).iter_mut().enumerate() {
                            *d = yr[j] * (gr[j] - dot);
                        }
                    }
                    accumulate(&mut grads, *a, dx);
                }
                Op::LayerNorm { x, gain, bias } => {
                    let (dx, dgain, dbias) = layer_norm_backward(
                        self.value(*x),
                        self.value(*gain).row(0),
                        &g,
                    );
                    accumulate(&mut grads, *x, dx);
                    accumulate(&mut grads, *gain, dgain);
                    accumulate(&mut grads, *bias, dbias);
                }
                Op::Gelu(a) => {
                    let x = self.value(*a);
                    let mut dx = g.clone();
                    for (d, &xv) in dx.data_mut().iter_mut().zip(x.data()) {
                        *d *= gelu_grad(xv);
                    }
                    accumulate(&mut grads, *a, dx);
                }
                Op::Sigmoid(a) => {
                    let y = owned_value(self, idx);
                    let mut dx = g.clone();
                    for (d, &yv) in dx.data_mut().iter_mut().zip(y.data()) {
                        *d *= yv * (1.0 - yv);
                    }
                    accumulate(&mut grads, *a, dx);
                }
                Op::Clamp(a, lo, hi) => {
                    let x = self.value(*a);
                    let mut dx = g.clone();
                    for (d, &xv) in dx.data_mut().iter_mut().zip(x.data()) {
                        if xv < *lo || xv > *hi {
                            *d = 0.0;
                        }
                    }
                    accumulate(&mut grads, *a, dx);
                }
                Op::Log(a) => {
                    let x = self.value(*a);
                    let mut dx = g.clone();
                    for (d, &xv) in dx.data_mut().iter_mut().zip(x.data()) {
                        *d /= xv;
                    }
                    accumulate(&mut grads, *a, dx);
                }
                Op::ConcatRows(parts) => {
                    let mut at = 0;
                    for &p in parts {
                        let n = self.value(p).rows();
                        accumulate(&mut grads, p, g.slice_rows(at, at + n));
                        at += n;
                    }
                }
                Op::SliceRows(a, lo, _hi) => {
                    let src = self.value(*a);
                    let mut dx = Mat::zeros(src.rows(), src.cols());
                    for i in 0..g.rows() {
                        dx.row_mut(lo + i).copy_from_slice(g.row(i));
                    }
                    accumulate(&mut grads, *a, dx);
                }
                Op::ConcatCols(parts) => {
                    let mut at = 0;
                    for &p in parts {
                        let n = self.value(p).cols();
                        let mut dp = Mat::zeros(g.rows(), n);
                        for i in 0..g.rows() {
                            dp.row_mut(i).copy_from_slice(&g.row(i)[at..at + n]);
                        }
                        accumulate(&mut grads, p, dp);
                        at += n;
                    }
                }
                Op::SliceCols(a, lo, _hi) => {
                    let src = self.value(*a);
                    let mut dx = Mat::zeros(src.rows(), src.cols());
                    for i in 0..g.rows() {
                        dx.row_mut(i)[*lo..*lo + g.cols()].copy_from_slice(g.row(i));
                    }
                    accumulate(&mut grads, *a, dx);
                }
                Op::MeanRows(a) => {
                    let src = self.value(*a);
                    let m = src.rows() as f64;
                    let mut dx = Mat::zeros(src.rows(), src.cols());
                    for i in 0..src.rows() {
                        for (j, d) in dx.row_mut(i).iter_mut().enumerate() {
                            *d = g.get(0, j) / m;
                        }
                    }
                    accumulate(&mut grads, *a, dx);
                }
                Op::SumAll(a) => {
                    let src = self.value(*a);
                    let s = g.get(0, 0);
                    accumulate(&mut grads, *a, Mat::from_fn(src.rows(), src.cols(), |_, _| s));
                }
                Op::EmbedRows(table, indices) => {
                    let t = self.value(*table);
                    let mut dt = Mat::zeros(t.rows(), t.cols());
                    for (i, &idx) in indices.iter().enumerate() {
                        for (j, &x) in g.row(i).iter().enumerate() {
                            dt.row_mut(idx)[j] += x;
                        }
                    }
                    accumulate(&mut grads, *table, dt);
                }
            }
        }
        Ok(out)
    }
}

fn op_name(op: &Op) -> &'static str {
    match op {
        Op::Leaf => "leaf",
        Op::Param => "param",
        Op::Add(..) => "add",
        Op::AddRow(..) => "add_row",
        Op::Sub(..) => "sub",
        Op::Mul(..) => "mul",
        Op::Scale(..) => "scale",
        Op::AddScalar(..) => "add_scalar",
        Op::Matmul(..) => "matmul",
        Op::Transpose(..) => "transpose",
        Op::Softmax(..) => "softmax",
        Op::LayerNorm { .. } => "layer_norm",
        Op::Gelu(..) => "gelu",
        Op::Sigmoid(..) => "sigmoid",
        Op::Clamp(..) => "clamp",
        Op::Log(..) => "log",
        Op::ConcatRows(..) => "concat_rows",
        Op::SliceRows(..) => "slice_rows",
        Op::ConcatCols(..) => "concat_cols",
        Op::SliceCols(..) => "slice_cols",
        Op::MeanRows(..) => "mean_rows",
        Op::SumAll(..) => "sum_all",
        Op::EmbedRows(..) => "embed_rows",
    }
}

fn owned_value<'a>(tape: &'a Tape, idx: usize) -> &'a Mat {
    match &tape.nodes[idx].value {
        Slot::Owned(m) => m,
        Slot::Param(p) => tape.params.get(*p),
    }
}

fn accumulate(grads: &mut [Option<Mat>], id: NodeId, g: Mat) {
    match &mut grads[id.0] {
        Some(existing) => {
            for (x, &y) in existing.data_mut().iter_mut().zip(g.data()) {
                *x += y;
            }
        }
        slot @ None => *slot = Some(g),
    }
}

fn hadamard(a: &Mat, b: &Mat) -> Mat {
    let mut out = a.clone();
    for (x, &y) in out.data_mut().iter_mut().zip(b.data()) {
        *x *= y;
    }
    out
}

fn row_moments(row: &[f64]) -> (f64, f64) {
    let n = row.len() as f64;
    let mean = row.iter().sum::<f64>() / n;
    let var = row.iter().map(|&x| (x - mean) * (x - mean)).sum::<f64>() / n;
    (mean, 1.0 / (var + LAYER_NORM_EPS).sqrt())
}

fn layer_norm_backward(x: &Mat, gain: &[f64], g: &Mat) -> (Mat, Mat, Mat) {
    let (m, c) = x.shape();
    let mut dx = Mat::zeros(m, c);
    let mut dgain = Mat::zeros(1, c);
    let mut dbias = Mat::zeros(1, c);
    let n = c as f64;
    for i in 0..m {
        let row = x.row(i);
        let (mean, inv_std) = row_moments(row);
        let gr = g.row(i);
        // accumulate affine grads and the two reduction terms
        let mut sum_dxhat = 0.0;
        let mut sum_dxhat_xhat = 0.0;
        let mut xhat = vec![0.0; c];
        let mut dxhat = vec![0.0; c];
        for j in 0..c {
            xhat[j] = (row[j] - mean) * inv_std;
            dgain.row_mut(0)[j] += gr[j] * xhat[j];
            dbias.row_mut(0)[j] += gr[j];
            dxhat[j] = gr[j] * gain[j];
            sum_dxhat += dxhat[j];
            sum_dxhat_xhat += dxhat[j] * xhat[j];
        }
        let dst = dx.row_mut(i);
        for j in 0..c {
            dst[j] = inv_std * (dxhat[j] - sum_dxhat / n - xhat[j] * sum_dxhat_xhat / n);
        }
    }
    (dx, dgain, dbias)
}

fn gelu_fwd(x: f64) -> f64 {
    0.5 * x * (1.0 + (GELU_C * (x + GELU_A * x * x * x)).tanh())
}

fn gelu_grad(x: f64) -> f64 {
    let u = GELU_C * (x + GELU_A * x * x * x);
    let t = u.tanh();
    let du = GELU_C * (1.0 + 3.0 * GELU_A * x * x);
    0.5 * (1.0 + t) + 0.5 * x * (1.0 - t * t) * du
}
