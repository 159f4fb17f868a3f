//! Define-by-run reverse-mode differentiation.
//!
//! Every operation on a [`Graph`] evaluates eagerly and appends a node to the
//! tape. Nodes are only ever appended, so tape order is a topological order and
//! [`Graph::backward`] simply walks it in reverse.

use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::tensor::value::{axis_split, gemm, gemm_nt, gemm_tn, sigmoid};
use crate::tensor::{ParamId, ParamStore, Tensor};

/// Handle to a node on a [`Graph`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Var(usize);

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BinaryOp {
    Add,
    Sub,
    Mul,
}

#[derive(Debug)]
enum Op {
    Leaf,
    MatMul(usize, usize),
    Linear {
        x: usize,
        w: usize,
        b: Option<usize>,
    },
    Binary(BinaryOp, usize, usize),
    AddRow(usize, usize),
    RepeatRows(usize),
    Scale(usize, f64),
    AddScalar(usize),
    Sigmoid(usize),
    Tanh(usize),
    Relu(usize),
    Log(usize),
    Softmax {
        x: usize,
        axis: usize,
    },
    Concat {
        inputs: Vec<usize>,
        axis: usize,
    },
    Slice {
        x: usize,
        axis: usize,
        start: usize,
    },
    Max {
        x: usize,
        axis: usize,
        argmax: Vec<usize>,
    },
    SumAxis {
        x: usize,
        axis: usize,
    },
    Sum(usize),
    Gather {
        table: usize,
        ids: Vec<usize>,
    },
    Reshape(usize),
}

struct Node {
    value: Tensor,
    op: Op,
    requires_grad: bool,
}

/// A computation tape. One graph per forward pass; drop it afterwards.
#[derive(Default)]
pub struct Graph {
    nodes: Vec<Node>,
    grads: Vec<Option<Vec<f64>>>,
    params: HashMap<ParamId, Var>,
    backward_done: bool,
}

fn dim_err(msg: String) -> Error {
    Error::Dimension(msg)
}

impl Graph {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, value: Tensor, op: Op, requires_grad: bool) -> Var {
        debug_assert!(value.is_finite(), "non-finite value from {op:?}");
        self.nodes.push(Node {
            value,
            op,
            requires_grad,
        });
        self.grads.push(None);
        Var(self.nodes.len() - 1)
    }

    fn rg(&self, v: usize) -> bool {
        self.nodes[v].requires_grad
    }

    /// A value that never receives gradient.
    pub fn constant(&mut self, value: Tensor) -> Var {
        self.push(value, Op::Leaf, false)
    }

    /// A leaf that collects gradient during [`Graph::backward`].
    pub fn leaf(&mut self, value: Tensor) -> Var {
        self.push(value, Op::Leaf, true)
    }

    /// Leaf bound to a stored parameter. Frozen parameters enter as constants.
    /// Repeated calls with the same id return the same node.
    pub fn param(&mut self, store: &ParamStore, id: ParamId) -> Var {
        if let Some(&v) = self.params.get(&id) {
            return v;
        }
        let p = store.get(id);
        let v = self.push(p.value.clone(), Op::Leaf, !p.frozen);
        self.params.insert(id, v);
        v
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    pub fn shape(&self, v: Var) -> &[usize] {
        self.nodes[v.0].value.shape()
    }

    pub fn requires_grad(&self, v: Var) -> bool {
        self.nodes[v.0].requires_grad
    }

    /// Gradient of the last backward pass with respect to `v`, if any reached it.
    pub fn grad(&self, v: Var) -> Option<Tensor> {
        let g = self.grads[v.0].as_ref()?;
        Some(Tensor::new(self.nodes[v.0].value.shape().to_vec(), g.clone()).expect("grad shape"))
    }

    // ── forward ops ──────────────────────────────────────────────────

    /// `a[m×k] · b[k×n]`
    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (sa, sb) = (self.shape(a), self.shape(b));
        let (m, k, k2, n) = match (sa, sb) {
            ([m, k], [k2, n]) => (*m, *k, *k2, *n),
            _ => return Err(dim_err(format!("matmul needs rank-2 operands, got {sa:?} and {sb:?}"))),
        };
        if k != k2 {
            return Err(dim_err(format!("matmul inner extents differ: {sa:?} × {sb:?}")));
        }
        let data = gemm(self.value(a).data(), self.value(b).data(), m, k, n);
        let rg = self.rg(a.0) || self.rg(b.0);
        Ok(self.push(Tensor::new(vec![m, n], data)?, Op::MatMul(a.0, b.0), rg))
    }

    /// Affine map `x · wᵀ + b` with `x: n×in`, `w: out×in`, `b: [out]`.
    pub fn linear(&mut self, x: Var, w: Var, b: Option<Var>) -> Result<Var> {
        let (sx, sw) = (self.shape(x), self.shape(w));
        let (n, input, out, in2) = match (sx, sw) {
            ([n, i], [o, i2]) => (*n, *i, *o, *i2),
            _ => return Err(dim_err(format!("linear needs rank-2 input and weight, got {sx:?}, {sw:?}"))),
        };
        if input != in2 {
            return Err(dim_err(format!("linear input width {input} does not match weight {sw:?}")));
        }
        let mut data = gemm_nt(self.value(x).data(), self.value(w).data(), n, input, out);
        if let Some(b) = b {
            let bias = self.value(b);
            if bias.shape() != [out] {
                return Err(dim_err(format!("linear bias shape {:?}, expected [{out}]", bias.shape())));
            }
            for row in data.chunks_mut(out) {
                for (v, bv) in row.iter_mut().zip(bias.data()) {
                    *v += bv;
                }
            }
        }
        let rg = self.rg(x.0) || self.rg(w.0) || b.is_some_and(|b| self.rg(b.0));
        let op = Op::Linear {
            x: x.0,
            w: w.0,
            b: b.map(|b| b.0),
        };
        Ok(self.push(Tensor::new(vec![n, out], data)?, op, rg))
    }

    pub fn elementwise(&mut self, op: BinaryOp, a: Var, b: Var) -> Result<Var> {
        let (ta, tb) = (self.value(a), self.value(b));
        if ta.shape() != tb.shape() {
            return Err(dim_err(format!(
                "{op:?} of mismatched shapes {:?} and {:?}",
                ta.shape(),
                tb.shape()
            )));
        }
        let f: fn(f64, f64) -> f64 = match op {
            BinaryOp::Add => |x, y| x + y,
            BinaryOp::Sub => |x, y| x - y,
            BinaryOp::Mul => |x, y| x * y,
        };
        let data = ta.data().iter().zip(tb.data()).map(|(&x, &y)| f(x, y)).collect();
        let value = Tensor::new(ta.shape().to_vec(), data)?;
        let rg = self.rg(a.0) || self.rg(b.0);
        Ok(self.push(value, Op::Binary(op, a.0, b.0), rg))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.elementwise(BinaryOp::Add, a, b)
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        self.elementwise(BinaryOp::Sub, a, b)
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.elementwise(BinaryOp::Mul, a, b)
    }

    /// Adds a length-`c` vector to every row of an `r × c` matrix.
    pub fn add_row(&mut self, m: Var, v: Var) -> Result<Var> {
        let (r, c) = match self.shape(m) {
            [r, c] => (*r, *c),
            s => return Err(dim_err(format!("add_row needs a matrix, got {s:?}"))),
        };
        if self.value(v).len() != c {
            return Err(dim_err(format!("add_row: row of {} values for {c} columns", self.value(v).len())));
        }
        let row = self.value(v).data().to_vec();
        let mut data = self.value(m).data().to_vec();
        for chunk in data.chunks_mut(c) {
            for (x, y) in chunk.iter_mut().zip(&row) {
                *x += y;
            }
        }
        let rg = self.rg(m.0) || self.rg(v.0);
        Ok(self.push(Tensor::new(vec![r, c], data)?, Op::AddRow(m.0, v.0), rg))
    }

    /// Stacks `n` copies of a row (vector or `1 × c` matrix) into an `n × c` matrix.
    pub fn repeat_rows(&mut self, v: Var, n: usize) -> Result<Var> {
        if n == 0 {
            return Err(Error::EmptyInput("repeat_rows with zero copies".into()));
        }
        let t = self.value(v);
        let c = match t.shape() {
            [c] | [1, c] => *c,
            s => return Err(dim_err(format!("repeat_rows needs a single row, got {s:?}"))),
        };
        let data = t.data().repeat(n);
        let rg = self.rg(v.0);
        Ok(self.push(Tensor::new(vec![n, c], data)?, Op::RepeatRows(v.0), rg))
    }

    pub fn scale(&mut self, x: Var, factor: f64) -> Var {
        let t = self.value(x);
        let value = Tensor::new(t.shape().to_vec(), t.data().iter().map(|v| v * factor).collect()).unwrap();
        let rg = self.rg(x.0);
        self.push(value, Op::Scale(x.0, factor), rg)
    }

    pub fn add_scalar(&mut self, x: Var, c: f64) -> Var {
        let t = self.value(x);
        let value = Tensor::new(t.shape().to_vec(), t.data().iter().map(|v| v + c).collect()).unwrap();
        let rg = self.rg(x.0);
        self.push(value, Op::AddScalar(x.0), rg)
    }

    fn unary(&mut self, x: Var, f: impl Fn(f64) -> f64, op: Op) -> Var {
        let t = self.value(x);
        let value = Tensor::new(t.shape().to_vec(), t.data().iter().map(|&v| f(v)).collect()).unwrap();
        let rg = self.rg(x.0);
        self.push(value, op, rg)
    }

    pub fn sigmoid(&mut self, x: Var) -> Var {
        self.unary(x, sigmoid, Op::Sigmoid(x.0))
    }

    pub fn tanh(&mut self, x: Var) -> Var {
        self.unary(x, f64::tanh, Op::Tanh(x.0))
    }

    pub fn relu(&mut self, x: Var) -> Var {
        self.unary(x, |v| v.max(0.0), Op::Relu(x.0))
    }

    /// Natural log; every input value must be strictly positive.
    pub fn log(&mut self, x: Var) -> Result<Var> {
        if let Some(bad) = self.value(x).data().iter().find(|&&v| v <= 0.0 || v.is_nan()) {
            return Err(Error::Domain(format!("log of non-positive value {bad}")));
        }
        Ok(self.unary(x, f64::ln, Op::Log(x.0)))
    }

    /// Softmax along `axis`, shifted by the slice maximum.
    pub fn softmax(&mut self, x: Var, axis: usize) -> Result<Var> {
        let t = self.value(x);
        let (outer, extent, inner) = t.axis_split(axis)?;
        let src = t.data();
        let mut out = vec![0.0; src.len()];
        for o in 0..outer {
            for i in 0..inner {
                let idx = |a: usize| (o * extent + a) * inner + i;
                let max = (0..extent).map(|a| src[idx(a)]).fold(f64::NEG_INFINITY, f64::max);
                let mut total = 0.0;
                for a in 0..extent {
                    let e = (src[idx(a)] - max).exp();
                    out[idx(a)] = e;
                    total += e;
                }
                for a in 0..extent {
                    out[idx(a)] /= total;
                }
            }
        }
        let value = Tensor::new(t.shape().to_vec(), out)?;
        let rg = self.rg(x.0);
        Ok(self.push(value, Op::Softmax { x: x.0, axis }, rg))
    }

    pub fn concat(&mut self, inputs: &[Var], axis: usize) -> Result<Var> {
        let first = inputs
            .first()
            .ok_or_else(|| Error::EmptyInput("concat of zero tensors".into()))?;
        let base = self.shape(*first).to_vec();
        axis_split(&base, axis)?;
        let mut extent = 0;
        for v in inputs {
            let s = self.shape(*v);
            let compatible = s.len() == base.len()
                && s.iter().zip(&base).enumerate().all(|(d, (x, y))| d == axis || x == y);
            if !compatible {
                return Err(dim_err(format!("concat along axis {axis}: {s:?} incompatible with {base:?}")));
            }
            extent += s[axis];
        }
        let mut shape = base.clone();
        shape[axis] = extent;
        let (outer, _, inner) = axis_split(&shape, axis)?;
        let mut data = Vec::with_capacity(shape.iter().product());
        for o in 0..outer {
            for v in inputs {
                let t = self.value(*v);
                let chunk = t.shape()[axis] * inner;
                data.extend_from_slice(&t.data()[o * chunk..(o + 1) * chunk]);
            }
        }
        let rg = inputs.iter().any(|v| self.rg(v.0));
        let op = Op::Concat {
            inputs: inputs.iter().map(|v| v.0).collect(),
            axis,
        };
        Ok(self.push(Tensor::new(shape, data)?, op, rg))
    }

    /// `len` consecutive entries along `axis` starting at `start`.
    pub fn slice(&mut self, x: Var, axis: usize, start: usize, len: usize) -> Result<Var> {
        let t = self.value(x);
        let (outer, extent, inner) = t.axis_split(axis)?;
        if len == 0 || start + len > extent {
            return Err(dim_err(format!(
                "slice [{start}, {}) out of range for extent {extent} on axis {axis}",
                start + len
            )));
        }
        let mut data = Vec::with_capacity(outer * len * inner);
        for o in 0..outer {
            let base = (o * extent + start) * inner;
            data.extend_from_slice(&t.data()[base..base + len * inner]);
        }
        let mut shape = t.shape().to_vec();
        shape[axis] = len;
        let rg = self.rg(x.0);
        Ok(self.push(Tensor::new(shape, data)?, Op::Slice { x: x.0, axis, start }, rg))
    }

    /// Splits `x` along `axis` into pieces of the given extents; inverse of [`Graph::concat`].
    pub fn split(&mut self, x: Var, axis: usize, extents: &[usize]) -> Result<Vec<Var>> {
        let total: usize = extents.iter().sum();
        let (_, extent, _) = self.value(x).axis_split(axis)?;
        if total != extent {
            return Err(dim_err(format!("split extents sum to {total}, axis has {extent}")));
        }
        let mut start = 0;
        let mut out = Vec::with_capacity(extents.len());
        for &len in extents {
            out.push(self.slice(x, axis, start, len)?);
            start += len;
        }
        Ok(out)
    }

    /// Maximum along `axis`; the axis is kept with extent 1. Ties resolve to
    /// the lowest index, which alone receives gradient.
    pub fn max_axis(&mut self, x: Var, axis: usize) -> Result<Var> {
        let t = self.value(x);
        let (outer, extent, inner) = t.axis_split(axis)?;
        let src = t.data();
        let mut data = vec![0.0; outer * inner];
        let mut argmax = vec![0; outer * inner];
        for o in 0..outer {
            for i in 0..inner {
                let mut best = 0;
                for a in 1..extent {
                    if src[(o * extent + a) * inner + i] > src[(o * extent + best) * inner + i] {
                        best = a;
                    }
                }
                data[o * inner + i] = src[(o * extent + best) * inner + i];
                argmax[o * inner + i] = best;
            }
        }
        let mut shape = t.shape().to_vec();
        shape[axis] = 1;
        let rg = self.rg(x.0);
        Ok(self.push(Tensor::new(shape, data)?, Op::Max { x: x.0, axis, argmax }, rg))
    }

    /// Sum along `axis`; the axis is kept with extent 1.
    pub fn sum_axis(&mut self, x: Var, axis: usize) -> Result<Var> {
        let t = self.value(x);
        let (outer, extent, inner) = t.axis_split(axis)?;
        let src = t.data();
        let mut data = vec![0.0; outer * inner];
        for o in 0..outer {
            for a in 0..extent {
                for i in 0..inner {
                    data[o * inner + i] += src[(o * extent + a) * inner + i];
                }
            }
        }
        let mut shape = t.shape().to_vec();
        shape[axis] = 1;
        let rg = self.rg(x.0);
        Ok(self.push(Tensor::new(shape, data)?, Op::SumAxis { x: x.0, axis }, rg))
    }

    /// Sum of all entries as a `[1]` scalar.
    pub fn sum(&mut self, x: Var) -> Var {
        let s = self.value(x).data().iter().sum();
        let rg = self.rg(x.0);
        self.push(Tensor::scalar(s), Op::Sum(x.0), rg)
    }

    /// Rows of a `V × E` table selected by `ids`, giving `ids.len() × E`.
    pub fn gather_rows(&mut self, table: Var, ids: &[usize]) -> Result<Var> {
        let t = self.value(table);
        let (rows, cols) = match t.shape() {
            [r, c] => (*r, *c),
            s => return Err(dim_err(format!("gather_rows needs a matrix, got {s:?}"))),
        };
        if ids.is_empty() {
            return Err(Error::EmptyInput("gather_rows with no ids".into()));
        }
        if let Some(&bad) = ids.iter().find(|&&i| i >= rows) {
            return Err(Error::Input(format!("row id {bad} out of range for {rows} rows")));
        }
        let mut data = Vec::with_capacity(ids.len() * cols);
        for &i in ids {
            data.extend_from_slice(t.row(i));
        }
        let rg = self.rg(table.0);
        let op = Op::Gather {
            table: table.0,
            ids: ids.to_vec(),
        };
        Ok(self.push(Tensor::new(vec![ids.len(), cols], data)?, op, rg))
    }

    pub fn reshape(&mut self, x: Var, shape: &[usize]) -> Result<Var> {
        let value = self.value(x).reshape(shape)?;
        let rg = self.rg(x.0);
        Ok(self.push(value, Op::Reshape(x.0), rg))
    }

    // ── backward ─────────────────────────────────────────────────────

    fn accumulate(&mut self, node: usize, contrib: impl IntoIterator<Item = (usize, f64)>) {
        if !self.nodes[node].requires_grad {
            return;
        }
        let n = self.nodes[node].value.len();
        let g = self.grads[node].get_or_insert_with(|| vec![0.0; n]);
        for (i, v) in contrib {
            g[i] += v;
        }
    }

    fn accumulate_dense(&mut self, node: usize, contrib: &[f64]) {
        if !self.nodes[node].requires_grad {
            return;
        }
        let g = self.grads[node].get_or_insert_with(|| vec![0.0; contrib.len()]);
        for (x, y) in g.iter_mut().zip(contrib) {
            *x += y;
        }
    }

    /// Populates gradients of `loss` for every node that requires them.
    /// A tape supports exactly one backward pass.
    pub fn backward(&mut self, loss: Var) -> Result<()> {
        if self.backward_done {
            return Err(Error::Contract("backward already ran on this tape".into()));
        }
        if self.value(loss).len() != 1 {
            return Err(Error::Contract(format!(
                "backward needs a scalar loss, got shape {:?}",
                self.shape(loss)
            )));
        }
        self.backward_done = true;
        if !self.rg(loss.0) {
            return Ok(());
        }
        self.grads[loss.0] = Some(vec![1.0]);
        for idx in (0..=loss.0).rev() {
            if !self.nodes[idx].requires_grad {
                continue;
            }
            let Some(g) = self.grads[idx].take() else { continue };
            self.backprop_node(idx, &g);
            self.grads[idx] = Some(g);
        }
        Ok(())
    }

    fn backprop_node(&mut self, idx: usize, g: &[f64]) {
        // Temporarily detach the op so input values can be borrowed while
        // gradients are written.
        let op = std::mem::replace(&mut self.nodes[idx].op, Op::Leaf);
        match &op {
            Op::Leaf => {}
            &Op::MatMul(a, b) => {
                let (m, k) = (self.nodes[a].value.shape()[0], self.nodes[a].value.shape()[1]);
                let n = self.nodes[b].value.shape()[1];
                if self.rg(a) {
                    let ga = gemm_nt(g, self.nodes[b].value.data(), m, n, k);
                    self.accumulate_dense(a, &ga);
                }
                if self.rg(b) {
                    let gb = gemm_tn(self.nodes[a].value.data(), g, m, k, n);
                    self.accumulate_dense(b, &gb);
                }
            }
            &Op::Linear { x, w, b } => {
                let (n, input) = (self.nodes[x].value.shape()[0], self.nodes[x].value.shape()[1]);
                let out = self.nodes[w].value.shape()[0];
                if self.rg(x) {
                    let gx = gemm(g, self.nodes[w].value.data(), n, out, input);
                    self.accumulate_dense(x, &gx);
                }
                if self.rg(w) {
                    let gw = gemm_tn(g, self.nodes[x].value.data(), n, out, input);
                    self.accumulate_dense(w, &gw);
                }
                if let Some(b) = b {
                    let mut gb = vec![0.0; out];
                    for row in g.chunks(out) {
                        for (s, v) in gb.iter_mut().zip(row) {
                            *s += v;
                        }
                    }
                    self.accumulate_dense(b, &gb);
                }
            }
            &Op::Binary(kind, a, b) => match kind {
                BinaryOp::Add => {
                    self.accumulate_dense(a, g);
                    self.accumulate_dense(b, g);
                }
                BinaryOp::Sub => {
                    self.accumulate_dense(a, g);
                    let neg: Vec<f64> = g.iter().map(|v| -v).collect();
                    self.accumulate_dense(b, &neg);
                }
                BinaryOp::Mul => {
                    if self.rg(a) {
                        let ga: Vec<f64> = g.iter().zip(self.nodes[b].value.data()).map(|(x, y)| x * y).collect();
                        self.accumulate_dense(a, &ga);
                    }
                    if self.rg(b) {
                        let gb: Vec<f64> = g.iter().zip(self.nodes[a].value.data()).map(|(x, y)| x * y).collect();
                        self.accumulate_dense(b, &gb);
                    }
                }
            },
            &Op::AddRow(m, v) => {
                self.accumulate_dense(m, g);
                let c = self.nodes[v].value.len();
                let mut gv = vec![0.0; c];
                for row in g.chunks(c) {
                    for (s, x) in gv.iter_mut().zip(row) {
                        *s += x;
                    }
                }
                self.accumulate_dense(v, &gv);
            }
            &Op::RepeatRows(v) => {
                let c = self.nodes[v].value.len();
                let mut gv = vec![0.0; c];
                for row in g.chunks(c) {
                    for (s, x) in gv.iter_mut().zip(row) {
                        *s += x;
                    }
                }
                self.accumulate_dense(v, &gv);
            }
            &Op::Scale(x, factor) => {
                let gx: Vec<f64> = g.iter().map(|v| v * factor).collect();
                self.accumulate_dense(x, &gx);
            }
            &Op::AddScalar(x) => self.accumulate_dense(x, g),
            &Op::Sigmoid(x) => {
                let y = self.nodes[idx].value.data();
                let gx: Vec<f64> = g.iter().zip(y).map(|(g, y)| g * y * (1.0 - y)).collect();
                self.accumulate_dense(x, &gx);
            }
            &Op::Tanh(x) => {
                let y = self.nodes[idx].value.data();
                let gx: Vec<f64> = g.iter().zip(y).map(|(g, y)| g * (1.0 - y * y)).collect();
                self.accumulate_dense(x, &gx);
            }
            &Op::Relu(x) => {
                let xs = self.nodes[x].value.data();
                let gx: Vec<f64> = g.iter().zip(xs).map(|(g, &v)| if v > 0.0 { *g } else { 0.0 }).collect();
                self.accumulate_dense(x, &gx);
            }
            &Op::Log(x) => {
                let xs = self.nodes[x].value.data();
                let gx: Vec<f64> = g.iter().zip(xs).map(|(g, v)| g / v).collect();
                self.accumulate_dense(x, &gx);
            }
            &Op::Softmax { x, axis } => {
                let y = &self.nodes[idx].value;
                let (outer, extent, inner) = y.axis_split(axis).expect("axis checked in forward");
                let yd = y.data();
                let mut gx = vec![0.0; yd.len()];
                for o in 0..outer {
                    for i in 0..inner {
                        let at = |a: usize| (o * extent + a) * inner + i;
                        let dot: f64 = (0..extent).map(|a| g[at(a)] * yd[at(a)]).sum();
                        for a in 0..extent {
                            gx[at(a)] = yd[at(a)] * (g[at(a)] - dot);
                        }
                    }
                }
                self.accumulate_dense(x, &gx);
            }
            Op::Concat { inputs, axis } => {
                let shape = self.nodes[idx].value.shape().to_vec();
                let (outer, extent, inner) = axis_split(&shape, *axis).expect("axis checked in forward");
                let mut offset = 0;
                for &input in inputs {
                    let len = self.nodes[input].value.shape()[*axis];
                    if self.rg(input) {
                        let mut gi = Vec::with_capacity(outer * len * inner);
                        for o in 0..outer {
                            let base = (o * extent + offset) * inner;
                            gi.extend_from_slice(&g[base..base + len * inner]);
                        }
                        self.accumulate_dense(input, &gi);
                    }
                    offset += len;
                }
            }
            &Op::Slice { x, axis, start } => {
                let (outer, extent, inner) = self.nodes[x].value.axis_split(axis).expect("axis checked");
                let len = self.nodes[idx].value.shape()[axis];
                let contrib = (0..outer).flat_map(|o| {
                    (0..len * inner).map(move |j| ((o * extent + start) * inner + j, g[o * len * inner + j]))
                });
                self.accumulate(x, contrib.collect::<Vec<_>>());
            }
            Op::Max { x, axis, argmax } => {
                let (_, extent, inner) = self.nodes[*x].value.axis_split(*axis).expect("axis checked");
                let contrib: Vec<(usize, f64)> = argmax
                    .iter()
                    .enumerate()
                    .map(|(j, &a)| {
                        let (o, i) = (j / inner, j % inner);
                        ((o * extent + a) * inner + i, g[j])
                    })
                    .collect();
                self.accumulate(*x, contrib);
            }
            &Op::SumAxis { x, axis } => {
                let (outer, extent, inner) = self.nodes[x].value.axis_split(axis).expect("axis checked");
                let mut gx = vec![0.0; outer * extent * inner];
                for o in 0..outer {
                    for a in 0..extent {
                        for i in 0..inner {
                            gx[(o * extent + a) * inner + i] = g[o * inner + i];
                        }
                    }
                }
                self.accumulate_dense(x, &gx);
            }
            &Op::Sum(x) => {
                let n = self.nodes[x].value.len();
                self.accumulate_dense(x, &vec![g[0]; n]);
            }
            Op::Gather { table, ids } => {
                let cols = self.nodes[*table].value.shape()[1];
                let contrib: Vec<(usize, f64)> = ids
                    .iter()
                    .enumerate()
                    .flat_map(|(r, &id)| (0..cols).map(move |c| (id * cols + c, g[r * cols + c])))
                    .collect();
                self.accumulate(*table, contrib);
            }
            &Op::Reshape(x) => self.accumulate_dense(x, g),
        }
        self.nodes[idx].op = op;
    }

    /// Adds the gradients of every parameter leaf into `store`.
    pub fn accumulate_param_grads(&self, store: &mut ParamStore) {
        for (&id, &v) in &self.params {
            if let Some(g) = &self.grads[v.0] {
                for (acc, x) in store.get_mut(id).grad.iter_mut().zip(g) {
                    *acc += x;
                }
            }
        }
    }
}
