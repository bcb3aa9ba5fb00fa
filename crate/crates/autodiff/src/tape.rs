//! Reverse-mode tape over [`Array`] values.
//!
//! Every operation appends one node holding its forward value and the parent
//! handles its backward rule needs. Nodes only ever reference earlier nodes,
//! so walking the node list backwards is a reverse topological order.

use std::collections::HashMap;

use crate::gemm::gemm;
use crate::{AdError, Array, ParamStore, Result};

/// Handle to a value recorded on a [`Tape`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Var(usize);

#[derive(Debug)]
enum Op {
    Leaf,
    MatMul(Var, Var),
    MatMulNt(Var, Var),
    Add(Var, Var),
    Mul(Var, Var),
    Scale(Var, f64),
    AddN(Vec<Var>),
    Relu(Var),
    Tanh(Var),
    Sigmoid(Var),
    Ln(Var),
    Softmax(Var),
    LayerNorm {
        x: Var,
        gain: Var,
        bias: Var,
        xhat: Vec<f64>,
        inv_std: Vec<f64>,
    },
    ConcatCols(Vec<Var>),
    SliceCols(Var, usize, usize),
    Row(Var, usize),
    MeanRows(Var),
    Sum(Var),
    Pick(Var, usize),
}

#[derive(Debug)]
struct Node {
    value: Array,
    op: Op,
    needs_grad: bool,
}

#[derive(Debug, Default)]
pub struct Tape {
    nodes: Vec<Node>,
    params: HashMap<String, Var>,
    param_order: Vec<(String, Var)>,
}

/// Gradients of one backward pass, indexed by [`Var`].
#[derive(Debug)]
pub struct Gradients {
    grads: Vec<Option<Vec<f64>>>,
    shapes: Vec<Vec<usize>>,
}

impl Gradients {
    pub fn get(&self, v: Var) -> Option<Array> {
        self.grads[v.0]
            .as_ref()
            .map(|g| Array::new(self.shapes[v.0].clone(), g.clone()).expect("shape recorded"))
    }

    /// Gradient with respect to `v`, zeros when `v` did not reach the loss.
    pub fn wrt(&self, v: Var) -> Array {
        self.get(v)
            .unwrap_or_else(|| Array::zeros(&self.shapes[v.0]))
    }
}

fn shape_err(op: &'static str, a: &Array, b: &Array) -> AdError {
    AdError::Shape {
        op,
        a: a.shape().to_vec(),
        b: b.shape().to_vec(),
    }
}

fn dims2(op: &'static str, a: &Array) -> Result<(usize, usize)> {
    match a.shape() {
        [r, c] => Ok((*r, *c)),
        s => Err(AdError::Invalid {
            op,
            msg: format!("expected a 2-d array, got shape {s:?}"),
        }),
    }
}

/// `b` broadcasts against `a` when, after dropping leading 1s, its shape is
/// a suffix of `a`'s. Returns the inner block length.
fn broadcast_inner(op: &'static str, a: &Array, b: &Array) -> Result<usize> {
    let bs: Vec<usize> = b
        .shape()
        .iter()
        .copied()
        .skip_while(|&d| d == 1)
        .collect();
    let a_s = a.shape();
    if bs.len() > a_s.len() || a_s[a_s.len() - bs.len()..] != bs[..] {
        return Err(shape_err(op, a, b));
    }
    Ok(b.len().max(1))
}

fn softmax_row(x: &[f64], mask: Option<&[bool]>, out: &mut [f64]) -> bool {
    let allowed = |i: usize| x[i] != f64::NEG_INFINITY && mask.is_none_or(|m| !m[i]);
    let mut max = f64::NEG_INFINITY;
    for i in 0..x.len() {
        if allowed(i) && x[i] > max {
            max = x[i];
        }
    }
    if max == f64::NEG_INFINITY {
        return false;
    }
    let mut sum = 0.0;
    for i in 0..x.len() {
        out[i] = if allowed(i) { (x[i] - max).exp() } else { 0.0 };
        sum += out[i];
    }
    for o in out.iter_mut() {
        *o /= sum;
    }
    true
}

const LAYER_NORM_EPS: f64 = 1e-5;

impl Tape {
    pub fn new() -> Self {
        Tape::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, value: Array, op: Op, needs_grad: bool) -> Var {
        self.nodes.push(Node {
            value,
            op,
            needs_grad,
        });
        Var(self.nodes.len() - 1)
    }

    fn ng(&self, v: Var) -> bool {
        self.nodes[v.0].needs_grad
    }

    pub fn value(&self, v: Var) -> &Array {
        &self.nodes[v.0].value
    }

    /// Input that never receives a gradient.
    pub fn constant(&mut self, value: Array) -> Var {
        self.push(value, Op::Leaf, false)
    }

    /// Unnamed trainable input; its gradient is read back via [`Gradients`].
    pub fn leaf(&mut self, value: Array) -> Var {
        self.push(value, Op::Leaf, true)
    }

    /// Named parameter from `store`, recorded once per tape.
    pub fn param(&mut self, store: &ParamStore, name: &str) -> Result<Var> {
        if let Some(&v) = self.params.get(name) {
            return Ok(v);
        }
        let value = store
            .value(name)
            .ok_or_else(|| AdError::UnknownParam(name.to_string()))?
            .clone();
        let v = self.push(value, Op::Leaf, true);
        self.params.insert(name.to_string(), v);
        self.param_order.push((name.to_string(), v));
        Ok(v)
    }

    pub fn params(&self) -> &[(String, Var)] {
        &self.param_order
    }

    /// `a [m x k] * b [k x p]`.
    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (va, vb) = (self.value(a), self.value(b));
        let (m, k) = dims2("matmul", va)?;
        let (k2, p) = dims2("matmul", vb)?;
        if k != k2 {
            return Err(shape_err("matmul", va, vb));
        }
        let mut out = vec![0.0; m * p];
        gemm(m, k, p, va.data(), false, vb.data(), false, &mut out, false);
        let ng = self.ng(a) || self.ng(b);
        Ok(self.push(Array::new(vec![m, p], out)?, Op::MatMul(a, b), ng))
    }

    /// `a [m x k] * b^T` for `b [p x k]`.
    pub fn matmul_nt(&mut self, a: Var, b: Var) -> Result<Var> {
        let (va, vb) = (self.value(a), self.value(b));
        let (m, k) = dims2("matmul_nt", va)?;
        let (p, k2) = dims2("matmul_nt", vb)?;
        if k != k2 {
            return Err(shape_err("matmul_nt", va, vb));
        }
        let mut out = vec![0.0; m * p];
        gemm(m, k, p, va.data(), false, vb.data(), true, &mut out, false);
        let ng = self.ng(a) || self.ng(b);
        Ok(self.push(Array::new(vec![m, p], out)?, Op::MatMulNt(a, b), ng))
    }

    /// Elementwise `a + b`, `b` broadcast over the leading dims of `a`.
    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        let (va, vb) = (self.value(a), self.value(b));
        let inner = broadcast_inner("add", va, vb)?;
        let bd = vb.data();
        let out: Vec<f64> = va
            .data()
            .iter()
            .enumerate()
            .map(|(i, x)| x + bd[i % inner])
            .collect();
        let shape = va.shape().to_vec();
        let ng = self.ng(a) || self.ng(b);
        Ok(self.push(Array::new(shape, out)?, Op::Add(a, b), ng))
    }

    /// Elementwise `a * b`, `b` broadcast over the leading dims of `a`.
    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (va, vb) = (self.value(a), self.value(b));
        let inner = broadcast_inner("mul", va, vb)?;
        let bd = vb.data();
        let out: Vec<f64> = va
            .data()
            .iter()
            .enumerate()
            .map(|(i, x)| x * bd[i % inner])
            .collect();
        let shape = va.shape().to_vec();
        let ng = self.ng(a) || self.ng(b);
        Ok(self.push(Array::new(shape, out)?, Op::Mul(a, b), ng))
    }

    pub fn scale(&mut self, a: Var, c: f64) -> Var {
        let va = self.value(a);
        let out = va.data().iter().map(|x| x * c).collect();
        let value = Array::new(va.shape().to_vec(), out).expect("same shape");
        let ng = self.ng(a);
        self.push(value, Op::Scale(a, c), ng)
    }

    /// Sum of equally shaped values.
    pub fn add_n(&mut self, xs: &[Var]) -> Result<Var> {
        let first = *xs.first().ok_or_else(|| AdError::Invalid {
            op: "add_n",
            msg: "no operands".into(),
        })?;
        let mut acc = self.value(first).clone();
        for &x in &xs[1..] {
            let vx = self.value(x);
            if vx.shape() != acc.shape() {
                return Err(shape_err("add_n", &acc, vx));
            }
            acc.add_assign(vx.data());
        }
        let ng = xs.iter().any(|&x| self.ng(x));
        Ok(self.push(acc, Op::AddN(xs.to_vec()), ng))
    }

    fn unary(&mut self, a: Var, f: impl Fn(f64) -> f64, op: Op) -> Var {
        let va = self.value(a);
        let out = va.data().iter().map(|&x| f(x)).collect();
        let value = Array::new(va.shape().to_vec(), out).expect("same shape");
        let ng = self.ng(a);
        self.push(value, op, ng)
    }

    pub fn relu(&mut self, a: Var) -> Var {
        self.unary(a, |x| x.max(0.0), Op::Relu(a))
    }

    pub fn tanh(&mut self, a: Var) -> Var {
        self.unary(a, f64::tanh, Op::Tanh(a))
    }

    pub fn sigmoid(&mut self, a: Var) -> Var {
        self.unary(a, |x| 1.0 / (1.0 + (-x).exp()), Op::Sigmoid(a))
    }

    pub fn ln(&mut self, a: Var) -> Var {
        self.unary(a, f64::ln, Op::Ln(a))
    }

    /// Softmax over the last dimension. `-inf` entries map to exactly 0; a
    /// row with nothing but `-inf` is an error.
    pub fn softmax_rows(&mut self, a: Var) -> Result<Var> {
        self.softmax_impl(a, None)
    }

    /// Softmax over the last dimension with `mask[i] == true` entries
    /// excluded (probability exactly 0). `mask` covers every element.
    pub fn masked_softmax_rows(&mut self, a: Var, mask: &[bool]) -> Result<Var> {
        if mask.len() != self.value(a).len() {
            return Err(AdError::Invalid {
                op: "masked_softmax_rows",
                msg: format!(
                    "mask has {} entries for {} values",
                    mask.len(),
                    self.value(a).len()
                ),
            });
        }
        self.softmax_impl(a, Some(mask))
    }

    fn softmax_impl(&mut self, a: Var, mask: Option<&[bool]>) -> Result<Var> {
        let va = self.value(a);
        let d = va.last_dim();
        if d == 0 {
            return Err(AdError::Invalid {
                op: "softmax_rows",
                msg: "last dimension is empty".into(),
            });
        }
        let mut out = vec![0.0; va.len()];
        for r in 0..va.rows() {
            let m = mask.map(|m| &m[r * d..(r + 1) * d]);
            if !softmax_row(va.row(r), m, &mut out[r * d..(r + 1) * d]) {
                return Err(AdError::NoSelectable { row: r });
            }
        }
        let value = Array::new(va.shape().to_vec(), out)?;
        let ng = self.ng(a);
        Ok(self.push(value, Op::Softmax(a), ng))
    }

    /// Per-row normalization over the last dimension (population variance,
    /// epsilon 1e-5 inside the root) followed by `gain * x + bias`.
    pub fn layer_norm(&mut self, x: Var, gain: Var, bias: Var) -> Result<Var> {
        let (vx, vg, vb) = (self.value(x), self.value(gain), self.value(bias));
        let d = vx.last_dim();
        if d < 2 {
            return Err(AdError::Invalid {
                op: "layer_norm",
                msg: format!("last dimension {d} must be at least 2"),
            });
        }
        if vg.len() != d {
            return Err(shape_err("layer_norm", vx, vg));
        }
        if vb.len() != d {
            return Err(shape_err("layer_norm", vx, vb));
        }
        let rows = vx.rows();
        let mut xhat = vec![0.0; vx.len()];
        let mut inv_std = vec![0.0; rows];
        let mut out = vec![0.0; vx.len()];
        for r in 0..rows {
            let row = vx.row(r);
            let mean = row.iter().sum::<f64>() / d as f64;
            let var = row.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / d as f64;
            let is = 1.0 / (var + LAYER_NORM_EPS).sqrt();
            inv_std[r] = is;
            for j in 0..d {
                let h = (row[j] - mean) * is;
                xhat[r * d + j] = h;
                out[r * d + j] = h * vg.data()[j] + vb.data()[j];
            }
        }
        let value = Array::new(vx.shape().to_vec(), out)?;
        let ng = self.ng(x) || self.ng(gain) || self.ng(bias);
        Ok(self.push(
            value,
            Op::LayerNorm {
                x,
                gain,
                bias,
                xhat,
                inv_std,
            },
            ng,
        ))
    }

    /// Side-by-side concatenation of 2-d values with equal row counts.
    pub fn concat_cols(&mut self, xs: &[Var]) -> Result<Var> {
        let first = *xs.first().ok_or_else(|| AdError::Invalid {
            op: "concat_cols",
            msg: "no operands".into(),
        })?;
        let (rows, _) = dims2("concat_cols", self.value(first))?;
        let mut widths = Vec::with_capacity(xs.len());
        for &x in xs {
            let (r, c) = dims2("concat_cols", self.value(x))?;
            if r != rows {
                return Err(shape_err("concat_cols", self.value(first), self.value(x)));
            }
            widths.push(c);
        }
        let total: usize = widths.iter().sum();
        let mut out = Vec::with_capacity(rows * total);
        for r in 0..rows {
            for &x in xs {
                out.extend_from_slice(self.value(x).row(r));
            }
        }
        let ng = xs.iter().any(|&x| self.ng(x));
        Ok(self.push(
            Array::new(vec![rows, total], out)?,
            Op::ConcatCols(xs.to_vec()),
            ng,
        ))
    }

    /// Columns `start..end` of a 2-d value.
    pub fn slice_cols(&mut self, a: Var, start: usize, end: usize) -> Result<Var> {
        let va = self.value(a);
        let (rows, cols) = dims2("slice_cols", va)?;
        if start > end || end > cols {
            return Err(AdError::Invalid {
                op: "slice_cols",
                msg: format!("range {start}..{end} out of bounds for {cols} columns"),
            });
        }
        let mut out = Vec::with_capacity(rows * (end - start));
        for r in 0..rows {
            out.extend_from_slice(&va.row(r)[start..end]);
        }
        let ng = self.ng(a);
        Ok(self.push(
            Array::new(vec![rows, end - start], out)?,
            Op::SliceCols(a, start, end),
            ng,
        ))
    }

    /// Row `i` of a 2-d value, as `[1 x d]`.
    pub fn row(&mut self, a: Var, i: usize) -> Result<Var> {
        let va = self.value(a);
        let (rows, cols) = dims2("row", va)?;
        if i >= rows {
            return Err(AdError::Invalid {
                op: "row",
                msg: format!("row {i} out of bounds for {rows} rows"),
            });
        }
        let value = Array::new(vec![1, cols], va.row(i).to_vec())?;
        let ng = self.ng(a);
        Ok(self.push(value, Op::Row(a, i), ng))
    }

    /// Column-wise mean of a 2-d value, as `[1 x d]`.
    pub fn mean_rows(&mut self, a: Var) -> Result<Var> {
        let va = self.value(a);
        let (rows, cols) = dims2("mean_rows", va)?;
        if rows == 0 {
            return Err(AdError::Invalid {
                op: "mean_rows",
                msg: "no rows".into(),
            });
        }
        let mut out = vec![0.0; cols];
        for r in 0..rows {
            for (o, x) in out.iter_mut().zip(va.row(r)) {
                *o += x;
            }
        }
        for o in &mut out {
            *o /= rows as f64;
        }
        let ng = self.ng(a);
        Ok(self.push(Array::new(vec![1, cols], out)?, Op::MeanRows(a), ng))
    }

    /// Sum of all entries, shape `[1]`.
    pub fn sum(&mut self, a: Var) -> Var {
        let s = self.value(a).data().iter().sum();
        let ng = self.ng(a);
        self.push(Array::scalar(s), Op::Sum(a), ng)
    }

    /// Mean of all entries, shape `[1]`.
    pub fn mean(&mut self, a: Var) -> Var {
        let n = self.value(a).len().max(1);
        let s = self.sum(a);
        self.scale(s, 1.0 / n as f64)
    }

    /// Flat element `index`, shape `[1]`.
    pub fn pick(&mut self, a: Var, index: usize) -> Result<Var> {
        let va = self.value(a);
        let x = *va.data().get(index).ok_or_else(|| AdError::Invalid {
            op: "pick",
            msg: format!("index {index} out of bounds for {} values", va.len()),
        })?;
        let ng = self.ng(a);
        Ok(self.push(Array::scalar(x), Op::Pick(a, index), ng))
    }

    /// Reverse pass from a scalar `loss` seeded with 1.
    pub fn backward(&self, loss: Var) -> Result<Gradients> {
        self.backward_seeded(loss, 1.0)
    }

    /// Reverse pass seeded with `seed`, i.e. the gradient of `seed * loss`.
    pub fn backward_seeded(&self, loss: Var, seed: f64) -> Result<Gradients> {
        let lv = self.value(loss);
        if lv.len() != 1 {
            return Err(AdError::NotScalar(lv.shape().to_vec()));
        }
        let n = loss.0 + 1;
        let mut grads: Vec<Option<Vec<f64>>> = vec![None; n];
        grads[loss.0] = Some(vec![seed]);
        for i in (0..n).rev() {
            let node = &self.nodes[i];
            if !node.needs_grad {
                continue;
            }
            let Some(g) = grads[i].take() else { continue };
            self.backprop_node(node, &g, &mut grads);
            grads[i] = Some(g);
        }
        let shapes = self.nodes[..n]
            .iter()
            .map(|nd| nd.value.shape().to_vec())
            .collect();
        Ok(Gradients { grads, shapes })
    }

    /// Adds `scale * d(loss)/d(param)` into every named parameter's gradient
    /// buffer in `store`.
    pub fn accumulate_into(&self, grads: &Gradients, store: &mut ParamStore, scale: f64) -> Result<()> {
        for (name, v) in &self.param_order {
            if let Some(g) = grads.grads.get(v.0).and_then(|g| g.as_ref()) {
                store.accumulate_grad(name, g, scale)?;
            }
        }
        Ok(())
    }

    fn backprop_node(&self, node: &Node, g: &[f64], grads: &mut [Option<Vec<f64>>]) {
        let nodes = &self.nodes;
        let mut acc = |v: Var, f: &mut dyn FnMut(&mut [f64])| {
            if !nodes[v.0].needs_grad {
                return;
            }
            let slot = grads[v.0].get_or_insert_with(|| vec![0.0; nodes[v.0].value.len()]);
            f(slot);
        };
        let val = |v: Var| &nodes[v.0].value;
        match &node.op {
            Op::Leaf => {}
            Op::MatMul(a, b) => {
                let (m, k) = (val(*a).shape()[0], val(*a).shape()[1]);
                let p = val(*b).shape()[1];
                acc(*a, &mut |s| gemm(m, p, k, g, false, val(*b).data(), true, s, true));
                acc(*b, &mut |s| gemm(k, m, p, val(*a).data(), true, g, false, s, true));
            }
            Op::MatMulNt(a, b) => {
                let (m, k) = (val(*a).shape()[0], val(*a).shape()[1]);
                let p = val(*b).shape()[0];
                acc(*a, &mut |s| gemm(m, p, k, g, false, val(*b).data(), false, s, true));
                acc(*b, &mut |s| gemm(p, m, k, g, true, val(*a).data(), false, s, true));
            }
            Op::Add(a, b) => {
                let inner = val(*b).len().max(1);
                acc(*a, &mut |s| {
                    for (x, gi) in s.iter_mut().zip(g) {
                        *x += gi;
                    }
                });
                acc(*b, &mut |s| {
                    for (i, gi) in g.iter().enumerate() {
                        s[i % inner] += gi;
                    }
                });
            }
            Op::Mul(a, b) => {
                let inner = val(*b).len().max(1);
                let (ad, bd) = (val(*a).data(), val(*b).data());
                acc(*a, &mut |s| {
                    for (i, gi) in g.iter().enumerate() {
                        s[i] += gi * bd[i % inner];
                    }
                });
                acc(*b, &mut |s| {
                    for (i, gi) in g.iter().enumerate() {
                        s[i % inner] += gi * ad[i];
                    }
                });
            }
            Op::Scale(a, c) => acc(*a, &mut |s| {
                for (x, gi) in s.iter_mut().zip(g) {
                    *x += gi * c;
                }
            }),
            Op::AddN(xs) => {
                for &x in xs {
                    acc(x, &mut |s| {
                        for (v, gi) in s.iter_mut().zip(g) {
                            *v += gi;
                        }
                    });
                }
            }
            Op::Relu(a) => {
                let ad = val(*a).data();
                acc(*a, &mut |s| {
                    for i in 0..s.len() {
                        if ad[i] > 0.0 {
                            s[i] += g[i];
                        }
                    }
                });
            }
            Op::Tanh(a) => {
                let y = node.value.data();
                acc(*a, &mut |s| {
                    for i in 0..s.len() {
                        s[i] += g[i] * (1.0 - y[i] * y[i]);
                    }
                });
            }
            Op::Sigmoid(a) => {
                let y = node.value.data();
                acc(*a, &mut |s| {
                    for i in 0..s.len() {
                        s[i] += g[i] * y[i] * (1.0 - y[i]);
                    }
                });
            }
            Op::Ln(a) => {
                let ad = val(*a).data();
                acc(*a, &mut |s| {
                    for i in 0..s.len() {
                        s[i] += g[i] / ad[i];
                    }
                });
            }
            Op::Softmax(a) => {
                let y = &node.value;
                let d = y.last_dim();
                acc(*a, &mut |s| {
                    for r in 0..y.rows() {
                        let yr = y.row(r);
                        let gr = &g[r * d..(r + 1) * d];
                        let dot: f64 = yr.iter().zip(gr).map(|(p, q)| p * q).sum();
                        for j in 0..d {
                            s[r * d + j] += yr[j] * (gr[j] - dot);
                        }
                    }
                });
            }
            Op::LayerNorm {
                x,
                gain,
                bias,
                xhat,
                inv_std,
            } => {
                let d = val(*x).last_dim();
                let rows = inv_std.len();
                let gd = val(*gain).data();
                acc(*x, &mut |s| {
                    let mut dxhat = vec![0.0; d];
                    for r in 0..rows {
                        let o = r * d;
                        let mut sum = 0.0;
                        let mut dot = 0.0;
                        for j in 0..d {
                            dxhat[j] = g[o + j] * gd[j];
                            sum += dxhat[j];
                            dot += dxhat[j] * xhat[o + j];
                        }
                        let c = inv_std[r] / d as f64;
                        for j in 0..d {
                            s[o + j] += c * (d as f64 * dxhat[j] - sum - xhat[o + j] * dot);
                        }
                    }
                });
                acc(*gain, &mut |s| {
                    for r in 0..rows {
                        for j in 0..d {
                            s[j] += g[r * d + j] * xhat[r * d + j];
                        }
                    }
                });
                acc(*bias, &mut |s| {
                    for r in 0..rows {
                        for j in 0..d {
                            s[j] += g[r * d + j];
                        }
                    }
                });
            }
            Op::ConcatCols(xs) => {
                let total = node.value.last_dim();
                let rows = node.value.rows();
                let mut offset = 0;
                for &x in xs {
                    let w = val(x).last_dim();
                    acc(x, &mut |s| {
                        for r in 0..rows {
                            for j in 0..w {
                                s[r * w + j] += g[r * total + offset + j];
                            }
                        }
                    });
                    offset += w;
                }
            }
            Op::SliceCols(a, start, end) => {
                let cols = val(*a).last_dim();
                let w = end - start;
                acc(*a, &mut |s| {
                    for r in 0..node.value.rows() {
                        for j in 0..w {
                            s[r * cols + start + j] += g[r * w + j];
                        }
                    }
                });
            }
            Op::Row(a, i) => {
                let cols = val(*a).last_dim();
                acc(*a, &mut |s| {
                    for j in 0..cols {
                        s[i * cols + j] += g[j];
                    }
                });
            }
            Op::MeanRows(a) => {
                let (rows, cols) = (val(*a).shape()[0], val(*a).shape()[1]);
                let inv = 1.0 / rows as f64;
                acc(*a, &mut |s| {
                    for r in 0..rows {
                        for j in 0..cols {
                            s[r * cols + j] += g[j] * inv;
                        }
                    }
                });
            }
            Op::Sum(a) => acc(*a, &mut |s| {
                for x in s.iter_mut() {
                    *x += g[0];
                }
            }),
            Op::Pick(a, index) => acc(*a, &mut |s| s[*index] += g[0]),
        }
    }
}
