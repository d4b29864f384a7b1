//! Reverse-mode differentiation by recording operations on a linear tape.
//!
//! Nodes are appended in evaluation order, so the tape is already a
//! topological order of the graph: backward walks it once in reverse and
//! visits every node exactly once. Gradients from shared subexpressions are
//! summed into the same slot.

use std::collections::HashMap;

use super::kernels::{self, dot, mm_acc, mm_nt_acc, mm_tn_acc};
use super::tensor::{ParamId, ParamStore, Tensor};
use crate::error::{Error, Result};

/// Handle to a node on a [`Tape`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Var(usize);

#[derive(Debug)]
enum Op {
    Input,
    Param,
    MatMul(Var, Var),
    MatMulNT(Var, Var),
    Transpose(Var),
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    AddBias(Var, Var),
    Scale(Var, f64),
    Softmax { x: Var, axis: usize },
    CausalSoftmax(Var),
    LayerNorm {
        x: Var,
        gamma: Var,
        beta: Var,
        xhat: Vec<f64>,
        rstd: Vec<f64>,
    },
    Gelu(Var),
    Sigmoid(Var),
    GatherRows { table: Var, ids: Vec<usize> },
    SliceCols { x: Var, start: usize },
    ConcatCols(Vec<Var>),
    Sum(Var),
    Mean(Var),
    CrossEntropy {
        logits: Var,
        targets: Vec<usize>,
        probs: Vec<f64>,
    },
    Mse(Var, Var),
    Combine(Vec<(Var, f64)>),
}

#[derive(Debug)]
struct Node {
    value: Tensor,
    op: Op,
    requires_grad: bool,
}

/// Recording of one forward computation.
#[derive(Debug, Default)]
pub struct Tape {
    nodes: Vec<Node>,
    params: HashMap<ParamId, Var>,
}

/// Gradients of a scalar with respect to every leaf that requires them.
#[derive(Debug)]
pub struct Gradients {
    grads: Vec<Option<Vec<f64>>>,
    params: Vec<(ParamId, Var)>,
}

impl Gradients {
    pub fn get(&self, var: Var) -> Option<&[f64]> {
        self.grads.get(var.0).and_then(|g| g.as_deref())
    }

    /// Gradient for a parameter registered on the tape.
    pub fn param(&self, id: ParamId) -> Option<&[f64]> {
        self.params
            .iter()
            .find(|(p, _)| *p == id)
            .and_then(|(_, v)| self.get(*v))
    }

    /// Adds parameter gradients into `store`. Parameters with
    /// `requires_grad == false` are left untouched.
    pub fn accumulate_into(&self, store: &mut ParamStore) {
        for &(id, var) in &self.params {
            let Some(g) = self.get(var) else { continue };
            let p = store.get_mut(id);
            if !p.requires_grad {
                continue;
            }
            match &mut p.grad {
                Some(acc) => acc.iter_mut().zip(g).for_each(|(a, b)| *a += b),
                None => p.grad = Some(g.to_vec()),
            }
        }
    }
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, var: Var) -> &Tensor {
        &self.nodes[var.0].value
    }

    pub fn shape(&self, var: Var) -> &[usize] {
        self.nodes[var.0].value.shape()
    }

    pub fn requires_grad(&self, var: Var) -> bool {
        self.nodes[var.0].requires_grad
    }

    fn push(&mut self, value: Tensor, op: Op, requires_grad: bool) -> Var {
        self.nodes.push(Node {
            value,
            op,
            requires_grad,
        });
        Var(self.nodes.len() - 1)
    }

    fn rg(&self, vars: &[Var]) -> bool {
        vars.iter().any(|v| self.nodes[v.0].requires_grad)
    }

    fn dims2(&self, var: Var) -> (usize, usize) {
        self.nodes[var.0].value.dims2()
    }

    fn data(&self, var: Var) -> &[f64] {
        self.nodes[var.0].value.data()
    }

    /// Leaf holding a constant or a differentiable input.
    pub fn input(&mut self, value: Tensor, requires_grad: bool) -> Var {
        self.push(value, Op::Input, requires_grad)
    }

    pub fn constant(&mut self, value: Tensor) -> Var {
        self.input(value, false)
    }

    /// Registers a parameter leaf. Registering the same parameter twice
    /// returns the existing node so its gradient is accumulated once.
    pub fn param(&mut self, store: &ParamStore, id: ParamId) -> Var {
        if let Some(&v) = self.params.get(&id) {
            return v;
        }
        let p = store.get(id);
        let v = self.push(p.value.clone(), Op::Param, p.requires_grad);
        self.params.insert(id, v);
        v
    }

    fn expect_2d(&self, op: &'static str, var: Var) -> Result<(usize, usize)> {
        let shape = self.shape(var);
        if shape.len() != 2 {
            return Err(Error::Shape {
                op,
                lhs: shape.to_vec(),
                rhs: vec![],
            });
        }
        Ok((shape[0], shape[1]))
    }

    fn same_shape(&self, op: &'static str, a: Var, b: Var) -> Result<()> {
        if self.shape(a) != self.shape(b) {
            return Err(Error::Shape {
                op,
                lhs: self.shape(a).to_vec(),
                rhs: self.shape(b).to_vec(),
            });
        }
        Ok(())
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (m, k) = self.expect_2d("matmul", a)?;
        let (k2, n) = self.expect_2d("matmul", b)?;
        if k != k2 {
            return Err(Error::Shape {
                op: "matmul",
                lhs: vec![m, k],
                rhs: vec![k2, n],
            });
        }
        let mut out = vec![0.0; m * n];
        mm_acc(&mut out, self.data(a), self.data(b), m, k, n);
        let rg = self.rg(&[a, b]);
        Ok(self.push(Tensor::matrix(m, n, out)?, Op::MatMul(a, b), rg))
    }

    /// `a · bᵀ` without materializing the transpose.
    pub fn matmul_nt(&mut self, a: Var, b: Var) -> Result<Var> {
        let (m, k) = self.expect_2d("matmul_nt", a)?;
        let (n, k2) = self.expect_2d("matmul_nt", b)?;
        if k != k2 {
            return Err(Error::Shape {
                op: "matmul_nt",
                lhs: vec![m, k],
                rhs: vec![n, k2],
            });
        }
        let mut out = vec![0.0; m * n];
        mm_nt_acc(&mut out, self.data(a), self.data(b), m, k, n);
        let rg = self.rg(&[a, b]);
        Ok(self.push(Tensor::matrix(m, n, out)?, Op::MatMulNT(a, b), rg))
    }

    pub fn transpose(&mut self, a: Var) -> Result<Var> {
        let (m, n) = self.expect_2d("transpose", a)?;
        let src = self.data(a);
        let mut out = vec![0.0; m * n];
        for i in 0..m {
            for j in 0..n {
                out[j * m + i] = src[i * n + j];
            }
        }
        let rg = self.rg(&[a]);
        Ok(self.push(Tensor::matrix(n, m, out)?, Op::Transpose(a), rg))
    }

    fn zip_with(
        &mut self,
        op_name: &'static str,
        a: Var,
        b: Var,
        f: impl Fn(f64, f64) -> f64,
        op: Op,
    ) -> Result<Var> {
        self.same_shape(op_name, a, b)?;
        let data = self
            .data(a)
            .iter()
            .zip(self.data(b))
            .map(|(&x, &y)| f(x, y))
            .collect();
        let shape = self.shape(a).to_vec();
        let rg = self.rg(&[a, b]);
        Ok(self.push(Tensor::new(shape, data)?, op, rg))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.zip_with("add", a, b, |x, y| x + y, Op::Add(a, b))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        self.zip_with("sub", a, b, |x, y| x - y, Op::Sub(a, b))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.zip_with("mul", a, b, |x, y| x * y, Op::Mul(a, b))
    }

    /// Adds a length-`n` vector to every row of an `m×n` matrix.
    pub fn add_bias(&mut self, x: Var, bias: Var) -> Result<Var> {
        let (m, n) = self.dims2(x);
        if self.nodes[bias.0].value.len() != n {
            return Err(Error::Shape {
                op: "add_bias",
                lhs: self.shape(x).to_vec(),
                rhs: self.shape(bias).to_vec(),
            });
        }
        let b = self.data(bias);
        let mut out = self.data(x).to_vec();
        for i in 0..m {
            for (o, &bv) in out[i * n..(i + 1) * n].iter_mut().zip(b) {
                *o += bv;
            }
        }
        let shape = self.shape(x).to_vec();
        let rg = self.rg(&[x, bias]);
        Ok(self.push(Tensor::new(shape, out)?, Op::AddBias(x, bias), rg))
    }

    pub fn scale(&mut self, x: Var, factor: f64) -> Var {
        let data = self.data(x).iter().map(|v| v * factor).collect();
        let shape = self.shape(x).to_vec();
        let rg = self.rg(&[x]);
        self.push(
            Tensor::new(shape, data).expect("scale preserves shape"),
            Op::Scale(x, factor),
            rg,
        )
    }

    /// Softmax along `axis`, max-subtracted.
    pub fn softmax(&mut self, x: Var, axis: usize) -> Result<Var> {
        let shape = self.shape(x).to_vec();
        if axis >= shape.len() {
            return Err(Error::Argument(format!(
                "softmax axis {axis} invalid for shape {shape:?}"
            )));
        }
        if !self.nodes[x.0].value.all_finite() {
            return Err(Error::NonFinite("softmax input".into()));
        }
        let (outer, len, inner) = split_axis(&shape, axis);
        let src = self.data(x);
        let mut out = vec![0.0; src.len()];
        for o in 0..outer {
            for r in 0..inner {
                kernels::softmax_lane(src, &mut out, o * len * inner + r, len, inner);
            }
        }
        let rg = self.rg(&[x]);
        Ok(self.push(Tensor::new(shape, out)?, Op::Softmax { x, axis }, rg))
    }

    /// Row softmax of an `m×n` score matrix where row `i` only sees
    /// columns `j <= i + (n - m)`; masked entries are exactly zero.
    pub fn causal_softmax(&mut self, x: Var) -> Result<Var> {
        let (m, n) = self.expect_2d("causal_softmax", x)?;
        if n < m {
            return Err(Error::Shape {
                op: "causal_softmax",
                lhs: vec![m, n],
                rhs: vec![],
            });
        }
        if !self.nodes[x.0].value.all_finite() {
            return Err(Error::NonFinite("causal_softmax input".into()));
        }
        let src = self.data(x);
        let mut out = vec![0.0; m * n];
        for i in 0..m {
            let visible = i + (n - m) + 1;
            kernels::softmax_lane(src, &mut out, i * n, visible, 1);
        }
        let rg = self.rg(&[x]);
        Ok(self.push(Tensor::matrix(m, n, out)?, Op::CausalSoftmax(x), rg))
    }

    /// Row-wise layer normalization with affine `gamma`, `beta`.
    pub fn layer_norm(&mut self, x: Var, gamma: Var, beta: Var, eps: f64) -> Result<Var> {
        let (m, n) = self.dims2(x);
        for p in [gamma, beta] {
            if self.nodes[p.0].value.len() != n {
                return Err(Error::Shape {
                    op: "layer_norm",
                    lhs: self.shape(x).to_vec(),
                    rhs: self.shape(p).to_vec(),
                });
            }
        }
        let src = self.data(x);
        let g = self.data(gamma);
        let b = self.data(beta);
        let mut out = vec![0.0; m * n];
        let mut xhat = vec![0.0; m * n];
        let mut rstd = vec![0.0; m];
        for i in 0..m {
            let row = &src[i * n..(i + 1) * n];
            let mean = row.iter().sum::<f64>() / n as f64;
            let var = row.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n as f64;
            let r = 1.0 / (var + eps).sqrt();
            rstd[i] = r;
            for j in 0..n {
                let h = (row[j] - mean) * r;
                xhat[i * n + j] = h;
                out[i * n + j] = h * g[j] + b[j];
            }
        }
        let shape = self.shape(x).to_vec();
        let rg = self.rg(&[x, gamma, beta]);
        Ok(self.push(
            Tensor::new(shape, out)?,
            Op::LayerNorm {
                x,
                gamma,
                beta,
                xhat,
                rstd,
            },
            rg,
        ))
    }

    fn map(&mut self, x: Var, f: impl Fn(f64) -> f64, op: Op) -> Var {
        let data = self.data(x).iter().map(|&v| f(v)).collect();
        let shape = self.shape(x).to_vec();
        let rg = self.rg(&[x]);
        self.push(Tensor::new(shape, data).expect("map preserves shape"), op, rg)
    }

    /// Tanh-approximated GELU.
    pub fn gelu(&mut self, x: Var) -> Var {
        self.map(x, kernels::gelu, Op::Gelu(x))
    }

    pub fn sigmoid(&mut self, x: Var) -> Var {
        self.map(x, kernels::sigmoid, Op::Sigmoid(x))
    }

    /// Selects rows of a `V×d` table; used for embedding lookup and for
    /// gathering sentence-end states.
    pub fn gather_rows(&mut self, table: Var, ids: &[usize]) -> Result<Var> {
        let (rows, d) = self.expect_2d("gather_rows", table)?;
        if ids.is_empty() {
            return Err(Error::Argument("gather_rows with no indices".into()));
        }
        let src = self.data(table);
        let mut out = Vec::with_capacity(ids.len() * d);
        for &id in ids {
            if id >= rows {
                return Err(Error::Index {
                    what: "gather_rows",
                    index: id,
                    size: rows,
                });
            }
            out.extend_from_slice(&src[id * d..(id + 1) * d]);
        }
        let rg = self.rg(&[table]);
        Ok(self.push(
            Tensor::matrix(ids.len(), d, out)?,
            Op::GatherRows {
                table,
                ids: ids.to_vec(),
            },
            rg,
        ))
    }

    pub fn slice_cols(&mut self, x: Var, start: usize, width: usize) -> Result<Var> {
        let (m, n) = self.expect_2d("slice_cols", x)?;
        if width == 0 || start + width > n {
            return Err(Error::Index {
                what: "slice_cols",
                index: start + width,
                size: n,
            });
        }
        let src = self.data(x);
        let mut out = Vec::with_capacity(m * width);
        for i in 0..m {
            out.extend_from_slice(&src[i * n + start..i * n + start + width]);
        }
        let rg = self.rg(&[x]);
        Ok(self.push(Tensor::matrix(m, width, out)?, Op::SliceCols { x, start }, rg))
    }

    pub fn concat_cols(&mut self, parts: &[Var]) -> Result<Var> {
        let Some(&first) = parts.first() else {
            return Err(Error::Argument("concat_cols of nothing".into()));
        };
        let (m, _) = self.expect_2d("concat_cols", first)?;
        let mut widths = Vec::with_capacity(parts.len());
        for &p in parts {
            let (pm, pn) = self.expect_2d("concat_cols", p)?;
            if pm != m {
                return Err(Error::Shape {
                    op: "concat_cols",
                    lhs: self.shape(first).to_vec(),
                    rhs: self.shape(p).to_vec(),
                });
            }
            widths.push(pn);
        }
        let total: usize = widths.iter().sum();
        let mut out = Vec::with_capacity(m * total);
        for i in 0..m {
            for (&p, &w) in parts.iter().zip(&widths) {
                out.extend_from_slice(&self.data(p)[i * w..(i + 1) * w]);
            }
        }
        let rg = self.rg(parts);
        Ok(self.push(
            Tensor::matrix(m, total, out)?,
            Op::ConcatCols(parts.to_vec()),
            rg,
        ))
    }

    pub fn sum(&mut self, x: Var) -> Var {
        let s = self.data(x).iter().sum();
        let rg = self.rg(&[x]);
        self.push(Tensor::scalar(s), Op::Sum(x), rg)
    }

    pub fn mean(&mut self, x: Var) -> Var {
        let d = self.data(x);
        let s = d.iter().sum::<f64>() / d.len() as f64;
        let rg = self.rg(&[x]);
        self.push(Tensor::scalar(s), Op::Mean(x), rg)
    }

    /// Mean over rows of `−log softmax(logits_row)[target_row]`.
    pub fn cross_entropy(&mut self, logits: Var, targets: &[usize]) -> Result<Var> {
        let (t, v) = self.dims2(logits);
        if targets.len() != t {
            return Err(Error::Shape {
                op: "cross_entropy",
                lhs: self.shape(logits).to_vec(),
                rhs: vec![targets.len()],
            });
        }
        if let Some(&bad) = targets.iter().find(|&&k| k >= v) {
            return Err(Error::Index {
                what: "cross_entropy target",
                index: bad,
                size: v,
            });
        }
        let src = self.data(logits);
        let mut probs = vec![0.0; t * v];
        let mut loss = 0.0;
        for (i, &target) in targets.iter().enumerate() {
            let row = &src[i * v..(i + 1) * v];
            let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let mut total = 0.0;
            for j in 0..v {
                let e = (row[j] - max).exp();
                probs[i * v + j] = e;
                total += e;
            }
            for p in &mut probs[i * v..(i + 1) * v] {
                *p /= total;
            }
            loss += max + total.ln() - row[target];
        }
        loss /= t as f64;
        let rg = self.rg(&[logits]);
        Ok(self.push(
            Tensor::scalar(loss),
            Op::CrossEntropy {
                logits,
                targets: targets.to_vec(),
                probs,
            },
            rg,
        ))
    }

    /// `mean((a − b)²)`
    pub fn mse(&mut self, a: Var, b: Var) -> Result<Var> {
        if self.nodes[a.0].value.len() != self.nodes[b.0].value.len() {
            return Err(Error::Shape {
                op: "mse",
                lhs: self.shape(a).to_vec(),
                rhs: self.shape(b).to_vec(),
            });
        }
        let da = self.data(a);
        let s = da
            .iter()
            .zip(self.data(b))
            .map(|(x, y)| (x - y) * (x - y))
            .sum::<f64>()
            / da.len() as f64;
        let rg = self.rg(&[a, b]);
        Ok(self.push(Tensor::scalar(s), Op::Mse(a, b), rg))
    }

    /// `Σ cᵢ·xᵢ` over same-shaped nodes with constant coefficients.
    pub fn combine(&mut self, terms: &[(Var, f64)]) -> Result<Var> {
        let Some(&(first, _)) = terms.first() else {
            return Err(Error::Argument("combine of nothing".into()));
        };
        let shape = self.shape(first).to_vec();
        let mut out = vec![0.0; self.nodes[first.0].value.len()];
        for &(v, c) in terms {
            if self.shape(v) != shape.as_slice() {
                return Err(Error::Shape {
                    op: "combine",
                    lhs: shape,
                    rhs: self.shape(v).to_vec(),
                });
            }
            for (o, x) in out.iter_mut().zip(self.data(v)) {
                *o += c * x;
            }
        }
        let vars: Vec<Var> = terms.iter().map(|t| t.0).collect();
        let rg = self.rg(&vars);
        Ok(self.push(Tensor::new(shape, out)?, Op::Combine(terms.to_vec()), rg))
    }

    /// Back-propagates from a single-element node.
    pub fn backward(&self, loss: Var) -> Result<Gradients> {
        if self.nodes[loss.0].value.len() != 1 {
            return Err(Error::Shape {
                op: "backward",
                lhs: self.shape(loss).to_vec(),
                rhs: vec![1],
            });
        }
        let mut grads: Vec<Option<Vec<f64>>> = vec![None; loss.0 + 1];
        if self.nodes[loss.0].requires_grad {
            grads[loss.0] = Some(vec![1.0]);
        }
        for idx in (0..=loss.0).rev() {
            let Some(g) = grads[idx].take() else { continue };
            let node = &self.nodes[idx];
            match &node.op {
                Op::Input | Op::Param => {
                    grads[idx] = Some(g);
                    continue;
                }
                op => self.backward_op(op, &node.value, &g, &mut grads),
            }
        }
        let mut params: Vec<(ParamId, Var)> = self.params.iter().map(|(&p, &v)| (p, v)).collect();
        params.sort();
        Ok(Gradients { grads, params })
    }

    fn backward_op(&self, op: &Op, out: &Tensor, g: &[f64], grads: &mut [Option<Vec<f64>>]) {
        let mut acc = |v: Var, f: &mut dyn FnMut(&mut [f64])| {
            if !self.nodes[v.0].requires_grad {
                return;
            }
            let slot = grads[v.0].get_or_insert_with(|| vec![0.0; self.nodes[v.0].value.len()]);
            f(slot);
        };
        match op {
            Op::Input | Op::Param => {}
            Op::MatMul(a, b) => {
                let (m, k) = self.dims2(*a);
                let (_, n) = self.dims2(*b);
                acc(*a, &mut |ga| mm_nt_acc(ga, g, self.data(*b), m, n, k));
                acc(*b, &mut |gb| mm_tn_acc(gb, self.data(*a), g, m, k, n));
            }
            Op::MatMulNT(a, b) => {
                let (m, k) = self.dims2(*a);
                let (n, _) = self.dims2(*b);
                acc(*a, &mut |ga| mm_acc(ga, g, self.data(*b), m, n, k));
                acc(*b, &mut |gb| mm_tn_acc(gb, g, self.data(*a), m, n, k));
            }
            Op::Transpose(a) => {
                let (m, n) = self.dims2(*a);
                acc(*a, &mut |ga| {
                    for i in 0..m {
                        for j in 0..n {
                            ga[i * n + j] += g[j * m + i];
                        }
                    }
                });
            }
            Op::Add(a, b) => {
                acc(*a, &mut |ga| add_into(ga, g));
                acc(*b, &mut |gb| add_into(gb, g));
            }
            Op::Sub(a, b) => {
                acc(*a, &mut |ga| add_into(ga, g));
                acc(*b, &mut |gb| gb.iter_mut().zip(g).for_each(|(x, y)| *x -= y));
            }
            Op::Mul(a, b) => {
                let (da, db) = (self.data(*a), self.data(*b));
                acc(*a, &mut |ga| {
                    for i in 0..ga.len() {
                        ga[i] += g[i] * db[i];
                    }
                });
                acc(*b, &mut |gb| {
                    for i in 0..gb.len() {
                        gb[i] += g[i] * da[i];
                    }
                });
            }
            Op::AddBias(x, bias) => {
                let (m, n) = self.dims2(*x);
                acc(*x, &mut |gx| add_into(gx, g));
                acc(*bias, &mut |gb| {
                    for i in 0..m {
                        add_into(gb, &g[i * n..(i + 1) * n]);
                    }
                });
            }
            Op::Scale(x, c) => acc(*x, &mut |gx| {
                gx.iter_mut().zip(g).for_each(|(a, b)| *a += c * b)
            }),
            Op::Softmax { x, axis } => {
                let (outer, len, inner) = split_axis(out.shape(), *axis);
                let y = out.data();
                acc(*x, &mut |gx| {
                    for o in 0..outer {
                        for r in 0..inner {
                            let base = o * len * inner + r;
                            let mut s = 0.0;
                            for i in 0..len {
                                let k = base + i * inner;
                                s += g[k] * y[k];
                            }
                            for i in 0..len {
                                let k = base + i * inner;
                                gx[k] += y[k] * (g[k] - s);
                            }
                        }
                    }
                });
            }
            Op::CausalSoftmax(x) => {
                let (m, n) = out.dims2();
                let y = out.data();
                acc(*x, &mut |gx| {
                    for i in 0..m {
                        let visible = i + (n - m) + 1;
                        let row = i * n..i * n + visible;
                        let s = dot(&g[row.clone()], &y[row.clone()]);
                        for k in row {
                            gx[k] += y[k] * (g[k] - s);
                        }
                    }
                });
            }
            Op::LayerNorm {
                x,
                gamma,
                beta,
                xhat,
                rstd,
            } => {
                let (m, n) = out.dims2();
                let gm = self.data(*gamma);
                acc(*gamma, &mut |gg| {
                    for i in 0..m {
                        for j in 0..n {
                            gg[j] += g[i * n + j] * xhat[i * n + j];
                        }
                    }
                });
                acc(*beta, &mut |gb| {
                    for i in 0..m {
                        add_into(gb, &g[i * n..(i + 1) * n]);
                    }
                });
                acc(*x, &mut |gx| {
                    let nf = n as f64;
                    let mut dxhat = vec![0.0; n];
                    for i in 0..m {
                        let row = i * n..(i + 1) * n;
                        for (j, d) in dxhat.iter_mut().enumerate() {
                            *d = g[i * n + j] * gm[j];
                        }
                        let sum_d: f64 = dxhat.iter().sum();
                        let sum_dx = dot(&dxhat, &xhat[row.clone()]);
                        for j in 0..n {
                            gx[i * n + j] += rstd[i] / nf
                                * (nf * dxhat[j] - sum_d - xhat[i * n + j] * sum_dx);
                        }
                    }
                });
            }
            Op::Gelu(x) => {
                let xs = self.data(*x);
                acc(*x, &mut |gx| {
                    for i in 0..gx.len() {
                        gx[i] += g[i] * kernels::gelu_grad(xs[i]);
                    }
                });
            }
            Op::Sigmoid(x) => {
                let y = out.data();
                acc(*x, &mut |gx| {
                    for i in 0..gx.len() {
                        gx[i] += g[i] * y[i] * (1.0 - y[i]);
                    }
                });
            }
            Op::GatherRows { table, ids } => {
                let (_, d) = self.dims2(*table);
                acc(*table, &mut |gt| {
                    for (r, &id) in ids.iter().enumerate() {
                        add_into(&mut gt[id * d..(id + 1) * d], &g[r * d..(r + 1) * d]);
                    }
                });
            }
            Op::SliceCols { x, start } => {
                let (m, n) = self.dims2(*x);
                let (_, w) = out.dims2();
                acc(*x, &mut |gx| {
                    for i in 0..m {
                        add_into(
                            &mut gx[i * n + start..i * n + start + w],
                            &g[i * w..(i + 1) * w],
                        );
                    }
                });
            }
            Op::ConcatCols(parts) => {
                let (m, total) = out.dims2();
                let mut offset = 0;
                for &p in parts {
                    let (_, w) = self.dims2(p);
                    acc(p, &mut |gp| {
                        for i in 0..m {
                            add_into(
                                &mut gp[i * w..(i + 1) * w],
                                &g[i * total + offset..i * total + offset + w],
                            );
                        }
                    });
                    offset += w;
                }
            }
            Op::Sum(x) => acc(*x, &mut |gx| gx.iter_mut().for_each(|v| *v += g[0])),
            Op::Mean(x) => {
                let n = self.nodes[x.0].value.len() as f64;
                acc(*x, &mut |gx| gx.iter_mut().for_each(|v| *v += g[0] / n));
            }
            Op::CrossEntropy {
                logits,
                targets,
                probs,
            } => {
                let (t, v) = self.dims2(*logits);
                let scale = g[0] / t as f64;
                acc(*logits, &mut |gl| {
                    for (i, &target) in targets.iter().enumerate() {
                        for j in 0..v {
                            gl[i * v + j] += scale * probs[i * v + j];
                        }
                        gl[i * v + target] -= scale;
                    }
                });
            }
            Op::Mse(a, b) => {
                let (da, db) = (self.data(*a), self.data(*b));
                let c = 2.0 * g[0] / da.len() as f64;
                acc(*a, &mut |ga| {
                    for i in 0..ga.len() {
                        ga[i] += c * (da[i] - db[i]);
                    }
                });
                acc(*b, &mut |gb| {
                    for i in 0..gb.len() {
                        gb[i] -= c * (da[i] - db[i]);
                    }
                });
            }
            Op::Combine(terms) => {
                for &(v, c) in terms {
                    acc(v, &mut |gv| {
                        gv.iter_mut().zip(g).for_each(|(a, b)| *a += c * b)
                    });
                }
            }
        }
    }
}

fn add_into(dst: &mut [f64], src: &[f64]) {
    dst.iter_mut().zip(src).for_each(|(a, b)| *a += b);
}

fn split_axis(shape: &[usize], axis: usize) -> (usize, usize, usize) {
    let outer = shape[..axis].iter().product();
    let inner = shape[axis + 1..].iter().product();
    (outer, shape[axis], inner)
}
