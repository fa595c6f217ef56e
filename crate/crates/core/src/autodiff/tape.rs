use std::sync::Arc;

use super::Tensor;
use crate::data::Point2;
use crate::error::{shape_err, Result};

/// Handle to a node on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

/// Distance below which an interpolation query copies the coincident feature.
pub const IDW_EXACT_HIT: f64 = 1e-12;

/// Probability clamp used by [`Tape::weighted_bce`].
pub const BCE_CLAMP: f64 = 1e-7;

#[derive(Debug)]
enum Op {
    Leaf,
    Affine { x: Var, w: Var, b: Var },
    Relu(Var),
    Sigmoid(Var),
    Abs(Var),
    SoftmaxRows(Var),
    /// `argmax[g * cols + c]` is the input row that won output entry `(g, c)`.
    MaxOverGroup { x: Var, argmax: Vec<usize> },
    Gather { x: Var, indices: Vec<usize> },
    Concat { a: Var, b: Var },
    SliceCols { x: Var, start: usize },
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    Scale(Var, f64),
    Sum(Var),
    Mean(Var),
    MatMulNT { a: Var, b: Var },
    Idw { x: Var, neighbors: Vec<Vec<(usize, f64)>> },
    WeightedBce { p: Var, target: Arc<Vec<f64>>, weight: Arc<Vec<f64>> },
}

#[derive(Debug)]
struct Node {
    value: Tensor,
    op: Op,
    requires_grad: bool,
}

/// Record of executed primitives.
#[derive(Debug, Default)]
pub struct Tape {
    nodes: Vec<Node>,
}

/// Adjoints produced by [`Tape::backward`].
#[derive(Debug)]
pub struct Gradients {
    grads: Vec<Option<Vec<f64>>>,
}

impl Gradients {
    pub fn get(&self, v: Var) -> Option<&[f64]> {
        self.grads.get(v.0).and_then(|g| g.as_deref())
    }

    /// Gradient of `v`, or zeros of length `len` if it received none.
    pub fn take_or_zeros(&mut self, v: Var, len: usize) -> Vec<f64> {
        self.grads
            .get_mut(v.0)
            .and_then(Option::take)
            .unwrap_or_else(|| vec![0.0; len])
    }
}

fn dims2(op: &'static str, t: &Tensor) -> Result<(usize, usize)> {
    t.dims2()
        .ok_or_else(|| shape_err(op, format!("expected a 2-D tensor, got shape {:?}", t.shape)))
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

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    fn push(&mut self, value: Tensor, op: Op, requires_grad: bool) -> Var {
        self.nodes.push(Node {
            value,
            op,
            requires_grad,
        });
        Var(self.nodes.len() - 1)
    }

    fn rg(&self, v: Var) -> bool {
        self.nodes[v.0].requires_grad
    }

    /// Trainable leaf.
    pub fn param(&mut self, value: Tensor) -> Var {
        self.push(value, Op::Leaf, true)
    }

    /// Non-trainable leaf.
    pub fn constant(&mut self, value: Tensor) -> Var {
        self.push(value, Op::Leaf, false)
    }

    /// Shared affine map applied row-wise: `x · w + b`.
    pub fn affine(&mut self, x: Var, w: Var, b: Var) -> Result<Var> {
        let (rows, f_in) = dims2("affine", self.value(x))?;
        let (w_in, f_out) = dims2("affine", self.value(w))?;
        if w_in != f_in || self.value(b).len() != f_out {
            return Err(shape_err(
                "affine",
                format!(
                    "x {:?}, w {:?}, b {:?}",
                    self.value(x).shape,
                    self.value(w).shape,
                    self.value(b).shape
                ),
            ));
        }
        let (xv, wv, bv) = (&self.value(x).data, &self.value(w).data, &self.value(b).data);
        let mut out = Vec::with_capacity(rows * f_out);
        for r in 0..rows {
            out.extend_from_slice(bv);
            let orow = &mut out[r * f_out..];
            for (k, &xk) in xv[r * f_in..(r + 1) * f_in].iter().enumerate() {
                if xk == 0.0 {
                    continue;
                }
                for (o, &wkj) in orow[..f_out].iter_mut().zip(&wv[k * f_out..(k + 1) * f_out]) {
                    *o += xk * wkj;
                }
            }
        }
        let rg = self.rg(x) || self.rg(w) || self.rg(b);
        Ok(self.push(Tensor::matrix(rows, f_out, out)?, Op::Affine { x, w, b }, rg))
    }

    fn unary(&mut self, x: Var, f: impl Fn(f64) -> f64, op: Op) -> Var {
        let t = self.value(x);
        let value = Tensor {
            shape: t.shape.clone(),
            data: t.data.iter().map(|&v| f(v)).collect(),
        };
        let rg = self.rg(x);
        self.push(value, op, rg)
    }

    pub fn relu(&mut self, x: Var) -> Var {
        self.unary(x, |v| v.max(0.0), Op::Relu(x))
    }

    pub fn sigmoid(&mut self, x: Var) -> Var {
        self.unary(x, sigmoid, Op::Sigmoid(x))
    }

    pub fn abs(&mut self, x: Var) -> Var {
        self.unary(x, f64::abs, Op::Abs(x))
    }

    pub fn scale(&mut self, x: Var, factor: f64) -> Var {
        self.unary(x, |v| v * factor, Op::Scale(x, factor))
    }

    /// Numerically stable softmax over each row of a 2-D tensor.
    pub fn softmax_rows(&mut self, x: Var) -> Result<Var> {
        let (rows, cols) = dims2("softmax_rows", self.value(x))?;
        let mut out = self.value(x).data.clone();
        for row in out.chunks_mut(cols) {
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
        let rg = self.rg(x);
        Ok(self.push(Tensor::matrix(rows, cols, out)?, Op::SoftmaxRows(x), rg))
    }

    /// Column-wise max over each group of rows. Ties go to the earliest
    /// member in the group's list.
    pub fn max_over_group(&mut self, x: Var, groups: &[Vec<usize>]) -> Result<Var> {
        let (rows, cols) = dims2("max_over_group", self.value(x))?;
        let xv = &self.value(x).data;
        let mut out = Vec::with_capacity(groups.len() * cols);
        let mut argmax = Vec::with_capacity(groups.len() * cols);
        for (g, members) in groups.iter().enumerate() {
            let Some(&first) = members.first() else {
                return Err(shape_err("max_over_group", format!("group {g} is empty")));
            };
            if let Some(&bad) = members.iter().find(|&&m| m >= rows) {
                return Err(shape_err("max_over_group", format!("row {bad} out of {rows}")));
            }
            for c in 0..cols {
                let mut best = first;
                for &m in &members[1..] {
                    if xv[m * cols + c] > xv[best * cols + c] {
                        best = m;
                    }
                }
                out.push(xv[best * cols + c]);
                argmax.push(best);
            }
        }
        let rg = self.rg(x);
        Ok(self.push(
            Tensor::matrix(groups.len(), cols, out)?,
            Op::MaxOverGroup { x, argmax },
            rg,
        ))
    }

    /// Selects rows of `x` (repeats allowed).
    pub fn gather(&mut self, x: Var, indices: &[usize]) -> Result<Var> {
        let (rows, cols) = dims2("gather", self.value(x))?;
        if let Some(&bad) = indices.iter().find(|&&i| i >= rows) {
            return Err(shape_err("gather", format!("row {bad} out of {rows}")));
        }
        let xv = &self.value(x).data;
        let mut out = Vec::with_capacity(indices.len() * cols);
        for &i in indices {
            out.extend_from_slice(&xv[i * cols..(i + 1) * cols]);
        }
        let rg = self.rg(x);
        Ok(self.push(
            Tensor::matrix(indices.len(), cols, out)?,
            Op::Gather {
                x,
                indices: indices.to_vec(),
            },
            rg,
        ))
    }

    /// Column-wise concatenation `[a ‖ b]`.
    pub fn concat_features(&mut self, a: Var, b: Var) -> Result<Var> {
        let (ra, ca) = dims2("concat_features", self.value(a))?;
        let (rb, cb) = dims2("concat_features", self.value(b))?;
        if ra != rb {
            return Err(shape_err("concat_features", format!("{ra} rows vs {rb} rows")));
        }
        let (av, bv) = (&self.value(a).data, &self.value(b).data);
        let mut out = Vec::with_capacity(ra * (ca + cb));
        for r in 0..ra {
            out.extend_from_slice(&av[r * ca..(r + 1) * ca]);
            out.extend_from_slice(&bv[r * cb..(r + 1) * cb]);
        }
        let rg = self.rg(a) || self.rg(b);
        Ok(self.push(Tensor::matrix(ra, ca + cb, out)?, Op::Concat { a, b }, rg))
    }

    /// Columns `start..start + len` of a 2-D tensor.
    pub fn slice_cols(&mut self, x: Var, start: usize, len: usize) -> Result<Var> {
        let (rows, cols) = dims2("slice_cols", self.value(x))?;
        if start + len > cols {
            return Err(shape_err(
                "slice_cols",
                format!("columns {start}..{} out of {cols}", start + len),
            ));
        }
        let xv = &self.value(x).data;
        let mut out = Vec::with_capacity(rows * len);
        for r in 0..rows {
            out.extend_from_slice(&xv[r * cols + start..r * cols + start + len]);
        }
        let rg = self.rg(x);
        Ok(self.push(Tensor::matrix(rows, len, out)?, Op::SliceCols { x, start }, rg))
    }

    fn binary(&mut self, op_name: &'static str, a: Var, b: Var, f: impl Fn(f64, f64) -> f64, op: Op) -> Result<Var> {
        let (ta, tb) = (self.value(a), self.value(b));
        if ta.shape != tb.shape {
            return Err(shape_err(op_name, format!("{:?} vs {:?}", ta.shape, tb.shape)));
        }
        let value = Tensor {
            shape: ta.shape.clone(),
            data: ta.data.iter().zip(&tb.data).map(|(&x, &y)| f(x, y)).collect(),
        };
        let rg = self.rg(a) || self.rg(b);
        Ok(self.push(value, op, rg))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary("add", a, b, |x, y| x + y, Op::Add(a, b))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary("sub", a, b, |x, y| x - y, Op::Sub(a, b))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary("mul", a, b, |x, y| x * y, Op::Mul(a, b))
    }

    pub fn sum(&mut self, x: Var) -> Var {
        let s = self.value(x).data.iter().sum();
        let rg = self.rg(x);
        self.push(Tensor::scalar(s), Op::Sum(x), rg)
    }

    pub fn mean(&mut self, x: Var) -> Var {
        let t = self.value(x);
        let m = t.data.iter().sum::<f64>() / t.len().max(1) as f64;
        let rg = self.rg(x);
        self.push(Tensor::scalar(m), Op::Mean(x), rg)
    }

    /// `a · bᵀ` for 2-D `a` (n×k) and `b` (m×k).
    pub fn matmul_nt(&mut self, a: Var, b: Var) -> Result<Var> {
        let (n, k) = dims2("matmul_nt", self.value(a))?;
        let (m, kb) = dims2("matmul_nt", self.value(b))?;
        if k != kb {
            return Err(shape_err("matmul_nt", format!("inner dims {k} vs {kb}")));
        }
        let (av, bv) = (&self.value(a).data, &self.value(b).data);
        let mut out = Vec::with_capacity(n * m);
        for i in 0..n {
            let ar = &av[i * k..(i + 1) * k];
            for j in 0..m {
                let br = &bv[j * k..(j + 1) * k];
                out.push(ar.iter().zip(br).map(|(x, y)| x * y).sum());
            }
        }
        let rg = self.rg(a) || self.rg(b);
        Ok(self.push(Tensor::matrix(n, m, out)?, Op::MatMulNT { a, b }, rg))
    }

    /// Inverse-distance-weighted interpolation of `features` (one row per
    /// coarse position) onto `fine` positions using the `k` nearest coarse
    /// points with weights `1/d²`. A query within [`IDW_EXACT_HIT`] of a
    /// coarse point copies that point's feature.
    pub fn idw_interpolate(&mut self, coarse: &[Point2], features: Var, fine: &[Point2], k: usize) -> Result<Var> {
        let (rows, cols) = dims2("idw_interpolate", self.value(features))?;
        if rows != coarse.len() || rows == 0 || k == 0 {
            return Err(shape_err(
                "idw_interpolate",
                format!("{rows} feature rows for {} coarse points, k = {k}", coarse.len()),
            ));
        }
        let k = k.min(rows);
        let neighbors: Vec<Vec<(usize, f64)>> = fine
            .iter()
            .map(|q| idw_weights(coarse, q, k))
            .collect();
        let fv = &self.value(features).data;
        let mut out = vec![0.0; fine.len() * cols];
        for (orow, nb) in out.chunks_mut(cols).zip(&neighbors) {
            for &(j, w) in nb {
                for (o, &f) in orow.iter_mut().zip(&fv[j * cols..(j + 1) * cols]) {
                    *o += w * f;
                }
            }
        }
        let rg = self.rg(features);
        Ok(self.push(
            Tensor::matrix(fine.len(), cols, out)?,
            Op::Idw {
                x: features,
                neighbors,
            },
            rg,
        ))
    }

    /// `−Σ wᵢ [tᵢ ln p̃ᵢ + (1 − tᵢ) ln(1 − p̃ᵢ)]` with `p̃` clamped to
    /// `[BCE_CLAMP, 1 − BCE_CLAMP]`. Clamped entries pass no gradient.
    pub fn weighted_bce(&mut self, p: Var, target: Arc<Vec<f64>>, weight: Arc<Vec<f64>>) -> Result<Var> {
        let n = self.value(p).len();
        if target.len() != n || weight.len() != n {
            return Err(shape_err(
                "weighted_bce",
                format!("{n} predictions, {} targets, {} weights", target.len(), weight.len()),
            ));
        }
        let loss = bce_value(&self.value(p).data, &target, &weight);
        let rg = self.rg(p);
        Ok(self.push(Tensor::scalar(loss), Op::WeightedBce { p, target, weight }, rg))
    }

    /// Adjoints of every node with respect to the scalar `loss`.
    pub fn backward(&self, loss: Var) -> Result<Gradients> {
        if self.value(loss).len() != 1 {
            return Err(shape_err(
                "backward",
                format!("loss must be scalar, got shape {:?}", self.value(loss).shape),
            ));
        }
        let mut grads: Vec<Option<Vec<f64>>> = (0..self.nodes.len()).map(|_| None).collect();
        grads[loss.0] = Some(vec![1.0]);
        for id in (0..=loss.0).rev() {
            let node = &self.nodes[id];
            if !node.requires_grad {
                continue;
            }
            let Some(g) = grads[id].take() else { continue };
            self.propagate(node, &g, &mut grads);
            grads[id] = Some(g);
        }
        Ok(Gradients { grads })
    }

    fn acc<'g>(&self, grads: &'g mut [Option<Vec<f64>>], v: Var) -> Option<&'g mut Vec<f64>> {
        if !self.rg(v) {
            return None;
        }
        let len = self.value(v).len();
        Some(grads[v.0].get_or_insert_with(|| vec![0.0; len]))
    }

    fn propagate(&self, node: &Node, g: &[f64], grads: &mut [Option<Vec<f64>>]) {
        let out = &node.value.data;
        match &node.op {
            Op::Leaf => {}
            Op::Affine { x, w, b } => {
                let (rows, f_in) = self.value(*x).dims2().unwrap();
                let f_out = self.value(*w).shape[1];
                let (xv, wv) = (&self.value(*x).data, &self.value(*w).data);
                if let Some(gx) = self.acc(grads, *x) {
                    for r in 0..rows {
                        let grow = &g[r * f_out..(r + 1) * f_out];
                        for k in 0..f_in {
                            let wrow = &wv[k * f_out..(k + 1) * f_out];
                            gx[r * f_in + k] += grow.iter().zip(wrow).map(|(a, b)| a * b).sum::<f64>();
                        }
                    }
                }
                if let Some(gw) = self.acc(grads, *w) {
                    for r in 0..rows {
                        let grow = &g[r * f_out..(r + 1) * f_out];
                        for k in 0..f_in {
                            let xk = xv[r * f_in + k];
                            if xk == 0.0 {
                                continue;
                            }
                            for (gwj, &gj) in gw[k * f_out..(k + 1) * f_out].iter_mut().zip(grow) {
                                *gwj += xk * gj;
                            }
                        }
                    }
                }
                if let Some(gb) = self.acc(grads, *b) {
                    for grow in g.chunks(f_out) {
                        for (a, &v) in gb.iter_mut().zip(grow) {
                            *a += v;
                        }
                    }
                }
            }
            Op::Relu(x) => {
                let xv = &self.value(*x).data;
                if let Some(gx) = self.acc(grads, *x) {
                    for ((a, &gi), &xi) in gx.iter_mut().zip(g).zip(xv) {
                        if xi > 0.0 {
                            *a += gi;
                        }
                    }
                }
            }
            Op::Sigmoid(x) => {
                if let Some(gx) = self.acc(grads, *x) {
                    for ((a, &gi), &s) in gx.iter_mut().zip(g).zip(out) {
                        *a += gi * s * (1.0 - s);
                    }
                }
            }
            Op::Abs(x) => {
                let xv = &self.value(*x).data;
                if let Some(gx) = self.acc(grads, *x) {
                    for ((a, &gi), &xi) in gx.iter_mut().zip(g).zip(xv) {
                        *a += gi * if xi > 0.0 {
                            1.0
                        } else if xi < 0.0 {
                            -1.0
                        } else {
                            0.0
                        };
                    }
                }
            }
            Op::Scale(x, f) => {
                if let Some(gx) = self.acc(grads, *x) {
                    for (a, &gi) in gx.iter_mut().zip(g) {
                        *a += gi * f;
                    }
                }
            }
            Op::SoftmaxRows(x) => {
                let cols = node.value.shape[1];
                if let Some(gx) = self.acc(grads, *x) {
                    for ((gxr, gr), sr) in gx.chunks_mut(cols).zip(g.chunks(cols)).zip(out.chunks(cols)) {
                        let dot: f64 = gr.iter().zip(sr).map(|(a, b)| a * b).sum();
                        for ((a, &gi), &si) in gxr.iter_mut().zip(gr).zip(sr) {
                            *a += si * (gi - dot);
                        }
                    }
                }
            }
            Op::MaxOverGroup { x, argmax } => {
                let cols = node.value.shape[1];
                if let Some(gx) = self.acc(grads, *x) {
                    for (e, (&row, &gi)) in argmax.iter().zip(g).enumerate() {
                        gx[row * cols + e % cols] += gi;
                    }
                }
            }
            Op::Gather { x, indices } => {
                let cols = node.value.shape[1];
                if let Some(gx) = self.acc(grads, *x) {
                    for (gr, &i) in g.chunks(cols).zip(indices) {
                        for (a, &v) in gx[i * cols..(i + 1) * cols].iter_mut().zip(gr) {
                            *a += v;
                        }
                    }
                }
            }
            Op::Concat { a, b } => {
                let ca = self.value(*a).shape[1];
                let cb = self.value(*b).shape[1];
                if let Some(ga) = self.acc(grads, *a) {
                    for (gar, gr) in ga.chunks_mut(ca).zip(g.chunks(ca + cb)) {
                        for (t, &v) in gar.iter_mut().zip(&gr[..ca]) {
                            *t += v;
                        }
                    }
                }
                if let Some(gb) = self.acc(grads, *b) {
                    for (gbr, gr) in gb.chunks_mut(cb).zip(g.chunks(ca + cb)) {
                        for (t, &v) in gbr.iter_mut().zip(&gr[ca..]) {
                            *t += v;
                        }
                    }
                }
            }
            Op::SliceCols { x, start } => {
                let cols = self.value(*x).shape[1];
                let len = node.value.shape[1];
                if let Some(gx) = self.acc(grads, *x) {
                    for (gxr, gr) in gx.chunks_mut(cols).zip(g.chunks(len)) {
                        for (t, &v) in gxr[*start..start + len].iter_mut().zip(gr) {
                            *t += v;
                        }
                    }
                }
            }
            Op::Add(a, b) | Op::Sub(a, b) => {
                let sign = if matches!(node.op, Op::Sub(..)) { -1.0 } else { 1.0 };
                if let Some(ga) = self.acc(grads, *a) {
                    for (t, &v) in ga.iter_mut().zip(g) {
                        *t += v;
                    }
                }
                if let Some(gb) = self.acc(grads, *b) {
                    for (t, &v) in gb.iter_mut().zip(g) {
                        *t += sign * v;
                    }
                }
            }
            Op::Mul(a, b) => {
                let (av, bv) = (&self.value(*a).data, &self.value(*b).data);
                if let Some(ga) = self.acc(grads, *a) {
                    for ((t, &v), &y) in ga.iter_mut().zip(g).zip(bv) {
                        *t += v * y;
                    }
                }
                if let Some(gb) = self.acc(grads, *b) {
                    for ((t, &v), &x) in gb.iter_mut().zip(g).zip(av) {
                        *t += v * x;
                    }
                }
            }
            Op::Sum(x) => {
                if let Some(gx) = self.acc(grads, *x) {
                    for t in gx.iter_mut() {
                        *t += g[0];
                    }
                }
            }
            Op::Mean(x) => {
                let n = self.value(*x).len().max(1) as f64;
                if let Some(gx) = self.acc(grads, *x) {
                    for t in gx.iter_mut() {
                        *t += g[0] / n;
                    }
                }
            }
            Op::MatMulNT { a, b } => {
                let (n, k) = self.value(*a).dims2().unwrap();
                let m = self.value(*b).shape[0];
                let (av, bv) = (&self.value(*a).data, &self.value(*b).data);
                if let Some(ga) = self.acc(grads, *a) {
                    for i in 0..n {
                        let gar = &mut ga[i * k..(i + 1) * k];
                        for j in 0..m {
                            let gij = g[i * m + j];
                            if gij == 0.0 {
                                continue;
                            }
                            for (t, &y) in gar.iter_mut().zip(&bv[j * k..(j + 1) * k]) {
                                *t += gij * y;
                            }
                        }
                    }
                }
                if let Some(gb) = self.acc(grads, *b) {
                    for i in 0..n {
                        let ar = &av[i * k..(i + 1) * k];
                        for j in 0..m {
                            let gij = g[i * m + j];
                            if gij == 0.0 {
                                continue;
                            }
                            for (t, &x) in gb[j * k..(j + 1) * k].iter_mut().zip(ar) {
                                *t += gij * x;
                            }
                        }
                    }
                }
            }
            Op::Idw { x, neighbors } => {
                let cols = node.value.shape[1];
                if let Some(gx) = self.acc(grads, *x) {
                    for (gr, nb) in g.chunks(cols).zip(neighbors) {
                        for &(j, w) in nb {
                            for (t, &v) in gx[j * cols..(j + 1) * cols].iter_mut().zip(gr) {
                                *t += w * v;
                            }
                        }
                    }
                }
            }
            Op::WeightedBce { p, target, weight } => {
                let pv = &self.value(*p).data;
                if let Some(gp) = self.acc(grads, *p) {
                    for (((t, &pi), &ti), &wi) in gp.iter_mut().zip(pv).zip(target.iter()).zip(weight.iter()) {
                        if pi > BCE_CLAMP && pi < 1.0 - BCE_CLAMP {
                            *t += -g[0] * wi * (ti / pi - (1.0 - ti) / (1.0 - pi));
                        }
                    }
                }
            }
        }
    }
}

pub(crate) fn sigmoid(v: f64) -> f64 {
    if v >= 0.0 {
        1.0 / (1.0 + (-v).exp())
    } else {
        let e = v.exp();
        e / (1.0 + e)
    }
}

/// Weighted BCE contribution of one entry, without the leading minus sign.
pub(crate) fn bce_term(p: f64, target: f64, weight: f64) -> f64 {
    let pc = p.clamp(BCE_CLAMP, 1.0 - BCE_CLAMP);
    let mut term = 0.0;
    if target != 0.0 {
        term += target * pc.ln();
    }
    if target != 1.0 {
        term += (1.0 - target) * (1.0 - pc).ln();
    }
    weight * term
}

pub(crate) fn bce_value(p: &[f64], target: &[f64], weight: &[f64]) -> f64 {
    -p.iter()
        .zip(target)
        .zip(weight)
        .map(|((&pi, &ti), &wi)| bce_term(pi, ti, wi))
        .sum::<f64>()
}

/// Up to `k` nearest coarse points of `q` (ties to the lower index) with
/// normalized `1/d²` weights.
fn idw_weights(coarse: &[Point2], q: &Point2, k: usize) -> Vec<(usize, f64)> {
    let mut best: Vec<(f64, usize)> = Vec::with_capacity(k + 1);
    for (j, c) in coarse.iter().enumerate() {
        let d2 = q.dist2(c);
        if best.len() < k || d2 < best[best.len() - 1].0 {
            let pos = best.partition_point(|&(bd, _)| bd <= d2);
            best.insert(pos, (d2, j));
            best.truncate(k);
        }
    }
    if best[0].0.sqrt() < IDW_EXACT_HIT {
        return vec![(best[0].1, 1.0)];
    }
    let inv: Vec<f64> = best.iter().map(|&(d2, _)| 1.0 / d2).collect();
    let total: f64 = inv.iter().sum();
    best.iter().zip(inv).map(|(&(_, j), w)| (j, w / total)).collect()
}
