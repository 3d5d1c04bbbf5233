//! Reverse-mode automatic differentiation over [`Matrix`] values.
//!
//! A [`Tape`] records every operation of one forward pass. Parameters are
//! read from a borrowed [`ParamStore`] and never copied onto the tape.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::params::{Grads, ParamStore};
use super::tensor::{self, gemm, Matrix, View, ViewMut};

/// Handle to a value recorded on a tape.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Var(usize);

/// Probabilities at or above this value are clamped before `ln(1 - p)`.
pub const UNLIKELIHOOD_CLAMP: f64 = 1.0 - 1e-6;

enum Op {
    Leaf,
    Param(usize),
    MatMul { a: Var, b: Var, trans_b: bool },
    Add(Var, Var),
    AddRow(Var, Var),
    Scale(Var, f64),
    Gelu(Var),
    Tanh(Var),
    LayerNorm { x: Var, gain: Var, bias: Var, xhat: Vec<f64>, inv_std: Vec<f64> },
    Attention { q: Var, k: Var, v: Var, heads: usize, probs: Vec<f64> },
    LogSoftmax(Var),
    Gather { table: Var, ids: Vec<usize> },
    Pick { x: Var, cols: Vec<usize> },
    Sum(Var),
    ConcatRows(Vec<Var>),
    SliceRows { x: Var, start: usize },
    PairAdd { a: Var, b: Var },
    Reshape(Var),
    Log1mExp { x: Var, clamped: Vec<bool> },
    MarginRank { x: Var, margin: f64 },
    Dropout { x: Var, mask: Vec<f64> },
    CopyMix { logits: Var, scores: Var, gate: Var, source: Vec<usize>, parts: Vec<(Vec<f64>, Vec<f64>, f64)> },
}

struct Node {
    value: Matrix,
    op: Op,
    needs_grad: bool,
}

pub struct Tape<'s> {
    store: &'s ParamStore,
    nodes: Vec<Node>,
    param_vars: Vec<Option<Var>>,
    dropout_rng: Option<ChaCha8Rng>,
}

impl<'s> Tape<'s> {
    pub fn new(store: &'s ParamStore) -> Self {
        Self { store, nodes: Vec::new(), param_vars: vec![None; store.len()], dropout_rng: None }
    }

    /// Enables dropout with the given seed. Without this call dropout is the
    /// identity.
    pub fn with_dropout(mut self, seed: u64) -> Self {
        self.dropout_rng = Some(ChaCha8Rng::seed_from_u64(seed));
        self
    }

    pub fn store(&self) -> &'s ParamStore {
        self.store
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, v: Var) -> &Matrix {
        match self.nodes[v.0].op {
            Op::Param(i) => self.store.get(i),
            _ => &self.nodes[v.0].value,
        }
    }

    fn shape(&self, v: Var) -> (usize, usize) {
        self.value(v).shape()
    }

    fn needs(&self, v: Var) -> bool {
        self.nodes[v.0].needs_grad
    }

    fn push(&mut self, value: Matrix, op: Op, needs_grad: bool) -> Var {
        self.nodes.push(Node { value, op, needs_grad });
        Var(self.nodes.len() - 1)
    }

    /// A constant input.
    pub fn leaf(&mut self, value: Matrix) -> Var {
        self.push(value, Op::Leaf, false)
    }

    pub fn param(&mut self, index: usize) -> Var {
        if let Some(v) = self.param_vars[index] {
            return v;
        }
        let v = self.push(Matrix::zeros(0, 0), Op::Param(index), true);
        self.param_vars[index] = Some(v);
        v
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Var {
        let out = tensor::matmul(self.value(a), self.value(b));
        let ng = self.needs(a) || self.needs(b);
        self.push(out, Op::MatMul { a, b, trans_b: false }, ng)
    }

    /// `a · bᵀ`.
    pub fn matmul_t(&mut self, a: Var, b: Var) -> Var {
        let (am, bm) = (self.value(a), self.value(b));
        let mut out = Matrix::zeros(am.rows, bm.rows);
        gemm(1.0, View::of(am), View::of(bm).t(), 0.0, ViewMut::of(&mut out));
        let ng = self.needs(a) || self.needs(b);
        self.push(out, Op::MatMul { a, b, trans_b: true }, ng)
    }

    pub fn add(&mut self, a: Var, b: Var) -> Var {
        let mut out = self.value(a).clone();
        out.add_assign(self.value(b));
        let ng = self.needs(a) || self.needs(b);
        self.push(out, Op::Add(a, b), ng)
    }

    /// Adds the single row `row` to every row of `x`.
    pub fn add_row(&mut self, x: Var, row: Var) -> Var {
        let r = self.value(row);
        assert_eq!(r.rows, 1, "add_row expects a single row");
        let mut out = self.value(x).clone();
        assert_eq!(out.cols, r.cols);
        for i in 0..out.rows {
            for (o, b) in out.row_mut(i).iter_mut().zip(&r.data) {
                *o += b;
            }
        }
        let ng = self.needs(x) || self.needs(row);
        self.push(out, Op::AddRow(x, row), ng)
    }

    pub fn scale(&mut self, x: Var, s: f64) -> Var {
        let mut out = self.value(x).clone();
        out.scale(s);
        let ng = self.needs(x);
        self.push(out, Op::Scale(x, s), ng)
    }

    pub fn gelu(&mut self, x: Var) -> Var {
        let m = self.value(x);
        let out = Matrix::from_vec(m.rows, m.cols, m.data.iter().map(|&v| tensor::gelu(v)).collect());
        let ng = self.needs(x);
        self.push(out, Op::Gelu(x), ng)
    }

    pub fn tanh(&mut self, x: Var) -> Var {
        let m = self.value(x);
        let out = Matrix::from_vec(m.rows, m.cols, m.data.iter().map(|v| v.tanh()).collect());
        let ng = self.needs(x);
        self.push(out, Op::Tanh(x), ng)
    }

    pub fn layer_norm(&mut self, x: Var, gain: Var, bias: Var) -> Var {
        let (y, xhat, inv_std) =
            tensor::layer_norm(self.value(x), &self.value(gain).data, &self.value(bias).data);
        let ng = self.needs(x) || self.needs(gain) || self.needs(bias);
        self.push(y, Op::LayerNorm { x, gain, bias, xhat, inv_std }, ng)
    }

    /// Multi-head attention; see [`tensor::attention`].
    pub fn attention(&mut self, q: Var, k: Var, v: Var, heads: usize, causal: bool) -> Var {
        let (out, probs) = tensor::attention(self.value(q), self.value(k), self.value(v), heads, causal);
        let ng = self.needs(q) || self.needs(k) || self.needs(v);
        self.push(out, Op::Attention { q, k, v, heads, probs }, ng)
    }

    /// Row-wise log-softmax. Entries where `allowed` is false come out as
    /// `-inf` and receive no gradient.
    pub fn log_softmax(&mut self, x: Var, allowed: Option<&[bool]>) -> Var {
        let mut out = self.value(x).clone();
        let cols = out.cols;
        for r in 0..out.rows {
            let mask = allowed.map(|a| &a[r * cols..(r + 1) * cols]);
            tensor::log_softmax_masked(out.row_mut(r), mask);
        }
        let ng = self.needs(x);
        self.push(out, Op::LogSoftmax(x), ng)
    }

    /// Rows of `table` selected by `ids`.
    pub fn gather(&mut self, table: Var, ids: &[usize]) -> Var {
        let t = self.value(table);
        let mut out = Matrix::zeros(ids.len(), t.cols);
        for (r, &id) in ids.iter().enumerate() {
            out.row_mut(r).copy_from_slice(t.row(id));
        }
        let ng = self.needs(table);
        self.push(out, Op::Gather { table, ids: ids.to_vec() }, ng)
    }

    /// One element per row, giving an `[n, 1]` column.
    pub fn pick(&mut self, x: Var, cols: &[usize]) -> Var {
        let m = self.value(x);
        assert_eq!(m.rows, cols.len(), "pick needs one column per row");
        let out = Matrix::from_vec(cols.len(), 1, cols.iter().enumerate().map(|(r, &c)| m.get(r, c)).collect());
        let ng = self.needs(x);
        self.push(out, Op::Pick { x, cols: cols.to_vec() }, ng)
    }

    pub fn sum(&mut self, x: Var) -> Var {
        let s = self.value(x).data.iter().sum();
        let ng = self.needs(x);
        self.push(Matrix::scalar(s), Op::Sum(x), ng)
    }

    pub fn concat_rows(&mut self, parts: &[Var]) -> Var {
        let cols = self.shape(parts[0]).1;
        let mut data = Vec::new();
        for &p in parts {
            let m = self.value(p);
            assert_eq!(m.cols, cols, "concat_rows column mismatch");
            data.extend_from_slice(&m.data);
        }
        let rows = data.len() / cols.max(1);
        let ng = parts.iter().any(|&p| self.needs(p));
        self.push(Matrix::from_vec(rows, cols, data), Op::ConcatRows(parts.to_vec()), ng)
    }

    pub fn slice_rows(&mut self, x: Var, start: usize, len: usize) -> Var {
        let out = self.value(x).rows_slice(start, len);
        let ng = self.needs(x);
        self.push(out, Op::SliceRows { x, start }, ng)
    }

    /// All pairwise row sums: row `t * n + i` is `a[i] + b[t]` where `a` has
    /// `n` rows.
    pub fn pair_add(&mut self, a: Var, b: Var) -> Var {
        let (am, bm) = (self.value(a), self.value(b));
        assert_eq!(am.cols, bm.cols);
        let mut out = Matrix::zeros(am.rows * bm.rows, am.cols);
        for t in 0..bm.rows {
            for i in 0..am.rows {
                for ((o, x), y) in out.row_mut(t * am.rows + i).iter_mut().zip(am.row(i)).zip(bm.row(t)) {
                    *o = x + y;
                }
            }
        }
        let ng = self.needs(a) || self.needs(b);
        self.push(out, Op::PairAdd { a, b }, ng)
    }

    pub fn reshape(&mut self, x: Var, rows: usize, cols: usize) -> Var {
        let m = self.value(x);
        assert_eq!(m.len(), rows * cols, "reshape size mismatch");
        let out = Matrix::from_vec(rows, cols, m.data.clone());
        let ng = self.needs(x);
        self.push(out, Op::Reshape(x), ng)
    }

    /// Elementwise `ln(1 - exp(x))` for log-probabilities `x`, with the
    /// probability clamped to [`UNLIKELIHOOD_CLAMP`].
    pub fn log1m_exp(&mut self, x: Var) -> Var {
        let m = self.value(x);
        let mut clamped = Vec::with_capacity(m.len());
        let data = m
            .data
            .iter()
            .map(|&lp| {
                let p = lp.exp();
                let c = p >= UNLIKELIHOOD_CLAMP;
                clamped.push(c);
                (1.0 - if c { UNLIKELIHOOD_CLAMP } else { p }).ln()
            })
            .collect();
        let out = Matrix::from_vec(m.rows, m.cols, data);
        let ng = self.needs(x);
        self.push(out, Op::Log1mExp { x, clamped }, ng)
    }

    /// Pairwise hinge `Σ_{i<j} max(0, x_j - x_i + (j - i) · margin)` over the
    /// elements of `x`, listed best first.
    pub fn margin_rank(&mut self, x: Var, margin: f64) -> Var {
        let loss = margin_rank_value(&self.value(x).data, margin);
        let ng = self.needs(x);
        self.push(Matrix::scalar(loss), Op::MarginRank { x, margin }, ng)
    }

    /// Inverted dropout. Identity unless dropout was enabled on the tape.
    pub fn dropout(&mut self, x: Var, rate: f64) -> Var {
        let n = self.value(x).len();
        let Some(rng) = self.dropout_rng.as_mut().filter(|_| rate > 0.0) else {
            return x;
        };
        let keep = 1.0 / (1.0 - rate);
        let mask: Vec<f64> = (0..n).map(|_| if rng.random::<f64>() < rate { 0.0 } else { keep }).collect();
        let m = self.value(x);
        let out = Matrix::from_vec(m.rows, m.cols, m.data.iter().zip(&mask).map(|(a, b)| a * b).collect());
        let ng = self.needs(x);
        self.push(out, Op::Dropout { x, mask }, ng)
    }

    /// Row-wise pointer-generator log-probabilities; see
    /// [`tensor::copy_mix`]. `logits` is `[n, vocab]`, `scores` is
    /// `[n, source.len()]` and `gate` is `[n, 1]`.
    pub fn copy_mix(&mut self, logits: Var, scores: Var, gate: Var, source: &[usize]) -> Var {
        let (lm, sm, gm) = (self.value(logits), self.value(scores), self.value(gate));
        assert_eq!(sm.cols, source.len());
        let mut out = Matrix::zeros(lm.rows, lm.cols);
        let mut parts = Vec::with_capacity(lm.rows);
        for r in 0..lm.rows {
            let (lp, generate, attend, g) = tensor::copy_mix(lm.row(r), sm.row(r), gm.data[r], source);
            out.row_mut(r).copy_from_slice(&lp);
            parts.push((generate, attend, g));
        }
        let ng = self.needs(logits) || self.needs(scores) || self.needs(gate);
        self.push(out, Op::CopyMix { logits, scores, gate, source: source.to_vec(), parts }, ng)
    }

    /// Gradients of the scalar `loss` with respect to every parameter used.
    pub fn backward(&self, loss: Var) -> Grads {
        assert_eq!(self.shape(loss), (1, 1), "backward needs a scalar loss");
        let mut grads: Vec<Option<Matrix>> = (0..self.nodes.len()).map(|_| None).collect();
        let mut out = Grads::zeros_like(self.store);
        if !self.needs(loss) {
            return out;
        }
        grads[loss.0] = Some(Matrix::scalar(1.0));
        for i in (0..=loss.0).rev() {
            let Some(g) = grads[i].take() else { continue };
            if let Op::Param(p) = self.nodes[i].op {
                out.accumulate(p, &g);
                continue;
            }
            self.backprop(i, &g, &mut grads);
        }
        out
    }

    fn backprop(&self, i: usize, g: &Matrix, grads: &mut [Option<Matrix>]) {
        let node = &self.nodes[i];
        let mut send = |v: Var, delta: Matrix| {
            if !self.needs(v) {
                return;
            }
            match &mut grads[v.0] {
                Some(acc) => acc.add_assign(&delta),
                slot => *slot = Some(delta),
            }
        };
        match &node.op {
            Op::Leaf | Op::Param(_) => {}
            Op::MatMul { a, b, trans_b } => {
                let (am, bm) = (self.value(*a), self.value(*b));
                if self.needs(*a) {
                    let mut da = Matrix::zeros(am.rows, am.cols);
                    let bv = if *trans_b { View::of(bm) } else { View::of(bm).t() };
                    gemm(1.0, View::of(g), bv, 0.0, ViewMut::of(&mut da));
                    send(*a, da);
                }
                if self.needs(*b) {
                    let mut db = Matrix::zeros(bm.rows, bm.cols);
                    if *trans_b {
                        gemm(1.0, View::of(g).t(), View::of(am), 0.0, ViewMut::of(&mut db));
                    } else {
                        gemm(1.0, View::of(am).t(), View::of(g), 0.0, ViewMut::of(&mut db));
                    }
                    send(*b, db);
                }
            }
            Op::Add(a, b) => {
                send(*a, g.clone());
                send(*b, g.clone());
            }
            Op::AddRow(x, row) => {
                let mut dr = Matrix::zeros(1, g.cols);
                for r in 0..g.rows {
                    for (d, v) in dr.data.iter_mut().zip(g.row(r)) {
                        *d += v;
                    }
                }
                send(*x, g.clone());
                send(*row, dr);
            }
            Op::Scale(x, s) => {
                let mut d = g.clone();
                d.scale(*s);
                send(*x, d);
            }
            Op::Gelu(x) => {
                let xm = self.value(*x);
                let data = g.data.iter().zip(&xm.data).map(|(g, &v)| g * tensor::gelu_grad(v)).collect();
                send(*x, Matrix::from_vec(g.rows, g.cols, data));
            }
            Op::Tanh(x) => {
                let data = g.data.iter().zip(&node.value.data).map(|(g, y)| g * (1.0 - y * y)).collect();
                send(*x, Matrix::from_vec(g.rows, g.cols, data));
            }
            Op::LayerNorm { x, gain, bias, xhat, inv_std } => {
                let n = g.cols;
                let gv = &self.value(*gain).data;
                let mut dx = Matrix::zeros(g.rows, n);
                let mut dg = Matrix::zeros(1, n);
                let mut db = Matrix::zeros(1, n);
                for r in 0..g.rows {
                    let gr = g.row(r);
                    let xh = &xhat[r * n..(r + 1) * n];
                    let mut mean_d = 0.0;
                    let mut mean_dx = 0.0;
                    for c in 0..n {
                        let d = gr[c] * gv[c];
                        mean_d += d;
                        mean_dx += d * xh[c];
                        dg.data[c] += gr[c] * xh[c];
                        db.data[c] += gr[c];
                    }
                    mean_d /= n as f64;
                    mean_dx /= n as f64;
                    for c in 0..n {
                        let d = gr[c] * gv[c];
                        dx.data[r * n + c] = inv_std[r] * (d - mean_d - xh[c] * mean_dx);
                    }
                }
                send(*x, dx);
                send(*gain, dg);
                send(*bias, db);
            }
            Op::Attention { q, k, v, heads, probs } => {
                let (dq, dk, dv) = attention_backward(
                    self.value(*q),
                    self.value(*k),
                    self.value(*v),
                    *heads,
                    probs,
                    g,
                );
                send(*q, dq);
                send(*k, dk);
                send(*v, dv);
            }
            Op::LogSoftmax(x) => {
                let y = &node.value;
                let mut dx = Matrix::zeros(g.rows, g.cols);
                for r in 0..g.rows {
                    let yr = y.row(r);
                    let gr = g.row(r);
                    let total: f64 = (0..g.cols).filter(|&c| yr[c].is_finite()).map(|c| gr[c]).sum();
                    for c in 0..g.cols {
                        if yr[c].is_finite() {
                            dx.data[r * g.cols + c] = gr[c] - yr[c].exp() * total;
                        }
                    }
                }
                send(*x, dx);
            }
            Op::Gather { table, ids } => {
                let (rows, cols) = self.shape(*table);
                let mut dt = Matrix::zeros(rows, cols);
                for (r, &id) in ids.iter().enumerate() {
                    for (d, v) in dt.row_mut(id).iter_mut().zip(g.row(r)) {
                        *d += v;
                    }
                }
                send(*table, dt);
            }
            Op::Pick { x, cols } => {
                let (rows, ncols) = self.shape(*x);
                let mut dx = Matrix::zeros(rows, ncols);
                for (r, &c) in cols.iter().enumerate() {
                    dx.data[r * ncols + c] = g.data[r];
                }
                send(*x, dx);
            }
            Op::Sum(x) => {
                let (rows, cols) = self.shape(*x);
                send(*x, Matrix::from_vec(rows, cols, vec![g.item(); rows * cols]));
            }
            Op::ConcatRows(parts) => {
                let mut offset = 0;
                for &p in parts {
                    let rows = self.shape(p).0;
                    send(p, g.rows_slice(offset, rows));
                    offset += rows;
                }
            }
            Op::SliceRows { x, start } => {
                let (rows, cols) = self.shape(*x);
                let mut dx = Matrix::zeros(rows, cols);
                dx.data[start * cols..start * cols + g.len()].copy_from_slice(&g.data);
                send(*x, dx);
            }
            Op::PairAdd { a, b } => {
                let (n, cols) = self.shape(*a);
                let t = self.shape(*b).0;
                let mut da = Matrix::zeros(n, cols);
                let mut db = Matrix::zeros(t, cols);
                for ti in 0..t {
                    for i in 0..n {
                        let gr = g.row(ti * n + i);
                        for c in 0..cols {
                            da.data[i * cols + c] += gr[c];
                            db.data[ti * cols + c] += gr[c];
                        }
                    }
                }
                send(*a, da);
                send(*b, db);
            }
            Op::Reshape(x) => {
                let (rows, cols) = self.shape(*x);
                send(*x, Matrix::from_vec(rows, cols, g.data.clone()));
            }
            Op::Log1mExp { x, clamped } => {
                let xm = self.value(*x);
                let data = g
                    .data
                    .iter()
                    .zip(&xm.data)
                    .zip(clamped)
                    .map(|((g, &lp), &c)| {
                        if c {
                            0.0
                        } else {
                            let p = lp.exp();
                            -g * p / (1.0 - p)
                        }
                    })
                    .collect();
                send(*x, Matrix::from_vec(xm.rows, xm.cols, data));
            }
            Op::MarginRank { x, margin } => {
                let xm = self.value(*x);
                let s = &xm.data;
                let mut d = vec![0.0; s.len()];
                for i in 0..s.len() {
                    for j in i + 1..s.len() {
                        if s[j] - s[i] + (j - i) as f64 * margin > 0.0 {
                            d[j] += g.item();
                            d[i] -= g.item();
                        }
                    }
                }
                send(*x, Matrix::from_vec(xm.rows, xm.cols, d));
            }
            Op::Dropout { x, mask } => {
                let data = g.data.iter().zip(mask).map(|(a, b)| a * b).collect();
                send(*x, Matrix::from_vec(g.rows, g.cols, data));
            }
            Op::CopyMix { logits, scores, gate, source, parts } => {
                let (rows, vocab) = (g.rows, g.cols);
                let s = source.len();
                let mut dl = Matrix::zeros(rows, vocab);
                let mut ds = Matrix::zeros(rows, s);
                let mut dz = Matrix::zeros(rows, 1);
                for (r, (generate, attend, gv)) in parts.iter().enumerate() {
                    let y = node.value.row(r);
                    let dp: Vec<f64> = g.row(r).iter().zip(y).map(|(d, lp)| if *d == 0.0 { 0.0 } else { d / lp.exp() }).collect();
                    let mut copy = vec![0.0; vocab];
                    for (&w, a) in source.iter().zip(attend) {
                        copy[w] += a;
                    }
                    let dgen: Vec<f64> = dp.iter().map(|d| gv * d).collect();
                    let dot: f64 = generate.iter().zip(&dgen).map(|(p, d)| p * d).sum();
                    for (o, (p, d)) in dl.row_mut(r).iter_mut().zip(generate.iter().zip(&dgen)) {
                        *o = p * (d - dot);
                    }
                    let datt: Vec<f64> = source.iter().map(|&w| (1.0 - gv) * dp[w]).collect();
                    let dot: f64 = attend.iter().zip(&datt).map(|(a, d)| a * d).sum();
                    for (o, (a, d)) in ds.row_mut(r).iter_mut().zip(attend.iter().zip(&datt)) {
                        *o = a * (d - dot);
                    }
                    let dg: f64 = dp.iter().zip(generate.iter().zip(&copy)).map(|(d, (p, c))| d * (p - c)).sum();
                    dz.data[r] = dg * gv * (1.0 - gv);
                }
                send(*logits, dl);
                send(*scores, ds);
                send(*gate, dz);
            }
        }
    }
}

/// Value of the pairwise margin ranking loss for scores listed best first.
pub fn margin_rank_value(scores: &[f64], margin: f64) -> f64 {
    let mut loss = 0.0;
    for i in 0..scores.len() {
        for j in i + 1..scores.len() {
            loss += (scores[j] - scores[i] + (j - i) as f64 * margin).max(0.0);
        }
    }
    loss
}

fn attention_backward(
    q: &Matrix,
    k: &Matrix,
    v: &Matrix,
    heads: usize,
    probs: &[f64],
    g: &Matrix,
) -> (Matrix, Matrix, Matrix) {
    let (tq, d) = q.shape();
    let tk = k.rows;
    let dh = d / heads;
    let scale = 1.0 / (dh as f64).sqrt();
    let mut dq = Matrix::zeros(tq, d);
    let mut dk = Matrix::zeros(tk, d);
    let mut dv = Matrix::zeros(tk, d);
    for h in 0..heads {
        let p = Matrix::from_vec(tq, tk, probs[h * tq * tk..(h + 1) * tq * tk].to_vec());
        gemm(1.0, View::of(&p).t(), View::cols(g, h * dh, dh), 0.0, ViewMut::cols(&mut dv, h * dh, dh));
        let mut dp = Matrix::zeros(tq, tk);
        gemm(1.0, View::cols(g, h * dh, dh), View::cols(v, h * dh, dh).t(), 0.0, ViewMut::of(&mut dp));
        for i in 0..tq {
            let pr = p.row(i);
            let dr = dp.row_mut(i);
            let dot: f64 = pr.iter().zip(dr.iter()).map(|(a, b)| a * b).sum();
            for (d, &pv) in dr.iter_mut().zip(pr) {
                *d = pv * (*d - dot);
            }
        }
        gemm(scale, View::of(&dp), View::cols(k, h * dh, dh), 0.0, ViewMut::cols(&mut dq, h * dh, dh));
        gemm(scale, View::of(&dp).t(), View::cols(q, h * dh, dh), 0.0, ViewMut::cols(&mut dk, h * dh, dh));
    }
    (dq, dk, dv)
}
