//! Dense row-major f64 matrices and the numeric kernels shared by the
//! autograd tape and the cached inference path.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Matrix {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![0.0; rows * cols] }
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Self {
        assert_eq!(rows * cols, data.len(), "matrix data length mismatch");
        Self { rows, cols, data }
    }

    pub fn scalar(v: f64) -> Self {
        Self::from_vec(1, 1, vec![v])
    }

    pub fn row_vector(data: Vec<f64>) -> Self {
        Self::from_vec(1, data.len(), data)
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn row_mut(&mut self, r: usize) -> &mut [f64] {
        &mut self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    pub fn item(&self) -> f64 {
        assert_eq!(self.data.len(), 1, "item() on non-scalar matrix");
        self.data[0]
    }

    pub fn add_assign(&mut self, other: &Matrix) {
        assert_eq!(self.shape(), other.shape());
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += b;
        }
    }

    pub fn scale(&mut self, s: f64) {
        for a in &mut self.data {
            *a *= s;
        }
    }

    pub fn transpose(&self) -> Matrix {
        let mut out = Matrix::zeros(self.cols, self.rows);
        for r in 0..self.rows {
            for c in 0..self.cols {
                out.data[c * self.rows + r] = self.data[r * self.cols + c];
            }
        }
        out
    }

    pub fn rows_slice(&self, start: usize, len: usize) -> Matrix {
        Matrix::from_vec(len, self.cols, self.data[start * self.cols..(start + len) * self.cols].to_vec())
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }
}

/// Strided read-only view used to express transposes and column blocks
/// without copying.
#[derive(Clone, Copy)]
pub struct View<'a> {
    pub data: &'a [f64],
    pub offset: usize,
    pub rows: usize,
    pub cols: usize,
    pub rs: isize,
    pub cs: isize,
}

impl<'a> View<'a> {
    pub fn of(m: &'a Matrix) -> Self {
        Self { data: &m.data, offset: 0, rows: m.rows, cols: m.cols, rs: m.cols as isize, cs: 1 }
    }

    pub fn t(self) -> Self {
        Self { rows: self.cols, cols: self.rows, rs: self.cs, cs: self.rs, ..self }
    }

    /// Columns `start..start+len` of a row-major matrix.
    pub fn cols(m: &'a Matrix, start: usize, len: usize) -> Self {
        Self { data: &m.data, offset: start, rows: m.rows, cols: len, rs: m.cols as isize, cs: 1 }
    }

    fn last_index(&self) -> usize {
        if self.rows == 0 || self.cols == 0 {
            return self.offset;
        }
        self.offset + (self.rows - 1) * self.rs as usize + (self.cols - 1) * self.cs as usize
    }
}

/// Mutable strided output block.
pub struct ViewMut<'a> {
    pub data: &'a mut [f64],
    pub offset: usize,
    pub rows: usize,
    pub cols: usize,
    pub rs: isize,
}

impl<'a> ViewMut<'a> {
    pub fn of(m: &'a mut Matrix) -> Self {
        let (rows, cols) = m.shape();
        Self { data: &mut m.data, offset: 0, rows, cols, rs: cols as isize }
    }

    pub fn cols(m: &'a mut Matrix, start: usize, len: usize) -> Self {
        let (rows, stride) = m.shape();
        Self { data: &mut m.data, offset: start, rows, cols: len, rs: stride as isize }
    }
}

/// `c = alpha * a · b + beta * c`.
pub fn gemm(alpha: f64, a: View<'_>, b: View<'_>, beta: f64, c: ViewMut<'_>) {
    assert_eq!(a.cols, b.rows, "gemm inner dimension mismatch");
    assert_eq!((a.rows, b.cols), (c.rows, c.cols), "gemm output shape mismatch");
    assert!(a.last_index() < a.data.len().max(1) || a.rows * a.cols == 0);
    assert!(b.last_index() < b.data.len().max(1) || b.rows * b.cols == 0);
    if c.rows == 0 || c.cols == 0 {
        return;
    }
    assert!(c.offset + (c.rows - 1) * c.rs as usize + c.cols - 1 < c.data.len());
    if a.cols == 0 {
        for r in 0..c.rows {
            for k in 0..c.cols {
                let idx = c.offset + r * c.rs as usize + k;
                c.data[idx] *= beta;
            }
        }
        return;
    }
    // SAFETY: the asserts above bound every element the kernel touches
    // inside the respective slices; strides are non-negative.
    unsafe {
        matrixmultiply::dgemm(
            a.rows,
            a.cols,
            b.cols,
            alpha,
            a.data.as_ptr().add(a.offset),
            a.rs,
            a.cs,
            b.data.as_ptr().add(b.offset),
            b.rs,
            b.cs,
            beta,
            c.data.as_mut_ptr().add(c.offset),
            c.rs,
            1,
        );
    }
}

pub fn matmul(a: &Matrix, b: &Matrix) -> Matrix {
    let mut out = Matrix::zeros(a.rows, b.cols);
    gemm(1.0, View::of(a), View::of(b), 0.0, ViewMut::of(&mut out));
    out
}

/// `x · w + b` where `b` is a single row.
pub fn affine(x: &Matrix, w: &Matrix, b: &Matrix) -> Matrix {
    let mut out = Matrix::zeros(x.rows, w.cols);
    for r in 0..x.rows {
        out.row_mut(r).copy_from_slice(&b.data);
    }
    gemm(1.0, View::of(x), View::of(w), 1.0, ViewMut::of(&mut out));
    out
}

pub const LN_EPS: f64 = 1e-5;

/// Row-wise layer normalization. Returns `(y, xhat, inv_std)`.
pub fn layer_norm(x: &Matrix, gain: &[f64], bias: &[f64]) -> (Matrix, Vec<f64>, Vec<f64>) {
    let n = x.cols;
    let mut y = Matrix::zeros(x.rows, n);
    let mut xhat = vec![0.0; x.len()];
    let mut inv_std = vec![0.0; x.rows];
    for r in 0..x.rows {
        let row = x.row(r);
        let mean = row.iter().sum::<f64>() / n as f64;
        let var = row.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n as f64;
        let is = 1.0 / (var + LN_EPS).sqrt();
        inv_std[r] = is;
        for c in 0..n {
            let h = (row[c] - mean) * is;
            xhat[r * n + c] = h;
            y.data[r * n + c] = h * gain[c] + bias[c];
        }
    }
    (y, xhat, inv_std)
}

const GELU_K: f64 = 0.797_884_560_802_865_4; // sqrt(2/pi)
const GELU_C: f64 = 0.044_715;

pub fn gelu(x: f64) -> f64 {
    0.5 * x * (1.0 + (GELU_K * (x + GELU_C * x * x * x)).tanh())
}

pub fn gelu_grad(x: f64) -> f64 {
    let t = (GELU_K * (x + GELU_C * x * x * x)).tanh();
    0.5 * (1.0 + t) + 0.5 * x * (1.0 - t * t) * GELU_K * (1.0 + 3.0 * GELU_C * x * x)
}

/// In-place softmax over `row`, ignoring entries where `allowed` is false
/// (they become exactly zero). Returns false when nothing is allowed.
pub fn softmax_masked(row: &mut [f64], allowed: Option<&[bool]>) -> bool {
    let ok = |i: usize| allowed.is_none_or(|a| a[i]);
    let max = (0..row.len()).filter(|&i| ok(i)).map(|i| row[i]).fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        row.iter_mut().for_each(|v| *v = 0.0);
        return false;
    }
    let mut sum = 0.0;
    for (i, v) in row.iter_mut().enumerate() {
        if ok(i) {
            *v = (*v - max).exp();
            sum += *v;
        } else {
            *v = 0.0;
        }
    }
    row.iter_mut().for_each(|v| *v /= sum);
    true
}

/// Log-softmax over `row`; disallowed entries become `-inf`.
pub fn log_softmax_masked(row: &mut [f64], allowed: Option<&[bool]>) {
    let ok = |i: usize| allowed.is_none_or(|a| a[i]);
    let max = (0..row.len()).filter(|&i| ok(i)).map(|i| row[i]).fold(f64::NEG_INFINITY, f64::max);
    let lse = max
        + (0..row.len())
            .filter(|&i| ok(i))
            .map(|i| (row[i] - max).exp())
            .sum::<f64>()
            .ln();
    for (i, v) in row.iter_mut().enumerate() {
        *v = if ok(i) { *v - lse } else { f64::NEG_INFINITY };
    }
}

/// Multi-head scaled dot-product attention. `q` is `[tq, d]`, `k` and `v`
/// are `[tk, d]`. With `causal`, query `i` sees keys `0..=i + (tk - tq)`.
/// Returns the `[tq, d]` output and the per-head probabilities
/// (`heads × tq × tk`).
pub fn attention(q: &Matrix, k: &Matrix, v: &Matrix, heads: usize, causal: bool) -> (Matrix, Vec<f64>) {
    let (tq, d) = q.shape();
    let tk = k.rows;
    let dh = d / heads;
    let scale = 1.0 / (dh as f64).sqrt();
    let mut out = Matrix::zeros(tq, d);
    let mut probs = vec![0.0; heads * tq * tk];
    let shift = if causal { tk - tq } else { 0 };
    for h in 0..heads {
        let mut s = Matrix::zeros(tq, tk);
        gemm(scale, View::cols(q, h * dh, dh), View::cols(k, h * dh, dh).t(), 0.0, ViewMut::of(&mut s));
        for i in 0..tq {
            let row = s.row_mut(i);
            if causal {
                for v in row.iter_mut().skip(i + shift + 1) {
                    *v = f64::NEG_INFINITY;
                }
            }
            softmax_masked(row, None);
        }
        gemm(1.0, View::of(&s), View::cols(v, h * dh, dh), 0.0, ViewMut::cols(&mut out, h * dh, dh));
        probs[h * tq * tk..(h + 1) * tq * tk].copy_from_slice(&s.data);
    }
    (out, probs)
}

/// Pointer-generator mixture for one decoding position:
/// `p(w) = g · softmax(logits)(w) + (1 - g) · Σ_{i: source_i = w} softmax(scores)_i`
/// with `g = sigmoid(gate)`. Returns `ln p` and the intermediate
/// distributions `(generate, attend, g)`.
pub fn copy_mix(logits: &[f64], scores: &[f64], gate: f64, source: &[usize]) -> (Vec<f64>, Vec<f64>, Vec<f64>, f64) {
    let mut generate = logits.to_vec();
    softmax_masked(&mut generate, None);
    let mut attend = scores.to_vec();
    softmax_masked(&mut attend, None);
    let g = 1.0 / (1.0 + (-gate).exp());
    let mut p: Vec<f64> = generate.iter().map(|v| g * v).collect();
    for (&w, a) in source.iter().zip(&attend) {
        p[w] += (1.0 - g) * a;
    }
    (p.into_iter().map(f64::ln).collect(), generate, attend, g)
}
