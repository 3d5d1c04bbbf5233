//! Transformer building blocks. Each block has a taped forward pass for
//! training and a tape-free forward pass for inference; both run on the same
//! kernels.

use rand_chacha::ChaCha8Rng;

use super::params::{Init, ParamStore};
use super::tape::{Tape, Var};
use super::tensor::{self, affine, Matrix};

#[derive(Debug, Clone)]
pub struct Linear {
    pub w: usize,
    pub b: usize,
}

impl Linear {
    pub fn new(store: &mut ParamStore, rng: &mut ChaCha8Rng, name: &str, d_in: usize, d_out: usize) -> Self {
        Self {
            w: store.param(&format!("{name}.w"), d_in, d_out, Init::Xavier, rng),
            b: store.param(&format!("{name}.b"), 1, d_out, Init::Zeros, rng),
        }
    }

    pub fn forward(&self, t: &mut Tape<'_>, x: Var) -> Var {
        let w = t.param(self.w);
        let b = t.param(self.b);
        let y = t.matmul(x, w);
        t.add_row(y, b)
    }

    pub fn apply(&self, s: &ParamStore, x: &Matrix) -> Matrix {
        affine(x, s.get(self.w), s.get(self.b))
    }
}

#[derive(Debug, Clone)]
pub struct Norm {
    pub gain: usize,
    pub bias: usize,
}

impl Norm {
    pub fn new(store: &mut ParamStore, rng: &mut ChaCha8Rng, name: &str, d: usize) -> Self {
        Self {
            gain: store.param(&format!("{name}.g"), 1, d, Init::Ones, rng),
            bias: store.param(&format!("{name}.b"), 1, d, Init::Zeros, rng),
        }
    }

    pub fn forward(&self, t: &mut Tape<'_>, x: Var) -> Var {
        let g = t.param(self.gain);
        let b = t.param(self.bias);
        t.layer_norm(x, g, b)
    }

    pub fn apply(&self, s: &ParamStore, x: &Matrix) -> Matrix {
        tensor::layer_norm(x, &s.get(self.gain).data, &s.get(self.bias).data).0
    }
}

#[derive(Debug, Clone)]
pub struct MultiHead {
    pub q: Linear,
    pub k: Linear,
    pub v: Linear,
    pub o: Linear,
    pub heads: usize,
}

impl MultiHead {
    pub fn new(store: &mut ParamStore, rng: &mut ChaCha8Rng, name: &str, d: usize, heads: usize) -> Self {
        Self {
            q: Linear::new(store, rng, &format!("{name}.q"), d, d),
            k: Linear::new(store, rng, &format!("{name}.k"), d, d),
            v: Linear::new(store, rng, &format!("{name}.v"), d, d),
            o: Linear::new(store, rng, &format!("{name}.o"), d, d),
            heads,
        }
    }

    pub fn forward(&self, t: &mut Tape<'_>, x: Var, memory: Var, causal: bool) -> Var {
        let q = self.q.forward(t, x);
        let k = self.k.forward(t, memory);
        let v = self.v.forward(t, memory);
        let a = t.attention(q, k, v, self.heads, causal);
        self.o.forward(t, a)
    }

    /// Keys and values of `memory`, for reuse across decoding steps.
    pub fn project_memory(&self, s: &ParamStore, memory: &Matrix) -> (Matrix, Matrix) {
        (self.k.apply(s, memory), self.v.apply(s, memory))
    }

    pub fn apply_cached(&self, s: &ParamStore, x: &Matrix, keys: &Matrix, values: &Matrix, causal: bool) -> Matrix {
        let q = self.q.apply(s, x);
        let (a, _) = tensor::attention(&q, keys, values, self.heads, causal);
        self.o.apply(s, &a)
    }
}

#[derive(Debug, Clone)]
pub struct FeedForward {
    pub up: Linear,
    pub down: Linear,
}

impl FeedForward {
    pub fn new(store: &mut ParamStore, rng: &mut ChaCha8Rng, name: &str, d: usize, ff: usize) -> Self {
        Self {
            up: Linear::new(store, rng, &format!("{name}.up"), d, ff),
            down: Linear::new(store, rng, &format!("{name}.down"), ff, d),
        }
    }

    pub fn forward(&self, t: &mut Tape<'_>, x: Var) -> Var {
        let h = self.up.forward(t, x);
        let h = t.gelu(h);
        self.down.forward(t, h)
    }

    pub fn apply(&self, s: &ParamStore, x: &Matrix) -> Matrix {
        let mut h = self.up.apply(s, x);
        h.data.iter_mut().for_each(|v| *v = tensor::gelu(*v));
        self.down.apply(s, &h)
    }
}

fn residual(a: &Matrix, b: &Matrix) -> Matrix {
    let mut out = a.clone();
    out.add_assign(b);
    out
}

/// Pre-norm self-attention encoder layer.
#[derive(Debug, Clone)]
pub struct EncoderLayer {
    ln1: Norm,
    attn: MultiHead,
    ln2: Norm,
    ff: FeedForward,
}

impl EncoderLayer {
    pub fn new(store: &mut ParamStore, rng: &mut ChaCha8Rng, name: &str, d: usize, heads: usize, ff: usize) -> Self {
        Self {
            ln1: Norm::new(store, rng, &format!("{name}.ln1"), d),
            attn: MultiHead::new(store, rng, &format!("{name}.attn"), d, heads),
            ln2: Norm::new(store, rng, &format!("{name}.ln2"), d),
            ff: FeedForward::new(store, rng, &format!("{name}.ff"), d, ff),
        }
    }
}

#[derive(Debug, Clone)]
pub struct Encoder {
    layers: Vec<EncoderLayer>,
    ln_f: Norm,
    dropout: f64,
}

impl Encoder {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        store: &mut ParamStore,
        rng: &mut ChaCha8Rng,
        name: &str,
        n_layers: usize,
        d: usize,
        heads: usize,
        ff: usize,
        dropout: f64,
    ) -> Self {
        Self {
            layers: (0..n_layers)
                .map(|i| EncoderLayer::new(store, rng, &format!("{name}.{i}"), d, heads, ff))
                .collect(),
            ln_f: Norm::new(store, rng, &format!("{name}.ln_f"), d),
            dropout,
        }
    }

    /// `causal` restricts each row to itself and earlier rows.
    pub fn forward(&self, t: &mut Tape<'_>, mut x: Var, causal: bool) -> Var {
        for l in &self.layers {
            let h = l.ln1.forward(t, x);
            let h = l.attn.forward(t, h, h, causal);
            let h = t.dropout(h, self.dropout);
            x = t.add(x, h);
            let h = l.ln2.forward(t, x);
            let h = l.ff.forward(t, h);
            let h = t.dropout(h, self.dropout);
            x = t.add(x, h);
        }
        self.ln_f.forward(t, x)
    }

    pub fn apply(&self, s: &ParamStore, x: &Matrix, causal: bool) -> Matrix {
        let mut x = x.clone();
        for l in &self.layers {
            let h = l.ln1.apply(s, &x);
            let (k, v) = l.attn.project_memory(s, &h);
            x = residual(&x, &l.attn.apply_cached(s, &h, &k, &v, causal));
            let h = l.ln2.apply(s, &x);
            x = residual(&x, &l.ff.apply(s, &h));
        }
        self.ln_f.apply(s, &x)
    }
}

#[derive(Debug, Clone)]
pub struct DecoderLayer {
    ln1: Norm,
    self_attn: MultiHead,
    ln2: Norm,
    cross: MultiHead,
    ln3: Norm,
    ff: FeedForward,
}

impl DecoderLayer {
    pub fn new(store: &mut ParamStore, rng: &mut ChaCha8Rng, name: &str, d: usize, heads: usize, ff: usize) -> Self {
        Self {
            ln1: Norm::new(store, rng, &format!("{name}.ln1"), d),
            self_attn: MultiHead::new(store, rng, &format!("{name}.self"), d, heads),
            ln2: Norm::new(store, rng, &format!("{name}.ln2"), d),
            cross: MultiHead::new(store, rng, &format!("{name}.cross"), d, heads),
            ln3: Norm::new(store, rng, &format!("{name}.ln3"), d),
            ff: FeedForward::new(store, rng, &format!("{name}.ff"), d, ff),
        }
    }
}

/// Projected encoder memory, shared by every hypothesis of one source.
#[derive(Debug, Clone)]
pub struct CrossMemory {
    layers: Vec<(Matrix, Matrix)>,
}

/// Self-attention keys and values accumulated while decoding.
#[derive(Debug, Clone)]
pub struct SelfCache {
    layers: Vec<(Matrix, Matrix)>,
}

impl SelfCache {
    pub fn len(&self) -> usize {
        self.layers.first().map_or(0, |(k, _)| k.rows)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

fn push_rows(m: &mut Matrix, rows: &Matrix) {
    assert_eq!(m.cols, rows.cols);
    m.data.extend_from_slice(&rows.data);
    m.rows += rows.rows;
}

/// Pre-norm decoder with causal self-attention and cross-attention.
#[derive(Debug, Clone)]
pub struct Decoder {
    layers: Vec<DecoderLayer>,
    ln_f: Norm,
    dropout: f64,
    d: usize,
}

impl Decoder {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        store: &mut ParamStore,
        rng: &mut ChaCha8Rng,
        name: &str,
        n_layers: usize,
        d: usize,
        heads: usize,
        ff: usize,
        dropout: f64,
    ) -> Self {
        Self {
            layers: (0..n_layers)
                .map(|i| DecoderLayer::new(store, rng, &format!("{name}.{i}"), d, heads, ff))
                .collect(),
            ln_f: Norm::new(store, rng, &format!("{name}.ln_f"), d),
            dropout,
            d,
        }
    }

    pub fn forward(&self, t: &mut Tape<'_>, mut x: Var, memory: Var) -> Var {
        for l in &self.layers {
            let h = l.ln1.forward(t, x);
            let h = l.self_attn.forward(t, h, h, true);
            let h = t.dropout(h, self.dropout);
            x = t.add(x, h);
            let h = l.ln2.forward(t, x);
            let h = l.cross.forward(t, h, memory, false);
            let h = t.dropout(h, self.dropout);
            x = t.add(x, h);
            let h = l.ln3.forward(t, x);
            let h = l.ff.forward(t, h);
            let h = t.dropout(h, self.dropout);
            x = t.add(x, h);
        }
        self.ln_f.forward(t, x)
    }

    pub fn cross_memory(&self, s: &ParamStore, memory: &Matrix) -> CrossMemory {
        CrossMemory { layers: self.layers.iter().map(|l| l.cross.project_memory(s, memory)).collect() }
    }

    pub fn empty_cache(&self) -> SelfCache {
        SelfCache {
            layers: self.layers.iter().map(|_| (Matrix::zeros(0, self.d), Matrix::zeros(0, self.d))).collect(),
        }
    }

    /// Runs new rows `x` (positions following those already cached) and
    /// returns their final hidden states.
    pub fn step(&self, s: &ParamStore, x: &Matrix, memory: &CrossMemory, cache: &mut SelfCache) -> Matrix {
        let mut x = x.clone();
        for (l, ((keys, values), (mk, mv))) in self.layers.iter().zip(cache.layers.iter_mut().zip(&memory.layers)) {
            let h = l.ln1.apply(s, &x);
            let (k, v) = l.self_attn.project_memory(s, &h);
            push_rows(keys, &k);
            push_rows(values, &v);
            x = residual(&x, &l.self_attn.apply_cached(s, &h, keys, values, true));
            let h = l.ln2.apply(s, &x);
            x = residual(&x, &l.cross.apply_cached(s, &h, mk, mv, false));
            let h = l.ln3.apply(s, &x);
            x = residual(&x, &l.ff.apply(s, &h));
        }
        self.ln_f.apply(s, &x)
    }
}
