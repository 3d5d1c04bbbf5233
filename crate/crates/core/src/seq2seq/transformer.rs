//! Encoder-decoder transformer with learned positions and a tied input
//! embedding.

use std::rc::Rc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::config::ModelConfig;
use super::decode::StepLm;
use super::layers::{CrossMemory, Decoder, Encoder, Linear, SelfCache};
use super::params::{Init, ParamStore};
use super::tape::{Tape, Var};
use super::tensor::{copy_mix, log_softmax_masked, Matrix};
use super::vocab::{BOS, EOS};
use super::Seq2SeqError;

/// Token embedding, learned positions and a self-attention stack.
#[derive(Debug, Clone)]
pub struct TokenEncoder {
    pub embed: usize,
    pub pos: usize,
    pub encoder: Encoder,
    max_positions: usize,
    vocab_size: usize,
    dropout: f64,
}

impl TokenEncoder {
    pub fn new(store: &mut ParamStore, rng: &mut ChaCha8Rng, name: &str, c: &ModelConfig) -> Self {
        Self {
            embed: store.param(&format!("{name}.embed"), c.vocab_size, c.d_model, Init::Uniform(0.1), rng),
            pos: store.param(&format!("{name}.pos"), c.max_positions, c.d_model, Init::Uniform(0.1), rng),
            encoder: Encoder::new(
                store,
                rng,
                &format!("{name}.layers"),
                c.token_encoder_layers,
                c.d_model,
                c.n_heads,
                c.ff_dim,
                c.dropout,
            ),
            max_positions: c.max_positions,
            vocab_size: c.vocab_size,
            dropout: c.dropout,
        }
    }

    pub fn check(&self, ids: &[usize]) -> Result<(), Seq2SeqError> {
        check_ids(ids, self.vocab_size, self.max_positions)
    }

    pub fn forward(&self, t: &mut Tape<'_>, ids: &[usize]) -> Var {
        let emb = t.param(self.embed);
        let pos = t.param(self.pos);
        let x = t.gather(emb, ids);
        let positions: Vec<usize> = (0..ids.len()).collect();
        let p = t.gather(pos, &positions);
        let x = t.add(x, p);
        let x = t.dropout(x, self.dropout);
        self.encoder.forward(t, x, false)
    }

    pub fn apply(&self, s: &ParamStore, ids: &[usize]) -> Matrix {
        let x = embed_rows(s.get(self.embed), s.get(self.pos), ids, 0);
        self.encoder.apply(s, &x, false)
    }
}

pub(crate) fn check_ids(ids: &[usize], vocab: usize, max_positions: usize) -> Result<(), Seq2SeqError> {
    if let Some(&id) = ids.iter().find(|&&i| i >= vocab) {
        return Err(Seq2SeqError::TokenOutOfRange { id, vocab_size: vocab });
    }
    if ids.len() > max_positions {
        return Err(Seq2SeqError::TooLong { len: ids.len(), max: max_positions });
    }
    if ids.is_empty() {
        return Err(Seq2SeqError::EmptyInput);
    }
    Ok(())
}

/// Embedding rows for `ids` plus positions starting at `offset`.
pub(crate) fn embed_rows(table: &Matrix, pos: &Matrix, ids: &[usize], offset: usize) -> Matrix {
    let mut x = Matrix::zeros(ids.len(), table.cols);
    for (r, &id) in ids.iter().enumerate() {
        for ((o, a), b) in x.row_mut(r).iter_mut().zip(table.row(id)).zip(pos.row(offset + r)) {
            *o = a + b;
        }
    }
    x
}

/// Pointer head: a single attention over encoder states plus a gate that
/// decides between generating and copying.
#[derive(Debug, Clone)]
pub struct CopyHead {
    pub query: Linear,
    pub key: Linear,
    pub gate: Linear,
}

#[derive(Debug, Clone)]
pub struct Seq2Seq {
    pub config: ModelConfig,
    pub encoder: TokenEncoder,
    pub dec_pos: usize,
    pub decoder: Decoder,
    pub out: Linear,
    pub copy: Option<CopyHead>,
}

impl Seq2Seq {
    /// Registers (or looks up) every parameter under `prefix`.
    pub fn new(store: &mut ParamStore, config: &ModelConfig, prefix: &str) -> Result<Self, Seq2SeqError> {
        config.validate()?;
        let c = config;
        let mut rng = ChaCha8Rng::seed_from_u64(c.seed);
        let encoder = TokenEncoder::new(store, &mut rng, &format!("{prefix}encoder"), c);
        let dec_pos = store.param(&format!("{prefix}decoder.pos"), c.max_positions, c.d_model, Init::Uniform(0.1), &mut rng);
        let decoder = Decoder::new(
            store,
            &mut rng,
            &format!("{prefix}decoder.layers"),
            c.decoder_layers,
            c.d_model,
            c.n_heads,
            c.ff_dim,
            c.dropout,
        );
        let out = Linear::new(store, &mut rng, &format!("{prefix}out"), c.d_model, c.vocab_size);
        let copy = c.copy.then(|| CopyHead {
            query: Linear::new(store, &mut rng, &format!("{prefix}copy.query"), c.d_model, c.d_model),
            key: Linear::new(store, &mut rng, &format!("{prefix}copy.key"), c.d_model, c.d_model),
            gate: Linear::new(store, &mut rng, &format!("{prefix}copy.gate"), c.d_model, 1),
        });
        Ok(Self { config: c.clone(), encoder, dec_pos, decoder, out, copy })
    }

    pub fn encode(&self, t: &mut Tape<'_>, source: &[usize]) -> Encoded {
        Encoded { memory: self.encoder.forward(t, source), source: source.to_vec() }
    }

    /// Log-probabilities `[n, vocab]` for each position after consuming
    /// `inputs` (which should begin with the start symbol).
    pub fn decode_log_probs(&self, t: &mut Tape<'_>, enc: &Encoded, inputs: &[usize]) -> Var {
        let memory = enc.memory;
        let emb = t.param(self.encoder.embed);
        let pos = t.param(self.dec_pos);
        let x = t.gather(emb, inputs);
        let positions: Vec<usize> = (0..inputs.len()).collect();
        let p = t.gather(pos, &positions);
        let x = t.add(x, p);
        let x = t.dropout(x, self.config.dropout);
        let h = self.decoder.forward(t, x, memory);
        let logits = self.out.forward(t, h);
        let Some(c) = &self.copy else { return t.log_softmax(logits, None) };
        let q = c.query.forward(t, h);
        let k = c.key.forward(t, memory);
        let scores = t.matmul_t(q, k);
        let scores = t.scale(scores, 1.0 / (self.config.d_model as f64).sqrt());
        let gate = c.gate.forward(t, h);
        t.copy_mix(logits, scores, gate, &enc.source)
    }

    /// `[n, 1]` log-probabilities of each `target` token under teacher
    /// forcing. `target` should end with the end symbol.
    pub fn target_log_probs(&self, t: &mut Tape<'_>, memory: &Encoded, target: &[usize]) -> Var {
        let mut inputs = Vec::with_capacity(target.len());
        inputs.push(BOS);
        inputs.extend_from_slice(&target[..target.len() - 1]);
        let lp = self.decode_log_probs(t, memory, &inputs);
        t.pick(lp, target)
    }

    /// Negative log-likelihood of `target` (end symbol appended here).
    pub fn nll(&self, t: &mut Tape<'_>, source: &[usize], target: &[usize]) -> Var {
        let memory = self.encode(t, source);
        let full = with_eos(target);
        let lp = self.target_log_probs(t, &memory, &full);
        let s = t.sum(lp);
        t.scale(s, -1.0)
    }

    pub fn check_target(&self, target: &[usize]) -> Result<(), Seq2SeqError> {
        if let Some(&id) = target.iter().find(|&&i| i >= self.config.vocab_size) {
            return Err(Seq2SeqError::TokenOutOfRange { id, vocab_size: self.config.vocab_size });
        }
        if target.len() + 1 > self.config.max_positions {
            return Err(Seq2SeqError::TooLong { len: target.len() + 1, max: self.config.max_positions });
        }
        Ok(())
    }

    /// Next-token distributions after `[start] + target_prefix[..i]` for
    /// every `i` in `0..=len`.
    pub fn forward(&self, store: &ParamStore, source: &[usize], target_prefix: &[usize]) -> Result<Vec<Vec<f64>>, Seq2SeqError> {
        self.encoder.check(source)?;
        self.check_target(target_prefix)?;
        let mut t = Tape::new(store);
        let memory = self.encode(&mut t, source);
        let mut inputs = vec![BOS];
        inputs.extend_from_slice(target_prefix);
        let lp = self.decode_log_probs(&mut t, &memory, &inputs);
        let m = t.value(lp);
        Ok((0..m.rows).map(|r| m.row(r).iter().map(|v| v.exp()).collect()).collect())
    }

    /// Inference wrapper for one source sequence.
    pub fn lm<'a>(&'a self, store: &'a ParamStore, source: &[usize]) -> Result<Seq2SeqLm<'a>, Seq2SeqError> {
        self.encoder.check(source)?;
        let memory = self.encoder.apply(store, source);
        let copy_keys = self.copy.as_ref().map(|c| Rc::new(c.key.apply(store, &memory)));
        Ok(Seq2SeqLm {
            model: self,
            store,
            memory: Rc::new(self.decoder.cross_memory(store, &memory)),
            copy_keys,
            source: Rc::new(source.to_vec()),
        })
    }
}

/// Encoder output on a tape, kept with the source ids the copy head points
/// into.
pub struct Encoded {
    pub memory: Var,
    pub source: Vec<usize>,
}

pub fn with_eos(target: &[usize]) -> Vec<usize> {
    let mut full = target.to_vec();
    full.push(EOS);
    full
}

/// Cached incremental decoder for one encoded source.
pub struct Seq2SeqLm<'a> {
    model: &'a Seq2Seq,
    store: &'a ParamStore,
    memory: Rc<CrossMemory>,
    copy_keys: Option<Rc<Matrix>>,
    source: Rc<Vec<usize>>,
}

#[derive(Clone)]
pub struct DecodeState {
    cache: SelfCache,
    log_probs: Rc<Vec<f64>>,
}

impl Seq2SeqLm<'_> {
    fn run(&self, mut cache: SelfCache, token: usize) -> DecodeState {
        let s = self.store;
        let m = self.model;
        let position = cache.len();
        let x = embed_rows(s.get(m.encoder.embed), s.get(m.dec_pos), &[token], position);
        let h = m.decoder.step(s, &x, &self.memory, &mut cache);
        let mut logits = m.out.apply(s, &h);
        let (Some(c), Some(keys)) = (&m.copy, &self.copy_keys) else {
            log_softmax_masked(logits.row_mut(0), None);
            return DecodeState { cache, log_probs: Rc::new(logits.data) };
        };
        let q = c.query.apply(s, &h);
        let scale = 1.0 / (m.config.d_model as f64).sqrt();
        let scores: Vec<f64> =
            (0..keys.rows).map(|r| scale * q.data.iter().zip(keys.row(r)).map(|(a, b)| a * b).sum::<f64>()).collect();
        let gate = c.gate.apply(s, &h).item();
        let (lp, ..) = copy_mix(&logits.data, &scores, gate, &self.source);
        DecodeState { cache, log_probs: Rc::new(lp) }
    }

    /// Log-probability of each token of `target` (end symbol appended) under
    /// teacher forcing, using the cached path.
    pub fn score_tokens(&self, target: &[usize]) -> Vec<f64> {
        let full = with_eos(target);
        let mut state = self.start();
        let mut out = Vec::with_capacity(full.len());
        for (i, &tok) in full.iter().enumerate() {
            out.push(state.log_probs[tok]);
            if i + 1 < full.len() {
                state = self.advance(&state, tok);
            }
        }
        out
    }
}

impl StepLm for Seq2SeqLm<'_> {
    type State = DecodeState;

    fn vocab_size(&self) -> usize {
        self.model.config.vocab_size
    }

    fn eos(&self) -> usize {
        EOS
    }

    fn start(&self) -> DecodeState {
        self.run(self.model.decoder.empty_cache(), BOS)
    }

    fn log_probs(&self, state: &DecodeState) -> Vec<f64> {
        let mut lp = state.log_probs.as_ref().clone();
        if state.cache.len() >= self.model.config.max_positions {
            for (i, v) in lp.iter_mut().enumerate() {
                if i != EOS {
                    *v = f64::NEG_INFINITY;
                }
            }
        }
        lp
    }

    fn advance(&self, state: &DecodeState, token: usize) -> DecodeState {
        self.run(state.cache.clone(), token)
    }
}
