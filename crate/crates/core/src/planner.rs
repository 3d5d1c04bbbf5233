//! Unit-level content-plan generator.
//!
//! Every unit of the document is bracketed with `<e>`/`</e>`, the token
//! encoder output is mean-pooled per unit (markers included), unit positions
//! are added, and a shallow unit-level encoder contextualizes the pooled
//! states together with a learned end-of-extract state. A causal plan
//! decoder then scores each candidate unit against its state with a one
//! hidden layer MLP.

use std::rc::Rc;

use log::warn;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::json;
use thiserror::Error;

use crate::corpus::Document;
use crate::plans::{greedy_extract, ContentPlan, PlanError, Provenance, DEFAULT_MAX_PLAN_LEN};
use crate::seq2seq::decode::StepLm;
use crate::seq2seq::layers::{CrossMemory, Decoder, Encoder, Linear, SelfCache};
use crate::seq2seq::params::Init;
use crate::seq2seq::tensor::{affine, log_softmax_masked, matmul, Matrix};
use crate::seq2seq::train::{train_loop, TrainConfig, TrainReport};
use crate::seq2seq::transformer::{embed_rows, TokenEncoder};
use crate::seq2seq::{beam_search, Checkpoint, DecodeConfig, ModelConfig, ParamStore, Seq2SeqError, Tape, Var, Vocab};

pub const CHECKPOINT_KIND: &str = "planner";

#[derive(Debug, Error)]
pub enum PlannerError {
    #[error("document has no units")]
    EmptyDocument,
    #[error("document has {units} units but the planner supports at most {max}; truncate the document")]
    TooManyUnits { units: usize, max: usize },
    #[error("invalid partial plan: {0}")]
    InvalidPartial(String),
    #[error(transparent)]
    Plan(#[from] PlanError),
    #[error(transparent)]
    Model(#[from] Seq2SeqError),
}

/// Order in which plan units are generated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PlanOrder {
    /// Document order; a unit can only be followed by later units.
    #[default]
    InOrder,
    /// Oracle selection order; any unselected unit may follow.
    ConfidenceFirst,
}

/// Contextual unit states for one document.
#[derive(Debug, Clone, PartialEq)]
pub struct PlannerState {
    /// Mean-pooled token states, one row per unit.
    pub pooled: Matrix,
    /// Unit-level encoder output: one row per unit, then the end state.
    pub contextual: Matrix,
}

impl PlannerState {
    pub fn num_units(&self) -> usize {
        self.pooled.rows
    }
}

#[derive(Debug, Clone)]
pub struct Planner {
    pub config: ModelConfig,
    pub vocab: Vocab,
    pub order: PlanOrder,
    pub params: ParamStore,
    tokens: TokenEncoder,
    unit_pos: usize,
    end_state: usize,
    unit_encoder: Encoder,
    plan_start: usize,
    plan_pos: usize,
    decoder: Decoder,
    score_unit: Linear,
    score_step: Linear,
    score_out: Linear,
}

/// Training example: decorated token ids, per-unit spans, and the target
/// unit sequence (the end symbol is implicit).
#[derive(Debug, Clone, PartialEq)]
pub struct PlanExample {
    pub doc_id: String,
    pub ids: Vec<usize>,
    pub spans: Vec<(usize, usize)>,
    pub sequence: Vec<usize>,
}

/// Token ids with every unit bracketed, and each unit's span (markers
/// included) in that sequence.
pub fn bracket_all(doc: &Document, vocab: &Vocab) -> (Vec<usize>, Vec<(usize, usize)>) {
    let mut ids = Vec::new();
    let mut spans = Vec::new();
    for i in 0..doc.num_edus() {
        let start = ids.len();
        ids.push(vocab.id("<e>"));
        ids.extend(vocab.encode(doc.edu_tokens(i)));
        ids.push(vocab.id("</e>"));
        spans.push((start, ids.len()));
    }
    (ids, spans)
}

fn pooling_matrix(spans: &[(usize, usize)], len: usize) -> Matrix {
    let mut p = Matrix::zeros(spans.len(), len);
    for (r, &(a, b)) in spans.iter().enumerate() {
        let w = 1.0 / (b - a) as f64;
        p.row_mut(r)[a..b].iter_mut().for_each(|v| *v = w);
    }
    p
}

impl Planner {
    pub fn new(vocab: Vocab, mut config: ModelConfig, order: PlanOrder) -> Result<Self, PlannerError> {
        config.vocab_size = vocab.len();
        Self::with_params(vocab, config, order, ParamStore::new())
    }

    fn with_params(vocab: Vocab, config: ModelConfig, order: PlanOrder, mut params: ParamStore) -> Result<Self, PlannerError> {
        config.validate()?;
        let c = &config;
        let s = &mut params;
        let mut rng = ChaCha8Rng::seed_from_u64(c.seed ^ 0x9e37_79b9);
        let d = c.d_model;
        let tokens = TokenEncoder::new(s, &mut rng, "token_encoder", c);
        let unit_pos = s.param("unit.pos", c.max_positions, d, Init::Uniform(0.1), &mut rng);
        let end_state = s.param("unit.end", 1, d, Init::Uniform(0.1), &mut rng);
        let unit_encoder =
            Encoder::new(s, &mut rng, "unit.layers", c.edu_encoder_layers, d, c.n_heads, c.ff_dim, c.dropout);
        let plan_start = s.param("plan.start", 1, d, Init::Uniform(0.1), &mut rng);
        let plan_pos = s.param("plan.pos", c.max_positions, d, Init::Uniform(0.1), &mut rng);
        let decoder = Decoder::new(s, &mut rng, "plan.layers", c.decoder_layers, d, c.n_heads, c.ff_dim, c.dropout);
        let score_unit = Linear::new(s, &mut rng, "score.unit", d, d);
        let score_step = Linear::new(s, &mut rng, "score.step", d, d);
        let score_out = Linear::new(s, &mut rng, "score.out", d, 1);
        Ok(Self {
            config,
            vocab,
            order,
            params,
            tokens,
            unit_pos,
            end_state,
            unit_encoder,
            plan_start,
            plan_pos,
            decoder,
            score_unit,
            score_step,
            score_out,
        })
    }

    /// Copies the token encoder of a trained abstractor with the same
    /// vocabulary and dimensions. Returns the number of tensors copied.
    pub fn init_token_encoder_from(&mut self, abstractor: &ParamStore) -> usize {
        self.params.copy_prefix(abstractor, "encoder.", "token_encoder.")
    }

    pub fn checkpoint(&self) -> Checkpoint {
        Checkpoint {
            kind: CHECKPOINT_KIND.into(),
            meta: json!({ "config": self.config, "vocab": self.vocab, "order": self.order }),
            params: self.params.clone(),
        }
    }

    pub fn from_checkpoint(ck: Checkpoint) -> Result<Self, PlannerError> {
        let bad = |m: String| PlannerError::Model(Seq2SeqError::Checkpoint(m));
        if ck.kind != CHECKPOINT_KIND {
            return Err(bad(format!("expected a {CHECKPOINT_KIND} checkpoint, found {}", ck.kind)));
        }
        let config: ModelConfig = serde_json::from_value(ck.meta["config"].clone()).map_err(|e| bad(e.to_string()))?;
        let vocab: Vocab = serde_json::from_value(ck.meta["vocab"].clone()).map_err(|e| bad(e.to_string()))?;
        let order: PlanOrder = serde_json::from_value(ck.meta["order"].clone()).unwrap_or_default();
        let before = ck.params.len();
        let p = Self::with_params(vocab, config, order, ck.params)?;
        if p.params.len() != before {
            return Err(bad("checkpoint is missing planner parameters".into()));
        }
        Ok(p)
    }

    fn check_doc(&self, doc: &Document) -> Result<(), PlannerError> {
        let k = doc.num_edus();
        if k == 0 {
            return Err(PlannerError::EmptyDocument);
        }
        if k + 1 > self.config.max_positions {
            return Err(PlannerError::TooManyUnits { units: k, max: self.config.max_positions - 1 });
        }
        let (ids, _) = bracket_all(doc, &self.vocab);
        self.tokens.check(&ids)?;
        Ok(())
    }

    pub fn example(&self, doc: &Document, oracle_steps: &[usize]) -> PlanExample {
        let (ids, spans) = bracket_all(doc, &self.vocab);
        let mut sequence = oracle_steps.to_vec();
        if self.order == PlanOrder::InOrder {
            sequence.sort_unstable();
        }
        PlanExample { doc_id: doc.id.clone(), ids, spans, sequence }
    }

    fn units_tape(&self, t: &mut Tape<'_>, ids: &[usize], spans: &[(usize, usize)]) -> Var {
        let h = self.tokens.forward(t, ids);
        let pool = t.leaf(pooling_matrix(spans, ids.len()));
        let pooled = t.matmul(pool, h);
        let pos_table = t.param(self.unit_pos);
        let positions: Vec<usize> = (0..spans.len()).collect();
        let pos = t.gather(pos_table, &positions);
        let x = t.add(pooled, pos);
        let end = t.param(self.end_state);
        let x = t.concat_rows(&[x, end]);
        self.unit_encoder.forward(t, x, false)
    }

    /// Step masks for teacher forcing `sequence`: row `j` covers the
    /// decision after `j` selections.
    fn train_masks(&self, k: usize, sequence: &[usize]) -> Vec<bool> {
        let mut mask = Vec::with_capacity((sequence.len() + 1) * (k + 1));
        for j in 0..=sequence.len() {
            let prefix = &sequence[..j];
            mask.extend((0..=k).map(|i| i == k || self.allowed(prefix, i)));
        }
        mask
    }

    fn allowed(&self, prefix: &[usize], i: usize) -> bool {
        match self.order {
            PlanOrder::InOrder => prefix.last().is_none_or(|&l| i > l),
            PlanOrder::ConfidenceFirst => !prefix.contains(&i),
        }
    }

    /// Negative log-likelihood of the example's unit sequence followed by
    /// the end symbol.
    pub fn loss(&self, t: &mut Tape<'_>, ex: &PlanExample) -> Var {
        let k = ex.spans.len();
        let states = self.units_tape(t, &ex.ids, &ex.spans);
        let start = t.param(self.plan_start);
        let prev = t.gather(states, &ex.sequence);
        let x = t.concat_rows(&[start, prev]);
        let steps = ex.sequence.len() + 1;
        let pos_table = t.param(self.plan_pos);
        let positions: Vec<usize> = (0..steps).collect();
        let pos = t.gather(pos_table, &positions);
        let x = t.add(x, pos);
        let dec = self.decoder.forward(t, x, states);
        let a = self.score_unit.forward(t, states);
        let b = self.score_step.forward(t, dec);
        let pair = t.pair_add(a, b);
        let hidden = t.tanh(pair);
        let scores = self.score_out.forward(t, hidden);
        let logits = t.reshape(scores, steps, k + 1);
        let mask = self.train_masks(k, &ex.sequence);
        let lp = t.log_softmax(logits, Some(&mask));
        let mut targets = ex.sequence.clone();
        targets.push(k);
        let picked = t.pick(lp, &targets);
        let total = t.sum(picked);
        t.scale(total, -1.0)
    }

    pub fn encode_edus(&self, doc: &Document) -> Result<PlannerState, PlannerError> {
        self.check_doc(doc)?;
        let s = &self.params;
        let (ids, spans) = bracket_all(doc, &self.vocab);
        let h = self.tokens.apply(s, &ids);
        let pooled = matmul(&pooling_matrix(&spans, ids.len()), &h);
        let positions: Vec<usize> = (0..spans.len()).collect();
        let mut x = pooled.clone();
        for (r, &p) in positions.iter().enumerate() {
            for (o, v) in x.row_mut(r).iter_mut().zip(s.get(self.unit_pos).row(p)) {
                *o += v;
            }
        }
        x.data.extend_from_slice(&s.get(self.end_state).data);
        x.rows += 1;
        let contextual = self.unit_encoder.apply(s, &x, false);
        Ok(PlannerState { pooled, contextual })
    }

    fn lm<'a>(&'a self, state: &'a PlannerState) -> PlanLm<'a> {
        let s = &self.params;
        PlanLm {
            planner: self,
            state,
            unit_scores: self.score_unit.apply(s, &state.contextual),
            memory: Rc::new(self.decoder.cross_memory(s, &state.contextual)),
        }
    }

    /// Probabilities over the units and the end symbol (last entry) after
    /// `partial`, in generation order.
    pub fn next_plan_distribution(&self, state: &PlannerState, partial: &[usize]) -> Result<Vec<f64>, PlannerError> {
        let k = state.num_units();
        for (j, &i) in partial.iter().enumerate() {
            if i >= k || !self.allowed(&partial[..j], i) {
                return Err(PlannerError::InvalidPartial(format!("{partial:?} for {k} units")));
            }
        }
        let lm = self.lm(state);
        let mut st = lm.start();
        for &i in partial {
            st = lm.advance(&st, i);
        }
        Ok(lm.log_probs(&st).into_iter().map(f64::exp).collect())
    }

    /// `num_candidates` distinct plans by beam search. Each plan carries its
    /// length-normalized log-probability.
    pub fn generate_plans(&self, doc: &Document, d: &DecodeConfig, null_plan: bool) -> Result<PlanOutput, PlannerError> {
        let state = self.encode_edus(doc)?;
        let k = state.num_units();
        let mut warnings = Vec::new();
        let mut d = d.clone();
        if d.min_len > k {
            warnings.push(format!("{}: min_len {} clamped to {k} units", doc.id, d.min_len));
            d.min_len = k;
        }
        d.max_len = d.max_len.min(k).max(d.min_len);
        let wanted = if null_plan { d.num_candidates.saturating_sub(1) } else { d.num_candidates };
        let lm = self.lm(&state);
        let mut plans: Vec<ContentPlan> = Vec::new();
        let mut beam = d.beam_size.max(wanted);
        for attempt in 0..3 {
            let search = DecodeConfig { beam_size: beam, num_candidates: beam, ..d.clone() };
            plans.clear();
            for h in beam_search(&lm, &search) {
                let mut plan = ContentPlan::new(h.tokens.clone(), Provenance::Generated);
                plan.log_prob = Some(h.score);
                if !plans.iter().any(|p| p.edu_indices == plan.edu_indices) {
                    plans.push(plan);
                }
                if plans.len() == wanted {
                    break;
                }
            }
            if plans.len() >= wanted || attempt == 2 {
                break;
            }
            beam *= 2;
        }
        if plans.len() < wanted {
            warnings.push(format!("{}: only {} distinct plans available", doc.id, plans.len()));
        }
        if null_plan {
            plans.push(ContentPlan::null());
        }
        Ok(PlanOutput { plans, warnings })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlanOutput {
    pub plans: Vec<ContentPlan>,
    pub warnings: Vec<String>,
}

struct PlanLm<'a> {
    planner: &'a Planner,
    state: &'a PlannerState,
    unit_scores: Matrix,
    memory: Rc<CrossMemory>,
}

#[derive(Clone)]
struct PlanState {
    selected: Vec<usize>,
    cache: SelfCache,
    log_probs: Rc<Vec<f64>>,
}

impl PlanLm<'_> {
    fn run(&self, selected: Vec<usize>, mut cache: SelfCache) -> PlanState {
        let p = self.planner;
        let s = &p.params;
        let step = selected.len();
        let input = match selected.last() {
            None => s.get(p.plan_start).clone(),
            Some(&i) => self.state.contextual.rows_slice(i, 1),
        };
        let x = embed_rows(&input, s.get(p.plan_pos), &[0], step);
        let h = p.decoder.step(s, &x, &self.memory, &mut cache);
        let b = affine(&h, s.get(p.score_step.w), s.get(p.score_step.b));
        let k = self.state.num_units();
        let w = s.get(p.score_out.w);
        let bias = s.get(p.score_out.b).item();
        let mut logits: Vec<f64> = (0..=k)
            .map(|i| {
                let a = self.unit_scores.row(i);
                a.iter().zip(&b.data).zip(&w.data).map(|((x, y), wv)| (x + y).tanh() * wv).sum::<f64>() + bias
            })
            .collect();
        let mask: Vec<bool> = (0..=k).map(|i| i == k || p.allowed(&selected, i)).collect();
        log_softmax_masked(&mut logits, Some(&mask));
        PlanState { selected, cache, log_probs: Rc::new(logits) }
    }
}

impl StepLm for PlanLm<'_> {
    type State = PlanState;

    fn vocab_size(&self) -> usize {
        self.state.num_units() + 1
    }

    fn eos(&self) -> usize {
        self.state.num_units()
    }

    fn start(&self) -> PlanState {
        self.run(Vec::new(), self.planner.decoder.empty_cache())
    }

    fn log_probs(&self, state: &PlanState) -> Vec<f64> {
        state.log_probs.as_ref().clone()
    }

    fn advance(&self, state: &PlanState, token: usize) -> PlanState {
        let mut selected = state.selected.clone();
        selected.push(token);
        self.run(selected, state.cache.clone())
    }
}

/// Oracle plan examples. Documents without a reference or with an empty
/// oracle are skipped with a warning.
pub fn build_examples(planner: &Planner, docs: &[Document]) -> Vec<PlanExample> {
    docs.iter()
        .filter_map(|doc| {
            let reference = doc.reference_tokens()?;
            let result = greedy_extract(doc, &reference, DEFAULT_MAX_PLAN_LEN, Provenance::Oracle).ok()?;
            if result.plan.is_empty() {
                warn!("document {} has an empty oracle plan; skipped", doc.id);
                return None;
            }
            if planner.check_doc(doc).is_err() {
                warn!("document {} is too long for the planner; skipped", doc.id);
                return None;
            }
            let steps: Vec<usize> = result.steps.iter().map(|s| s.edu).collect();
            Some(planner.example(doc, &steps))
        })
        .collect()
}

pub fn train_planner(planner: &mut Planner, examples: &[PlanExample], cfg: &TrainConfig) -> Result<TrainReport, PlannerError> {
    let frozen = planner.clone();
    let report = train_loop(&mut planner.params, examples, cfg, |t, ex| Some(frozen.loss(t, ex)), None)?;
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seq2seq::grad_check;
    use crate::test_support::doc_from_units;

    fn setup(units: &[&str]) -> (Document, Planner) {
        let doc = doc_from_units(units);
        let vocab = Vocab::build(&doc.all_tokens());
        let planner = Planner::new(vocab, ModelConfig::tiny(0), PlanOrder::InOrder).unwrap();
        (doc, planner)
    }

    #[test]
    fn state_shapes() {
        let (doc, p) = setup(&["a b", "c d", "e f"]);
        let s = p.encode_edus(&doc).unwrap();
        assert_eq!(s.contextual.shape(), (4, 8));
        let (one, p1) = setup(&["a b c"]);
        assert_eq!(p1.encode_edus(&one).unwrap().contextual.rows, 2);
    }

    #[test]
    fn position_sensitive() {
        let (doc, p) = setup(&["a b", "c d", "e f"]);
        let swapped = doc_from_units(&["e f", "c d", "a b"]);
        let s = p.encode_edus(&doc).unwrap();
        let t = p.encode_edus(&swapped).unwrap();
        assert_ne!(s.contextual.row(0), t.contextual.row(2));
        assert_ne!(s.contextual.row(2), t.contextual.row(0));
    }

    #[test]
    fn masking_rules() {
        let (doc, p) = setup(&["a b", "c d", "e f", "g h"]);
        let s = p.encode_edus(&doc).unwrap();
        let d = p.next_plan_distribution(&s, &[1]).unwrap();
        assert_eq!(&d[..2], &[0.0, 0.0]);
        assert!((d.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        let last = p.next_plan_distribution(&s, &[3]).unwrap();
        assert_eq!(last[4], 1.0);
        assert!(p.next_plan_distribution(&s, &[]).unwrap().iter().all(|&v| v > 0.0));
        assert!(p.next_plan_distribution(&s, &[2, 1]).is_err());
    }

    #[test]
    fn cached_scores_match_tape() {
        let (doc, p) = setup(&["a b", "c d", "e f", "g h"]);
        let ex = p.example(&doc, &[2, 0]);
        assert_eq!(ex.sequence, vec![0, 2]);
        let mut t = Tape::new(&p.params);
        let loss = p.loss(&mut t, &ex);
        let nll = t.value(loss).item();
        let s = p.encode_edus(&doc).unwrap();
        let mut direct = 0.0;
        for (j, &target) in [0, 2, 4].iter().enumerate() {
            direct -= p.next_plan_distribution(&s, &ex.sequence[..j]).unwrap()[target].ln();
        }
        assert!((nll - direct).abs() < 1e-10, "{nll} vs {direct}");
    }

    #[test]
    fn planner_gradients_check() {
        let (doc, p) = setup(&["a b", "c d", "e f", "g h"]);
        let ex = p.example(&doc, &[1, 3]);
        let r = grad_check(&p.params, |t| p.loss(t, &ex), 1e-5, 200, 2).unwrap();
        assert!(r.max_relative_error < 1e-3, "{r:?}");
    }

    #[test]
    fn plans_are_distinct_sorted_and_bounded() {
        let (doc, p) = setup(&["a b", "c d", "e f", "g h", "i j", "k l"]);
        let d = DecodeConfig { num_candidates: 16, beam_size: 16, min_len: 2, max_len: 20, ..Default::default() };
        let out = p.generate_plans(&doc, &d, false).unwrap();
        assert_eq!(out.plans.len(), 16);
        for (i, a) in out.plans.iter().enumerate() {
            assert!(a.edu_indices.windows(2).all(|w| w[0] < w[1]));
            assert!((2..=6).contains(&a.len()));
            for b in &out.plans[i + 1..] {
                assert_ne!(a.edu_indices, b.edu_indices);
            }
        }
        let with_null = p.generate_plans(&doc, &d, true).unwrap();
        assert!(with_null.plans.last().unwrap().is_null());
        assert_eq!(with_null.plans.len(), 16);
    }

    #[test]
    fn min_len_clamped_with_warning() {
        let (doc, p) = setup(&["a b", "c d"]);
        let d = DecodeConfig { num_candidates: 2, beam_size: 2, min_len: 3, max_len: 20, ..Default::default() };
        let out = p.generate_plans(&doc, &d, false).unwrap();
        assert!(!out.warnings.is_empty());
        assert_eq!(out.plans[0].edu_indices, vec![0, 1]);
    }

    #[test]
    fn checkpoint_round_trip() {
        let (doc, p) = setup(&["a b", "c d"]);
        let back = Planner::from_checkpoint(p.checkpoint()).unwrap();
        assert_eq!(back.encode_edus(&doc).unwrap(), p.encode_edus(&doc).unwrap());
    }
}
