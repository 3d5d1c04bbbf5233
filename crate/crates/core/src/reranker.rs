//! Candidate scoring by length-normalized likelihood and training of that
//! scorer with a pairwise margin ranking loss.

use log::warn;
use serde::{Deserialize, Serialize};
use serde_json::json;
use thiserror::Error;

use crate::abstractor::{decorate, Abstractor, Candidate, CandidateRecord};
use crate::corpus::Document;
use crate::plans::{ContentPlan, PlanError};
use crate::rouge::RougeScore;
use crate::seq2seq::tape::margin_rank_value;
use crate::seq2seq::train::{train_loop, TrainConfig, TrainReport};
use crate::seq2seq::transformer::{with_eos, Encoded};
use crate::seq2seq::{Checkpoint, ParamStore, Seq2Seq, Seq2SeqError, Tape, Var, Vocab};

pub const CHECKPOINT_KIND: &str = "reranker";

#[derive(Debug, Error)]
pub enum RerankError {
    #[error("cannot score an empty candidate")]
    EmptyCandidate,
    #[error("cannot rank an empty candidate set")]
    EmptySet,
    #[error("margin must be non-negative, got {0}")]
    NegativeMargin(f64),
    #[error(transparent)]
    Plan(#[from] PlanError),
    #[error(transparent)]
    Model(#[from] Seq2SeqError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RerankConfig {
    /// Length-normalization exponent.
    pub alpha: f64,
    /// Per-rank-gap margin of the ranking loss.
    pub margin: f64,
}

impl Default for RerankConfig {
    fn default() -> Self {
        Self { alpha: 1.0, margin: 0.001 }
    }
}

/// `Σ logp / len^alpha`.
pub fn length_normalized(log_probs: &[f64], alpha: f64) -> Result<f64, RerankError> {
    if log_probs.is_empty() {
        return Err(RerankError::EmptyCandidate);
    }
    Ok(log_probs.iter().sum::<f64>() / (log_probs.len() as f64).powf(alpha))
}

/// `Σ_{i<j} max(0, f_j - f_i + (j - i)·margin)` for scores listed best
/// first.
pub fn margin_loss(scores: &[f64], margin: f64) -> f64 {
    margin_rank_value(scores, margin)
}

/// Kendall's τ-b between two score lists over the same items. `None` when
/// either list is constant.
pub fn kendall_tau(a: &[f64], b: &[f64]) -> Option<f64> {
    assert_eq!(a.len(), b.len());
    let (mut concordant, mut discordant, mut ties_a, mut ties_b) = (0i64, 0i64, 0i64, 0i64);
    for i in 0..a.len() {
        for j in i + 1..a.len() {
            let da = (a[i] - a[j]).partial_cmp(&0.0)? as i64;
            let db = (b[i] - b[j]).partial_cmp(&0.0)? as i64;
            match (da, db) {
                (0, 0) => {}
                (0, _) => ties_a += 1,
                (_, 0) => ties_b += 1,
                _ if da == db => concordant += 1,
                _ => discordant += 1,
            }
        }
    }
    let n0 = concordant + discordant;
    let denom = (((n0 + ties_a) * (n0 + ties_b)) as f64).sqrt();
    (denom > 0.0).then(|| (concordant - discordant) as f64 / denom)
}

/// Candidate scorer sharing the abstractor architecture, reading the
/// undecorated document.
#[derive(Debug, Clone)]
pub struct Reranker {
    pub model: Seq2Seq,
    pub params: ParamStore,
    pub vocab: Vocab,
    pub config: RerankConfig,
}

impl Reranker {
    /// Starts from a trained abstractor's weights.
    pub fn from_abstractor(abs: &Abstractor, config: RerankConfig) -> Result<Self, RerankError> {
        if config.margin < 0.0 {
            return Err(RerankError::NegativeMargin(config.margin));
        }
        Ok(Self { model: abs.model.clone(), params: abs.params.clone(), vocab: abs.vocab.clone(), config })
    }

    pub fn checkpoint(&self) -> Checkpoint {
        Checkpoint {
            kind: CHECKPOINT_KIND.into(),
            meta: json!({ "config": self.model.config, "vocab": self.vocab, "rerank": self.config }),
            params: self.params.clone(),
        }
    }

    pub fn from_checkpoint(ck: Checkpoint) -> Result<Self, RerankError> {
        let bad = |m: String| RerankError::Model(Seq2SeqError::Checkpoint(m));
        if ck.kind != CHECKPOINT_KIND {
            return Err(bad(format!("expected a {CHECKPOINT_KIND} checkpoint, found {}", ck.kind)));
        }
        let config = serde_json::from_value(ck.meta["rerank"].clone()).map_err(|e| bad(format!("rerank: {e}")))?;
        let rebuilt = Abstractor::from_checkpoint(Checkpoint { kind: crate::abstractor::CHECKPOINT_KIND.into(), ..ck })
            .map_err(|e| bad(e.to_string()))?;
        Ok(Self { model: rebuilt.model, params: rebuilt.params, vocab: rebuilt.vocab, config })
    }

    fn source(&self, doc: &Document) -> Result<Vec<usize>, RerankError> {
        let mut src = decorate(doc, &ContentPlan::null(), &self.vocab)?;
        src.truncate(self.model.config.max_positions);
        Ok(src)
    }

    fn target(&self, tokens: &[String]) -> Result<Vec<usize>, RerankError> {
        if tokens.is_empty() {
            return Err(RerankError::EmptyCandidate);
        }
        let mut ids = self.vocab.encode(tokens);
        ids.truncate(self.model.config.max_positions - 1);
        Ok(ids)
    }

    /// Length-normalized log-likelihood of `tokens` given `doc`. The end
    /// symbol counts as one of the scored tokens.
    pub fn score(&self, doc: &Document, tokens: &[String]) -> Result<f64, RerankError> {
        let target = self.target(tokens)?;
        let lm = self.model.lm(&self.params, &self.source(doc)?)?;
        length_normalized(&lm.score_tokens(&target), self.config.alpha)
    }

    /// Candidates sorted by descending score; ties go to the lower beam
    /// index. Empty candidates cannot be scored and are left out.
    pub fn rank(&self, doc: &Document, candidates: &[Candidate]) -> Result<RankedSet, RerankError> {
        let usable: Vec<&Candidate> = candidates.iter().filter(|c| !c.tokens.is_empty()).collect();
        if usable.len() < candidates.len() {
            warn!("{}: {} empty candidates left unranked", doc.id, candidates.len() - usable.len());
        }
        if usable.is_empty() {
            return Err(RerankError::EmptySet);
        }
        let lm = self.model.lm(&self.params, &self.source(doc)?)?;
        let mut scored = Vec::with_capacity(usable.len());
        for c in usable {
            let s = length_normalized(&lm.score_tokens(&self.target(&c.tokens)?), self.config.alpha)?;
            scored.push((c.clone(), s));
        }
        Ok(RankedSet::from_scores(&doc.id, scored, self.config.margin))
    }
}

/// A candidate set ordered best first.
#[derive(Debug, Clone, PartialEq)]
pub struct RankedSet {
    pub doc_id: String,
    pub ranked: Vec<(Candidate, f64)>,
    pub margin: f64,
}

impl RankedSet {
    pub fn from_scores(doc_id: &str, mut scored: Vec<(Candidate, f64)>, margin: f64) -> Self {
        scored.sort_by(|(a, sa), (b, sb)| sb.total_cmp(sa).then(a.beam_index.cmp(&b.beam_index)));
        Self { doc_id: doc_id.to_string(), ranked: scored, margin }
    }

    pub fn top(&self) -> &Candidate {
        &self.ranked[0].0
    }

    pub fn records(&self) -> Vec<RankedRecord> {
        self.ranked
            .iter()
            .enumerate()
            .map(|(i, (c, score))| RankedRecord { candidate: c.into(), rank: i + 1, score: *score })
            .collect()
    }
}

/// Ranked output line: the candidate record plus its 1-based rank and score.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedRecord {
    #[serde(flatten)]
    pub candidate: CandidateRecord,
    pub rank: usize,
    pub score: f64,
}

/// One training set: the source and candidate targets ordered by
/// descending mean ROUGE-1/2/L F1 against the reference.
#[derive(Debug, Clone, PartialEq)]
pub struct RankExample {
    pub doc_id: String,
    pub source: Vec<usize>,
    pub candidates: Vec<Vec<usize>>,
}

/// Orders `candidates` for training. Duplicate texts are dropped. Returns
/// `None` (with a warning) without a reference or with fewer than two
/// distinct candidates.
pub fn rank_example(r: &Reranker, doc: &Document, candidates: &[Candidate]) -> Result<Option<RankExample>, RerankError> {
    let Some(reference) = doc.reference_tokens() else {
        warn!("document {} has no reference; skipped", doc.id);
        return Ok(None);
    };
    let mut scored: Vec<(f64, usize, &Candidate)> = Vec::new();
    for c in candidates.iter().filter(|c| !c.tokens.is_empty()) {
        if scored.iter().all(|(_, _, o)| o.tokens != c.tokens) {
            scored.push((RougeScore::compute(&c.tokens, &reference).mean_f1(), c.beam_index, c));
        }
    }
    if scored.len() < 2 {
        warn!("document {} has fewer than two distinct candidates; skipped", doc.id);
        return Ok(None);
    }
    scored.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
    let candidates = scored.iter().map(|(_, _, c)| r.target(&c.tokens)).collect::<Result<_, _>>()?;
    Ok(Some(RankExample { doc_id: doc.id.clone(), source: r.source(doc)?, candidates }))
}

/// Differentiable `f` for one target over an already encoded source.
pub fn score_var(model: &Seq2Seq, t: &mut Tape<'_>, enc: &Encoded, target: &[usize], alpha: f64) -> Var {
    let full = with_eos(target);
    let lp = model.target_log_probs(t, enc, &full);
    let s = t.sum(lp);
    t.scale(s, 1.0 / (full.len() as f64).powf(alpha))
}

/// Margin ranking loss of one example on a tape.
pub fn ranking_loss(model: &Seq2Seq, t: &mut Tape<'_>, ex: &RankExample, cfg: &RerankConfig) -> Var {
    let enc = model.encode(t, &ex.source);
    let scores: Vec<Var> = ex.candidates.iter().map(|c| score_var(model, t, &enc, c, cfg.alpha)).collect();
    let column = t.concat_rows(&scores);
    t.margin_rank(column, cfg.margin)
}

pub fn train_reranker(r: &mut Reranker, examples: &[RankExample], cfg: &TrainConfig) -> Result<TrainReport, RerankError> {
    let model = r.model.clone();
    let rc = r.config;
    Ok(train_loop(&mut r.params, examples, cfg, |t, ex| Some(ranking_loss(&model, t, ex, &rc)), None)?)
}
