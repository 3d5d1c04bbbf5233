//! Plan-guided abstract generation: input decoration, the guided
//! abstraction objective and candidate generation for every method.

use std::fmt;
use std::str::FromStr;

use log::warn;
use serde::{Deserialize, Serialize};
use serde_json::json;
use thiserror::Error;

use crate::corpus::{detokenize, Document};
use crate::plans::{greedy_oracle, sample_distractor, ContentPlan, PlanError, DEFAULT_MAX_PLAN_LEN};
use crate::planner::Planner;
use crate::rouge::rouge_n;
use crate::seq2seq::train::{train_loop, TrainConfig, TrainReport};
use crate::seq2seq::transformer::with_eos;
use crate::seq2seq::vocab::{EDU_END, EDU_START};
use crate::seq2seq::{
    beam_search, diverse_beam_search, nucleus_sample, Checkpoint, DecodeConfig, Hypothesis, Matrix,
    ModelConfig, ParamStore, Seq2Seq, Seq2SeqError, Tape, Var, Vocab,
};

pub const CHECKPOINT_KIND: &str = "abstractor";

#[derive(Debug, Error)]
pub enum AbstractorError {
    #[error(transparent)]
    Plan(#[from] PlanError),
    #[error(transparent)]
    Model(#[from] Seq2SeqError),
    #[error("non-finite value in the {term} term")]
    NonFinite { term: &'static str },
    #[error("document {0} has no reference")]
    MissingReference(String),
    #[error("unknown generation method {0:?}")]
    UnknownMethod(String),
}

/// Tokens of `doc` with `<e>`/`</e>` around every unit in `plan`. A null or
/// empty plan yields the plain token sequence.
pub fn decorate_tokens(doc: &Document, plan: &ContentPlan) -> Result<Vec<String>, PlanError> {
    plan.validate(doc.num_edus())?;
    let mut out = Vec::new();
    for i in 0..doc.num_edus() {
        let marked = plan.contains(i);
        if marked {
            out.push("<e>".to_string());
        }
        out.extend(doc.edu_tokens(i).iter().cloned());
        if marked {
            out.push("</e>".to_string());
        }
    }
    Ok(out)
}

pub fn decorate(doc: &Document, plan: &ContentPlan, vocab: &Vocab) -> Result<Vec<usize>, PlanError> {
    Ok(vocab.encode(&decorate_tokens(doc, plan)?))
}

/// Removes decoration markers.
pub fn strip_markers(ids: &[usize]) -> Vec<usize> {
    ids.iter().copied().filter(|&i| i != EDU_START && i != EDU_END).collect()
}

/// Weights of the three terms of the guided objective.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GuidedWeights {
    /// Weight of the oracle-plan likelihood and the distractor unlikelihood.
    pub lambda: f64,
    /// Weight of the undecorated likelihood.
    pub beta: f64,
    /// Set false to drop the unlikelihood term while keeping `lambda` on
    /// the oracle term.
    pub unlikelihood: bool,
}

impl GuidedWeights {
    pub const CNN: Self = Self { lambda: 1.0, beta: 10.0, unlikelihood: true };
    pub const NYT: Self = Self { lambda: 1.0, beta: 0.0, unlikelihood: true };
}

/// One training example of the guided objective.
#[derive(Debug, Clone, PartialEq)]
pub struct GuidedExample {
    pub doc_id: String,
    pub oracle_source: Vec<usize>,
    /// Absent when every unit is in the oracle plan.
    pub distractor_source: Option<Vec<usize>>,
    pub plain_source: Vec<usize>,
    pub target: Vec<usize>,
    pub oracle: ContentPlan,
    pub distractor: ContentPlan,
}

impl GuidedExample {
    pub fn new(doc: &Document, vocab: &Vocab, oracle: ContentPlan, seed: u64) -> Result<Self, AbstractorError> {
        let reference = doc.reference_tokens().ok_or_else(|| AbstractorError::MissingReference(doc.id.clone()))?;
        let distractor = sample_distractor(doc, &oracle, seed);
        Ok(Self {
            doc_id: doc.id.clone(),
            oracle_source: decorate(doc, &oracle, vocab)?,
            distractor_source: if distractor.is_empty() { None } else { Some(decorate(doc, &distractor, vocab)?) },
            plain_source: decorate(doc, &ContentPlan::null(), vocab)?,
            target: vocab.encode(&reference),
            oracle,
            distractor,
        })
    }
}

/// Named terms of the guided objective as recorded on a tape.
pub struct GuidedTerms {
    pub loss: Var,
    pub terms: Vec<(&'static str, Var)>,
}

impl GuidedTerms {
    pub fn check(&self, t: &Tape<'_>) -> Result<(), AbstractorError> {
        for &(term, v) in &self.terms {
            if !t.value(v).item().is_finite() {
                return Err(AbstractorError::NonFinite { term });
            }
        }
        Ok(())
    }
}

/// Records the guided loss
/// `-(λ·log P(R | D, S_oracle) + λ·Σ_t log(1 - p(r_t | r_<t, D, S_random)) + β·log P(R | D))`.
/// Terms with zero weight are not computed; the unlikelihood term is
/// dropped when there is no distractor.
pub fn guided_loss(model: &Seq2Seq, t: &mut Tape<'_>, ex: &GuidedExample, w: &GuidedWeights) -> GuidedTerms {
    let target = with_eos(&ex.target);
    let run = |t: &mut Tape<'_>, src: &[usize]| {
        let memory = model.encode(t, src);
        model.target_log_probs(t, &memory, &target)
    };
    let oracle = (w.lambda != 0.0).then(|| run(t, &ex.oracle_source));
    let distractor = match &ex.distractor_source {
        Some(src) if w.lambda != 0.0 && w.unlikelihood => Some(run(t, src)),
        _ => None,
    };
    let plain = (w.beta != 0.0).then(|| run(t, &ex.plain_source));
    combine_terms(t, oracle, distractor, plain, w)
}

/// Combines per-token log-probability columns into the guided loss.
pub fn combine_terms(
    t: &mut Tape<'_>,
    oracle: Option<Var>,
    distractor: Option<Var>,
    plain: Option<Var>,
    w: &GuidedWeights,
) -> GuidedTerms {
    let mut terms = Vec::new();
    let mut weighted = Vec::new();
    if let Some(lp) = oracle {
        let s = t.sum(lp);
        terms.push(("oracle likelihood", s));
        weighted.push(t.scale(s, w.lambda));
    }
    if let Some(lp) = distractor {
        let u = t.log1m_exp(lp);
        let s = t.sum(u);
        terms.push(("distractor unlikelihood", s));
        weighted.push(t.scale(s, w.lambda));
    }
    if let Some(lp) = plain {
        let s = t.sum(lp);
        terms.push(("plain likelihood", s));
        weighted.push(t.scale(s, w.beta));
    }
    let loss = match weighted.split_first() {
        None => t.leaf(Matrix::scalar(0.0)),
        Some((&first, rest)) => {
            let total = rest.iter().fold(first, |acc, &v| t.add(acc, v));
            t.scale(total, -1.0)
        }
    };
    GuidedTerms { loss, terms }
}

/// A trained plan-guided encoder-decoder with its vocabulary.
#[derive(Debug, Clone)]
pub struct Abstractor {
    pub model: Seq2Seq,
    pub params: ParamStore,
    pub vocab: Vocab,
}

impl Abstractor {
    pub fn new(vocab: Vocab, mut config: ModelConfig) -> Result<Self, AbstractorError> {
        config.vocab_size = vocab.len();
        let mut params = ParamStore::new();
        let model = Seq2Seq::new(&mut params, &config, "")?;
        Ok(Self { model, params, vocab })
    }

    pub fn checkpoint(&self) -> Checkpoint {
        Checkpoint {
            kind: CHECKPOINT_KIND.into(),
            meta: json!({ "config": self.model.config, "vocab": self.vocab }),
            params: self.params.clone(),
        }
    }

    pub fn from_checkpoint(ck: Checkpoint) -> Result<Self, AbstractorError> {
        let bad = |m: String| AbstractorError::Model(Seq2SeqError::Checkpoint(m));
        if ck.kind != CHECKPOINT_KIND {
            return Err(bad(format!("expected an {CHECKPOINT_KIND} checkpoint, found {}", ck.kind)));
        }
        let config: ModelConfig =
            serde_json::from_value(ck.meta["config"].clone()).map_err(|e| bad(format!("config: {e}")))?;
        let vocab: Vocab = serde_json::from_value(ck.meta["vocab"].clone()).map_err(|e| bad(format!("vocab: {e}")))?;
        if config.vocab_size != vocab.len() {
            return Err(bad("config and vocabulary sizes disagree".into()));
        }
        let mut params = ck.params;
        let before = params.len();
        let model = Seq2Seq::new(&mut params, &config, "")?;
        if params.len() != before {
            return Err(bad("checkpoint is missing parameters for its config".into()));
        }
        Ok(Self { model, params, vocab })
    }

    /// Decodes `source` and returns hypotheses from the chosen strategy.
    pub fn decode(&self, source: &[usize], method: Method, d: &DecodeConfig) -> Result<Vec<Hypothesis>, AbstractorError> {
        let source = self.clip_source(source);
        let lm = self.model.lm(&self.params, &source)?;
        Ok(match method {
            Method::DiverseBeam => diverse_beam_search(&lm, d, 1),
            Method::Nucleus => nucleus_sample(&lm, d),
            _ => beam_search(&lm, d),
        })
    }

    fn clip_source(&self, source: &[usize]) -> Vec<usize> {
        let max = self.model.config.max_positions;
        if source.len() > max {
            warn!("source of {} tokens truncated to {max}", source.len());
        }
        source[..source.len().min(max)].to_vec()
    }

    /// Top beam for `doc` guided by `plan`.
    pub fn realize(&self, doc: &Document, plan: &ContentPlan, d: &DecodeConfig) -> Result<Option<Hypothesis>, AbstractorError> {
        let src = decorate(doc, plan, &self.vocab)?;
        Ok(self.decode(&src, Method::Beam, &DecodeConfig { num_candidates: 1, ..d.clone() })?.into_iter().next())
    }

    pub fn text_of(&self, tokens: &[usize]) -> (String, Vec<String>) {
        let words = self.vocab.decode(tokens);
        (detokenize(&words), words)
    }
}

/// Documents paired with oracle plans for training. Documents without a
/// reference or with an empty oracle are skipped with a warning.
pub fn build_examples(docs: &[Document], vocab: &Vocab, seed: u64) -> Vec<GuidedExample> {
    docs.iter()
        .enumerate()
        .filter_map(|(i, doc)| {
            let reference = doc.reference_tokens()?;
            let oracle = greedy_oracle(doc, &reference, DEFAULT_MAX_PLAN_LEN).ok()?;
            if oracle.is_empty() {
                warn!("document {} has an empty oracle plan; skipped", doc.id);
                return None;
            }
            GuidedExample::new(doc, vocab, oracle, seed.wrapping_add(i as u64)).ok()
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AbstractorTrainConfig {
    pub train: TrainConfig,
    pub weights: GuidedWeights,
    /// Greedy-decoding length cap used for validation.
    pub max_len: usize,
}

/// Trains on the guided objective. With validation documents the kept
/// parameters are those maximizing oracle-guided ROUGE-1 F1.
pub fn train_abstractor(
    abs: &mut Abstractor,
    examples: &[GuidedExample],
    validation: &[(Document, ContentPlan)],
    cfg: &AbstractorTrainConfig,
) -> Result<TrainReport, AbstractorError> {
    let model = abs.model.clone();
    let vocab = abs.vocab.clone();
    let w = cfg.weights;
    let max_len = cfg.max_len;
    let mut validate = |store: &ParamStore| -> f64 {
        let probe = Abstractor { model: model.clone(), params: store.clone(), vocab: vocab.clone() };
        let d = DecodeConfig::greedy(max_len);
        let scores: Vec<f64> = validation
            .iter()
            .filter_map(|(doc, plan)| {
                let h = probe.realize(doc, plan, &d).ok()??;
                let reference = doc.reference_tokens()?;
                Some(rouge_n(&vocab.decode(&h.tokens), &reference, 1).f1)
            })
            .collect();
        scores.iter().sum::<f64>() / scores.len().max(1) as f64
    };
    let hook: Option<crate::seq2seq::train::Validate<'_>> =
        if validation.is_empty() || cfg.train.eval_every == 0 { None } else { Some(&mut validate) };
    let report = train_loop(
        &mut abs.params,
        examples,
        &cfg.train,
        |t, ex| Some(guided_loss(&model, t, ex, &w).loss),
        hook,
    )?;
    Ok(report)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Pga,
    Beam,
    DiverseBeam,
    Nucleus,
    Llm,
}

impl Method {
    pub const ALL: [Method; 5] = [Method::Pga, Method::Beam, Method::DiverseBeam, Method::Nucleus, Method::Llm];

    pub fn as_str(&self) -> &'static str {
        match self {
            Method::Pga => "pga",
            Method::Beam => "beam",
            Method::DiverseBeam => "diverse_beam",
            Method::Nucleus => "nucleus",
            Method::Llm => "llm",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Method {
    type Err = AbstractorError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.replace('-', "_").as_str() {
            "pga" => Ok(Method::Pga),
            "beam" => Ok(Method::Beam),
            "diverse_beam" => Ok(Method::DiverseBeam),
            "nucleus" => Ok(Method::Nucleus),
            "llm" => Ok(Method::Llm),
            _ => Err(AbstractorError::UnknownMethod(s.to_string())),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    pub doc_id: String,
    pub method: Method,
    pub beam_index: usize,
    pub text: String,
    pub tokens: Vec<String>,
    pub plan: Option<ContentPlan>,
    pub log_likelihood: f64,
}

/// On-disk candidate record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateRecord {
    pub doc_id: String,
    pub method: Method,
    pub beam: usize,
    pub plan: Option<Vec<usize>>,
    pub text: String,
    pub lp: f64,
}

impl From<&Candidate> for CandidateRecord {
    fn from(c: &Candidate) -> Self {
        Self {
            doc_id: c.doc_id.clone(),
            method: c.method,
            beam: c.beam_index,
            plan: c.plan.as_ref().map(|p| p.edu_indices.clone()),
            text: c.text.clone(),
            lp: c.log_likelihood,
        }
    }
}

impl CandidateRecord {
    pub fn into_candidate(self) -> Candidate {
        let tokens = crate::corpus::tokenize(&self.text);
        let provenance = if self.method == Method::Pga || self.method == Method::Llm {
            crate::plans::Provenance::Generated
        } else {
            crate::plans::Provenance::Derived
        };
        Candidate {
            doc_id: self.doc_id,
            method: self.method,
            beam_index: self.beam,
            text: self.text,
            tokens,
            plan: self.plan.map(|p| ContentPlan::new(p, provenance)),
            log_likelihood: self.lp,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CandidateSet {
    pub doc_id: String,
    pub method: Method,
    pub candidates: Vec<Candidate>,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerateConfig {
    pub k: usize,
    /// Plan search settings (PGA only).
    pub plan_decode: DecodeConfig,
    /// Abstract decoding for one plan (PGA only); the top beam is kept.
    pub realize_decode: DecodeConfig,
    /// Settings for the baseline strategies.
    pub baseline_decode: DecodeConfig,
    /// Replace the last PGA plan with the null plan.
    pub null_plan: bool,
}

impl Default for GenerateConfig {
    fn default() -> Self {
        Self {
            k: 16,
            plan_decode: DecodeConfig { beam_size: 16, min_len: 2, max_len: 20, ..Default::default() },
            realize_decode: DecodeConfig { beam_size: 4, num_candidates: 1, min_len: 8, max_len: 64, ..Default::default() },
            baseline_decode: DecodeConfig { beam_size: 16, min_len: 8, max_len: 64, ..Default::default() },
            null_plan: false,
        }
    }
}

/// K candidates for `doc`. PGA realizes one abstract per generated plan;
/// baselines decode the undecorated input.
pub fn generate_candidates(
    planner: Option<&Planner>,
    abs: &Abstractor,
    doc: &Document,
    method: Method,
    cfg: &GenerateConfig,
) -> Result<CandidateSet, AbstractorError> {
    let mut warnings = Vec::new();
    let make = |beam: usize, h: &Hypothesis, plan: Option<ContentPlan>| {
        let (text, tokens) = abs.text_of(&h.tokens);
        Candidate {
            doc_id: doc.id.clone(),
            method,
            beam_index: beam,
            text,
            tokens,
            plan,
            log_likelihood: h.log_prob,
        }
    };
    let candidates = match method {
        Method::Pga => {
            let planner = planner.ok_or_else(|| AbstractorError::UnknownMethod("pga without a planner".into()))?;
            let d = DecodeConfig { num_candidates: cfg.k, ..cfg.plan_decode.clone() };
            let mut out = planner.generate_plans(doc, &d, cfg.null_plan).map_err(|e| {
                AbstractorError::Model(Seq2SeqError::Config(format!("planning failed: {e}")))
            })?;
            warnings.append(&mut out.warnings);
            let mut cands = Vec::new();
            for (beam, plan) in out.plans.into_iter().enumerate() {
                match abs.realize(doc, &plan, &cfg.realize_decode)? {
                    Some(h) => cands.push(make(beam, &h, Some(plan))),
                    None => warnings.push(format!("plan {beam} produced no abstract")),
                }
            }
            cands
        }
        Method::Llm => return Err(AbstractorError::UnknownMethod("llm candidates come from the llm bridge".into())),
        baseline => {
            let src = decorate(doc, &ContentPlan::null(), &abs.vocab)?;
            let d = DecodeConfig { num_candidates: cfg.k, ..cfg.baseline_decode.clone() };
            abs.decode(&src, baseline, &d)?.iter().enumerate().map(|(i, h)| make(i, h, None)).collect()
        }
    };
    if candidates.len() < cfg.k {
        warnings.push(format!("{} produced {} of {} candidates", method, candidates.len(), cfg.k));
    }
    Ok(CandidateSet { doc_id: doc.id.clone(), method, candidates, warnings })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::plans::Provenance;
    use crate::seq2seq::grad_check;
    use crate::test_support::doc_from_units;

    fn setup() -> (Document, Vocab) {
        let mut doc = doc_from_units(&["a b c", "d e f", "g h i"]);
        doc.reference = Some("d e f".into());
        let vocab = Vocab::build(&doc.all_tokens());
        (doc, vocab)
    }

    #[test]
    fn decoration_examples() {
        let (doc, _) = setup();
        let one = decorate_tokens(&doc, &ContentPlan::new(vec![1], Provenance::Oracle)).unwrap();
        assert_eq!(one.join(" "), "a b c <e> d e f </e> g h i");
        let null = decorate_tokens(&doc, &ContentPlan::null()).unwrap();
        assert_eq!(null, doc.all_tokens());
        let two = decorate_tokens(&doc, &ContentPlan::new(vec![0, 2], Provenance::Oracle)).unwrap();
        assert_eq!(two.join(" "), "<e> a b c </e> d e f <e> g h i </e>");
        assert!(decorate_tokens(&doc, &ContentPlan::new(vec![3], Provenance::Oracle)).is_err());
    }

    #[test]
    fn markers_strip_to_plain() {
        let (doc, vocab) = setup();
        let plain = decorate(&doc, &ContentPlan::null(), &vocab).unwrap();
        for plan in [vec![0], vec![1, 2], vec![0, 1, 2]] {
            let dec = decorate(&doc, &ContentPlan::new(plan, Provenance::Oracle), &vocab).unwrap();
            assert_eq!(strip_markers(&dec), plain);
        }
    }

    fn tiny(vocab: &Vocab) -> Abstractor {
        Abstractor::new(vocab.clone(), ModelConfig::tiny(0)).unwrap()
    }

    fn loss_value(abs: &Abstractor, ex: &GuidedExample, w: GuidedWeights) -> f64 {
        let mut t = Tape::new(&abs.params);
        let g = guided_loss(&abs.model, &mut t, ex, &w);
        t.value(g.loss).item()
    }

    #[test]
    fn hand_computed_single_token() {
        let store = ParamStore::new();
        let mut t = Tape::new(&store);
        let col = |t: &mut Tape<'_>, p: f64| t.leaf(Matrix::scalar(p.ln()));
        let (o, r, n) = (col(&mut t, 0.9), col(&mut t, 0.5), col(&mut t, 0.8));
        let g = combine_terms(&mut t, Some(o), Some(r), Some(n), &GuidedWeights::CNN);
        let expected = 0.9f64.ln() + 0.5f64.ln() + 10.0 * 0.8f64.ln();
        assert!((t.value(g.loss).item() + expected).abs() < 1e-12);
        assert!((expected + 3.0299).abs() < 1e-4);
    }

    #[test]
    fn loss_is_linear_in_its_terms() {
        let (doc, vocab) = setup();
        let abs = tiny(&vocab);
        let ex = GuidedExample::new(&doc, &vocab, ContentPlan::new(vec![1], Provenance::Oracle), 3).unwrap();
        let a = loss_value(&abs, &ex, GuidedWeights::NYT);
        let b = loss_value(&abs, &ex, GuidedWeights { lambda: 0.0, beta: 10.0, unlikelihood: true });
        let c = loss_value(&abs, &ex, GuidedWeights::CNN);
        assert!((a + b - c).abs() < 1e-9);
        let mle = loss_value(&abs, &ex, GuidedWeights { lambda: 0.0, beta: 1.0, unlikelihood: true });
        let mut t = Tape::new(&abs.params);
        let direct = abs.model.nll(&mut t, &ex.plain_source, &ex.target);
        assert!((t.value(direct).item() - mle).abs() < 1e-12);
    }

    #[test]
    fn guided_gradients_check() {
        let (doc, vocab) = setup();
        let abs = tiny(&vocab);
        let ex = GuidedExample::new(&doc, &vocab, ContentPlan::new(vec![1], Provenance::Oracle), 3).unwrap();
        assert!(ex.distractor_source.is_some());
        for w in [GuidedWeights::CNN, GuidedWeights::NYT] {
            let r = grad_check(&abs.params, |t| guided_loss(&abs.model, t, &ex, &w).loss, 1e-5, 200, 5).unwrap();
            assert!(r.max_relative_error < 1e-3, "{r:?}");
        }
    }

    #[test]
    fn zero_beta_never_touches_plain_branch() {
        let (doc, vocab) = setup();
        let abs = tiny(&vocab);
        let mut ex = GuidedExample::new(&doc, &vocab, ContentPlan::new(vec![1], Provenance::Oracle), 3).unwrap();
        let w = GuidedWeights::NYT;
        let base = loss_value(&abs, &ex, w);
        ex.plain_source = vec![vocab.id("a")];
        assert_eq!(loss_value(&abs, &ex, w), base);
    }

    #[test]
    fn full_oracle_drops_unlikelihood() {
        let (doc, vocab) = setup();
        let ex = GuidedExample::new(&doc, &vocab, ContentPlan::new(vec![0, 1, 2], Provenance::Oracle), 1).unwrap();
        assert!(ex.distractor_source.is_none());
        let abs = tiny(&vocab);
        let mut t = Tape::new(&abs.params);
        let g = guided_loss(&abs.model, &mut t, &ex, &GuidedWeights::CNN);
        assert_eq!(g.terms.len(), 2);
        g.check(&t).unwrap();
    }

    #[test]
    fn method_names_round_trip() {
        for m in Method::ALL {
            assert_eq!(m.as_str().parse::<Method>().unwrap(), m);
            assert_eq!(serde_json::to_string(&m).unwrap(), format!("\"{}\"", m.as_str()));
        }
        assert_eq!("diverse-beam".parse::<Method>().unwrap(), Method::DiverseBeam);
    }

    #[test]
    fn checkpoint_round_trip() {
        let (_, vocab) = setup();
        let abs = tiny(&vocab);
        let back = Abstractor::from_checkpoint(abs.checkpoint()).unwrap();
        assert_eq!(back.params, abs.params);
        assert_eq!(back.vocab, abs.vocab);
    }
}
