//! Content plans: greedy ROUGE oracles, derived plans and random distractors.

use std::fmt;

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::Document;
use crate::rouge::mean_r1_r2;

/// Default cap on plan length for oracle and derived plans.
pub const DEFAULT_MAX_PLAN_LEN: usize = 20;

#[derive(Debug, Error, PartialEq)]
pub enum PlanError {
    #[error("reference or summary is empty")]
    EmptyReference,
    #[error("document has no discourse units")]
    EmptyDocument,
    #[error("plan index {index} out of range for {num_edus} units")]
    OutOfRange { index: usize, num_edus: usize },
    #[error("plan indices are not strictly increasing: {0:?}")]
    NotIncreasing(Vec<usize>),
    #[error("null plan must be empty")]
    NonEmptyNull,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Provenance {
    Oracle,
    Random,
    Generated,
    Derived,
    Null,
}

impl fmt::Display for Provenance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Provenance::Oracle => "oracle",
            Provenance::Random => "random",
            Provenance::Generated => "generated",
            Provenance::Derived => "derived",
            Provenance::Null => "null",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContentPlan {
    pub edu_indices: Vec<usize>,
    pub provenance: Provenance,
    pub log_prob: Option<f64>,
}

impl ContentPlan {
    /// Builds a plan after sorting and deduplicating `indices`.
    pub fn new(mut indices: Vec<usize>, provenance: Provenance) -> Self {
        indices.sort_unstable();
        indices.dedup();
        Self { edu_indices: indices, provenance, log_prob: None }
    }

    pub fn null() -> Self {
        Self { edu_indices: Vec::new(), provenance: Provenance::Null, log_prob: None }
    }

    pub fn is_null(&self) -> bool {
        self.provenance == Provenance::Null
    }

    pub fn len(&self) -> usize {
        self.edu_indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.edu_indices.is_empty()
    }

    pub fn contains(&self, index: usize) -> bool {
        self.edu_indices.binary_search(&index).is_ok()
    }

    pub fn validate(&self, num_edus: usize) -> Result<(), PlanError> {
        if self.provenance == Provenance::Null && !self.edu_indices.is_empty() {
            return Err(PlanError::NonEmptyNull);
        }
        validate_indices(&self.edu_indices, num_edus)
    }
}

pub fn validate_indices(indices: &[usize], num_edus: usize) -> Result<(), PlanError> {
    if indices.windows(2).any(|w| w[0] >= w[1]) {
        return Err(PlanError::NotIncreasing(indices.to_vec()));
    }
    match indices.last() {
        Some(&index) if index >= num_edus => Err(PlanError::OutOfRange { index, num_edus }),
        _ => Ok(()),
    }
}

/// On-disk plan record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanRecord {
    pub doc_id: String,
    pub provenance: Provenance,
    pub edu_indices: Vec<usize>,
    pub log_prob: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beam: Option<usize>,
}

impl PlanRecord {
    pub fn new(doc_id: &str, plan: &ContentPlan, beam: Option<usize>) -> Self {
        Self {
            doc_id: doc_id.to_string(),
            provenance: plan.provenance,
            edu_indices: plan.edu_indices.clone(),
            log_prob: plan.log_prob,
            beam,
        }
    }

    pub fn plan(&self) -> ContentPlan {
        ContentPlan {
            edu_indices: self.edu_indices.clone(),
            provenance: self.provenance,
            log_prob: self.log_prob,
        }
    }
}

/// One accepted greedy step.
#[derive(Debug, Clone, PartialEq)]
pub struct GreedyStep {
    pub edu: usize,
    pub gain: f64,
    /// Objective after adding `edu`.
    pub score: f64,
}

/// Greedy extraction with its step trace.
#[derive(Debug, Clone, PartialEq)]
pub struct GreedyResult {
    pub plan: ContentPlan,
    pub steps: Vec<GreedyStep>,
}

/// Greedily adds the unit with the largest gain in mean ROUGE-1/2 F1 of the
/// selected text (in document order) against `target`, stopping when no unit
/// has a strictly positive gain or `max_len` units are selected. Ties go to
/// the lowest index.
pub fn greedy_extract(
    doc: &Document,
    target: &[String],
    max_len: usize,
    provenance: Provenance,
) -> Result<GreedyResult, PlanError> {
    if target.is_empty() {
        return Err(PlanError::EmptyReference);
    }
    if doc.num_edus() == 0 {
        return Err(PlanError::EmptyDocument);
    }
    let mut selected: Vec<usize> = Vec::new();
    let mut steps = Vec::new();
    let mut current = 0.0;
    while selected.len() < max_len {
        let mut best: Option<(usize, f64)> = None;
        for e in 0..doc.num_edus() {
            if selected.contains(&e) {
                continue;
            }
            let mut trial = selected.clone();
            trial.push(e);
            let score = mean_r1_r2(&doc.tokens_of(&trial), target);
            if best.is_none_or(|(_, s)| score > s) {
                best = Some((e, score));
            }
        }
        match best {
            Some((e, score)) if score - current > 0.0 => {
                steps.push(GreedyStep { edu: e, gain: score - current, score });
                selected.push(e);
                current = score;
            }
            _ => break,
        }
    }
    Ok(GreedyResult { plan: ContentPlan::new(selected, provenance), steps })
}

/// Oracle plan for a reference summary.
pub fn greedy_oracle(
    doc: &Document,
    reference: &[String],
    max_len: usize,
) -> Result<ContentPlan, PlanError> {
    Ok(greedy_extract(doc, reference, max_len, Provenance::Oracle)?.plan)
}

/// Derived plan of an arbitrary summary: the greedy alignment of its tokens
/// onto source units.
pub fn derive_dcp(doc: &Document, summary: &[String]) -> Result<ContentPlan, PlanError> {
    derive_dcp_capped(doc, summary, DEFAULT_MAX_PLAN_LEN)
}

pub fn derive_dcp_capped(
    doc: &Document,
    summary: &[String],
    max_len: usize,
) -> Result<ContentPlan, PlanError> {
    Ok(greedy_extract(doc, summary, max_len, Provenance::Derived)?.plan)
}

/// Samples `|oracle|` units uniformly without replacement from the units not
/// in `oracle`. Returns all of them when fewer remain.
pub fn sample_distractor(doc: &Document, oracle: &ContentPlan, seed: u64) -> ContentPlan {
    let pool: Vec<usize> = (0..doc.num_edus()).filter(|&i| !oracle.contains(i)).collect();
    let k = oracle.len().min(pool.len());
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let picked = sample(&mut rng, pool.len(), k).into_iter().map(|i| pool[i]).collect();
    ContentPlan::new(picked, Provenance::Random)
}
