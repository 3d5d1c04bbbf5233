//! ROUGE-N and ROUGE-L precision/recall/F1 over pre-tokenized text.
//!
//! N-gram overlap uses clipped counts. No stemming or stopword removal is
//! applied; callers are expected to lowercase via [`crate::corpus::tokenize`].

use std::collections::HashMap;
use std::hash::Hash;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Prf {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

impl Prf {
    pub fn from_counts(overlap: usize, candidate_total: usize, reference_total: usize) -> Self {
        let precision = ratio(overlap, candidate_total);
        let recall = ratio(overlap, reference_total);
        Self { precision, recall, f1: f1(precision, recall) }
    }
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

pub fn f1(precision: f64, recall: f64) -> f64 {
    if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct RougeScore {
    pub r1: Prf,
    pub r2: Prf,
    pub rl: Prf,
}

impl RougeScore {
    pub fn compute<T: Eq + Hash>(candidate: &[T], reference: &[T]) -> Self {
        Self {
            r1: rouge_n(candidate, reference, 1),
            r2: rouge_n(candidate, reference, 2),
            rl: rouge_l(candidate, reference),
        }
    }

    /// Mean of the three F1 values.
    pub fn mean_f1(&self) -> f64 {
        (self.r1.f1 + self.r2.f1 + self.rl.f1) / 3.0
    }
}

fn ngram_counts<T: Eq + Hash>(tokens: &[T], n: usize) -> HashMap<&[T], usize> {
    let mut counts = HashMap::new();
    if tokens.len() >= n {
        for gram in tokens.windows(n) {
            *counts.entry(gram).or_insert(0) += 1;
        }
    }
    counts
}

/// ROUGE-N with clipped n-gram counts. Panics if `n == 0`.
pub fn rouge_n<T: Eq + Hash>(candidate: &[T], reference: &[T], n: usize) -> Prf {
    assert!(n >= 1, "rouge_n requires n >= 1");
    let cand = ngram_counts(candidate, n);
    let refs = ngram_counts(reference, n);
    let overlap = cand
        .iter()
        .map(|(g, &c)| c.min(refs.get(g).copied().unwrap_or(0)))
        .sum();
    let total = |len: usize| len.saturating_sub(n - 1);
    Prf::from_counts(overlap, total(candidate.len()), total(reference.len()))
}

/// Length of the longest common subsequence, O(|a|·|b|) time, O(|b|) memory.
pub fn lcs_len<T: Eq>(a: &[T], b: &[T]) -> usize {
    let mut row = vec![0usize; b.len() + 1];
    for x in a {
        let mut diag = 0;
        for (j, y) in b.iter().enumerate() {
            let up = row[j + 1];
            row[j + 1] = if x == y { diag + 1 } else { up.max(row[j]) };
            diag = up;
        }
    }
    row[b.len()]
}

pub fn rouge_l<T: Eq>(candidate: &[T], reference: &[T]) -> Prf {
    Prf::from_counts(lcs_len(candidate, reference), candidate.len(), reference.len())
}

/// Average of ROUGE-1 and ROUGE-2 F1, the greedy extraction objective.
pub fn mean_r1_r2<T: Eq + Hash>(candidate: &[T], reference: &[T]) -> f64 {
    (rouge_n(candidate, reference, 1).f1 + rouge_n(candidate, reference, 2).f1) / 2.0
}
