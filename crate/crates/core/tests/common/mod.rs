//! Slow, obviously-correct re-implementations used as test oracles.
#![allow(dead_code)]

use std::collections::BTreeSet;

use planguide::corpus::{Document, MIN_EDU_TOKENS};
use planguide::synth::{generate, SynthConfig};

/// (precision, recall, f1)
pub type Triple = (f64, f64, f64);

fn triple(hits: usize, cand: usize, refs: usize) -> Triple {
    let p = if cand == 0 { 0.0 } else { hits as f64 / cand as f64 };
    let r = if refs == 0 { 0.0 } else { hits as f64 / refs as f64 };
    let f = if p + r == 0.0 { 0.0 } else { 2.0 * p * r / (p + r) };
    (p, r, f)
}

fn grams<T: Clone>(s: &[T], n: usize) -> Vec<Vec<T>> {
    (0..s.len()).filter(|i| i + n <= s.len()).map(|i| s[i..i + n].to_vec()).collect()
}

/// Clipped n-gram overlap by matching each candidate gram against a shrinking
/// pool of reference grams.
pub fn naive_rouge_n<T: Clone + PartialEq>(cand: &[T], refs: &[T], n: usize) -> Triple {
    let cg = grams(cand, n);
    let mut pool = grams(refs, n);
    let total_refs = pool.len();
    let mut hits = 0;
    for g in &cg {
        if let Some(pos) = pool.iter().position(|x| x == g) {
            pool.remove(pos);
            hits += 1;
        }
    }
    triple(hits, cg.len(), total_refs)
}

fn is_subsequence<T: PartialEq>(needle: &[&T], hay: &[T]) -> bool {
    let mut it = hay.iter();
    needle.iter().all(|x| it.any(|y| y == *x))
}

/// LCS by enumerating every subsequence of the shorter list. Exponential;
/// keep inputs short.
pub fn brute_lcs<T: PartialEq>(a: &[T], b: &[T]) -> usize {
    let (short, long) = if a.len() <= b.len() { (a, b) } else { (b, a) };
    assert!(short.len() <= 16, "brute_lcs is exponential");
    let mut best = 0;
    for mask in 0u32..(1 << short.len()) {
        let size = mask.count_ones() as usize;
        if size <= best {
            continue;
        }
        let picked: Vec<&T> = (0..short.len()).filter(|i| mask >> i & 1 == 1).map(|i| &short[i]).collect();
        if is_subsequence(&picked, long) {
            best = size;
        }
    }
    best
}

pub fn naive_rouge_l<T: PartialEq>(cand: &[T], refs: &[T]) -> Triple {
    triple(brute_lcs(cand, refs), cand.len(), refs.len())
}

fn objective(units: &[Vec<String>], chosen: &BTreeSet<usize>, target: &[String]) -> f64 {
    let text: Vec<String> = chosen.iter().flat_map(|&i| units[i].iter().cloned()).collect();
    (naive_rouge_n(&text, target, 1).2 + naive_rouge_n(&text, target, 2).2) / 2.0
}

/// Every unit's gain over `chosen`, `None` for units already chosen.
pub fn gains(units: &[Vec<String>], chosen: &BTreeSet<usize>, target: &[String]) -> Vec<Option<f64>> {
    let base = objective(units, chosen, target);
    (0..units.len())
        .map(|i| {
            if chosen.contains(&i) {
                return None;
            }
            let mut with = chosen.clone();
            with.insert(i);
            Some(objective(units, &with, target) - base)
        })
        .collect()
}

/// Greedy selection written against the naive scorer: take the first unit
/// with the largest strictly positive gain until none remains or `cap` is
/// hit.
pub fn reference_greedy(units: &[Vec<String>], target: &[String], cap: usize) -> Vec<usize> {
    let mut chosen = BTreeSet::new();
    while chosen.len() < cap {
        let g = gains(units, &chosen, target);
        let mut best: Option<(usize, f64)> = None;
        for (i, gain) in g.iter().enumerate() {
            if let Some(gain) = *gain {
                if best.is_none_or(|(_, b)| gain > b) {
                    best = Some((i, gain));
                }
            }
        }
        match best {
            Some((i, gain)) if gain > 0.0 => {
                chosen.insert(i);
            }
            _ => break,
        }
    }
    chosen.into_iter().collect()
}

pub fn units_of(doc: &Document) -> Vec<Vec<String>> {
    (0..doc.num_edus()).map(|i| doc.edu_tokens(i).to_vec()).collect()
}

/// Segmented synthetic documents.
pub fn synth_docs(cfg: &SynthConfig) -> Vec<Document> {
    generate(cfg).into_iter().map(|d| d.record.into_document(MIN_EDU_TOKENS).expect("synthetic record segments")).collect()
}
