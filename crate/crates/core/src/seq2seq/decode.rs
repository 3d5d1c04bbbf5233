//! Beam search, diverse beam search and nucleus sampling over any
//! left-to-right model exposing next-token log-probabilities.

use std::cmp::Ordering;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::config::DecodeConfig;

/// A model queried one step at a time.
pub trait StepLm {
    type State: Clone;

    fn vocab_size(&self) -> usize;
    fn eos(&self) -> usize;
    fn start(&self) -> Self::State;
    /// Next-token log-probabilities; `-inf` marks impossible tokens.
    fn log_probs(&self, state: &Self::State) -> Vec<f64>;
    fn advance(&self, state: &Self::State, token: usize) -> Self::State;
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Hypothesis {
    /// Generated tokens, without the end symbol.
    pub tokens: Vec<usize>,
    /// Sum of model log-probabilities of every emitted token, end included.
    pub log_prob: f64,
    /// Length-penalized score used for ranking.
    pub score: f64,
    pub ended: bool,
}

/// `sum / len^alpha`, where `len` counts emitted tokens including the end
/// symbol.
pub fn length_normalize(sum: f64, len: usize, alpha: f64) -> f64 {
    if alpha == 0.0 {
        sum
    } else {
        sum / (len.max(1) as f64).powf(alpha)
    }
}

/// Applies the length constraints to raw next-token log-probabilities.
fn constrain(mut lp: Vec<f64>, generated: usize, eos: usize, d: &DecodeConfig) -> Vec<f64> {
    if generated >= d.max_len {
        for (i, v) in lp.iter_mut().enumerate() {
            if i != eos {
                *v = f64::NEG_INFINITY;
            }
        }
    } else if generated < d.min_len {
        lp[eos] = f64::NEG_INFINITY;
    }
    lp
}

fn by_score_desc(a: &Hypothesis, b: &Hypothesis) -> Ordering {
    b.score.partial_cmp(&a.score).unwrap_or(Ordering::Equal)
}

struct Beam<S> {
    state: S,
    tokens: Vec<usize>,
    raw: f64,
    /// Selection score; differs from `raw` only under diversity penalties.
    sel: f64,
}

/// One beam group; `step` expands it given a penalty per token.
struct Group<S> {
    beams: Vec<Beam<S>>,
    finished: Vec<(Hypothesis, f64)>,
    size: usize,
    keep: usize,
    done: bool,
}

impl<S: Clone> Group<S> {
    fn new(start: S, size: usize, keep: usize) -> Self {
        Self {
            beams: vec![Beam { state: start, tokens: Vec::new(), raw: 0.0, sel: 0.0 }],
            finished: Vec::new(),
            size,
            keep,
            done: false,
        }
    }

    /// Expands every live beam; returns the tokens chosen at this step.
    fn step<L: StepLm<State = S>>(&mut self, lm: &L, d: &DecodeConfig, penalty: &dyn Fn(usize) -> f64) -> Vec<usize> {
        let eos = lm.eos();
        let mut cands: Vec<(f64, f64, usize, usize)> = Vec::new();
        for (bi, b) in self.beams.iter().enumerate() {
            let lp = constrain(lm.log_probs(&b.state), b.tokens.len(), eos, d);
            for (tok, &l) in lp.iter().enumerate() {
                if l.is_finite() {
                    cands.push((b.sel + l - penalty(tok), b.raw + l, bi, tok));
                }
            }
        }
        cands.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap_or(Ordering::Equal).then(a.2.cmp(&b.2)).then(a.3.cmp(&b.3)));
        let mut next = Vec::new();
        let mut chosen = Vec::new();
        for (rank, &(sel, raw, bi, tok)) in cands.iter().enumerate() {
            if next.len() == self.size {
                break;
            }
            let parent = &self.beams[bi];
            if tok == eos {
                if rank < self.size {
                    let len = parent.tokens.len() + 1;
                    let hyp = Hypothesis {
                        tokens: parent.tokens.clone(),
                        log_prob: raw,
                        score: length_normalize(raw, len, d.length_penalty),
                        ended: true,
                    };
                    self.finished.push((hyp, length_normalize(sel, len, d.length_penalty)));
                    chosen.push(tok);
                }
                continue;
            }
            let mut tokens = parent.tokens.clone();
            tokens.push(tok);
            next.push(Beam { state: lm.advance(&parent.state, tok), tokens, raw, sel });
            chosen.push(tok);
        }
        self.beams = next;
        self.done = self.beams.is_empty() || self.can_stop(d);
        chosen
    }

    /// True once no live beam can beat the `keep`-th finished hypothesis.
    fn can_stop(&mut self, d: &DecodeConfig) -> bool {
        if self.finished.len() < self.keep {
            return false;
        }
        self.finished.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap_or(Ordering::Equal));
        let threshold = self.finished[self.keep - 1].1;
        let alpha = d.length_penalty;
        self.beams.iter().all(|b| {
            let now = length_normalize(b.sel, b.tokens.len() + 1, alpha);
            let longest = length_normalize(b.sel, d.max_len + 1, alpha);
            now.max(longest) <= threshold
        })
    }

    fn results(mut self) -> Vec<Hypothesis> {
        self.finished.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap_or(Ordering::Equal));
        self.finished.into_iter().take(self.keep).map(|(h, _)| h).collect()
    }
}

/// Standard beam search returning up to `num_candidates` hypotheses sorted
/// by length-penalized score.
pub fn beam_search<L: StepLm>(lm: &L, d: &DecodeConfig) -> Vec<Hypothesis> {
    let keep = d.num_candidates.min(d.beam_size);
    let mut g = Group::new(lm.start(), d.beam_size, keep);
    while !g.done {
        g.step(lm, d, &|_| 0.0);
    }
    let mut out = g.results();
    out.sort_by(by_score_desc);
    out
}

/// Diverse beam search with `num_candidates / group_size` groups. At every
/// step, group `g` pays `diversity_penalty` for each time a token was chosen
/// by groups before it at the same step. Results come back in group order.
pub fn diverse_beam_search<L: StepLm>(lm: &L, d: &DecodeConfig, group_size: usize) -> Vec<Hypothesis> {
    let group_size = group_size.max(1);
    let n_groups = (d.num_candidates / group_size).max(1);
    let mut groups: Vec<Group<L::State>> =
        (0..n_groups).map(|_| Group::new(lm.start(), group_size, group_size)).collect();
    while groups.iter().any(|g| !g.done) {
        let mut counts = vec![0usize; lm.vocab_size()];
        for g in groups.iter_mut().filter(|g| !g.done) {
            let penalty = |tok: usize| d.diversity_penalty * counts[tok] as f64;
            let chosen = g.step(lm, d, &penalty);
            for tok in chosen {
                counts[tok] += 1;
            }
        }
    }
    groups.into_iter().flat_map(Group::results).collect()
}

/// Indices forming the smallest probability-sorted prefix with mass at
/// least `p`, with their renormalized probabilities.
pub fn nucleus(probs: &[f64], p: f64) -> Vec<(usize, f64)> {
    let mut order: Vec<usize> = (0..probs.len()).filter(|&i| probs[i] > 0.0).collect();
    order.sort_by(|&a, &b| probs[b].partial_cmp(&probs[a]).unwrap_or(Ordering::Equal).then(a.cmp(&b)));
    let mut kept = Vec::new();
    let mut mass = 0.0;
    for i in order {
        kept.push(i);
        mass += probs[i];
        if mass >= p {
            break;
        }
    }
    kept.iter().map(|&i| (i, probs[i] / mass)).collect()
}

/// Temperature-scaled probabilities from log-probabilities.
fn tempered(lp: &[f64], temperature: f64) -> Vec<f64> {
    let max = lp.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let w: Vec<f64> = lp.iter().map(|&l| if l.is_finite() { ((l - max) / temperature).exp() } else { 0.0 }).collect();
    let z: f64 = w.iter().sum();
    w.into_iter().map(|v| v / z).collect()
}

/// Draws `num_candidates` independent samples from the temperature-scaled
/// nucleus at each step, using one RNG seeded by `rng_seed`.
pub fn nucleus_sample<L: StepLm>(lm: &L, d: &DecodeConfig) -> Vec<Hypothesis> {
    let mut rng = ChaCha8Rng::seed_from_u64(d.rng_seed);
    let eos = lm.eos();
    (0..d.num_candidates)
        .map(|_| {
            let mut state = lm.start();
            let mut tokens = Vec::new();
            let mut sum = 0.0;
            loop {
                let lp = constrain(lm.log_probs(&state), tokens.len(), eos, d);
                let pool = nucleus(&tempered(&lp, d.temperature), d.nucleus_p);
                if pool.is_empty() {
                    let len = tokens.len();
                    return Hypothesis { tokens, log_prob: sum, score: length_normalize(sum, len, d.length_penalty), ended: false };
                }
                let mut u: f64 = rng.random();
                let mut tok = pool[pool.len() - 1].0;
                for &(i, q) in &pool {
                    if u < q {
                        tok = i;
                        break;
                    }
                    u -= q;
                }
                sum += lp[tok];
                if tok == eos {
                    let len = tokens.len() + 1;
                    return Hypothesis { tokens, log_prob: sum, score: length_normalize(sum, len, d.length_penalty), ended: true };
                }
                tokens.push(tok);
                state = lm.advance(&state, tok);
            }
        })
        .collect()
}


#[cfg(test)]
mod tests {
    use super::toy::*;
    use super::*;

    fn cfg(beam: usize, keep: usize, max_len: usize, alpha: f64) -> DecodeConfig {
        DecodeConfig { beam_size: beam, num_candidates: keep, max_len, min_len: 0, length_penalty: alpha, ..Default::default() }
    }

    /// Every eos-terminated sequence with at most `max_len` content tokens,
    /// scored by brute force.
    fn enumerate(lm: &TableLm, max_len: usize, alpha: f64) -> Vec<(Vec<usize>, f64)> {
        let mut out = Vec::new();
        let mut stack = vec![(Vec::new(), 0.0)];
        while let Some((prefix, sum)) = stack.pop() {
            let lp = lm.log_probs(&prefix);
            out.push((prefix.clone(), length_normalize(sum + lp[lm.eos], prefix.len() + 1, alpha)));
            if prefix.len() < max_len {
                for t in 0..lm.vocab {
                    if t != lm.eos {
                        let mut p = prefix.clone();
                        p.push(t);
                        stack.push((p, sum + lp[t]));
                    }
                }
            }
        }
        out.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap());
        out
    }

    #[test]
    fn wide_beam_finds_exhaustive_argmax() {
        let lm = trap_lm();
        for &alpha in &[0.0, 1.0] {
            let best = &enumerate(&lm, 3, alpha)[0];
            let hyps = beam_search(&lm, &cfg(9, 1, 3, alpha));
            assert_eq!(hyps[0].tokens, best.0, "alpha {alpha}");
            assert!((hyps[0].score - best.1).abs() < 1e-12);
        }
    }

    #[test]
    fn beam_one_is_greedy() {
        let lm = trap_lm();
        let hyps = beam_search(&lm, &cfg(1, 1, 3, 1.0));
        let mut greedy = Vec::new();
        loop {
            let lp = lm.log_probs(&greedy);
            let t = (0..3).max_by(|&a, &b| lp[a].partial_cmp(&lp[b]).unwrap().then(b.cmp(&a))).unwrap();
            if t == 2 || greedy.len() == 3 {
                break;
            }
            greedy.push(t);
        }
        assert_eq!(hyps[0].tokens, greedy);
    }

    #[test]
    fn beam_results_sorted_distinct_and_bounded() {
        let lm = trap_lm();
        let d = DecodeConfig { min_len: 1, ..cfg(4, 4, 3, 1.0) };
        let hyps = beam_search(&lm, &d);
        assert_eq!(hyps.len(), 4);
        for w in hyps.windows(2) {
            assert!(w[0].score >= w[1].score);
            assert_ne!(w[0].tokens, w[1].tokens);
        }
        assert!(hyps.iter().all(|h| (1..=3).contains(&h.tokens.len())));
        let all = enumerate(&lm, 3, 1.0);
        for h in &hyps {
            let (_, s) = all.iter().find(|(t, _)| *t == h.tokens).unwrap();
            assert!((h.score - s).abs() < 1e-12);
        }
    }

    #[test]
    fn zero_penalty_single_group_is_beam_search() {
        let lm = trap_lm();
        let d = DecodeConfig { diversity_penalty: 0.0, ..cfg(4, 4, 3, 1.0) };
        let mut div = diverse_beam_search(&lm, &d, 4);
        div.sort_by(by_score_desc);
        assert_eq!(div, beam_search(&lm, &d));
    }

    #[test]
    fn penalty_pushes_second_group_elsewhere() {
        // First step: token 0 has log-prob ln 0.5, token 1 ln 0.4. The gap is
        // ln(0.5/0.4) ≈ 0.223, so a penalty of 1 moves group 2 to token 1.
        let lm = trap_lm();
        let d = DecodeConfig { diversity_penalty: 1.0, ..cfg(2, 2, 3, 1.0) };
        let hyps = diverse_beam_search(&lm, &d, 1);
        assert_eq!(hyps.len(), 2);
        assert_eq!(hyps[0].tokens.first(), Some(&0));
        assert_eq!(hyps[1].tokens.first(), Some(&1));
        let d0 = DecodeConfig { diversity_penalty: 0.1, ..d };
        let hyps = diverse_beam_search(&lm, &d0, 1);
        assert_eq!(hyps[1].tokens.first(), Some(&0));
    }

    #[test]
    fn sixteen_groups_give_sixteen() {
        let lm = trap_lm();
        let d = DecodeConfig { num_candidates: 16, beam_size: 16, max_len: 4, min_len: 0, ..Default::default() };
        assert_eq!(diverse_beam_search(&lm, &d, 1).len(), 16);
    }

    #[test]
    fn nucleus_truncation() {
        let kept = nucleus(&[0.1, 0.6, 0.3], 0.8);
        assert_eq!(kept.iter().map(|k| k.0).collect::<Vec<_>>(), vec![1, 2]);
        assert!((kept[0].1 - 0.6 / 0.9).abs() < 1e-15);
        assert_eq!(nucleus(&[0.1, 0.6, 0.3], 0.5), vec![(1, 1.0)]);
        assert_eq!(nucleus(&[0.1, 0.6, 0.3], 1.0).len(), 3);
    }

    #[test]
    fn tiny_nucleus_is_greedy_and_seeded() {
        let lm = trap_lm();
        let d = DecodeConfig { nucleus_p: 0.2, num_candidates: 3, max_len: 3, min_len: 0, ..Default::default() };
        let greedy = beam_search(&lm, &DecodeConfig { beam_size: 1, num_candidates: 1, ..d.clone() });
        for h in nucleus_sample(&lm, &d) {
            assert_eq!(h.tokens, greedy[0].tokens);
        }
        let d = DecodeConfig { nucleus_p: 1.0, rng_seed: 9, num_candidates: 20, ..d };
        let a = nucleus_sample(&lm, &d);
        assert_eq!(a, nucleus_sample(&lm, &d));
        assert!(a.iter().any(|h| h.tokens != a[0].tokens));
    }

    #[test]
    fn min_len_blocks_early_end() {
        let lm = trap_lm();
        let d = DecodeConfig { min_len: 2, ..cfg(3, 3, 3, 1.0) };
        for h in beam_search(&lm, &d).into_iter().chain(nucleus_sample(&lm, &d)).chain(diverse_beam_search(&lm, &d, 1)) {
            assert!(h.tokens.len() >= 2 && h.tokens.len() <= 3, "{h:?}");
        }
    }
}
