//! Templated synthetic corpus with recoverable oracle plans.
//!
//! Every document is a run of short clauses. A few clauses carry one of a
//! handful of marker adjectives; the reference restates some of the marked
//! clauses as stand-alone sentences without their trailing modifier.
//!
//! Marked clauses left out of the reference are decoys, so the markers
//! narrow down its content without fixing it. The referenced subset favours
//! earlier clauses: the `r`-th marked clause is drawn with weight
//! `lead_decay^r`. Setting `max_decoys` to 0 references every marked clause.

use rand::seq::index::{sample, sample_weighted};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::DocumentRecord;

const SUBJECTS: &[&str] = &[
    "council", "mayor", "company", "union", "court", "board", "team", "agency", "minister", "bank", "school",
    "museum", "airline", "hospital", "police", "senator",
];
const VERBS: &[&str] = &[
    "approved", "rejected", "funded", "reviewed", "delayed", "announced", "blocked", "launched", "defended",
    "audited", "expanded", "cancelled",
];
const PLAIN_ADJECTIVES: &[&str] = &["new", "small", "local", "annual", "private", "public", "regional", "modest"];
pub const SALIENT_ADJECTIVES: &[&str] = &["major", "urgent", "historic", "critical"];
const OBJECTS: &[&str] = &[
    "budget", "plan", "merger", "contract", "project", "policy", "report", "program", "bridge", "festival",
    "lawsuit", "reform",
];
const MODIFIERS: &[&str] = &[
    "on monday", "last week", "after the vote", "in the morning", "without comment", "despite protests",
    "for the city", "at the meeting",
];
const JOINERS: &[&str] = &[", but ", ", and ", "; "];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub docs: usize,
    pub seed: u64,
    pub min_units: usize,
    pub max_units: usize,
    pub min_salient: usize,
    pub max_salient: usize,
    pub min_decoys: usize,
    pub max_decoys: usize,
    /// Weight ratio between consecutive marked clauses; 1 draws uniformly.
    pub lead_decay: f64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self { docs: 64, seed: 7, min_units: 6, max_units: 9, min_salient: 2, max_salient: 3, min_decoys: 1, max_decoys: 2, lead_decay: 0.5 }
    }
}

/// A generated document with the indices of its salient (referenced) and
/// decoy clauses.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthDoc {
    pub record: DocumentRecord,
    pub salient: Vec<usize>,
    pub decoys: Vec<usize>,
}

struct Clause {
    core: String,
    modifier: &'static str,
}

fn pick<'a>(rng: &mut ChaCha8Rng, words: &[&'a str]) -> &'a str {
    words[rng.random_range(0..words.len())]
}

fn capitalize(s: &str) -> String {
    let mut c = s.chars();
    match c.next() {
        Some(f) => f.to_uppercase().chain(c).collect(),
        None => String::new(),
    }
}

pub fn generate(cfg: &SynthConfig) -> Vec<SynthDoc> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    (0..cfg.docs).map(|i| generate_one(&mut rng, cfg, &format!("synth-{i:05}"))).collect()
}

fn generate_one(rng: &mut ChaCha8Rng, cfg: &SynthConfig, id: &str) -> SynthDoc {
    let n = rng.random_range(cfg.min_units..=cfg.max_units);
    let k = rng.random_range(cfg.min_salient..=cfg.max_salient.min(n));
    let d = rng.random_range(cfg.min_decoys..=cfg.max_decoys.max(cfg.min_decoys)).min(n - k);
    let mut marked: Vec<usize> = sample(rng, n, k + d).into_vec();
    marked.sort_unstable();
    let decay = cfg.lead_decay.clamp(1e-6, 1.0);
    let chosen = sample_weighted(rng, marked.len(), |r| decay.powi(r as i32), k).expect("positive weights");
    let mut salient: Vec<usize> = chosen.iter().map(|r| marked[r]).collect();
    salient.sort_unstable();
    let decoys: Vec<usize> = marked.iter().copied().filter(|i| !salient.contains(i)).collect();
    let clauses: Vec<Clause> = (0..n)
        .map(|i| {
            let adj = if marked.contains(&i) { pick(rng, SALIENT_ADJECTIVES) } else { pick(rng, PLAIN_ADJECTIVES) };
            let core = format!("the {} {} the {} {}", pick(rng, SUBJECTS), pick(rng, VERBS), adj, pick(rng, OBJECTS));
            Clause { core, modifier: pick(rng, MODIFIERS) }
        })
        .collect();

    let mut sentences = Vec::new();
    let mut i = 0;
    while i < n {
        let pair = i + 1 < n && rng.random_bool(0.5);
        let first = format!("{} {}", clauses[i].core, clauses[i].modifier);
        let s = if pair {
            let joiner = pick(rng, JOINERS);
            format!("{first}{joiner}{} {}.", clauses[i + 1].core, clauses[i + 1].modifier)
        } else {
            format!("{first}.")
        };
        sentences.push(capitalize(&s));
        i += if pair { 2 } else { 1 };
    }
    let reference = salient.iter().map(|&s| capitalize(&format!("{}.", clauses[s].core))).collect::<Vec<_>>().join(" ");
    SynthDoc {
        record: DocumentRecord { id: id.to_string(), text: sentences.join(" "), reference: Some(reference), edus: None },
        salient,
        decoys,
    }
}
