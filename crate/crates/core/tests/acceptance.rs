//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! Contract criteria (exact numerics, construction guarantees, replay
//! determinism) fail the process. Directional criteria measured on the
//! trained synthetic pipeline are reported but do not change the exit code,
//! since small-model training outcomes are evidence rather than contract.

mod common;

use std::collections::BTreeSet;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::process::ExitCode;
use std::time::Instant;

use planguide::abstractor::{
    build_examples, generate_candidates, train_abstractor, Abstractor, AbstractorTrainConfig, Candidate, CandidateRecord,
    GenerateConfig, GuidedExample, GuidedWeights, Method,
};
use planguide::analysis::{method_report, report, uniqueness, QuartileKey, SetInput};
use planguide::corpus::Document;
use planguide::llm::{focused_prompts, prompt_candidates, ExemplarPool, LlmConfig, ReplayClient, ReplayRecord};
use planguide::planner::{build_examples as plan_examples, train_planner, PlanOrder, Planner};
use planguide::plans::{greedy_extract, greedy_oracle, ContentPlan, Provenance, DEFAULT_MAX_PLAN_LEN};
use planguide::reranker::{kendall_tau, margin_loss, rank_example, ranking_loss, train_reranker, RerankConfig, Reranker};
use planguide::rouge::{rouge_l, rouge_n, RougeScore};
use planguide::seq2seq::{grad_check, DecodeConfig, ModelConfig, OptimConfig, TrainConfig, Vocab};
use planguide::synth::SynthConfig;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

const TRAIN_DOCS: usize = 1000;
const TEST_DOCS: usize = 64;
const RERANK_DOCS: usize = 128;
const ABSTRACTOR_STEPS: usize = 1600;
const PLANNER_STEPS: usize = 600;
const RERANKER_STEPS: usize = 200;
const K: usize = 16;

/// Verbatim instruction a focused prompt must open with.
const FOCUSED_INSTRUCTION: &str =
    "Summarize the content in between the HTML tags <e> and </e> in one to three sentences.";

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn model_config() -> ModelConfig {
    ModelConfig {
        vocab_size: 0,
        d_model: 32,
        n_heads: 4,
        ff_dim: 64,
        token_encoder_layers: 2,
        edu_encoder_layers: 1,
        decoder_layers: 2,
        max_positions: 128,
        dropout: 0.0,
        seed: 0,
        copy: true,
    }
}

fn train_config(steps: usize, batch_size: usize, learning_rate: f64, warmup_steps: usize) -> TrainConfig {
    TrainConfig {
        steps,
        batch_size,
        optim: OptimConfig { learning_rate, warmup_steps, ..Default::default() },
        seed: 0,
        eval_every: 0,
        dropout: false,
    }
}

fn abstractor_config(steps: usize, weights: GuidedWeights) -> AbstractorTrainConfig {
    AbstractorTrainConfig { train: train_config(steps, 8, 3e-3, 30), weights, max_len: 48 }
}

fn vocab_of(docs: &[Document]) -> Vocab {
    let mut toks = Vec::new();
    for d in docs {
        toks.extend(d.all_tokens());
        toks.extend(d.reference_tokens().unwrap_or_default());
    }
    Vocab::build(&toks)
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len().max(1) as f64
}

fn rouge_agreement() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst = 0.0f64;
    for _ in 0..200 {
        let alphabet = rng.random_range(2..=8u32);
        let draw = |rng: &mut ChaCha8Rng| -> Vec<u32> {
            let len = rng.random_range(0..=12);
            (0..len).map(|_| rng.random_range(0..alphabet)).collect()
        };
        let (a, b) = (draw(&mut rng), draw(&mut rng));
        let mut pairs = Vec::new();
        for n in 1..=2 {
            pairs.push((rouge_n(&a, &b, n), common::naive_rouge_n(&a, &b, n)));
        }
        pairs.push((rouge_l(&a, &b), common::naive_rouge_l(&a, &b)));
        for (fast, slow) in pairs {
            for (x, y) in [(fast.precision, slow.0), (fast.recall, slow.1), (fast.f1, slow.2)] {
                worst = worst.max((x - y).abs());
            }
        }
    }
    outcome(worst <= 1e-12, format!("200 pairs, max abs difference {worst:.1e}"))
}

fn greedy_verification() -> Outcome {
    let cfg = SynthConfig { docs: 100, seed: 2, min_units: 4, max_units: 10, ..Default::default() };
    let docs: Vec<Document> = common::synth_docs(&cfg).into_iter().filter(|d| d.num_edus() <= 10).collect();
    let mut steps = 0;
    let mut bad_steps = 0;
    let mut mismatches = 0;
    for doc in &docs {
        let target = doc.reference_tokens().unwrap();
        let units = common::units_of(doc);
        let got = greedy_extract(doc, &target, DEFAULT_MAX_PLAN_LEN, Provenance::Oracle).unwrap();
        let mut chosen = BTreeSet::new();
        for step in &got.steps {
            let best = common::gains(&units, &chosen, &target).into_iter().flatten().fold(f64::NEG_INFINITY, f64::max);
            steps += 1;
            bad_steps += usize::from((step.gain - best).abs() > 1e-12);
            chosen.insert(step.edu);
        }
        mismatches += usize::from(got.plan.edu_indices != common::reference_greedy(&units, &target, DEFAULT_MAX_PLAN_LEN));
    }
    outcome(
        docs.len() == 100 && bad_steps == 0 && mismatches == 0,
        format!("{} docs, {steps} steps, {bad_steps} sub-maximal steps, {mismatches} mismatches", docs.len()),
    )
}

fn gradient_checks() -> Outcome {
    let docs = common::synth_docs(&SynthConfig { docs: 1, seed: 3, min_units: 4, max_units: 4, ..Default::default() });
    let doc = &docs[0];
    let vocab = vocab_of(&docs);
    let tiny = ModelConfig::tiny(0);
    let mut parts = Vec::new();
    let mut worst = 0.0f64;

    let planner = Planner::new(vocab.clone(), tiny.clone(), PlanOrder::InOrder).unwrap();
    let oracle = greedy_oracle(doc, &doc.reference_tokens().unwrap(), DEFAULT_MAX_PLAN_LEN).unwrap();
    let ex = planner.example(doc, &oracle.edu_indices);
    let r = grad_check(&planner.params, |t| planner.loss(t, &ex), 1e-5, 200, 1).unwrap();
    parts.push(format!("planner {:.1e}", r.max_relative_error));
    worst = worst.max(r.max_relative_error);

    let abs = Abstractor::new(vocab.clone(), tiny).unwrap();
    let gex = GuidedExample::new(doc, &vocab, oracle, 4).unwrap();
    for (name, w) in [("guided l=1 b=10", GuidedWeights::CNN), ("guided l=1 b=0", GuidedWeights::NYT)] {
        let r = grad_check(&abs.params, |t| planguide::abstractor::guided_loss(&abs.model, t, &gex, &w).loss, 1e-5, 200, 2).unwrap();
        parts.push(format!("{name} {:.1e}", r.max_relative_error));
        worst = worst.max(r.max_relative_error);
    }

    let rr = Reranker::from_abstractor(&abs, RerankConfig::default()).unwrap();
    let cands: Vec<Candidate> = ["the council approved the plan", "the bank funded a project", "the court delayed it"]
        .iter()
        .enumerate()
        .map(|(i, text)| Candidate {
            doc_id: doc.id.clone(),
            method: Method::Beam,
            beam_index: i,
            text: text.to_string(),
            tokens: planguide::corpus::tokenize(text),
            plan: None,
            log_likelihood: 0.0,
        })
        .collect();
    let rex = rank_example(&rr, doc, &cands).unwrap().unwrap();
    // a large margin keeps every pair active so the hinge is differentiable
    let cfg = RerankConfig { alpha: 1.0, margin: 5.0 };
    let r = grad_check(&rr.params, |t| ranking_loss(&rr.model, t, &rex, &cfg), 1e-5, 200, 3).unwrap();
    parts.push(format!("margin {:.1e}", r.max_relative_error));
    worst = worst.max(r.max_relative_error);
    outcome(worst < 1e-3, format!("max relative error: {}", parts.join(", ")))
}

fn masking_soundness() -> Outcome {
    let docs = common::synth_docs(&SynthConfig { docs: 50, seed: 4, ..Default::default() });
    let vocab = vocab_of(&docs);
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let planners: Vec<Planner> = (0..4)
        .map(|s| Planner::new(vocab.clone(), ModelConfig { seed: s, ..model_config() }, PlanOrder::InOrder).unwrap())
        .collect();
    let mut leaked = 0.0f64;
    let mut worst_sum = 0.0f64;
    let mut states = 0;
    for i in 0..1000 {
        let planner = &planners[i % planners.len()];
        let doc = &docs[rng.random_range(0..docs.len())];
        let state = planner.encode_edus(doc).unwrap();
        let n = doc.num_edus();
        let mut partial: Vec<usize> = (0..n).filter(|_| rng.random_bool(0.3)).collect();
        partial.truncate(rng.random_range(0..=n));
        let dist = planner.next_plan_distribution(&state, &partial).unwrap();
        if let Some(&last) = partial.last() {
            leaked = leaked.max(dist[..=last].iter().cloned().fold(0.0, f64::max));
        }
        worst_sum = worst_sum.max((dist.iter().sum::<f64>() - 1.0).abs());
        states += 1;
    }
    outcome(leaked == 0.0 && worst_sum <= 1e-6, format!("{states} states, max masked mass {leaked}, max |sum-1| {worst_sum:.1e}"))
}

fn overfit_fidelity() -> Outcome {
    let docs = common::synth_docs(&SynthConfig { docs: 32, seed: 6, ..Default::default() });
    let vocab = vocab_of(&docs);
    let mut abs = Abstractor::new(vocab.clone(), model_config()).unwrap();
    let ex = build_examples(&docs, &vocab, 0);
    train_abstractor(&mut abs, &ex, &[], &abstractor_config(OVERFIT_ABSTRACTOR_STEPS, GuidedWeights::CNN)).unwrap();
    let mut planner = Planner::new(vocab.clone(), model_config(), PlanOrder::InOrder).unwrap();
    planner.init_token_encoder_from(&abs.params);
    let pex = plan_examples(&planner, &docs);
    train_planner(&mut planner, &pex, &train_config(OVERFIT_PLANNER_STEPS, 8, 3e-3, 30)).unwrap();

    let greedy_plan = DecodeConfig { beam_size: 1, num_candidates: 1, min_len: 1, max_len: DEFAULT_MAX_PLAN_LEN, ..Default::default() };
    let mut plans_exact = 0;
    let mut verbatim = 0;
    for (doc, pe) in docs.iter().zip(&pex) {
        let out = planner.generate_plans(doc, &greedy_plan, false).unwrap();
        plans_exact += usize::from(out.plans[0].edu_indices == pe.sequence);
        let oracle = ContentPlan::new(pe.sequence.clone(), Provenance::Oracle);
        let h = abs.realize(doc, &oracle, &DecodeConfig::greedy(64)).unwrap();
        let text = h.map(|h| abs.text_of(&h.tokens).1).unwrap_or_default();
        verbatim += usize::from(Some(text) == doc.reference_tokens());
    }
    let n = docs.len() as f64;
    let (p, a) = (plans_exact as f64 / n, verbatim as f64 / n);
    outcome(p >= 0.99 && a >= 0.95, format!("planner exact {plans_exact}/32 ({p:.3}), abstractor verbatim {verbatim}/32 ({a:.3})"))
}

const OVERFIT_ABSTRACTOR_STEPS: usize = 800;
const OVERFIT_PLANNER_STEPS: usize = 400;

/// The trained synthetic pipeline shared by the directional criteria.
struct Pipeline {
    docs: Vec<Document>,
    train: std::ops::Range<usize>,
    test: std::ops::Range<usize>,
    vocab: Vocab,
    examples: Vec<GuidedExample>,
    abstractor: Abstractor,
    planner: Planner,
    reranker: Reranker,
}

impl Pipeline {
    fn build() -> Self {
        let t0 = Instant::now();
        let docs = common::synth_docs(&SynthConfig { docs: TRAIN_DOCS + TEST_DOCS, seed: 1, ..Default::default() });
        let (train, test) = (0..TRAIN_DOCS, TRAIN_DOCS..TRAIN_DOCS + TEST_DOCS);
        let vocab = vocab_of(&docs[train.clone()]);
        let examples = build_examples(&docs[train.clone()], &vocab, 0);
        let mut abstractor = Abstractor::new(vocab.clone(), model_config()).unwrap();
        train_abstractor(&mut abstractor, &examples, &[], &abstractor_config(ABSTRACTOR_STEPS, GuidedWeights::CNN)).unwrap();
        let mut planner = Planner::new(vocab.clone(), model_config(), PlanOrder::InOrder).unwrap();
        planner.init_token_encoder_from(&abstractor.params);
        let pex = plan_examples(&planner, &docs[train.clone()]);
        train_planner(&mut planner, &pex, &train_config(PLANNER_STEPS, 8, 3e-3, 30)).unwrap();

        let mut reranker = Reranker::from_abstractor(&abstractor, RerankConfig::default()).unwrap();
        let gc = GenerateConfig::default();
        let mut rex = Vec::new();
        for doc in &docs[..RERANK_DOCS] {
            for method in [Method::Pga, Method::Beam] {
                let set = generate_candidates(Some(&planner), &abstractor, doc, method, &gc).unwrap();
                rex.extend(rank_example(&reranker, doc, &set.candidates).unwrap());
            }
        }
        train_reranker(&mut reranker, &rex, &train_config(RERANKER_STEPS, 4, 1e-3, 10)).unwrap();
        eprintln!("pipeline trained in {:.0}s", t0.elapsed().as_secs_f64());
        Self { docs, train, test, vocab, examples, abstractor, planner, reranker }
    }

    fn test_docs(&self) -> &[Document] {
        &self.docs[self.test.clone()]
    }

    fn plans(&self, doc: &Document) -> Vec<ContentPlan> {
        let d = DecodeConfig { num_candidates: K, ..GenerateConfig::default().plan_decode };
        self.planner.generate_plans(doc, &d, false).unwrap().plans
    }
}

fn uniqueness_by_construction(p: &Pipeline) -> Outcome {
    let mut short = Vec::new();
    for doc in p.test_docs() {
        let plans = p.plans(doc);
        let distinct = plans.iter().map(|pl| pl.edu_indices.clone()).collect::<BTreeSet<_>>().len();
        if plans.len() != K || distinct != K || uniqueness(&plans) != K {
            short.push(format!("{}: {} plans, {distinct} distinct", doc.id, plans.len()));
        }
    }
    outcome(short.is_empty(), format!("{} test docs, {} below {K}{}", p.test_docs().len(), short.len(), short.first().map_or(String::new(), |s| format!(" (first: {s})"))))
}

fn adherence_of(p: &Pipeline, abs: &Abstractor) -> f64 {
    let gc = GenerateConfig::default();
    let sets: Vec<SetInput> = p
        .test_docs()
        .iter()
        .map(|d| {
            let s = generate_candidates(Some(&p.planner), abs, d, Method::Pga, &gc).unwrap();
            SetInput { doc: d.clone(), candidates: s.candidates, top: None }
        })
        .collect();
    method_report("pga", &sets, QuartileKey::SourceUnits).unwrap().adherence.unwrap().f1
}

fn adherence_direction(p: &Pipeline) -> Outcome {
    let with_ul = adherence_of(p, &p.abstractor);
    let mut ablated = Abstractor::new(p.vocab.clone(), model_config()).unwrap();
    let w = GuidedWeights { lambda: 0.0, ..GuidedWeights::CNN };
    train_abstractor(&mut ablated, &p.examples, &[], &abstractor_config(ABSTRACTOR_STEPS, w)).unwrap();
    let without = adherence_of(p, &ablated);
    outcome(
        with_ul > without && p.test_docs().len() >= 64,
        format!("adherence F1 with unlikelihood {with_ul:.4} vs lambda=0 {without:.4} over {} docs", p.test_docs().len()),
    )
}

struct RankedSets {
    inputs: Vec<(String, Vec<SetInput>)>,
    taus: Vec<f64>,
}

fn ranked_sets(p: &Pipeline) -> RankedSets {
    let gc = GenerateConfig::default();
    let mut inputs = Vec::new();
    let mut taus = Vec::new();
    for method in [Method::Pga, Method::Beam] {
        let mut sets = Vec::new();
        for doc in p.test_docs() {
            let set = generate_candidates(Some(&p.planner), &p.abstractor, doc, method, &gc).unwrap();
            let ranked = p.reranker.rank(doc, &set.candidates).unwrap();
            let reference = doc.reference_tokens().unwrap();
            let scores: Vec<f64> = ranked.ranked.iter().map(|(_, s)| *s).collect();
            let quality: Vec<f64> = ranked.ranked.iter().map(|(c, _)| RougeScore::compute(&c.tokens, &reference).mean_f1()).collect();
            taus.extend(kendall_tau(&scores, &quality));
            let top = set.candidates.iter().position(|c| c.beam_index == ranked.top().beam_index);
            sets.push(SetInput { doc: doc.clone(), candidates: set.candidates, top });
        }
        inputs.push((method.as_str().to_string(), sets));
    }
    RankedSets { inputs, taus }
}

fn pga_versus_beam(r: &RankedSets) -> Outcome {
    let rep = report(&r.inputs, QuartileKey::SourceUnits).unwrap();
    let find = |name: &str| rep.methods.iter().find(|m| m.method == name).unwrap();
    let (pga, beam) = (find("pga"), find("beam"));
    let decline = |m: &planguide::analysis::MethodReport| {
        let first = m.mean_r1_by_beam.first().copied().flatten().unwrap_or(0.0);
        let last = m.mean_r1_by_beam.last().copied().flatten().unwrap_or(0.0);
        first - last
    };
    let (pt, bt) = (pga.top_r1.unwrap(), beam.top_r1.unwrap());
    let (pd, bd) = (decline(pga), decline(beam));
    outcome(
        pt >= bt && pd < bd,
        format!("top-ranked R1 pga {pt:.4} vs beam {bt:.4}; beam 1->{K} decline pga {pd:.4} vs beam {bd:.4}"),
    )
}

fn reranker_contract(r: &RankedSets) -> (Outcome, Outcome) {
    let cases: [(&[f64], f64, f64); 4] = [
        (&[2.0, 1.0], 0.1, 0.0),
        (&[0.7, 0.7], 0.25, 0.25),
        (&[1.0, 0.5, 2.0], 0.1, 0.0 + 1.2 + 1.6),
        (&[-1.0, -0.5, -3.0, -0.25], 0.5, 1.0 + 0.0 + 2.25 + 0.0 + 1.25 + 3.25),
    ];
    let worst = cases.iter().map(|(s, m, want)| (margin_loss(s, *m) - want).abs()).fold(0.0, f64::max);
    let tau = mean(&r.taus);
    (
        outcome(worst <= 1e-12, format!("{} hand-computed examples, max abs difference {worst:.1e}", cases.len())),
        outcome(tau > 0.0, format!("mean Kendall tau {tau:.4} over {} held-out sets", r.taus.len())),
    )
}

fn replay_key(body: &serde_json::Value) -> String {
    Sha256::digest(body.to_string().as_bytes()).iter().map(|b| format!("{b:02x}")).collect()
}

fn llm_replay(p: &Pipeline) -> Outcome {
    let docs = &p.test_docs()[..4];
    let pool = ExemplarPool::from_docs(&p.docs[p.train.clone()][..64]).unwrap();
    let cfg = LlmConfig::default();
    let dir = tempfile::tempdir().unwrap();
    let cache = dir.path().join("replay.jsonl");
    let mut lines = String::new();
    for doc in docs {
        for (i, prompt) in focused_prompts(doc, &p.plans(doc), &pool, 7).unwrap().iter().enumerate() {
            let body = serde_json::json!({
                "model": cfg.model,
                "messages": [{ "role": "user", "content": prompt.render() }],
                "temperature": prompt.temperature,
            });
            let rec = ReplayRecord { key: replay_key(&body), response: format!("recorded summary {i} of {}.", doc.id) };
            lines.push_str(&serde_json::to_string(&rec).unwrap());
            lines.push('\n');
        }
    }
    std::fs::write(&cache, lines).unwrap();

    let run = || -> (Vec<u8>, Vec<usize>, bool, bool) {
        let client = ReplayClient::load(&cache).unwrap();
        let mut bytes = Vec::new();
        let mut counts = Vec::new();
        let mut linked = true;
        let mut verbatim = true;
        for doc in docs {
            let plans = p.plans(doc);
            let prompts = focused_prompts(doc, &plans, &pool, 7).unwrap();
            verbatim &= prompts.iter().all(|q| q.render().starts_with(&format!("{FOCUSED_INSTRUCTION}\n\n")));
            let out = prompt_candidates(&client, &prompts, &cfg, &|_| {}).unwrap();
            counts.push(out.candidates.len());
            linked &= out.candidates.iter().zip(&plans).all(|(c, pl)| c.plan.as_ref().map(|x| &x.edu_indices) == Some(&pl.edu_indices));
            for q in &prompts {
                bytes.extend(q.render().as_bytes());
            }
            for c in &out.candidates {
                bytes.extend(serde_json::to_vec(&CandidateRecord::from(c)).unwrap());
                bytes.push(b'\n');
            }
        }
        (bytes, counts, linked, verbatim)
    };
    let (a, counts, linked, verbatim) = run();
    let (b, _, _, _) = run();
    let full = counts.iter().all(|&c| c == K);
    outcome(
        full && linked && verbatim && a == b,
        format!("candidates per doc {counts:?}, plan-linked {linked}, verbatim instruction {verbatim}, identical reruns {}", a == b),
    )
}

fn guarded(f: impl FnOnce() -> Outcome) -> Outcome {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(o) => o,
        Err(e) => {
            let msg = e.downcast_ref::<String>().cloned().or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()));
            outcome(false, format!("panicked: {}", msg.unwrap_or_default()))
        }
    }
}

fn main() -> ExitCode {
    let start = Instant::now();
    let mut lines: Vec<(u8, &str, bool, Outcome)> = vec![
        (1, "rouge agrees with naive counting", true, guarded(rouge_agreement)),
        (2, "greedy oracle takes maximal gains", true, guarded(greedy_verification)),
        (3, "gradient checks", true, guarded(gradient_checks)),
        (4, "planner masking", true, guarded(masking_soundness)),
        (6, "overfit fidelity", true, guarded(overfit_fidelity)),
    ];
    match catch_unwind(Pipeline::build) {
        Ok(p) => {
            lines.push((5, "sixteen distinct plans per document", true, guarded(|| uniqueness_by_construction(&p))));
            lines.push((7, "unlikelihood improves plan adherence", false, guarded(|| adherence_direction(&p))));
            match catch_unwind(AssertUnwindSafe(|| ranked_sets(&p))) {
                Ok(r) => {
                    lines.push((8, "pga beats beam search after re-ranking", false, guarded(|| pga_versus_beam(&r))));
                    let (examples, tau) = reranker_contract(&r);
                    lines.push((9, "margin loss examples", true, examples));
                    lines.push((9, "re-ranker agrees with rouge", false, tau));
                }
                Err(_) => {
                    for (id, name) in [(8, "pga beats beam search after re-ranking"), (9, "re-ranker")] {
                        lines.push((id, name, true, outcome(false, "candidate generation panicked".into())));
                    }
                }
            }
            lines.push((10, "llm replay is deterministic", true, guarded(|| llm_replay(&p))));
        }
        Err(_) => {
            for (id, name) in [(5, "distinct plans"), (7, "adherence"), (8, "pga vs beam"), (9, "re-ranker"), (10, "llm replay")] {
                lines.push((id, name, true, outcome(false, "pipeline training panicked".into())));
            }
        }
    }
    lines.sort_by_key(|l| l.0);
    let mut contract_failures = 0;
    for (id, name, contract, o) in &lines {
        let tag = if o.pass { "PASS" } else { "FAIL" };
        let kind = if *contract { "contract" } else { "directional" };
        println!("criterion {id:>2} [{tag}] {name} ({kind}): {}", o.detail);
        contract_failures += usize::from(*contract && !o.pass);
    }
    let passed = lines.iter().filter(|l| l.3.pass).count();
    println!("acceptance: {passed}/{} checks passed in {:.0}s", lines.len(), start.elapsed().as_secs_f64());
    if contract_failures > 0 {
        ExitCode::FAILURE
    } else {
        ExitCode::SUCCESS
    }
}
