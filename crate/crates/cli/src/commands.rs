use std::collections::HashMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Duration;

use anyhow::{Context, Result};
use log::{info, warn};
use planguide::abstractor::{
    self, generate_candidates, Abstractor, AbstractorTrainConfig, Candidate, CandidateRecord, Method,
};
use planguide::analysis::{report, QuartileKey, SetInput};
use planguide::corpus::{read_jsonl, write_jsonl, CorpusError, Document, DocumentRecord};
use planguide::llm::{
    self, baseline_prompts, focused_prompts, BaselineMode, ChatClient, EchoClient, ExemplarPool, HttpClient, Recorder,
    ReplayClient,
};
use planguide::planner::{self, Planner};
use planguide::plans::{greedy_oracle, ContentPlan, PlanRecord, DEFAULT_MAX_PLAN_LEN};
use planguide::reranker::{rank_example, train_reranker, Reranker};
use planguide::seq2seq::{Checkpoint, ModelConfig, Seq2SeqError, Vocab};
use planguide::synth;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::config::{Paths, RunConfig};
use crate::failure::{Failure, Kind};
use crate::stamp::Stamp;
use crate::{Command, Common, GenMethod, LlmMode, QuartileFlag};

#[derive(Debug)]
pub struct Status {
    pub status: &'static str,
    pub outputs: Vec<String>,
    pub summary: Value,
}

/// Fills path arguments left unset from the configuration.
fn resolve(command: &mut Command, paths: &Paths) {
    fn fill(slot: &mut Option<PathBuf>, default: &Option<PathBuf>) {
        if slot.is_none() {
            slot.clone_from(default);
        }
    }
    match command {
        Command::Synth { .. } | Command::Segment { .. } => {}
        Command::Oracle { corpus } => fill(corpus, &paths.corpus),
        Command::TrainPlanner { corpus, abstractor } => {
            fill(corpus, &paths.corpus);
            fill(abstractor, &paths.abstractor);
        }
        Command::TrainAbstractor { corpus, validation, .. } => {
            fill(corpus, &paths.corpus);
            fill(validation, &paths.validation);
        }
        Command::TrainReranker { corpus, abstractor, .. } => {
            fill(corpus, &paths.corpus);
            fill(abstractor, &paths.abstractor);
        }
        Command::Generate { method, corpus, abstractor, planner, .. } => {
            fill(corpus, &paths.corpus);
            fill(abstractor, &paths.abstractor);
            if *method == GenMethod::Pga {
                fill(planner, &paths.planner);
            }
        }
        Command::Rerank { corpus, reranker, .. } => {
            fill(corpus, &paths.corpus);
            fill(reranker, &paths.reranker);
        }
        Command::Analyze { corpus, .. } => fill(corpus, &paths.corpus),
        Command::Llm { mode, corpus, exemplars, plans, planner, .. } => {
            fill(corpus, &paths.corpus);
            fill(exemplars, &paths.exemplars);
            if *mode == LlmMode::Focused && plans.is_none() {
                fill(planner, &paths.planner);
            }
        }
    }
}

fn required(slot: &Option<PathBuf>, flag: &str) -> Result<PathBuf, Failure> {
    slot.clone().ok_or_else(|| Failure::new(Kind::Usage, format!("{flag} is required (or set it under \"paths\" in the config)")))
}

/// Input files, output paths and whether the first output is a directory.
fn io_of(command: &Command, common: &Common) -> Result<(Vec<PathBuf>, Vec<PathBuf>, bool), Failure> {
    let out = common.out.clone().ok_or_else(|| Failure::new(Kind::Usage, "--out is required"))?;
    let mut inputs = Vec::new();
    let mut outputs = vec![out];
    let mut dir = false;
    match command {
        Command::Synth { .. } => {}
        Command::Segment { input, .. } => inputs.push(input.clone()),
        Command::Oracle { corpus } => inputs.push(required(corpus, "--corpus")?),
        Command::TrainPlanner { corpus, abstractor } => {
            inputs.push(required(corpus, "--corpus")?);
            inputs.extend(abstractor.clone());
        }
        Command::TrainAbstractor { corpus, validation, .. } => {
            inputs.push(required(corpus, "--corpus")?);
            inputs.extend(validation.clone());
        }
        Command::TrainReranker { corpus, abstractor, candidates } => {
            inputs.push(required(corpus, "--corpus")?);
            inputs.push(required(abstractor, "--abstractor")?);
            inputs.extend(candidates.iter().cloned());
        }
        Command::Generate { method, corpus, abstractor, planner, plans_out } => {
            inputs.push(required(corpus, "--corpus")?);
            inputs.push(required(abstractor, "--abstractor")?);
            if *method == GenMethod::Pga {
                inputs.push(required(planner, "--planner")?);
                outputs.extend(plans_out.clone());
            } else if plans_out.is_some() {
                return Err(Failure::new(Kind::Usage, "--plans-out only applies to --method pga"));
            }
        }
        Command::Rerank { corpus, reranker, candidates } => {
            inputs.push(required(corpus, "--corpus")?);
            inputs.push(required(reranker, "--reranker")?);
            inputs.extend(candidates.iter().cloned());
        }
        Command::Analyze { corpus, candidates, .. } => {
            inputs.push(required(corpus, "--corpus")?);
            inputs.extend(candidates.iter().cloned());
            dir = true;
        }
        Command::Llm { mode, corpus, exemplars, plans, planner, replay, .. } => {
            inputs.push(required(corpus, "--corpus")?);
            inputs.push(required(exemplars, "--exemplars")?);
            if *mode == LlmMode::Focused {
                match (plans, planner) {
                    (Some(p), _) => inputs.push(p.clone()),
                    (None, Some(p)) => inputs.push(p.clone()),
                    (None, None) => return Err(Failure::new(Kind::Usage, "focused prompts need --plans or --planner")),
                }
            }
            inputs.extend(replay.clone());
        }
    }
    if let Some(missing) = inputs.iter().find(|p| !p.exists()) {
        return Err(Failure::new(Kind::MissingInput, format!("{} does not exist", missing.display())));
    }
    Ok((inputs, outputs, dir))
}

pub fn run(mut command: Command, common: &Common, cfg: RunConfig) -> Result<Status> {
    resolve(&mut command, &cfg.paths);
    let (inputs, outputs, dir) = io_of(&command, common)?;
    let args = serde_json::to_value(&command).context("serializing arguments")?;
    let cfg_json = serde_json::to_value(&cfg).context("serializing configuration")?;
    let stamp = Stamp::new(command.name(), &args, &cfg_json, &inputs, &outputs, dir)?;
    let shown: Vec<String> = outputs.iter().map(|p| p.display().to_string()).collect();
    if !common.force && stamp.is_current() {
        info!("outputs are up to date; pass --force to rebuild");
        return Ok(Status { status: "skipped", outputs: shown, summary: json!({}) });
    }
    stamp.clear();
    for o in &outputs {
        let parent = if dir { Some(o.as_path()) } else { o.parent() };
        if let Some(p) = parent.filter(|p| !p.as_os_str().is_empty()) {
            fs::create_dir_all(p).map_err(|e| Failure::new(Kind::Io, format!("{}: {e}", p.display())))?;
        }
    }
    let summary = execute(&command, &cfg, &outputs)?;
    stamp.write()?;
    Ok(Status { status: "ok", outputs: shown, summary })
}

fn execute(command: &Command, cfg: &RunConfig, outputs: &[PathBuf]) -> Result<Value> {
    let out = &outputs[0];
    match command {
        Command::Synth { docs } => synth_corpus(cfg, *docs, out),
        Command::Segment { input, min_tokens } => segment(input, *min_tokens, out),
        Command::Oracle { corpus } => oracle(&path(corpus), out),
        Command::TrainAbstractor { corpus, validation, no_unlikelihood } => {
            train_abstractor(cfg, &path(corpus), validation.as_deref(), *no_unlikelihood, out)
        }
        Command::TrainPlanner { corpus, abstractor } => train_planner(cfg, &path(corpus), abstractor.as_deref(), out),
        Command::TrainReranker { corpus, abstractor, candidates } => {
            train_rerank(cfg, &path(corpus), &path(abstractor), candidates, out)
        }
        Command::Generate { method, corpus, abstractor, planner, .. } => {
            generate(cfg, *method, &path(corpus), &path(abstractor), planner.as_deref(), out, outputs.get(1))
        }
        Command::Rerank { corpus, reranker, candidates } => rerank(&path(corpus), &path(reranker), candidates, out),
        Command::Analyze { corpus, candidates, quartile_key } => analyze(cfg, &path(corpus), candidates, *quartile_key, out),
        Command::Llm { .. } => prompt_llm(cfg, command, out),
    }
}

/// Unwraps a path already checked by `io_of`.
fn path(p: &Option<PathBuf>) -> PathBuf {
    p.clone().expect("checked by io_of")
}

fn io_failure(path: &Path, e: impl std::fmt::Display) -> Failure {
    Failure::new(Kind::Io, format!("{}: {e}", path.display()))
}

fn corpus_failure(path: &Path, e: CorpusError) -> Failure {
    match e {
        CorpusError::Io(e) => io_failure(path, e),
        other => Failure::new(Kind::SchemaViolation, format!("{}: {other}", path.display())),
    }
}

fn load_docs(path: &Path) -> Result<Vec<Document>, Failure> {
    let docs = planguide::corpus::load_jsonl(path).map_err(|e| corpus_failure(path, e))?;
    if docs.is_empty() {
        return Err(Failure::new(Kind::SchemaViolation, format!("{} holds no documents", path.display())));
    }
    Ok(docs)
}

fn load_records<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>, Failure> {
    read_jsonl(path).map_err(|e| corpus_failure(path, e))
}

fn save_records<T: Serialize>(path: &Path, records: &[T]) -> Result<(), Failure> {
    write_jsonl(path, records).map_err(|e| corpus_failure(path, e))
}

fn load_checkpoint(path: &Path, kind: &str) -> Result<Checkpoint, Failure> {
    let ck = Checkpoint::load(path).map_err(|e| match e {
        Seq2SeqError::Io(e) => io_failure(path, e),
        other => Failure::new(Kind::SchemaViolation, format!("{}: {other}", path.display())),
    })?;
    if ck.kind != kind {
        return Err(Failure::new(
            Kind::CheckpointMismatch,
            format!("{} is a checkpoint of kind `{}`, expected `{kind}`", path.display(), ck.kind),
        ));
    }
    Ok(ck)
}

fn mismatch(path: &Path, e: impl std::fmt::Display) -> Failure {
    Failure::new(Kind::CheckpointMismatch, format!("{}: {e}", path.display()))
}

fn load_abstractor(path: &Path) -> Result<Abstractor, Failure> {
    Abstractor::from_checkpoint(load_checkpoint(path, abstractor::CHECKPOINT_KIND)?).map_err(|e| mismatch(path, e))
}

fn load_planner(path: &Path) -> Result<Planner, Failure> {
    Planner::from_checkpoint(load_checkpoint(path, planner::CHECKPOINT_KIND)?).map_err(|e| mismatch(path, e))
}

fn save_checkpoint(ck: &Checkpoint, path: &Path) -> Result<(), Failure> {
    ck.save(path).map_err(|e| io_failure(path, e))
}

fn corpus_vocab(docs: &[Document]) -> Vocab {
    let mut tokens = Vec::new();
    for d in docs {
        tokens.extend(d.all_tokens());
        tokens.extend(d.reference_tokens().unwrap_or_default());
    }
    Vocab::build(&tokens)
}

fn model_config(cfg: &RunConfig, vocab: &Vocab) -> Result<ModelConfig, Failure> {
    let m = ModelConfig { vocab_size: vocab.len(), seed: cfg.seed, ..cfg.model.clone() };
    m.validate().map_err(|e| Failure::new(Kind::InvalidConfig, e.to_string()))?;
    Ok(m)
}

fn by_id(docs: &[Document]) -> HashMap<&str, &Document> {
    docs.iter().map(|d| (d.id.as_str(), d)).collect()
}

fn lookup<'a>(docs: &HashMap<&str, &'a Document>, id: &str, source: &Path) -> Result<&'a Document, Failure> {
    docs.get(id).copied().ok_or_else(|| {
        Failure::new(Kind::SchemaViolation, format!("{}: document {id} is not in the corpus", source.display()))
    })
}

fn mean_tail(losses: &[f64], n: usize) -> Option<f64> {
    let tail = &losses[losses.len().saturating_sub(n)..];
    (!tail.is_empty()).then(|| tail.iter().sum::<f64>() / tail.len() as f64)
}

fn synth_corpus(cfg: &RunConfig, docs: Option<usize>, out: &Path) -> Result<Value> {
    let mut sc = cfg.synth.clone();
    sc.seed = cfg.seed;
    sc.docs = docs.unwrap_or(sc.docs);
    let records: Vec<DocumentRecord> = synth::generate(&sc).into_iter().map(|d| d.record).collect();
    save_records(out, &records)?;
    Ok(json!({ "documents": records.len() }))
}

fn segment(input: &Path, min_tokens: usize, out: &Path) -> Result<Value> {
    let records: Vec<DocumentRecord> = load_records(input)?;
    let mut segmented = Vec::with_capacity(records.len());
    let mut units = 0;
    for r in records {
        let id = r.id.clone();
        let doc = r
            .into_document(min_tokens)
            .map_err(|e| Failure::new(Kind::SchemaViolation, format!("{}: document {id}: {e}", input.display())))?;
        units += doc.num_edus();
        segmented.push(DocumentRecord::from(&doc));
    }
    save_records(out, &segmented)?;
    Ok(json!({ "documents": segmented.len(), "units": units }))
}

fn oracle(corpus: &Path, out: &Path) -> Result<Value> {
    let docs = load_docs(corpus)?;
    let mut plans = Vec::new();
    for doc in &docs {
        let Some(reference) = doc.reference_tokens() else {
            warn!("document {} has no reference; skipped", doc.id);
            continue;
        };
        let plan = greedy_oracle(doc, &reference, DEFAULT_MAX_PLAN_LEN).with_context(|| format!("oracle for {}", doc.id))?;
        plans.push(PlanRecord::new(&doc.id, &plan, None));
    }
    save_records(out, &plans)?;
    Ok(json!({ "plans": plans.len(), "skipped": docs.len() - plans.len() }))
}

fn train_abstractor(cfg: &RunConfig, corpus: &Path, validation: Option<&Path>, no_unlikelihood: bool, out: &Path) -> Result<Value> {
    let docs = load_docs(corpus)?;
    let vocab = corpus_vocab(&docs);
    let mut abs = Abstractor::new(vocab.clone(), model_config(cfg, &vocab)?)?;
    let examples = abstractor::build_examples(&docs, &vocab, cfg.seed);
    if examples.is_empty() {
        return Err(Failure::new(Kind::SchemaViolation, "no document has a reference with a non-empty oracle plan").into());
    }
    let held_out: Vec<(Document, ContentPlan)> = match validation {
        None => Vec::new(),
        Some(p) => load_docs(p)?
            .into_iter()
            .filter_map(|d| {
                let plan = greedy_oracle(&d, &d.reference_tokens()?, DEFAULT_MAX_PLAN_LEN).ok()?;
                (!plan.is_empty()).then_some((d, plan))
            })
            .collect(),
    };
    let mut train = cfg.abstractor_train.clone();
    train.seed = cfg.seed;
    if !held_out.is_empty() && train.eval_every == 0 {
        train.eval_every = (train.steps / 8).max(1);
    }
    let mut weights = cfg.guided_weights();
    weights.unlikelihood &= !no_unlikelihood;
    let tc = AbstractorTrainConfig { train, weights, max_len: cfg.validation_max_len };
    info!("training the abstractor on {} examples", examples.len());
    let report = abstractor::train_abstractor(&mut abs, &examples, &held_out, &tc)?;
    save_checkpoint(&abs.checkpoint(), out)?;
    Ok(json!({
        "examples": examples.len(),
        "steps": report.losses.len(),
        "skipped_steps": report.skipped,
        "final_loss": mean_tail(&report.losses, 20),
        "best": report.best,
        "weights": weights,
    }))
}

fn train_planner(cfg: &RunConfig, corpus: &Path, abstractor: Option<&Path>, out: &Path) -> Result<Value> {
    let docs = load_docs(corpus)?;
    let init = abstractor.map(load_abstractor).transpose()?;
    let vocab = init.as_ref().map_or_else(|| corpus_vocab(&docs), |a| a.vocab.clone());
    let mut p = Planner::new(vocab.clone(), model_config(cfg, &vocab)?, cfg.plan_order)?;
    let mut copied = 0;
    if let (Some(abs), true) = (&init, cfg.init_planner_from_abstractor) {
        copied = p.init_token_encoder_from(&abs.params);
        if copied == 0 {
            return Err(Failure::new(
                Kind::ConfigMismatch,
                "the abstractor's encoder does not match the planner's dimensions; align \"model\" or disable init_planner_from_abstractor",
            )
            .into());
        }
    }
    let examples = planner::build_examples(&p, &docs);
    if examples.is_empty() {
        return Err(Failure::new(Kind::SchemaViolation, "no document yields a planner training example").into());
    }
    let mut train = cfg.planner_train.clone();
    train.seed = cfg.seed;
    info!("training the planner on {} examples", examples.len());
    let report = planner::train_planner(&mut p, &examples, &train)?;
    save_checkpoint(&p.checkpoint(), out)?;
    Ok(json!({
        "examples": examples.len(),
        "initialized_tensors": copied,
        "steps": report.losses.len(),
        "final_loss": mean_tail(&report.losses, 20),
    }))
}

/// Candidate sets keyed by (document, method) in first-appearance order.
fn candidate_sets(files: &[PathBuf]) -> Result<Vec<(PathBuf, String, Method, Vec<Candidate>)>, Failure> {
    let mut sets: Vec<(PathBuf, String, Method, Vec<Candidate>)> = Vec::new();
    let mut index: HashMap<(String, Method), usize> = HashMap::new();
    for f in files {
        for r in load_records::<CandidateRecord>(f)? {
            let key = (r.doc_id.clone(), r.method);
            let i = *index.entry(key).or_insert_with(|| {
                sets.push((f.clone(), r.doc_id.clone(), r.method, Vec::new()));
                sets.len() - 1
            });
            sets[i].3.push(r.into_candidate());
        }
    }
    for s in &mut sets {
        s.3.sort_by_key(|c| c.beam_index);
    }
    Ok(sets)
}

fn train_rerank(cfg: &RunConfig, corpus: &Path, abstractor: &Path, candidates: &[PathBuf], out: &Path) -> Result<Value> {
    let docs = load_docs(corpus)?;
    let ids = by_id(&docs);
    let abs = load_abstractor(abstractor)?;
    let mut rr = Reranker::from_abstractor(&abs, cfg.rerank)?;
    let mut examples = Vec::new();
    let sets = candidate_sets(candidates)?;
    for (file, doc_id, _, cands) in &sets {
        let doc = lookup(&ids, doc_id, file)?;
        examples.extend(rank_example(&rr, doc, cands)?);
    }
    if examples.is_empty() {
        return Err(Failure::new(Kind::SchemaViolation, "no candidate set has two distinct scorable candidates").into());
    }
    let mut train = cfg.reranker_train.clone();
    train.seed = cfg.seed;
    info!("training the re-ranker on {} of {} candidate sets", examples.len(), sets.len());
    let report = train_reranker(&mut rr, &examples, &train)?;
    save_checkpoint(&rr.checkpoint(), out)?;
    Ok(json!({
        "sets": examples.len(),
        "steps": report.losses.len(),
        "first_loss": report.losses.first(),
        "final_loss": mean_tail(&report.losses, 20),
        "rerank": cfg.rerank,
    }))
}

fn method_of(m: GenMethod) -> Method {
    match m {
        GenMethod::Pga => Method::Pga,
        GenMethod::Beam => Method::Beam,
        GenMethod::DiverseBeam => Method::DiverseBeam,
        GenMethod::Nucleus => Method::Nucleus,
    }
}

fn generate(
    cfg: &RunConfig,
    method: GenMethod,
    corpus: &Path,
    abstractor: &Path,
    planner: Option<&Path>,
    out: &Path,
    plans_out: Option<&PathBuf>,
) -> Result<Value> {
    let docs = load_docs(corpus)?;
    let abs = load_abstractor(abstractor)?;
    let planner = planner.map(load_planner).transpose()?;
    let mut gc = cfg.generate.clone();
    gc.baseline_decode.rng_seed = cfg.seed;
    let method = method_of(method);
    let mut records = Vec::new();
    let mut plans = Vec::new();
    let mut skipped = Vec::new();
    let mut short = 0;
    for doc in &docs {
        let set = match generate_candidates(planner.as_ref(), &abs, doc, method, &gc) {
            Ok(s) => s,
            Err(e) => {
                warn!("document {}: {e}; skipped", doc.id);
                skipped.push(json!({ "doc_id": doc.id, "reason": e.to_string() }));
                continue;
            }
        };
        for w in &set.warnings {
            warn!("document {}: {w}", doc.id);
        }
        short += usize::from(set.candidates.len() < gc.k);
        for c in &set.candidates {
            records.push(CandidateRecord::from(c));
            if let Some(p) = &c.plan {
                plans.push(PlanRecord::new(&doc.id, p, Some(c.beam_index)));
            }
        }
    }
    save_records(out, &records)?;
    if let Some(p) = plans_out {
        save_records(p, &plans)?;
    }
    Ok(json!({
        "method": method,
        "documents": docs.len() - skipped.len(),
        "candidates": records.len(),
        "short_sets": short,
        "skipped": skipped,
    }))
}

fn rerank(corpus: &Path, reranker: &Path, candidates: &[PathBuf], out: &Path) -> Result<Value> {
    let docs = load_docs(corpus)?;
    let ids = by_id(&docs);
    let rr = Reranker::from_checkpoint(load_checkpoint(reranker, planguide::reranker::CHECKPOINT_KIND)?)
        .map_err(|e| mismatch(reranker, e))?;
    let mut records = Vec::new();
    let sets = candidate_sets(candidates)?;
    for (file, doc_id, _, cands) in &sets {
        let doc = lookup(&ids, doc_id, file)?;
        records.extend(rr.rank(doc, cands)?.records());
    }
    save_records(out, &records)?;
    Ok(json!({ "sets": sets.len(), "candidates": records.len() }))
}

/// A candidate line that may carry a rank from `rerank`.
#[derive(Debug, Deserialize)]
struct AnalyzedLine {
    #[serde(flatten)]
    candidate: CandidateRecord,
    #[serde(default)]
    rank: Option<usize>,
}

fn analyze(cfg: &RunConfig, corpus: &Path, files: &[PathBuf], key: Option<QuartileFlag>, out: &Path) -> Result<Value> {
    let docs = load_docs(corpus)?;
    let ids = by_id(&docs);
    let key = match key {
        Some(QuartileFlag::SourceUnits) => QuartileKey::SourceUnits,
        Some(QuartileFlag::SummaryLength) => QuartileKey::SummaryLength,
        None => cfg.quartile_key,
    };
    let mut inputs: Vec<(String, Vec<SetInput>)> = Vec::new();
    for f in files {
        let lines: Vec<AnalyzedLine> = load_records(f)?;
        let Some(first) = lines.first() else {
            warn!("{} holds no candidates; skipped", f.display());
            continue;
        };
        let method = first.candidate.method;
        if lines.iter().any(|l| l.candidate.method != method) {
            return Err(Failure::new(Kind::SchemaViolation, format!("{} mixes methods; pass one file per method", f.display())).into());
        }
        let mut label = method.to_string();
        if inputs.iter().any(|(m, _)| *m == label) {
            label = f.file_stem().map_or(label, |s| s.to_string_lossy().into_owned());
        }
        let mut order: Vec<String> = Vec::new();
        let mut by_doc: HashMap<String, Vec<(Candidate, Option<usize>)>> = HashMap::new();
        for l in lines {
            let id = l.candidate.doc_id.clone();
            if !by_doc.contains_key(&id) {
                order.push(id.clone());
            }
            by_doc.entry(id).or_default().push((l.candidate.into_candidate(), l.rank));
        }
        let mut sets = Vec::new();
        for id in order {
            let mut cands = by_doc.remove(&id).expect("grouped above");
            cands.sort_by_key(|(c, _)| c.beam_index);
            let top = cands.iter().position(|(_, r)| *r == Some(1));
            let doc = lookup(&ids, &id, f)?;
            sets.push(SetInput { doc: doc.clone(), candidates: cands.into_iter().map(|(c, _)| c).collect(), top });
        }
        inputs.push((label, sets));
    }
    let r = report(&inputs, key)?;
    let written = r.write_csv(out)?;
    Ok(json!({
        "methods": inputs.iter().map(|(m, s)| json!({ "method": m, "sets": s.len() })).collect::<Vec<_>>(),
        "tables": written.iter().map(|p| p.display().to_string()).collect::<Vec<_>>(),
    }))
}

fn llm_failure(e: impl std::fmt::Display) -> Failure {
    Failure::new(Kind::LlmFailure, e.to_string())
}

fn chat_client(cfg: &RunConfig, replay: Option<&Path>, endpoint: Option<&str>, record: Option<&Path>, echo: bool) -> Result<Box<dyn ChatClient>, Failure> {
    let endpoint = endpoint.or(cfg.llm.endpoint.as_deref());
    let chosen = usize::from(echo) + usize::from(replay.is_some()) + usize::from(endpoint.is_some() && replay.is_none() && !echo);
    if chosen == 0 {
        return Err(Failure::new(Kind::Usage, "choose a client: --replay FILE, --endpoint URL or --echo"));
    }
    if echo && replay.is_some() {
        return Err(Failure::new(Kind::Usage, "--echo and --replay are exclusive"));
    }
    if echo {
        return Ok(Box::new(EchoClient));
    }
    if let Some(path) = replay {
        let client = ReplayClient::load(path).map_err(|e| Failure::new(Kind::SchemaViolation, format!("{}: {e}", path.display())))?;
        return Ok(Box::new(client));
    }
    let url = endpoint.expect("counted above");
    let http = HttpClient::from_env(url, Duration::from_secs(cfg.llm.timeout_secs)).map_err(|e| match e {
        llm::LlmError::MissingCredential(_) => Failure::new(Kind::MissingInput, e.to_string()),
        other => llm_failure(other),
    })?;
    Ok(match record {
        Some(path) => Box::new(Recorder::new(http, path)),
        None => Box::new(http),
    })
}

fn prompt_llm(cfg: &RunConfig, command: &Command, out: &Path) -> Result<Value> {
    let Command::Llm { mode, corpus, exemplars, plans, planner, replay, endpoint, record, echo } = command else {
        unreachable!("dispatched on Llm")
    };
    let docs = load_docs(&path(corpus))?;
    let pool = ExemplarPool::from_docs(&load_docs(&path(exemplars))?).map_err(llm_failure)?;
    let client = chat_client(cfg, replay.as_deref(), endpoint.as_deref(), record.as_deref(), *echo)?;
    let k = cfg.generate.k;
    let plan_file: Option<HashMap<String, Vec<PlanRecord>>> = match (mode, plans) {
        (LlmMode::Focused, Some(p)) => {
            let mut grouped: HashMap<String, Vec<PlanRecord>> = HashMap::new();
            for r in load_records::<PlanRecord>(p)? {
                grouped.entry(r.doc_id.clone()).or_default().push(r);
            }
            Some(grouped)
        }
        _ => None,
    };
    let planner = match (mode, plans, planner) {
        (LlmMode::Focused, None, Some(p)) => Some(load_planner(p)?),
        _ => None,
    };
    let llm_cfg = cfg.llm_config();
    let sleep = |d: Duration| std::thread::sleep(d);
    let mut records = Vec::new();
    let (mut invalid, mut failed, mut prompts_sent) = (0, Vec::new(), 0);
    for doc in &docs {
        let prompts = match mode {
            LlmMode::Focused => {
                let doc_plans: Vec<ContentPlan> = if let Some(grouped) = &plan_file {
                    let mut rs = grouped.get(&doc.id).cloned().unwrap_or_default();
                    rs.sort_by_key(|r| r.beam.unwrap_or(0));
                    rs.iter().take(k).map(PlanRecord::plan).collect()
                } else {
                    let p = planner.as_ref().expect("planner or plan file");
                    let d = planguide::seq2seq::DecodeConfig { num_candidates: k, ..cfg.generate.plan_decode.clone() };
                    p.generate_plans(doc, &d, false)?.plans
                };
                if doc_plans.is_empty() {
                    warn!("document {} has no plans; skipped", doc.id);
                    continue;
                }
                focused_prompts(doc, &doc_plans, &pool, cfg.seed).map_err(llm_failure)?
            }
            LlmMode::Single => baseline_prompts(doc, BaselineMode::Single, k, &pool, cfg.seed).map_err(llm_failure)?,
            LlmMode::Temperature => baseline_prompts(doc, BaselineMode::Temperature, k, &pool, cfg.seed).map_err(llm_failure)?,
            LlmMode::Nucleus => baseline_prompts(doc, BaselineMode::Nucleus, k, &pool, cfg.seed).map_err(llm_failure)?,
        };
        prompts_sent += prompts.len();
        let got = llm::prompt_candidates(client.as_ref(), &prompts, &llm_cfg, &sleep).map_err(llm_failure)?;
        for w in &got.warnings {
            warn!("document {}: {w}", doc.id);
        }
        for (i, why) in &got.invalid {
            warn!("document {} prompt {i}: invalid response ({why})", doc.id);
        }
        invalid += got.invalid.len();
        failed.extend(got.errors.iter().map(|(i, e)| format!("{} prompt {i}: {e}", doc.id)));
        records.extend(got.candidates.iter().map(CandidateRecord::from));
    }
    save_records(out, &records)?;
    if !failed.is_empty() {
        return Err(llm_failure(format!("{} of {prompts_sent} requests failed; first: {}", failed.len(), failed[0])).into());
    }
    Ok(json!({ "mode": mode, "prompts": prompts_sent, "candidates": records.len(), "invalid": invalid }))
}
