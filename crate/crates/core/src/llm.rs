//! Few-shot prompting of a chat-completion model with unit-tagged articles.
//!
//! All network access sits behind [`ChatClient`]. [`ReplayClient`] answers
//! from a JSONL cache keyed by the SHA-256 of the request body, so the whole
//! pipeline runs offline and deterministically.

use std::collections::HashMap;
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::Mutex;
use std::thread;
use std::time::Duration;

use log::warn;
use rand::seq::{IndexedRandom, SliceRandom};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::abstractor::{Candidate, Method};
use crate::corpus::{tokenize, Document};
use crate::plans::{greedy_oracle, ContentPlan, PlanError, DEFAULT_MAX_PLAN_LEN};

pub const FOCUSED_INSTRUCTION: &str =
    "Summarize the content in between the HTML tags <e> and </e> in one to three sentences.";
pub const UNFOCUSED_INSTRUCTION: &str = "Summarize the article in three sentences.";
pub const DEFAULT_EXEMPLARS: usize = 3;
pub const FOCUSED_TEMPERATURE: f64 = 0.3;
pub const SAMPLING_TEMPERATURE: f64 = 0.7;
pub const NUCLEUS_TOP_P: f64 = 0.8;
/// Environment variable holding the API key of [`HttpClient`].
pub const API_KEY_VAR: &str = "PLANGUIDE_LLM_API_KEY";

#[derive(Debug, Error)]
pub enum LlmError {
    #[error("transport failure: {0}")]
    Transport(String),
    #[error("rate limited")]
    RateLimited,
    #[error("malformed response: {0}")]
    Malformed(String),
    #[error("no recorded response for request {0}")]
    ReplayMiss(String),
    #[error("environment variable {0} is not set")]
    MissingCredential(String),
    #[error("temperature must be positive, got {0}")]
    BadTemperature(f64),
    #[error(transparent)]
    Plan(#[from] PlanError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl LlmError {
    fn retryable(&self) -> bool {
        matches!(self, LlmError::Transport(_) | LlmError::RateLimited)
    }
}

/// Article text with `<e>` and `</e>` around every unit of `plan`. The
/// original text between units is kept as is.
pub fn decorate_text(doc: &Document, plan: &ContentPlan) -> Result<String, PlanError> {
    plan.validate(doc.num_edus())?;
    let mut out = String::with_capacity(doc.text.len() + 8 * plan.len());
    let mut cursor = 0;
    for e in &doc.edus {
        if !plan.contains(e.index) {
            continue;
        }
        out.push_str(&doc.text[cursor..e.char_start]);
        out.push_str("<e>");
        out.push_str(&doc.text[e.range()]);
        out.push_str("</e>");
        cursor = e.char_end;
    }
    out.push_str(&doc.text[cursor..]);
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Exemplar {
    #[serde(default)]
    pub doc_id: String,
    pub document: String,
    pub summary: String,
}

/// Training documents with references and oracle plans to draw exemplars
/// from.
#[derive(Debug, Clone, Default)]
pub struct ExemplarPool {
    pub focused: Vec<Exemplar>,
    pub plain: Vec<Exemplar>,
}

impl ExemplarPool {
    /// Documents without a reference are skipped.
    pub fn from_docs(docs: &[Document]) -> Result<Self, LlmError> {
        let mut pool = Self::default();
        for doc in docs {
            let (Some(reference), Some(tokens)) = (doc.reference.clone(), doc.reference_tokens()) else { continue };
            let oracle = greedy_oracle(doc, &tokens, DEFAULT_MAX_PLAN_LEN)?;
            let id = doc.id.clone();
            pool.focused.push(Exemplar { doc_id: id.clone(), document: decorate_text(doc, &oracle)?, summary: reference.clone() });
            pool.plain.push(Exemplar { doc_id: id, document: doc.text.clone(), summary: reference });
        }
        Ok(pool)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PromptSpec {
    pub doc_id: String,
    pub instruction: String,
    pub exemplars: Vec<Exemplar>,
    pub target: String,
    pub temperature: f64,
    pub top_p: Option<f64>,
    pub max_candidates: usize,
    /// Plan the target is decorated with; `None` for unfocused prompts.
    pub plan: Option<ContentPlan>,
}

impl PromptSpec {
    fn label(&self) -> &'static str {
        if self.plan.is_some() {
            "Focused Summary"
        } else {
            "Summary"
        }
    }

    /// The prompt text: instruction, exemplars, then the open target.
    pub fn render(&self) -> String {
        let label = self.label();
        let mut s = format!("{}\n\n", self.instruction);
        for ex in &self.exemplars {
            s.push_str(&format!("Article: {}\n{label}: {}\n\n", ex.document, ex.summary));
        }
        s.push_str(&format!("Article: {}\n{label}:", self.target));
        s
    }

    pub fn request(&self, model: &str) -> ChatRequest {
        ChatRequest { model: model.to_string(), prompt: self.render(), temperature: self.temperature, top_p: self.top_p }
    }
}

/// Seed for one prompt, derived from the run seed, document and prompt
/// index.
fn prompt_seed(seed: u64, doc_id: &str, index: usize) -> u64 {
    let mut h = Sha256::new();
    h.update(seed.to_le_bytes());
    h.update(doc_id.as_bytes());
    h.update((index as u64).to_le_bytes());
    u64::from_le_bytes(h.finalize()[..8].try_into().expect("8 bytes"))
}

/// `n` exemplars other than the target document itself.
fn draw(pool: &[Exemplar], target: &str, n: usize, seed: u64) -> Vec<Exemplar> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let others: Vec<&Exemplar> = pool.iter().filter(|e| e.doc_id != target).collect();
    let mut picked: Vec<Exemplar> = others.choose_multiple(&mut rng, n.min(others.len())).map(|e| (*e).clone()).collect();
    picked.shuffle(&mut rng);
    picked
}

/// Prompt for `doc` focused on `plan`. A null or empty plan gives the
/// unfocused instruction. `index` separates the exemplar draws of
/// different prompts for the same document.
pub fn build_prompt(
    doc: &Document,
    plan: &ContentPlan,
    pool: &ExemplarPool,
    seed: u64,
    index: usize,
) -> Result<PromptSpec, LlmError> {
    let focused = !plan.is_empty();
    let source = if focused { &pool.focused } else { &pool.plain };
    if source.is_empty() {
        warn!("empty exemplar pool; prompt for {} is zero-shot", doc.id);
    }
    Ok(PromptSpec {
        doc_id: doc.id.clone(),
        instruction: if focused { FOCUSED_INSTRUCTION } else { UNFOCUSED_INSTRUCTION }.to_string(),
        exemplars: draw(source, &doc.id, DEFAULT_EXEMPLARS, prompt_seed(seed, &doc.id, index)),
        target: decorate_text(doc, plan)?,
        temperature: FOCUSED_TEMPERATURE,
        top_p: None,
        max_candidates: 1,
        plan: focused.then(|| plan.clone()),
    })
}

/// One focused prompt per plan.
pub fn focused_prompts(doc: &Document, plans: &[ContentPlan], pool: &ExemplarPool, seed: u64) -> Result<Vec<PromptSpec>, LlmError> {
    plans.iter().enumerate().map(|(i, p)| build_prompt(doc, p, pool, seed, i)).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BaselineMode {
    Single,
    Temperature,
    Nucleus,
}

/// Unfocused prompts: one at the focused temperature, or `k` sampled at a
/// raised temperature or from a nucleus.
pub fn baseline_prompts(doc: &Document, mode: BaselineMode, k: usize, pool: &ExemplarPool, seed: u64) -> Result<Vec<PromptSpec>, LlmError> {
    let (n, temperature, top_p) = match mode {
        BaselineMode::Single => (1, FOCUSED_TEMPERATURE, None),
        BaselineMode::Temperature => (k, SAMPLING_TEMPERATURE, None),
        BaselineMode::Nucleus => (k, 1.0, Some(NUCLEUS_TOP_P)),
    };
    (0..n)
        .map(|i| {
            let p = build_prompt(doc, &ContentPlan::null(), pool, seed, i)?;
            Ok(PromptSpec { temperature, top_p, ..p })
        })
        .collect()
}

/// A chat-completion request with a single user message.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatRequest {
    pub model: String,
    pub prompt: String,
    pub temperature: f64,
    pub top_p: Option<f64>,
}

impl ChatRequest {
    /// JSON body in the common chat-completions shape.
    pub fn body(&self) -> Value {
        let mut b = json!({
            "model": self.model,
            "messages": [{ "role": "user", "content": self.prompt }],
            "temperature": self.temperature,
        });
        if let Some(p) = self.top_p {
            b["top_p"] = json!(p);
        }
        b
    }

    /// Hex SHA-256 of the serialized body; the replay cache key.
    pub fn key(&self) -> String {
        hex::encode(Sha256::digest(self.body().to_string().as_bytes()))
    }
}

pub trait ChatClient: Sync {
    fn complete(&self, request: &ChatRequest) -> Result<String, LlmError>;
}

/// Client for an OpenAI-style `/chat/completions` endpoint.
pub struct HttpClient {
    pub endpoint: String,
    api_key: String,
    agent: ureq::Agent,
}

impl HttpClient {
    /// Reads the key from [`API_KEY_VAR`].
    pub fn from_env(endpoint: &str, timeout: Duration) -> Result<Self, LlmError> {
        let api_key = std::env::var(API_KEY_VAR).map_err(|_| LlmError::MissingCredential(API_KEY_VAR.into()))?;
        let agent = ureq::Agent::config_builder().timeout_global(Some(timeout)).build().into();
        Ok(Self { endpoint: endpoint.to_string(), api_key, agent })
    }
}

/// Text of the first choice of a chat-completions response.
pub fn response_text(v: &Value) -> Result<String, LlmError> {
    v["choices"][0]["message"]["content"]
        .as_str()
        .map(str::to_string)
        .ok_or_else(|| LlmError::Malformed("missing choices[0].message.content".into()))
}

impl ChatClient for HttpClient {
    fn complete(&self, request: &ChatRequest) -> Result<String, LlmError> {
        let resp = self
            .agent
            .post(&self.endpoint)
            .header("Authorization", &format!("Bearer {}", self.api_key))
            .send_json(request.body());
        let mut resp = match resp {
            Ok(r) => r,
            Err(ureq::Error::StatusCode(429)) => return Err(LlmError::RateLimited),
            Err(ureq::Error::StatusCode(c)) if c >= 500 => return Err(LlmError::Transport(format!("status {c}"))),
            Err(ureq::Error::StatusCode(c)) => return Err(LlmError::Malformed(format!("status {c}"))),
            Err(e) => return Err(LlmError::Transport(e.to_string())),
        };
        let v: Value = resp.body_mut().read_json().map_err(|e| LlmError::Malformed(e.to_string()))?;
        response_text(&v)
    }
}

/// One line of a replay cache.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplayRecord {
    pub key: String,
    pub response: String,
}

/// Answers from recorded responses only.
#[derive(Debug, Clone, Default)]
pub struct ReplayClient {
    responses: HashMap<String, String>,
}

impl ReplayClient {
    pub fn load(path: &Path) -> Result<Self, LlmError> {
        let mut responses = HashMap::new();
        for line in BufReader::new(File::open(path)?).lines() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let r: ReplayRecord = serde_json::from_str(&line).map_err(|e| LlmError::Malformed(e.to_string()))?;
            responses.insert(r.key, r.response);
        }
        Ok(Self { responses })
    }

    pub fn len(&self) -> usize {
        self.responses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.responses.is_empty()
    }
}

impl ChatClient for ReplayClient {
    fn complete(&self, request: &ChatRequest) -> Result<String, LlmError> {
        let key = request.key();
        self.responses.get(&key).cloned().ok_or(LlmError::ReplayMiss(key))
    }
}

/// Forwards to `inner` and appends every successful response to a replay
/// cache file.
pub struct Recorder<C> {
    inner: C,
    path: PathBuf,
    lock: Mutex<()>,
}

impl<C: ChatClient> Recorder<C> {
    pub fn new(inner: C, path: &Path) -> Self {
        Self { inner, path: path.to_path_buf(), lock: Mutex::new(()) }
    }
}

impl<C: ChatClient> ChatClient for Recorder<C> {
    fn complete(&self, request: &ChatRequest) -> Result<String, LlmError> {
        let response = self.inner.complete(request)?;
        let line = serde_json::to_string(&ReplayRecord { key: request.key(), response: response.clone() })
            .map_err(|e| LlmError::Malformed(e.to_string()))?;
        let _guard = self.lock.lock().unwrap_or_else(|e| e.into_inner());
        let mut f = OpenOptions::new().create(true).append(true).open(&self.path)?;
        writeln!(f, "{line}")?;
        Ok(response)
    }
}

/// Offline stand-in that answers with the tagged spans of the target
/// article (or its first sentence when nothing is tagged).
#[derive(Debug, Clone, Copy, Default)]
pub struct EchoClient;

impl ChatClient for EchoClient {
    fn complete(&self, request: &ChatRequest) -> Result<String, LlmError> {
        let target = request.prompt.rsplit("Article: ").next().unwrap_or("");
        let target = target.rsplit_once('\n').map_or(target, |(t, _)| t);
        let spans: Vec<&str> = target.split("<e>").skip(1).filter_map(|s| s.split("</e>").next()).collect();
        if spans.is_empty() {
            return Ok(target.split_inclusive(". ").next().unwrap_or(target).trim().to_string());
        }
        Ok(spans.iter().map(|s| s.trim()).collect::<Vec<_>>().join(" "))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RetryPolicy {
    pub max_attempts: usize,
    pub base_delay_ms: u64,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        Self { max_attempts: 4, base_delay_ms: 500 }
    }
}

/// Calls `client` until success, a non-retryable error, or the attempt
/// budget runs out; the delay doubles after each retryable failure.
/// Returns the response and the number of failed attempts.
pub fn complete_with_retry(
    client: &dyn ChatClient,
    request: &ChatRequest,
    policy: &RetryPolicy,
    sleep: &dyn Fn(Duration),
) -> Result<(String, usize), LlmError> {
    let mut delay = policy.base_delay_ms;
    let mut failures = 0;
    loop {
        match client.complete(request) {
            Ok(r) => return Ok((r, failures)),
            Err(e) if e.retryable() && failures + 1 < policy.max_attempts.max(1) => {
                failures += 1;
                sleep(Duration::from_millis(delay));
                delay = delay.saturating_mul(2);
            }
            Err(e) => return Err(e),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LlmOutput {
    /// Valid candidates in prompt order.
    pub candidates: Vec<Candidate>,
    /// Prompt index and reason for responses excluded from ranking.
    pub invalid: Vec<(usize, String)>,
    /// Prompt index and message for requests that failed outright.
    pub errors: Vec<(usize, String)>,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LlmConfig {
    pub model: String,
    pub retry: RetryPolicy,
    pub max_in_flight: usize,
}

impl Default for LlmConfig {
    fn default() -> Self {
        Self { model: "gpt-3.5-turbo".into(), retry: RetryPolicy::default(), max_in_flight: 4 }
    }
}

/// Sends every prompt and collects one candidate per valid response,
/// preserving prompt order. Responses are trimmed; empty ones are invalid.
pub fn prompt_candidates(
    client: &dyn ChatClient,
    prompts: &[PromptSpec],
    cfg: &LlmConfig,
    sleep: &(dyn Fn(Duration) + Sync),
) -> Result<LlmOutput, LlmError> {
    if let Some(p) = prompts.iter().find(|p| p.temperature.is_nan() || p.temperature <= 0.0) {
        return Err(LlmError::BadTemperature(p.temperature));
    }
    let mut results: Vec<Option<Result<(String, usize), LlmError>>> = (0..prompts.len()).map(|_| None).collect();
    for (chunk_index, chunk) in prompts.chunks(cfg.max_in_flight.max(1)).enumerate() {
        let offset = chunk_index * cfg.max_in_flight.max(1);
        let done: Vec<_> = thread::scope(|s| {
            let handles: Vec<_> = chunk
                .iter()
                .map(|p| {
                    let req = p.request(&cfg.model);
                    s.spawn(move || complete_with_retry(client, &req, &cfg.retry, sleep))
                })
                .collect();
            handles.into_iter().map(|h| h.join().expect("request thread panicked")).collect()
        });
        for (i, r) in done.into_iter().enumerate() {
            results[offset + i] = Some(r);
        }
    }
    let mut out = LlmOutput { candidates: Vec::new(), invalid: Vec::new(), errors: Vec::new(), warnings: Vec::new() };
    for (i, (p, r)) in prompts.iter().zip(results).enumerate() {
        match r.expect("every prompt ran") {
            Ok((text, failures)) => {
                if failures > 0 {
                    out.warnings.push(format!("prompt {i} succeeded after {failures} retries"));
                }
                let text = text.trim().to_string();
                if text.is_empty() {
                    out.invalid.push((i, "empty response".into()));
                    continue;
                }
                out.candidates.push(Candidate {
                    doc_id: p.doc_id.clone(),
                    method: Method::Llm,
                    beam_index: i,
                    tokens: tokenize(&text),
                    text,
                    plan: p.plan.clone(),
                    log_likelihood: 0.0,
                });
            }
            Err(LlmError::Malformed(m)) => out.invalid.push((i, m)),
            Err(e) => out.errors.push((i, e.to_string())),
        }
    }
    Ok(out)
}
