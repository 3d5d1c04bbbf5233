//! Run configuration: a JSON file merged over built-in defaults, then
//! overridden by command-line flags.

use std::fs;
use std::path::{Path, PathBuf};

use planguide::abstractor::{GenerateConfig, GuidedWeights};
use planguide::analysis::QuartileKey;
use planguide::llm::{LlmConfig, RetryPolicy};
use planguide::planner::PlanOrder;
use planguide::reranker::RerankConfig;
use planguide::seq2seq::{ModelConfig, OptimConfig, TrainConfig};
use planguide::synth::SynthConfig;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::failure::{Failure, Kind};

/// Default locations of pipeline artifacts; command flags take precedence.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Paths {
    pub corpus: Option<PathBuf>,
    pub validation: Option<PathBuf>,
    pub exemplars: Option<PathBuf>,
    pub planner: Option<PathBuf>,
    pub abstractor: Option<PathBuf>,
    pub reranker: Option<PathBuf>,
}

/// Named weights of the guided objective.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Preset {
    /// λ = 1, β = 10.
    #[default]
    Cnn,
    /// λ = 1, β = 0.
    Nyt,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LlmSettings {
    pub model: String,
    /// Chat-completions URL used with `--endpoint` omitted.
    pub endpoint: Option<String>,
    pub timeout_secs: u64,
    pub max_in_flight: usize,
    pub retry: RetryPolicy,
}

impl Default for LlmSettings {
    fn default() -> Self {
        let base = LlmConfig::default();
        Self { model: base.model, endpoint: None, timeout_secs: 60, max_in_flight: base.max_in_flight, retry: base.retry }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub paths: Paths,
    pub preset: Preset,
    /// Replaces the preset weights when present.
    pub weights: Option<GuidedWeights>,
    /// Architecture shared by all models; `vocab_size` is set from the data.
    pub model: ModelConfig,
    pub plan_order: PlanOrder,
    /// Start the planner's token encoder from the abstractor's weights.
    pub init_planner_from_abstractor: bool,
    pub abstractor_train: TrainConfig,
    pub planner_train: TrainConfig,
    pub reranker_train: TrainConfig,
    /// Greedy length cap for oracle-guided validation decoding.
    pub validation_max_len: usize,
    pub generate: GenerateConfig,
    pub rerank: RerankConfig,
    pub quartile_key: QuartileKey,
    pub llm: LlmSettings,
    pub synth: SynthConfig,
}

impl Default for RunConfig {
    /// Settings that train the whole pipeline on the synthetic corpus in a
    /// few CPU-minutes.
    fn default() -> Self {
        let model = ModelConfig {
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
        };
        let optim = OptimConfig { learning_rate: 3e-3, warmup_steps: 30, ..OptimConfig::default() };
        let train = |steps| TrainConfig { steps, batch_size: 8, optim: optim.clone(), ..TrainConfig::default() };
        Self {
            seed: 0,
            paths: Paths::default(),
            preset: Preset::Cnn,
            weights: None,
            model,
            plan_order: PlanOrder::InOrder,
            init_planner_from_abstractor: true,
            abstractor_train: train(1600),
            planner_train: train(600),
            reranker_train: TrainConfig {
                steps: 200,
                batch_size: 4,
                optim: OptimConfig { learning_rate: 1e-3, warmup_steps: 10, ..OptimConfig::default() },
                ..TrainConfig::default()
            },
            validation_max_len: 48,
            generate: GenerateConfig::default(),
            rerank: RerankConfig::default(),
            quartile_key: QuartileKey::SourceUnits,
            llm: LlmSettings::default(),
            synth: SynthConfig::default(),
        }
    }
}

/// Recursively overlays `patch` onto `base`; objects merge key by key and
/// everything else is replaced.
fn merge(base: &mut Value, patch: Value) {
    match (base, patch) {
        (Value::Object(b), Value::Object(p)) => {
            for (k, v) in p {
                match b.get_mut(&k) {
                    Some(slot) if slot.is_object() && v.is_object() => merge(slot, v),
                    _ => {
                        b.insert(k, v);
                    }
                }
            }
        }
        (slot, p) => *slot = p,
    }
}

impl RunConfig {
    /// Defaults overlaid with the JSON object in `path`. Unknown keys are
    /// rejected.
    pub fn load(path: &Path) -> Result<Self, Failure> {
        if !path.exists() {
            return Err(Failure::new(Kind::MissingInput, format!("config file {} does not exist", path.display())));
        }
        let text = fs::read_to_string(path).map_err(|e| Failure::new(Kind::Io, format!("{}: {e}", path.display())))?;
        let patch: Value = serde_json::from_str(&text)
            .map_err(|e| Failure::new(Kind::InvalidConfig, format!("{}: {e}", path.display())))?;
        Self::from_patch(patch).map_err(|m| Failure::new(Kind::InvalidConfig, format!("{}: {m}", path.display())))
    }

    pub fn from_patch(patch: Value) -> Result<Self, String> {
        if !patch.is_object() {
            return Err("the configuration must be a JSON object".into());
        }
        let mut base = serde_json::to_value(Self::default()).expect("defaults serialize");
        merge(&mut base, patch);
        serde_json::from_value(base).map_err(|e| e.to_string())
    }

    /// Guided-objective weights: explicit weights, else the preset.
    pub fn guided_weights(&self) -> GuidedWeights {
        self.weights.unwrap_or(match self.preset {
            Preset::Cnn => GuidedWeights::CNN,
            Preset::Nyt => GuidedWeights::NYT,
        })
    }

    pub fn llm_config(&self) -> LlmConfig {
        LlmConfig { model: self.llm.model.clone(), retry: self.llm.retry, max_in_flight: self.llm.max_in_flight }
    }
}
