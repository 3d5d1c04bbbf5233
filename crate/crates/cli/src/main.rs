//! `planguide`: plan-guided candidate generation, re-ranking and analysis
//! from the command line.

mod commands;
mod config;
mod failure;
mod stamp;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::json;

use crate::config::RunConfig;
use crate::failure::{classify, ErrorRecord, Failure, Kind};

#[derive(Debug, Parser)]
#[command(name = "planguide", version, about = "Plan-guided summary candidates: plan, realize, re-rank and audit")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

/// Flags shared by every command.
#[derive(Debug, Clone, Default, Args)]
pub struct Common {
    /// JSON run configuration merged over the defaults; flags override it
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,
    /// Seed for every random choice of the run
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output file, or output directory for `analyze`
    #[arg(long, global = true, value_name = "PATH")]
    pub out: Option<PathBuf>,
    /// Candidates per document [default: 16]
    #[arg(short = 'k', long = "k", global = true)]
    pub k: Option<usize>,
    /// Weight of the oracle likelihood and distractor unlikelihood terms
    #[arg(long, global = true)]
    pub lambda: Option<f64>,
    /// Weight of the undecorated likelihood term
    #[arg(long, global = true)]
    pub beta: Option<f64>,
    /// Length-normalization exponent of the re-ranking score
    #[arg(long, global = true)]
    pub alpha: Option<f64>,
    /// Per-rank-gap margin of the re-ranking loss
    #[arg(long, global = true)]
    pub margin: Option<f64>,
    /// Re-run even when the output is stamped as up to date
    #[arg(long, global = true)]
    pub force: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum GenMethod {
    Pga,
    Beam,
    DiverseBeam,
    Nucleus,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum LlmMode {
    /// One prompt per generated plan
    Focused,
    /// One unfocused prompt
    Single,
    /// K unfocused prompts at a raised temperature
    Temperature,
    /// K unfocused prompts sampled from a nucleus
    Nucleus,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum QuartileFlag {
    SourceUnits,
    SummaryLength,
}

#[derive(Debug, Subcommand, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    /// Emit a synthetic corpus with references
    Synth {
        /// Number of documents [default: from config]
        #[arg(long)]
        docs: Option<usize>,
    },
    /// Segment raw documents into sentences and discourse units
    Segment {
        #[arg(long, value_name = "FILE")]
        input: PathBuf,
        /// Minimum tokens per unit when splitting clauses
        #[arg(long, default_value_t = planguide::corpus::MIN_EDU_TOKENS)]
        min_tokens: usize,
    },
    /// Greedy oracle plan of every document with a reference
    Oracle {
        #[arg(long, value_name = "FILE")]
        corpus: Option<PathBuf>,
    },
    /// Train the plan generator
    TrainPlanner {
        #[arg(long, value_name = "FILE")]
        corpus: Option<PathBuf>,
        /// Abstractor checkpoint supplying the vocabulary and initial token encoder
        #[arg(long, value_name = "FILE")]
        abstractor: Option<PathBuf>,
    },
    /// Train the plan-guided abstractor
    TrainAbstractor {
        #[arg(long, value_name = "FILE")]
        corpus: Option<PathBuf>,
        /// Documents for oracle-guided checkpoint selection
        #[arg(long, value_name = "FILE")]
        validation: Option<PathBuf>,
        /// Drop the distractor unlikelihood term
        #[arg(long)]
        no_unlikelihood: bool,
    },
    /// Train the re-ranker from an abstractor and scored candidate sets
    TrainReranker {
        #[arg(long, value_name = "FILE")]
        corpus: Option<PathBuf>,
        #[arg(long, value_name = "FILE")]
        abstractor: Option<PathBuf>,
        /// Candidate JSONL files to learn rankings from
        #[arg(long, value_name = "FILE", required = true, num_args = 1..)]
        candidates: Vec<PathBuf>,
    },
    /// Generate K candidates per document
    Generate {
        #[arg(long, value_enum)]
        method: GenMethod,
        #[arg(long, value_name = "FILE")]
        corpus: Option<PathBuf>,
        #[arg(long, value_name = "FILE")]
        abstractor: Option<PathBuf>,
        /// Planner checkpoint (PGA only)
        #[arg(long, value_name = "FILE")]
        planner: Option<PathBuf>,
        /// Also write the generated plans (PGA only)
        #[arg(long, value_name = "FILE")]
        plans_out: Option<PathBuf>,
    },
    /// Order candidate sets by the re-ranker's score
    Rerank {
        #[arg(long, value_name = "FILE")]
        corpus: Option<PathBuf>,
        #[arg(long, value_name = "FILE")]
        reranker: Option<PathBuf>,
        #[arg(long, value_name = "FILE", required = true, num_args = 1..)]
        candidates: Vec<PathBuf>,
    },
    /// Write the candidate-set diagnostics as CSV tables
    Analyze {
        #[arg(long, value_name = "FILE")]
        corpus: Option<PathBuf>,
        /// Candidate or ranked JSONL files, one method each
        #[arg(long, value_name = "FILE", required = true, num_args = 1..)]
        candidates: Vec<PathBuf>,
        /// Document property the length quartiles are keyed on
        #[arg(long, value_enum)]
        quartile_key: Option<QuartileFlag>,
    },
    /// Prompt a chat model for candidates
    Llm {
        #[arg(long, value_enum)]
        mode: LlmMode,
        #[arg(long, value_name = "FILE")]
        corpus: Option<PathBuf>,
        /// Documents with references to draw in-context exemplars from
        #[arg(long, value_name = "FILE")]
        exemplars: Option<PathBuf>,
        /// Plan JSONL for focused prompts
        #[arg(long, value_name = "FILE")]
        plans: Option<PathBuf>,
        /// Planner checkpoint for focused prompts when no plan file is given
        #[arg(long, value_name = "FILE")]
        planner: Option<PathBuf>,
        /// Answer from a replay cache instead of the network
        #[arg(long, value_name = "FILE")]
        replay: Option<PathBuf>,
        /// Chat-completions URL; the key is read from PLANGUIDE_LLM_API_KEY
        #[arg(long)]
        endpoint: Option<String>,
        /// Append live responses to this replay cache
        #[arg(long, value_name = "FILE")]
        record: Option<PathBuf>,
        /// Answer offline by echoing the tagged spans
        #[arg(long)]
        echo: bool,
    },
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Synth { .. } => "synth",
            Command::Segment { .. } => "segment",
            Command::Oracle { .. } => "oracle",
            Command::TrainPlanner { .. } => "train-planner",
            Command::TrainAbstractor { .. } => "train-abstractor",
            Command::TrainReranker { .. } => "train-reranker",
            Command::Generate { .. } => "generate",
            Command::Rerank { .. } => "rerank",
            Command::Analyze { .. } => "analyze",
            Command::Llm { .. } => "llm",
        }
    }
}

/// Config file (or defaults) with flag overrides applied.
fn effective_config(common: &Common) -> Result<RunConfig, Failure> {
    let mut cfg = match &common.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if let Some(seed) = common.seed {
        cfg.seed = seed;
    }
    if let Some(k) = common.k {
        if k == 0 {
            return Err(Failure::new(Kind::Usage, "--k must be at least 1"));
        }
        cfg.generate.k = k;
    }
    if common.lambda.is_some() || common.beta.is_some() {
        let mut w = cfg.guided_weights();
        w.lambda = common.lambda.unwrap_or(w.lambda);
        w.beta = common.beta.unwrap_or(w.beta);
        if w.lambda < 0.0 || w.beta < 0.0 {
            return Err(Failure::new(Kind::Usage, "--lambda and --beta must be non-negative"));
        }
        cfg.weights = Some(w);
    }
    cfg.rerank.alpha = common.alpha.unwrap_or(cfg.rerank.alpha);
    cfg.rerank.margin = common.margin.unwrap_or(cfg.rerank.margin);
    if cfg.rerank.margin < 0.0 {
        return Err(Failure::new(Kind::Usage, "--margin must be non-negative"));
    }
    Ok(cfg)
}

fn report_error(command: &str, kind: Kind, message: String) -> ExitCode {
    let record = ErrorRecord { error: kind, command, message };
    eprintln!("{}", serde_json::to_string(&record).expect("error record serializes"));
    ExitCode::from(kind.exit_code() as u8)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => return report_error("", Kind::Usage, e.to_string().trim_end().to_string()),
    };
    let name = cli.command.name();
    let result = effective_config(&cli.common)
        .map_err(anyhow::Error::from)
        .and_then(|cfg| commands::run(cli.command, &cli.common, cfg));
    match result {
        Ok(status) => {
            println!("{}", json!({ "command": name, "status": status.status, "outputs": status.outputs, "summary": status.summary }));
            ExitCode::SUCCESS
        }
        Err(e) => {
            let (kind, message) = classify(&e);
            report_error(name, kind, message)
        }
    }
}
