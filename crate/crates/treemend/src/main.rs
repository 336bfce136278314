use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use treemend::cli::{self, CliError};
use treemend::config::RunConfig;
use treemend::llm::BackendKind;

#[derive(Parser)]
#[command(name = "treemend", version, about = "Treebank-rule-guided self-correction for LLM constituency parsing")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

/// Flags shared by every subcommand; set values override the config file.
#[derive(Args, Debug, Default)]
struct Common {
    /// JSON run config; flags override file values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Random seed for shot sampling and example selection.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Backend kind: http-openai-compatible or scripted.
    #[arg(long, global = true, value_name = "KIND")]
    backend: Option<String>,
    /// Record every backend call to this replay file.
    #[arg(long, global = true)]
    record: Option<PathBuf>,
    /// Replay recorded calls from this file (implies scripted backend).
    #[arg(long, global = true)]
    replay: Option<PathBuf>,
    /// Output path (trees or JSON report depending on the command).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// JSONL correction trace path.
    #[arg(long, global = true)]
    trace: Option<PathBuf>,
    /// Chat-completions endpoint base URL.
    #[arg(long, global = true)]
    endpoint: Option<String>,
    /// Model name sent to the endpoint.
    #[arg(long, global = true)]
    model: Option<String>,
    /// Sampling temperature.
    #[arg(long, global = true)]
    temperature: Option<f64>,
    /// Concurrent sentence bound.
    #[arg(long, global = true)]
    parallelism: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Few-shot baseline parsing of a sentences file.
    Parse {
        #[command(flatten)]
        common: Common,
        /// Sentences, one per line.
        #[arg(long)]
        sentences: PathBuf,
        /// Reference treebank (shot source).
        #[arg(long)]
        treebank: PathBuf,
        /// Few-shot example count.
        #[arg(long)]
        shots: Option<usize>,
    },
    /// Two-stage self-correction of base predictions.
    Correct {
        #[command(flatten)]
        common: Common,
        /// Sentences, one per line (optional when --base is given).
        #[arg(long)]
        sentences: Option<PathBuf>,
        /// Base predictions, one tree per line.
        #[arg(long)]
        base: Option<PathBuf>,
        /// Reference treebank (rule index and example source).
        #[arg(long)]
        treebank: PathBuf,
    },
    /// Labeled-bracketing P/R/F1 for aligned tree files.
    Score {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        pred: PathBuf,
        #[arg(long)]
        gold: PathBuf,
        /// Scoring params JSON (delete labels, normalization, unmatched mode).
        #[arg(long)]
        params: Option<PathBuf>,
    },
    /// Known/unknown rule statistics against a reference treebank.
    AnalyzeRules {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        pred: PathBuf,
        #[arg(long)]
        gold: PathBuf,
        #[arg(long)]
        treebank: PathBuf,
    },
    /// Span/label/flatness/deepness error distribution.
    AnalyzeErrors {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        pred: PathBuf,
        #[arg(long)]
        gold: PathBuf,
        /// Include per-sentence records in the JSON report.
        #[arg(long)]
        per_sentence: bool,
    },
    /// Min-K% probability over recorded token logprobs.
    Mkp {
        #[command(flatten)]
        common: Common,
        /// JSONL of {"tokens": [...], "logprobs": [...]} records.
        #[arg(long)]
        logprobs: PathBuf,
        /// Fraction of least-likely tokens to average.
        #[arg(long)]
        k: Option<f64>,
    },
}

fn base_config(common: &Common) -> Result<RunConfig, CliError> {
    let mut cfg = match &common.config {
        Some(path) => RunConfig::from_file(path)?,
        None => RunConfig::default(),
    };
    if let Some(seed) = common.seed {
        cfg.seed = seed;
        cfg.correction.seed = seed;
    } else {
        cfg.correction.seed = cfg.seed;
    }
    if let Some(kind) = &common.backend {
        cfg.backend.kind = match kind.as_str() {
            "http-openai-compatible" | "http" => BackendKind::HttpOpenAiCompatible,
            "scripted" => BackendKind::Scripted,
            other => {
                return Err(CliError {
                    kind: cli::FailureKind::Config,
                    message: format!("unknown backend kind `{other}`"),
                })
            }
        };
    }
    if let Some(replay) = &common.replay {
        cfg.backend.kind = BackendKind::Scripted;
        cfg.backend.replay_path = Some(replay.clone());
    }
    if let Some(record) = &common.record {
        cfg.record = Some(record.clone());
    }
    if let Some(out) = &common.out {
        cfg.output = Some(out.clone());
    }
    if let Some(trace) = &common.trace {
        cfg.trace = Some(trace.clone());
    }
    if let Some(endpoint) = &common.endpoint {
        cfg.backend.endpoint = endpoint.clone();
    }
    if let Some(model) = &common.model {
        cfg.backend.model = model.clone();
    }
    if let Some(temperature) = common.temperature {
        cfg.backend.temperature = temperature;
    }
    if let Some(parallelism) = common.parallelism {
        cfg.parallelism = parallelism;
    }
    Ok(cfg)
}

fn run() -> Result<(), CliError> {
    match Cli::parse().command {
        Command::Parse {
            common,
            sentences,
            treebank,
            shots,
        } => {
            let mut cfg = base_config(&common)?;
            cfg.input = Some(sentences);
            cfg.treebank = Some(treebank);
            if let Some(shots) = shots {
                cfg.shots = shots;
            }
            cli::cmd_parse(&cfg)
        }
        Command::Correct {
            common,
            sentences,
            base,
            treebank,
        } => {
            let mut cfg = base_config(&common)?;
            cfg.input = sentences.or(cfg.input);
            cfg.base = base.or(cfg.base);
            cfg.treebank = Some(treebank);
            cli::cmd_correct(&cfg)
        }
        Command::Score {
            common,
            pred,
            gold,
            params,
        } => {
            let mut cfg = base_config(&common)?;
            cfg.pred = Some(pred);
            cfg.gold = Some(gold);
            if let Some(params_path) = params {
                let text = std::fs::read_to_string(&params_path).map_err(|e| CliError {
                    kind: cli::FailureKind::Config,
                    message: format!("cannot read {}: {e}", params_path.display()),
                })?;
                cfg.scoring = serde_json::from_str(&text).map_err(|e| CliError {
                    kind: cli::FailureKind::Config,
                    message: format!("invalid params {}: {e}", params_path.display()),
                })?;
            }
            cli::cmd_score(&cfg)
        }
        Command::AnalyzeRules {
            common,
            pred,
            gold,
            treebank,
        } => {
            let mut cfg = base_config(&common)?;
            cfg.pred = Some(pred);
            cfg.gold = Some(gold);
            cfg.treebank = Some(treebank);
            cli::cmd_analyze_rules(&cfg)
        }
        Command::AnalyzeErrors {
            common,
            pred,
            gold,
            per_sentence,
        } => {
            let mut cfg = base_config(&common)?;
            cfg.pred = Some(pred);
            cfg.gold = Some(gold);
            cfg.per_sentence = cfg.per_sentence || per_sentence;
            cli::cmd_analyze_errors(&cfg)
        }
        Command::Mkp {
            common,
            logprobs,
            k,
        } => {
            let mut cfg = base_config(&common)?;
            cfg.logprobs = Some(logprobs);
            if let Some(k) = k {
                cfg.k_percent = k;
            }
            cli::cmd_mkp(&cfg)
        }
    }
}

fn main() -> ExitCode {
    let result = run();
    cli::flush();
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(err.kind as u8)
        }
    }
}
