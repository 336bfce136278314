//! Command implementations behind the `treemend` binary: parse, correct,
//! score, analyze-rules, analyze-errors, mkp. Each command reads its inputs
//! from the run config, prints a human-readable summary to stdout, and
//! writes machine-readable output (trees, JSON reports, JSONL traces) to
//! the configured paths. Exit codes distinguish data, config, and backend
//! failures.

use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::config::{ConfigError, RunConfig};
use crate::correction::{correct_tree, CorrectionOutcome, TraceRecord};
use crate::llm::{
    few_shot_parse, mkp, ChatBackend, LlmError, RecordingBackend, TokenLogProbs,
};
use crate::rules::{build_index, known_rule_stats, RuleError, RuleIndex, RuleStats};
use crate::scoring::{aggregate, score_pair, ScoreReport};
use crate::taxonomy::{distribution, error_report, ErrorDistribution, ErrorRecord};
use crate::treebank::{
    load_corpus, parse_bracketed, repair_brackets, serialize, Corpus, Tree, TreebankError,
};

/// Process exit codes: 0 ok, 1 data, 2 config, 3 backend.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FailureKind {
    Data = 1,
    Config = 2,
    Backend = 3,
}

#[derive(Debug, Error)]
#[error("{message}")]
pub struct CliError {
    pub kind: FailureKind,
    pub message: String,
}

impl CliError {
    fn data(message: impl Into<String>) -> CliError {
        CliError {
            kind: FailureKind::Data,
            message: message.into(),
        }
    }

    fn config(message: impl Into<String>) -> CliError {
        CliError {
            kind: FailureKind::Config,
            message: message.into(),
        }
    }

    fn backend(message: impl Into<String>) -> CliError {
        CliError {
            kind: FailureKind::Backend,
            message: message.into(),
        }
    }
}

impl From<ConfigError> for CliError {
    fn from(err: ConfigError) -> CliError {
        CliError::config(err.to_string())
    }
}

impl From<TreebankError> for CliError {
    fn from(err: TreebankError) -> CliError {
        CliError::data(err.to_string())
    }
}

impl From<RuleError> for CliError {
    fn from(err: RuleError) -> CliError {
        CliError::data(err.to_string())
    }
}

impl From<LlmError> for CliError {
    fn from(err: LlmError) -> CliError {
        match err {
            LlmError::Config(_) => CliError::config(err.to_string()),
            _ => CliError::backend(err.to_string()),
        }
    }
}

/// JSON report envelope; every report carries the config hash.
#[derive(Debug, Serialize)]
pub struct Report<T: Serialize> {
    pub command: String,
    pub config_hash: String,
    pub data: T,
}

fn write_report<T: Serialize>(
    cfg: &RunConfig,
    command: &str,
    data: T,
    out: &Option<PathBuf>,
) -> Result<(), CliError> {
    let report = Report {
        command: command.to_string(),
        config_hash: cfg.hash(),
        data,
    };
    let json = serde_json::to_string_pretty(&report)
        .map_err(|e| CliError::data(format!("report serialization: {e}")))?;
    match out {
        Some(path) => fs::write(path, json + "\n").map_err(|e| {
            CliError::data(format!("cannot write {}: {e}", path.display()))
        }),
        None => {
            println!("{json}");
            Ok(())
        }
    }
}

fn read_sentences(path: &Path) -> Result<Vec<Vec<String>>, CliError> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::data(format!("cannot read {}: {e}", path.display())))?;
    let sentences: Vec<Vec<String>> = text
        .lines()
        .filter(|line| !line.trim().is_empty())
        .map(|line| line.split_whitespace().map(str::to_string).collect())
        .collect();
    if sentences.is_empty() {
        return Err(CliError::data(format!(
            "no sentences in {}",
            path.display()
        )));
    }
    Ok(sentences)
}

fn load_corpus_checked(cfg: &RunConfig, path: &Path) -> Result<Corpus, CliError> {
    let loaded = load_corpus(path, cfg.corpus_format)?;
    for skip in &loaded.skipped {
        eprintln!(
            "warning: {}:{} skipped: {}",
            path.display(),
            skip.line,
            skip.error
        );
    }
    Ok(loaded.corpus)
}

fn build_backend(cfg: &RunConfig) -> Result<Box<dyn ChatBackend>, CliError> {
    let base = cfg.backend.build()?;
    match &cfg.record {
        Some(path) => Ok(Box::new(RecordingBackend::create(base, path)?)),
        None => Ok(base),
    }
}

/// Deterministic sampling without replacement, used for few-shot examples.
fn sample_indices(len: usize, count: usize, seed: u64) -> Vec<usize> {
    let mut state = seed.wrapping_add(0x9e3779b97f4a7c15);
    let mut picked = Vec::new();
    let mut attempts = 0;
    while picked.len() < count.min(len) && attempts < 10_000 {
        attempts += 1;
        state = state.wrapping_add(0x9e3779b97f4a7c15);
        let mut z = state;
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
        let idx = ((z ^ (z >> 31)) % len as u64) as usize;
        if !picked.contains(&idx) {
            picked.push(idx);
        }
    }
    picked
}

pub fn sample_shots(treebank: &Corpus, count: usize, seed: u64) -> Vec<(String, String)> {
    sample_indices(treebank.len(), count, seed)
        .into_iter()
        .map(|i| {
            let entry = &treebank.entries[i];
            (entry.sentence.join(" "), serialize(&entry.tree))
        })
        .collect()
}

/// A deterministic stand-in emitted when a sentence cannot be parsed into
/// a tree at all; keeps output lines aligned with input lines.
fn fallback_tree(tokens: &[String]) -> Tree {
    Tree::internal(
        "X",
        tokens
            .iter()
            .map(|t| Tree::preterminal("XX", t.clone()))
            .collect(),
    )
}

fn write_trees(trees: &[Tree], out: &Option<PathBuf>) -> Result<(), CliError> {
    match out {
        Some(path) => Ok(crate::treebank::write_corpus(trees, path)?),
        None => {
            for tree in trees {
                println!("{}", serialize(tree));
            }
            Ok(())
        }
    }
}

/// Applies `f` to every item, preserving order, with at most `parallelism`
/// worker threads.
fn map_bounded<T, R, F>(items: &[T], parallelism: usize, f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(usize, &T) -> R + Sync,
{
    let bound = parallelism.max(1).min(items.len().max(1));
    if bound <= 1 {
        return items.iter().enumerate().map(|(i, t)| f(i, t)).collect();
    }
    let results: Mutex<Vec<Option<R>>> = Mutex::new((0..items.len()).map(|_| None).collect());
    let cursor = AtomicUsize::new(0);
    std::thread::scope(|scope| {
        for _ in 0..bound {
            scope.spawn(|| loop {
                let i = cursor.fetch_add(1, Ordering::SeqCst);
                if i >= items.len() {
                    break;
                }
                let result = f(i, &items[i]);
                results.lock().expect("results poisoned")[i] = Some(result);
            });
        }
    });
    results
        .into_inner()
        .expect("results poisoned")
        .into_iter()
        .map(|r| r.expect("every index visited"))
        .collect()
}

/// Baseline few-shot parsing: one tree per input sentence.
pub fn cmd_parse(cfg: &RunConfig) -> Result<(), CliError> {
    cfg.validate_paths()?;
    let input = RunConfig::require(&cfg.input, "input (sentences file)")?;
    let treebank_path = RunConfig::require(&cfg.treebank, "treebank")?;
    let sentences = read_sentences(&input)?;
    let treebank = load_corpus_checked(cfg, &treebank_path)?;
    let shots = sample_shots(&treebank, cfg.shots, cfg.seed);
    if shots.is_empty() {
        return Err(CliError::config("treebank has no trees to sample shots from"));
    }
    let backend = build_backend(cfg)?;

    let mut failures = 0usize;
    let results = map_bounded(&sentences, cfg.parallelism, |i, tokens| {
        let sentence = tokens.join(" ");
        match few_shot_parse(&sentence, &shots, backend.as_ref(), &cfg.backend.retry) {
            Ok(completion) => match crate::correction::parse_reply(&completion.text) {
                Ok(tree) => Ok(tree),
                Err(err) => Err(format!("sentence {}: unparseable reply: {err}", i + 1)),
            },
            Err(err) => Err(format!("sentence {}: backend: {err}", i + 1)),
        }
    });

    let mut trees = Vec::with_capacity(sentences.len());
    let mut backend_failures = 0usize;
    for (tokens, result) in sentences.iter().zip(results) {
        match result {
            Ok(tree) => trees.push(tree),
            Err(message) => {
                eprintln!("warning: {message}");
                if message.contains("backend:") {
                    backend_failures += 1;
                }
                failures += 1;
                trees.push(fallback_tree(tokens));
            }
        }
    }
    // Only a run where nothing succeeded counts as systemic failure.
    if backend_failures == sentences.len() {
        return Err(CliError::backend("every sentence failed at the backend"));
    }
    write_trees(&trees, &cfg.output)?;
    eprintln!(
        "parsed {} sentences ({failures} fell back to flat trees)",
        sentences.len()
    );
    Ok(())
}

/// Trace line: the per-call record plus which sentence it belongs to.
#[derive(Debug, Serialize)]
struct TraceLine<'a> {
    sentence_index: usize,
    #[serde(flatten)]
    record: &'a TraceRecord,
}

#[derive(Debug, Serialize)]
pub struct CorrectSummary {
    pub sentences: usize,
    pub accepted: usize,
    pub rejected: usize,
    pub skipped: usize,
    pub backend_failures: usize,
}

/// Two-stage self-correction over a corpus of base predictions.
pub fn cmd_correct(cfg: &RunConfig) -> Result<(), CliError> {
    cfg.validate_paths()?;
    let treebank_path = RunConfig::require(&cfg.treebank, "treebank")?;
    let treebank = load_corpus_checked(cfg, &treebank_path)?;
    let index = build_index(&treebank)?;
    let backend = build_backend(cfg)?;
    cfg.correction
        .validate()
        .map_err(|e| CliError::config(e.to_string()))?;

    // Base trees: from the base-predictions file, or freshly parsed from
    // the sentences file when only that is given.
    let (sentences, bases): (Vec<Vec<String>>, Vec<Tree>) = match (&cfg.base, &cfg.input) {
        (Some(base_path), maybe_input) => {
            let text = fs::read_to_string(base_path).map_err(|e| {
                CliError::data(format!("cannot read {}: {e}", base_path.display()))
            })?;
            let mut bases = Vec::new();
            for (i, line) in text.lines().filter(|l| !l.trim().is_empty()).enumerate() {
                let tree = repair_brackets(line)
                    .and_then(|repaired| parse_bracketed(&repaired))
                    .map_err(|e| {
                        CliError::data(format!("{}:{}: {e}", base_path.display(), i + 1))
                    })?;
                bases.push(tree);
            }
            let sentences = match maybe_input {
                Some(input) => read_sentences(input)?,
                None => bases
                    .iter()
                    .map(|t| t.leaves().iter().map(|w| w.to_string()).collect())
                    .collect(),
            };
            if sentences.len() != bases.len() {
                return Err(CliError::data(format!(
                    "sentence count {} does not match base tree count {}",
                    sentences.len(),
                    bases.len()
                )));
            }
            (sentences, bases)
        }
        (None, Some(input)) => {
            let sentences = read_sentences(input)?;
            let shots = sample_shots(&treebank, cfg.shots, cfg.seed);
            let bases = map_bounded(&sentences, cfg.parallelism, |_, tokens| {
                let sentence = tokens.join(" ");
                few_shot_parse(&sentence, &shots, backend.as_ref(), &cfg.backend.retry)
                    .ok()
                    .and_then(|completion| crate::correction::parse_reply(&completion.text).ok())
                    .unwrap_or_else(|| fallback_tree(tokens))
            });
            (sentences, bases)
        }
        (None, None) => {
            return Err(CliError::config(
                "correct needs a base-predictions file or a sentences file",
            ))
        }
    };

    struct SentenceResult {
        tree: Tree,
        trace: Vec<TraceRecord>,
        backend_failed: bool,
    }

    let pairs: Vec<(Vec<String>, Tree)> = sentences.into_iter().zip(bases).collect();
    let results: Vec<SentenceResult> = map_bounded(&pairs, cfg.parallelism, |_, (tokens, base)| {
        match correct_tree(
            tokens,
            base.clone(),
            &index,
            &treebank,
            backend.as_ref(),
            &cfg.backend.retry,
            &cfg.correction,
        ) {
            Ok(CorrectionOutcome { tree, trace }) => SentenceResult {
                tree,
                trace,
                backend_failed: false,
            },
            Err(failure) => {
                eprintln!("warning: correction aborted: {}", failure.error);
                SentenceResult {
                    tree: base.clone(),
                    trace: failure.trace,
                    backend_failed: true,
                }
            }
        }
    });

    let mut summary = CorrectSummary {
        sentences: pairs.len(),
        accepted: 0,
        rejected: 0,
        skipped: 0,
        backend_failures: 0,
    };
    let mut trees = Vec::with_capacity(results.len());
    let mut trace_out = String::new();
    for (i, result) in results.iter().enumerate() {
        for record in &result.trace {
            match record.decision {
                crate::correction::Decision::Accepted => summary.accepted += 1,
                crate::correction::Decision::SkippedNoCandidates => summary.skipped += 1,
                _ => summary.rejected += 1,
            }
            let line = TraceLine {
                sentence_index: i,
                record,
            };
            trace_out.push_str(
                &serde_json::to_string(&line)
                    .map_err(|e| CliError::data(format!("trace serialization: {e}")))?,
            );
            trace_out.push('\n');
        }
        if result.backend_failed {
            summary.backend_failures += 1;
        }
        trees.push(result.tree.clone());
    }

    write_trees(&trees, &cfg.output)?;
    if let Some(trace_path) = &cfg.trace {
        fs::write(trace_path, trace_out).map_err(|e| {
            CliError::data(format!("cannot write {}: {e}", trace_path.display()))
        })?;
    }
    eprintln!(
        "corrected {} sentences: {} accepted, {} rejected, {} skipped, {} backend failures",
        summary.sentences,
        summary.accepted,
        summary.rejected,
        summary.skipped,
        summary.backend_failures
    );
    if summary.backend_failures == summary.sentences && summary.sentences > 0 {
        return Err(CliError::backend("every sentence failed at the backend"));
    }
    Ok(())
}

#[derive(Debug, Serialize)]
pub struct ScoreData {
    pub corpus: ScoreReport,
    pub sentences: Vec<ScoreReport>,
}

/// Labeled-bracketing scores for aligned pred/gold files.
pub fn cmd_score(cfg: &RunConfig) -> Result<(), CliError> {
    cfg.validate_paths()?;
    let pred_path = RunConfig::require(&cfg.pred, "pred")?;
    let gold_path = RunConfig::require(&cfg.gold, "gold")?;
    let pred = load_corpus_checked(cfg, &pred_path)?;
    let gold = load_corpus_checked(cfg, &gold_path)?;
    if pred.len() != gold.len() {
        return Err(CliError::data(format!(
            "pred has {} trees but gold has {}",
            pred.len(),
            gold.len()
        )));
    }
    let sentences: Vec<ScoreReport> = pred
        .entries
        .iter()
        .zip(&gold.entries)
        .map(|(p, g)| score_pair(&p.tree, &g.tree, &cfg.scoring))
        .collect();
    let corpus = aggregate(&sentences);

    println!("sentences        {}", sentences.len());
    println!("matched brackets {}", corpus.matched_brackets);
    println!("gold brackets    {}", corpus.gold_brackets);
    println!("pred brackets    {}", corpus.pred_brackets);
    println!("recall           {:.4}", corpus.recall);
    println!("precision        {:.4}", corpus.precision);
    println!("f1               {:.4}", corpus.f1);
    println!("unmatched        {}", corpus.unmatch_count);

    write_report(cfg, "score", ScoreData { corpus, sentences }, &cfg.output)
}

/// Known/unknown rule statistics against a reference treebank.
pub fn cmd_analyze_rules(cfg: &RunConfig) -> Result<(), CliError> {
    cfg.validate_paths()?;
    let pred_path = RunConfig::require(&cfg.pred, "pred")?;
    let gold_path = RunConfig::require(&cfg.gold, "gold")?;
    let treebank_path = RunConfig::require(&cfg.treebank, "treebank")?;
    let pred = load_corpus_checked(cfg, &pred_path)?;
    let gold = load_corpus_checked(cfg, &gold_path)?;
    let treebank = load_corpus_checked(cfg, &treebank_path)?;
    let index: RuleIndex = build_index(&treebank)?;
    let stats: RuleStats = known_rule_stats(&pred, &gold, &index)?;

    println!("total parsed     {}", stats.total_parsed);
    println!("total known      {}", stats.total_known);
    println!("known accuracy   {:.4}", stats.known_accuracy);
    println!("unknown accuracy {:.4}", stats.unknown_accuracy);
    println!("skipped entries  {}", stats.skipped_entries);

    write_report(cfg, "analyze-rules", stats, &cfg.output)
}

#[derive(Debug, Serialize)]
pub struct ErrorAnalysis {
    pub distribution: ErrorDistribution,
    pub skipped_entries: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub records: Option<Vec<ErrorRecord>>,
}

/// Four-way error taxonomy over aligned pred/gold files.
pub fn cmd_analyze_errors(cfg: &RunConfig) -> Result<(), CliError> {
    cfg.validate_paths()?;
    let pred_path = RunConfig::require(&cfg.pred, "pred")?;
    let gold_path = RunConfig::require(&cfg.gold, "gold")?;
    let pred = load_corpus_checked(cfg, &pred_path)?;
    let gold = load_corpus_checked(cfg, &gold_path)?;
    if pred.len() != gold.len() {
        return Err(CliError::data(format!(
            "pred has {} trees but gold has {}",
            pred.len(),
            gold.len()
        )));
    }
    let mut records = Vec::new();
    let mut skipped_entries = 0usize;
    for (i, (p, g)) in pred.entries.iter().zip(&gold.entries).enumerate() {
        match error_report(&p.tree, &g.tree) {
            Ok(mut rs) => {
                for r in &mut rs {
                    r.entry_index = i;
                }
                records.extend(rs);
            }
            Err(_) => skipped_entries += 1,
        }
    }
    let dist = distribution(&records);

    println!("span     {}", dist.span);
    println!("label    {}", dist.label);
    println!("flatness {}", dist.flatness);
    println!("deepness {}", dist.deepness);
    println!("total    {}", dist.total);
    println!("correct  {}", dist.correct);
    println!("skipped  {skipped_entries}");

    let analysis = ErrorAnalysis {
        distribution: dist,
        skipped_entries,
        records: cfg.per_sentence.then_some(records),
    };
    write_report(cfg, "analyze-errors", analysis, &cfg.output)
}

#[derive(Debug, Deserialize)]
struct LogProbRecord {
    tokens: Vec<String>,
    logprobs: Vec<f64>,
}

#[derive(Debug, Serialize)]
pub struct MkpData {
    pub k_percent: f64,
    pub per_sentence: Vec<f64>,
    pub mean: f64,
}

/// Min-K% probability over recorded token logprobs, one record per line.
pub fn cmd_mkp(cfg: &RunConfig) -> Result<(), CliError> {
    cfg.validate_paths()?;
    let path = RunConfig::require(&cfg.logprobs, "logprobs")?;
    let text = fs::read_to_string(&path)
        .map_err(|e| CliError::data(format!("cannot read {}: {e}", path.display())))?;
    let mut per_sentence = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let record: LogProbRecord = serde_json::from_str(line)
            .map_err(|e| CliError::data(format!("{}:{}: {e}", path.display(), i + 1)))?;
        let lp = TokenLogProbs::new(record.tokens, record.logprobs)
            .map_err(|e| CliError::data(format!("{}:{}: {e}", path.display(), i + 1)))?;
        let value = mkp(&lp, cfg.k_percent)
            .map_err(|e| CliError::data(format!("{}:{}: {e}", path.display(), i + 1)))?;
        per_sentence.push(value);
    }
    if per_sentence.is_empty() {
        return Err(CliError::data(format!("no records in {}", path.display())));
    }
    let mean = per_sentence.iter().sum::<f64>() / per_sentence.len() as f64;

    println!("records {}", per_sentence.len());
    println!("k       {:.2}", cfg.k_percent);
    println!("mean    {mean:.4}");

    write_report(
        cfg,
        "mkp",
        MkpData {
            k_percent: cfg.k_percent,
            per_sentence,
            mean,
        },
        &cfg.output,
    )
}

/// Ensures stderr diagnostics are flushed before the process exits.
pub fn flush() {
    let _ = std::io::stderr().flush();
    let _ = std::io::stdout().flush();
}
