//! Treebank-rule-guided self-correction for LLM constituency parsing.
//!
//! The pipeline: parse sentences with a few-shot prompt, detect leaf
//! unmatches and structural errors by comparing predicted rules against a
//! reference treebank's rule index, then guide the model to correct its own
//! answer with error-specific hints and retrieved treebank examples.
//! Labeled-bracketing scores, rule statistics, and a four-way error
//! taxonomy measure what changed.
//!
//! Every capability has a runnable example under `examples/`; the `treemend`
//! binary exposes the same operations as subcommands. Backends are
//! pluggable: an OpenAI-compatible HTTP client for live runs, a scripted
//! replay backend for deterministic offline runs.

pub mod cli;
pub mod config;
pub mod correction;
pub mod llm;
pub mod prompt;
pub mod rules;
pub mod scoring;
pub mod taxonomy;
pub mod treebank;

pub use correction::{
    correct_tree, AcceptPolicy, Candidate, CorrectionConfig, CorrectionOutcome, RankingStrategy,
    Transform,
};
pub use llm::{BackendKind, BackendSpec, ChatBackend, ScriptedBackend, TokenLogProbs};
pub use rules::{build_index, Rule, RuleIndex, RuleStats};
pub use scoring::{aggregate, detect_unmatch, score_pair, ScoreReport, ScoringParams, UnmatchKind};
pub use taxonomy::{classify_subtree, error_report, ErrorDistribution, ErrorType};
pub use treebank::{
    load_corpus, parse_bracketed, repair_brackets, serialize, subtrees_by_height, Corpus,
    CorpusFormat, Span, Tree,
};
