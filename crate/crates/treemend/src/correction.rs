//! The two-stage self-correction engine.
//!
//! Stage one repairs leaf unmatches: while the predicted tree's words
//! disagree with the input sentence, the model is re-prompted with a hint
//! naming the disagreement. Stage two walks the remaining tree top-down:
//! any phrasal subtree whose rule is absent from the reference treebank is
//! treated as suspect, similar treebank rules are retrieved and ranked by
//! child-label LCS (frequency breaking ties), and worked examples for the
//! top rules are placed in a re-prompt. Accepted replies replace the whole
//! tree and the suspect list is recomputed, so a high fix can dissolve
//! lower errors before they are visited.
//!
//! Gold trees are never consulted: suspicion comes from the rule index
//! alone, and the keep-if-valid policy only guards against regressions
//! that are visible without gold (parse failures, re-introduced
//! unmatches).

use std::collections::HashSet;
use std::time::Instant;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::llm::{complete, ChatBackend, LlmError, RetryPolicy};
use crate::prompt::{ExampleBlock, PromptSpec};
use crate::rules::{Rule, RuleIndex};
use crate::scoring::{detect_unmatch, UnmatchKind};
use crate::treebank::{
    extract_bracketed, parse_bracketed, repair_brackets, serialize, subtrees_by_height_with_paths,
    Corpus, NodePath, Tree, TreebankError,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum RankingStrategy {
    /// Error-specific transforms ranked by child-label LCS.
    #[default]
    LcsLabel,
    /// Rank by LCS over part-of-speech yield sequences instead.
    PosSequence,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum AcceptPolicy {
    /// Adopt any reply that parses.
    AlwaysTakeNew,
    /// Also reject replies that re-introduce a leaf unmatch.
    #[default]
    KeepIfValid,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CorrectionConfig {
    pub top_k_rules: usize,
    pub examples_per_rule: usize,
    pub max_unmatch_rounds: usize,
    pub ranking_strategy: RankingStrategy,
    /// Only subtrees at least this high are corrected; phrasal nodes start
    /// at height 2.
    pub height_floor: usize,
    pub accept_policy: AcceptPolicy,
    /// Hard cap on model calls for one sentence.
    pub max_calls_per_sentence: usize,
    pub seed: u64,
}

impl Default for CorrectionConfig {
    fn default() -> Self {
        CorrectionConfig {
            top_k_rules: 5,
            examples_per_rule: 1,
            max_unmatch_rounds: 2,
            ranking_strategy: RankingStrategy::default(),
            height_floor: 2,
            accept_policy: AcceptPolicy::default(),
            max_calls_per_sentence: 25,
            seed: 0,
        }
    }
}

impl CorrectionConfig {
    pub fn validate(&self) -> Result<(), CorrectionError> {
        if self.top_k_rules == 0 || self.examples_per_rule == 0 {
            return Err(CorrectionError::InvalidConfig(
                "top_k_rules and examples_per_rule must be at least 1".to_string(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Error)]
pub enum CorrectionError {
    #[error("no treebank rule shares the parent label `{parent}`")]
    NoCandidates { parent: String },
    #[error("no candidates to build a prompt from")]
    EmptyCandidates,
    #[error("tree has no leaf unmatch; nothing to hint")]
    NotUnmatched,
    #[error("invalid correction config: {0}")]
    InvalidConfig(String),
}

/// How a traversed rule was made comparable to the predicted rule.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize)]
pub enum Transform {
    /// Traversed children against predicted children, both as-is.
    LabelView,
    /// Traversed children expanded one level against predicted children;
    /// matches predictions that are flatter than the treebank shape.
    FlatnessView,
    /// Traversed children against predicted children expanded one level;
    /// matches predictions that are deeper than the treebank shape.
    DeepnessView,
    /// Part-of-speech yield comparison (the alternative search strategy).
    PosYield,
}

/// A traversed treebank rule, one transform applied, scored against the
/// prediction.
#[derive(Debug, Clone, Serialize)]
pub struct Candidate {
    pub rule: Rule,
    pub transform: Transform,
    /// The traversed-side label sequence the LCS was computed over.
    pub comparable_sequence: Vec<String>,
    pub lcs: usize,
    pub frequency: usize,
}

/// Longest common subsequence length under exact label equality.
pub fn lcs_len<T: AsRef<str>, U: AsRef<str>>(a: &[T], b: &[U]) -> usize {
    if a.is_empty() || b.is_empty() {
        return 0;
    }
    let mut previous = vec![0usize; b.len() + 1];
    let mut current = vec![0usize; b.len() + 1];
    for item_a in a {
        for (j, item_b) in b.iter().enumerate() {
            current[j + 1] = if item_a.as_ref() == item_b.as_ref() {
                previous[j] + 1
            } else {
                previous[j + 1].max(current[j])
            };
        }
        std::mem::swap(&mut previous, &mut current);
    }
    previous[b.len()]
}

/// Replaces every phrasal child with its own children's labels, keeping
/// preterminal children as-is. `None` when nothing is expandable.
pub fn one_level_expansion(node: &Tree) -> Option<Vec<String>> {
    if !node.children().iter().any(Tree::is_phrasal) {
        return None;
    }
    let mut out = Vec::new();
    for child in node.children() {
        if child.is_phrasal() {
            out.extend(child.children().iter().map(|g| g.label().to_string()));
        } else {
            out.push(child.label().to_string());
        }
    }
    Some(out)
}

fn expand_occurrence(children: &[String], expansions: &[Vec<String>]) -> Option<Vec<String>> {
    if expansions.iter().all(Vec::is_empty) {
        return None;
    }
    let mut out = Vec::new();
    for (label, expansion) in children.iter().zip(expansions) {
        if expansion.is_empty() {
            out.push(label.clone());
        } else {
            out.extend(expansion.iter().cloned());
        }
    }
    Some(out)
}

/// Phrasal subtrees whose rules are unknown to the index, highest first.
/// These are the positions the engine treats as likely errors.
pub fn identify_error_subtrees<'t>(
    tree: &'t Tree,
    index: &RuleIndex,
    cfg: &CorrectionConfig,
) -> Vec<(NodePath, &'t Tree)> {
    subtrees_by_height_with_paths(tree)
        .into_iter()
        .filter(|(_, node)| node.height() >= cfg.height_floor)
        .filter(|(_, node)| {
            Rule::of_node(node).is_some_and(|rule| !index.is_known(&rule))
        })
        .collect()
}

/// Emits up to three transform views for every indexed rule sharing the
/// predicted parent label. Views with nothing to expand are skipped.
pub fn generate_candidates(
    pred_rule: &Rule,
    pred_node: &Tree,
    index: &RuleIndex,
) -> Result<Vec<Candidate>, CorrectionError> {
    let rules = index.rules_with_parent(&pred_rule.parent);
    if rules.is_empty() {
        return Err(CorrectionError::NoCandidates {
            parent: pred_rule.parent.clone(),
        });
    }
    let pred_children = &pred_rule.children;
    let pred_expanded = one_level_expansion(pred_node);

    let mut candidates = Vec::new();
    for rule in rules {
        let frequency = index.frequency(rule);

        candidates.push(Candidate {
            rule: rule.clone(),
            transform: Transform::LabelView,
            comparable_sequence: rule.children.clone(),
            lcs: lcs_len(&rule.children, pred_children),
            frequency,
        });

        // Flatness: the best one-level expansion among this rule's
        // occurrences (expansions differ per occurrence).
        let mut best: Option<(usize, Vec<String>)> = None;
        for occ in index.occurrences(rule) {
            if let Some(expanded) = expand_occurrence(&rule.children, &occ.child_expansions) {
                let lcs = lcs_len(&expanded, pred_children);
                if best.as_ref().is_none_or(|(b, _)| lcs > *b) {
                    best = Some((lcs, expanded));
                }
            }
        }
        if let Some((lcs, expanded)) = best {
            candidates.push(Candidate {
                rule: rule.clone(),
                transform: Transform::FlatnessView,
                comparable_sequence: expanded,
                lcs,
                frequency,
            });
        }

        if let Some(expanded_pred) = &pred_expanded {
            candidates.push(Candidate {
                rule: rule.clone(),
                transform: Transform::DeepnessView,
                comparable_sequence: rule.children.clone(),
                lcs: lcs_len(&rule.children, expanded_pred),
                frequency,
            });
        }
    }
    Ok(candidates)
}

/// Sorts by (LCS desc, frequency desc, rule text asc) and keeps the best
/// view per rule, returning at most `top_k_rules` distinct rules.
pub fn rank_candidates(mut candidates: Vec<Candidate>, cfg: &CorrectionConfig) -> Vec<Candidate> {
    candidates.sort_by(|a, b| {
        b.lcs
            .cmp(&a.lcs)
            .then(b.frequency.cmp(&a.frequency))
            .then_with(|| a.rule.cmp(&b.rule))
            .then(a.transform.cmp(&b.transform))
    });
    let mut seen: HashSet<Rule> = HashSet::new();
    candidates.retain(|c| seen.insert(c.rule.clone()));
    candidates.truncate(cfg.top_k_rules);
    candidates
}

/// The alternative strategy: rank rules sharing the parent label by LCS
/// between the predicted subtree's POS yield and each occurrence's POS
/// yield. Returns the top-K directly.
pub fn pos_rank(
    pred_node: &Tree,
    index: &RuleIndex,
    treebank: &Corpus,
    cfg: &CorrectionConfig,
) -> Result<Vec<Candidate>, CorrectionError> {
    let parent = pred_node.label();
    let rules = index.rules_with_parent(parent);
    if rules.is_empty() {
        return Err(CorrectionError::NoCandidates {
            parent: parent.to_string(),
        });
    }
    let pred_pos: Vec<String> = pred_node
        .pos_yield()
        .into_iter()
        .map(str::to_string)
        .collect();

    let mut candidates = Vec::new();
    for rule in rules {
        let mut best: Option<(usize, Vec<String>)> = None;
        for occ in index.occurrences(rule) {
            let Some(node) = treebank
                .entries
                .get(occ.corpus_entry)
                .and_then(|e| e.tree.node_at(&occ.node_path))
            else {
                continue;
            };
            let pos: Vec<String> = node.pos_yield().into_iter().map(str::to_string).collect();
            let lcs = lcs_len(&pos, &pred_pos);
            if best.as_ref().is_none_or(|(b, _)| lcs > *b) {
                best = Some((lcs, pos));
            }
        }
        if let Some((lcs, pos)) = best {
            candidates.push(Candidate {
                rule: rule.clone(),
                transform: Transform::PosYield,
                comparable_sequence: pos,
                lcs,
                frequency: index.frequency(rule),
            });
        }
    }
    Ok(rank_candidates(candidates, cfg))
}

/// Builds the re-prompt for a tree whose leaves disagree with the input
/// sentence. The hint names the disagreement so the model can avoid it.
pub fn make_unmatch_hint(
    kind: &UnmatchKind,
    sentence: &str,
    prior_tree_text: &str,
) -> Result<PromptSpec, CorrectionError> {
    let hint = match kind {
        UnmatchKind::None => return Err(CorrectionError::NotUnmatched),
        UnmatchKind::LengthUnmatch { expected, got } => format!(
            "Hint: the original sentence has {expected} words, but your parse tree contains \
             {got} words. Every word of the original sentence must appear as a leaf exactly \
             once; do not add, drop, merge, or split words. Parse the sentence again."
        ),
        UnmatchKind::WordUnmatch {
            position,
            expected,
            got,
        } => format!(
            "Hint: in your parse tree, word {} should be \"{expected}\" but was changed to \
             \"{got}\". Do not change any word of the original sentence. Parse the sentence \
             again.",
            position + 1
        ),
    };
    let mut prompt = PromptSpec::new(sentence);
    prompt.prior_answer = Some(prior_tree_text.to_string());
    prompt.hint = Some(hint);
    Ok(prompt)
}

/// Builds the structure-correction re-prompt: the suspect subtree is named
/// and each selected rule contributes `examples_per_rule` treebank
/// sentences, sampled deterministically from the rule's occurrence list at
/// a seed-dependent offset.
pub fn build_structure_prompt(
    sentence: &str,
    prior_answer: &str,
    pred_node: &Tree,
    candidates: &[Candidate],
    treebank: &Corpus,
    index: &RuleIndex,
    cfg: &CorrectionConfig,
) -> Result<PromptSpec, CorrectionError> {
    if candidates.is_empty() {
        return Err(CorrectionError::EmptyCandidates);
    }
    let mut examples = Vec::new();
    for candidate in candidates {
        let occurrences = index.occurrences(&candidate.rule);
        if occurrences.is_empty() {
            continue;
        }
        let offset = (cfg.seed as usize) % occurrences.len();
        let take = cfg.examples_per_rule.min(occurrences.len());
        for i in 0..take {
            let occ = &occurrences[(offset + i) % occurrences.len()];
            let Some(entry) = treebank.entries.get(occ.corpus_entry) else {
                continue;
            };
            let highlight = entry
                .tree
                .node_at(&occ.node_path)
                .map(serialize)
                .unwrap_or_default();
            examples.push(
                ExampleBlock::new(entry.sentence.join(" "), serialize(&entry.tree))
                    .with_highlight(highlight),
            );
        }
    }

    let mut prompt = PromptSpec::new(sentence);
    prompt.examples = examples;
    prompt.prior_answer = Some(prior_answer.to_string());
    prompt.hint = Some(format!(
        "Hint: the subtree {} in your previous answer may be bracketed incorrectly. The \
         examples above show how similar phrases are bracketed. Parse the whole sentence \
         again, correcting that part.",
        serialize(pred_node)
    ));
    Ok(prompt)
}

/// Turns a raw model reply into a tree: take the first bracketed region,
/// balance its brackets, parse.
pub fn parse_reply(reply: &str) -> Result<Tree, TreebankError> {
    let candidate = extract_bracketed(reply).unwrap_or(reply);
    let repaired = repair_brackets(candidate)?;
    parse_bracketed(&repaired)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Stage {
    Unmatch,
    Structure,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Decision {
    Accepted,
    RejectedParse,
    RejectedUnmatch,
    SkippedNoCandidates,
}

/// One correction step: either a model call with its outcome, or a skip.
#[derive(Debug, Clone, Serialize)]
pub struct TraceRecord {
    pub stage: Stage,
    /// The suspect subtree (structure) or unmatch description (stage one).
    pub target: String,
    pub prompt_hash: Option<String>,
    pub prompt_text: Option<String>,
    pub reply_text: Option<String>,
    pub decision: Decision,
    pub attempts: u32,
    pub elapsed_ms: u128,
}

/// The corrected tree plus everything that happened on the way.
#[derive(Debug, Clone)]
pub struct CorrectionOutcome {
    pub tree: Tree,
    pub trace: Vec<TraceRecord>,
}

/// A backend failure mid-correction; the trace up to the failure survives.
#[derive(Debug, Error)]
#[error("backend failure during correction: {error}")]
pub struct CorrectionFailure {
    pub error: LlmError,
    pub trace: Vec<TraceRecord>,
}

/// Runs both correction stages on one sentence.
///
/// Stage two marks each (position, rule) pair as attempted at most once
/// and recomputes the suspect list after every acceptance, so the loop
/// terminates even when the model keeps returning unknown structures.
pub fn correct_tree(
    sentence: &[String],
    base: Tree,
    index: &RuleIndex,
    treebank: &Corpus,
    backend: &dyn ChatBackend,
    retry: &RetryPolicy,
    cfg: &CorrectionConfig,
) -> Result<CorrectionOutcome, CorrectionFailure> {
    let mut current = base;
    let mut trace: Vec<TraceRecord> = Vec::new();
    let mut calls = 0usize;
    let sentence_text = sentence.join(" ");

    // Stage one: leaf unmatch hints.
    for _ in 0..cfg.max_unmatch_rounds {
        let kind = detect_unmatch(sentence, &current);
        if kind.is_none() || calls >= cfg.max_calls_per_sentence {
            break;
        }
        let prompt = make_unmatch_hint(&kind, &sentence_text, &serialize(&current))
            .expect("kind is not None here");
        let started = Instant::now();
        let rendered = prompt.render();
        let completion = match complete(backend, &prompt, retry) {
            Ok(completion) => completion,
            Err(error) => return Err(CorrectionFailure { error, trace }),
        };
        calls += 1;
        let (decision, new_tree) = match parse_reply(&completion.text) {
            Ok(tree) => (Decision::Accepted, Some(tree)),
            Err(_) => (Decision::RejectedParse, None),
        };
        trace.push(TraceRecord {
            stage: Stage::Unmatch,
            target: format!("{kind:?}"),
            prompt_hash: Some(crate::llm::prompt_hash(&rendered)),
            prompt_text: Some(rendered),
            reply_text: Some(completion.text),
            decision,
            attempts: completion.attempts,
            elapsed_ms: started.elapsed().as_millis(),
        });
        if let Some(tree) = new_tree {
            current = tree;
        }
    }

    // Stage two: rule-guided structure correction, top-down.
    let mut attempted: HashSet<(NodePath, Rule)> = HashSet::new();
    while calls < cfg.max_calls_per_sentence {
        let next = identify_error_subtrees(&current, index, cfg)
            .into_iter()
            .map(|(path, node)| {
                let rule = Rule::of_node(node).expect("suspects are phrasal");
                (path, node, rule)
            })
            .find(|(path, _, rule)| !attempted.contains(&(path.clone(), rule.clone())));
        let Some((path, node, pred_rule)) = next else {
            break;
        };
        attempted.insert((path.clone(), pred_rule.clone()));
        let subtree_text = serialize(node);
        let started = Instant::now();

        let candidates = match cfg.ranking_strategy {
            RankingStrategy::LcsLabel => {
                generate_candidates(&pred_rule, node, index).map(|c| rank_candidates(c, cfg))
            }
            RankingStrategy::PosSequence => pos_rank(node, index, treebank, cfg),
        };
        let ranked = match candidates {
            Ok(ranked) => ranked,
            Err(CorrectionError::NoCandidates { .. }) => {
                trace.push(TraceRecord {
                    stage: Stage::Structure,
                    target: subtree_text,
                    prompt_hash: None,
                    prompt_text: None,
                    reply_text: None,
                    decision: Decision::SkippedNoCandidates,
                    attempts: 0,
                    elapsed_ms: started.elapsed().as_millis(),
                });
                continue;
            }
            Err(_) => unreachable!("candidate generation only fails with NoCandidates"),
        };

        let prompt = match build_structure_prompt(
            &sentence_text,
            &serialize(&current),
            node,
            &ranked,
            treebank,
            index,
            cfg,
        ) {
            Ok(prompt) => prompt,
            Err(_) => continue,
        };
        let rendered = prompt.render();
        let completion = match complete(backend, &prompt, retry) {
            Ok(completion) => completion,
            Err(error) => return Err(CorrectionFailure { error, trace }),
        };
        calls += 1;

        let was_matched = detect_unmatch(sentence, &current).is_none();
        let (decision, accepted_tree) = match parse_reply(&completion.text) {
            Err(_) => (Decision::RejectedParse, None),
            Ok(tree) => match cfg.accept_policy {
                AcceptPolicy::AlwaysTakeNew => (Decision::Accepted, Some(tree)),
                AcceptPolicy::KeepIfValid => {
                    if was_matched && !detect_unmatch(sentence, &tree).is_none() {
                        (Decision::RejectedUnmatch, None)
                    } else {
                        (Decision::Accepted, Some(tree))
                    }
                }
            },
        };
        trace.push(TraceRecord {
            stage: Stage::Structure,
            target: subtree_text,
            prompt_hash: Some(crate::llm::prompt_hash(&rendered)),
            prompt_text: Some(rendered),
            reply_text: Some(completion.text),
            decision,
            attempts: completion.attempts,
            elapsed_ms: started.elapsed().as_millis(),
        });
        if let Some(tree) = accepted_tree {
            current = tree;
        }
    }

    Ok(CorrectionOutcome {
        tree: current,
        trace,
    })
}
