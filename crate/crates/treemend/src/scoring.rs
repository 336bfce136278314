//! Labeled-bracketing precision/recall/F1 in the EVALB style, plus
//! leaf-alignment (unmatch) detection.
//!
//! A bracket is a (label, span) pair taken from every phrasal node. The
//! delete-label set removes brackets by label and, when a deleted label
//! sits on a preterminal, removes its words from the yield entirely, so
//! spans are computed over the surviving words — the behaviour of EVALB's
//! COLLINS-style parameter file for punctuation.

use std::collections::BTreeSet;
use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::treebank::{normalize_label, Tree};

/// How predicted leaves disagree with the input sentence.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub enum UnmatchKind {
    None,
    LengthUnmatch {
        expected: usize,
        got: usize,
    },
    /// A word was altered; only reported when the lengths agree.
    WordUnmatch {
        position: usize,
        expected: String,
        got: String,
    },
}

impl UnmatchKind {
    pub fn is_none(&self) -> bool {
        *self == UnmatchKind::None
    }
}

/// LengthUnmatch when the leaf count differs, otherwise WordUnmatch at the
/// first differing position, otherwise None.
pub fn detect_unmatch(sentence: &[String], tree: &Tree) -> UnmatchKind {
    let leaves = tree.leaves();
    if leaves.len() != sentence.len() {
        return UnmatchKind::LengthUnmatch {
            expected: sentence.len(),
            got: leaves.len(),
        };
    }
    for (position, (expected, got)) in sentence.iter().zip(&leaves).enumerate() {
        if expected != got {
            return UnmatchKind::WordUnmatch {
                position,
                expected: expected.clone(),
                got: (*got).to_string(),
            };
        }
    }
    UnmatchKind::None
}

/// What an unmatched-leaf pair contributes to corpus scores.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum UnmatchedMode {
    /// Zero predicted brackets against the full gold count.
    #[default]
    Penalize,
    /// The pair contributes nothing.
    Skip,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct ScoringParams {
    /// Brackets with these labels are not counted; preterminals with these
    /// labels have their words removed from the yield.
    pub delete_labels: BTreeSet<String>,
    /// Strip function tags (`NP-SBJ` -> `NP`) before comparing labels.
    pub normalize_labels: bool,
    pub unmatched_mode: UnmatchedMode,
}

impl Default for ScoringParams {
    fn default() -> Self {
        ScoringParams {
            delete_labels: ["TOP", "-NONE-", ",", ":", "``", "''", "."]
                .into_iter()
                .map(String::from)
                .collect(),
            normalize_labels: false,
            unmatched_mode: UnmatchedMode::default(),
        }
    }
}

impl ScoringParams {
    /// No deletions, no normalization; counts every phrasal bracket.
    pub fn plain() -> Self {
        ScoringParams {
            delete_labels: BTreeSet::new(),
            normalize_labels: false,
            unmatched_mode: UnmatchedMode::Penalize,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Default)]
pub struct ScoreReport {
    pub matched_brackets: usize,
    pub gold_brackets: usize,
    pub pred_brackets: usize,
    pub recall: f64,
    pub precision: f64,
    pub f1: f64,
    pub unmatch_count: usize,
}

impl ScoreReport {
    fn from_counts(matched: usize, gold: usize, pred: usize, unmatch: usize) -> ScoreReport {
        let recall = safe_div(matched, gold);
        let precision = safe_div(matched, pred);
        let f1 = if precision + recall > 0.0 {
            2.0 * precision * recall / (precision + recall)
        } else {
            0.0
        };
        ScoreReport {
            matched_brackets: matched,
            gold_brackets: gold,
            pred_brackets: pred,
            recall,
            precision,
            f1,
            unmatch_count: unmatch,
        }
    }
}

fn safe_div(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

/// The (label, span) multiset of a tree under the given params.
pub fn brackets(tree: &Tree, params: &ScoringParams) -> Vec<(String, (usize, usize))> {
    // Word positions surviving deletion, remapped to a dense numbering.
    let mut keep_positions = Vec::new();
    collect_kept_positions(tree, params, &mut keep_positions);
    let remap: HashMap<usize, usize> = keep_positions
        .iter()
        .enumerate()
        .map(|(new, &old)| (old, new))
        .collect();

    let mut out = Vec::new();
    collect_brackets(tree, params, &remap, &mut out);
    out
}

fn label_key(label: &str, params: &ScoringParams) -> String {
    if params.normalize_labels {
        normalize_label(label).to_string()
    } else {
        label.to_string()
    }
}

fn collect_kept_positions(tree: &Tree, params: &ScoringParams, out: &mut Vec<usize>) {
    if tree.is_leaf() {
        out.push(tree.span().start);
        return;
    }
    if tree.is_preterminal() && params.delete_labels.contains(tree.label()) {
        return;
    }
    for child in tree.children() {
        collect_kept_positions(child, params, out);
    }
}

fn collect_brackets(
    tree: &Tree,
    params: &ScoringParams,
    remap: &HashMap<usize, usize>,
    out: &mut Vec<(String, (usize, usize))>,
) {
    if !tree.is_phrasal() {
        return;
    }
    if !params.delete_labels.contains(tree.label()) {
        let span = tree.span();
        // Shrink the span to surviving words; a fully deleted span yields
        // no bracket.
        let kept: Vec<usize> = (span.start..span.end)
            .filter_map(|p| remap.get(&p).copied())
            .collect();
        if let (Some(&first), Some(&last)) = (kept.first(), kept.last()) {
            out.push((label_key(tree.label(), params), (first, last + 1)));
        }
    }
    for child in tree.children() {
        collect_brackets(child, params, remap, out);
    }
}

/// Scores one tree pair. Pairs with differing leaves contribute per
/// `params.unmatched_mode` and bump `unmatch_count`.
pub fn score_pair(pred: &Tree, gold: &Tree, params: &ScoringParams) -> ScoreReport {
    if pred.leaves() != gold.leaves() {
        return match params.unmatched_mode {
            UnmatchedMode::Penalize => {
                ScoreReport::from_counts(0, brackets(gold, params).len(), 0, 1)
            }
            UnmatchedMode::Skip => ScoreReport::from_counts(0, 0, 0, 1),
        };
    }

    let pred_brackets = brackets(pred, params);
    let gold_brackets = brackets(gold, params);

    // A pair with nothing to score on either side (e.g. two bare
    // preterminals) is vacuously perfect; corpus aggregation still sums
    // raw counts, so such pairs contribute nothing there.
    if pred_brackets.is_empty() && gold_brackets.is_empty() {
        return ScoreReport {
            recall: 1.0,
            precision: 1.0,
            f1: 1.0,
            ..ScoreReport::default()
        };
    }

    let mut gold_multiset: HashMap<&(String, (usize, usize)), usize> = HashMap::new();
    for bracket in &gold_brackets {
        *gold_multiset.entry(bracket).or_default() += 1;
    }
    let mut matched = 0;
    for bracket in &pred_brackets {
        if let Some(count) = gold_multiset.get_mut(bracket) {
            if *count > 0 {
                *count -= 1;
                matched += 1;
            }
        }
    }

    ScoreReport::from_counts(matched, gold_brackets.len(), pred_brackets.len(), 0)
}

/// Micro-average: counts are summed across sentences, then P/R/F computed
/// once, the EVALB convention.
pub fn aggregate<'a>(reports: impl IntoIterator<Item = &'a ScoreReport>) -> ScoreReport {
    let mut matched = 0;
    let mut gold = 0;
    let mut pred = 0;
    let mut unmatch = 0;
    for report in reports {
        matched += report.matched_brackets;
        gold += report.gold_brackets;
        pred += report.pred_brackets;
        unmatch += report.unmatch_count;
    }
    ScoreReport::from_counts(matched, gold, pred, unmatch)
}
