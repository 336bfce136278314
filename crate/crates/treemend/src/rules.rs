//! One-level grammar rules extracted from trees, the reference-treebank
//! rule index, and known/unknown rule statistics.
//!
//! A rule is a parent label plus the ordered labels of its immediate
//! children. Lexical productions (a tag over its word) are never rules, so
//! every phrasal node contributes exactly one rule occurrence.

use std::collections::{BTreeMap, HashSet};
use std::fmt;

use thiserror::Error;

use crate::treebank::{Corpus, NodePath, Span, Tree};

/// A one-level production `parent -> child labels`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, serde::Serialize)]
pub struct Rule {
    pub parent: String,
    pub children: Vec<String>,
}

impl Rule {
    pub fn new(parent: impl Into<String>, children: Vec<String>) -> Rule {
        let rule = Rule {
            parent: parent.into(),
            children,
        };
        debug_assert!(!rule.children.is_empty());
        rule
    }

    /// The rule of a phrasal node; `None` for leaves and preterminals.
    pub fn of_node(node: &Tree) -> Option<Rule> {
        if !node.is_phrasal() {
            return None;
        }
        Some(Rule {
            parent: node.label().to_string(),
            children: node
                .children()
                .iter()
                .map(|c| c.label().to_string())
                .collect(),
        })
    }
}

impl fmt::Display for Rule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} -> {}", self.parent, self.children.join(" "))
    }
}

/// One sighting of a rule in a corpus, with enough context to expand its
/// children one level and to render the containing sentence as an example.
#[derive(Debug, Clone)]
pub struct RuleOccurrence {
    pub rule: Rule,
    pub corpus_entry: usize,
    pub node_path: NodePath,
    pub span: Span,
    /// For each child, the labels of that child's own children; empty for
    /// preterminal (and leaf) children.
    pub child_expansions: Vec<Vec<String>>,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum RuleError {
    #[error("corpus has no trees")]
    NoTrees,
    #[error("corpora differ in entry count: {pred} predicted vs {gold} gold")]
    LengthMismatch { pred: usize, gold: usize },
}

/// Extracts one occurrence per phrasal node, in pre-order. `corpus_entry`
/// is zero; corpus-level callers stamp it afterwards.
pub fn extract_rules(tree: &Tree) -> Vec<RuleOccurrence> {
    tree.walk()
        .into_iter()
        .filter_map(|(path, node)| occurrence_of(node, path, 0))
        .collect()
}

fn occurrence_of(node: &Tree, path: NodePath, entry: usize) -> Option<RuleOccurrence> {
    let rule = Rule::of_node(node)?;
    let child_expansions = node
        .children()
        .iter()
        .map(|child| {
            if child.is_phrasal() {
                child
                    .children()
                    .iter()
                    .map(|g| g.label().to_string())
                    .collect()
            } else {
                Vec::new()
            }
        })
        .collect();
    Some(RuleOccurrence {
        rule,
        corpus_entry: entry,
        node_path: path,
        span: node.span(),
        child_expansions,
    })
}

/// Frequency-and-occurrence index of every rule in a reference treebank.
/// Iteration over `rules()` is deterministic (rule-text order).
#[derive(Debug, Clone, Default)]
pub struct RuleIndex {
    table: BTreeMap<Rule, Vec<RuleOccurrence>>,
    by_parent: BTreeMap<String, Vec<Rule>>,
}

impl RuleIndex {
    pub fn frequency(&self, rule: &Rule) -> usize {
        self.table.get(rule).map_or(0, Vec::len)
    }

    pub fn is_known(&self, rule: &Rule) -> bool {
        self.frequency(rule) > 0
    }

    pub fn occurrences(&self, rule: &Rule) -> &[RuleOccurrence] {
        self.table.get(rule).map_or(&[], Vec::as_slice)
    }

    /// Rules sharing a parent label, in deterministic order.
    pub fn rules_with_parent(&self, parent: &str) -> &[Rule] {
        self.by_parent.get(parent).map_or(&[], Vec::as_slice)
    }

    pub fn rules(&self) -> impl Iterator<Item = (&Rule, usize)> {
        self.table.iter().map(|(rule, occs)| (rule, occs.len()))
    }

    pub fn distinct_rules(&self) -> usize {
        self.table.len()
    }

    pub fn total_occurrences(&self) -> usize {
        self.table.values().map(Vec::len).sum()
    }
}

/// Indexes every rule occurrence of a gold corpus.
pub fn build_index(corpus: &Corpus) -> Result<RuleIndex, RuleError> {
    if corpus.is_empty() {
        return Err(RuleError::NoTrees);
    }
    let mut index = RuleIndex::default();
    for (entry_idx, entry) in corpus.entries.iter().enumerate() {
        for mut occ in extract_rules(&entry.tree) {
            occ.corpus_entry = entry_idx;
            index.table.entry(occ.rule.clone()).or_default().push(occ);
        }
    }
    // Occurrences arrive in (corpus index, pre-order path) order, which is
    // the deterministic sampling order the prompt builder relies on.
    for rule in index.table.keys() {
        index
            .by_parent
            .entry(rule.parent.clone())
            .or_default()
            .push(rule.clone());
    }
    Ok(index)
}

pub fn is_known(index: &RuleIndex, rule: &Rule) -> bool {
    index.is_known(rule)
}

/// Known/unknown rule counts and accuracies over a predicted corpus,
/// mirroring the usual total-parsed / total-known / accuracy breakdown.
#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct RuleStats {
    pub total_parsed: usize,
    pub total_known: usize,
    pub known_correct: usize,
    pub unknown_correct: usize,
    pub known_accuracy: f64,
    pub unknown_accuracy: f64,
    /// Entries whose predicted leaves disagree with gold, skipped entirely.
    pub skipped_entries: usize,
}

/// A predicted occurrence counts as correct iff the gold tree contains a
/// node with the same span, the same parent label, and the same child
/// (label, span) sequence.
pub fn known_rule_stats(
    pred: &Corpus,
    gold: &Corpus,
    index: &RuleIndex,
) -> Result<RuleStats, RuleError> {
    if pred.len() != gold.len() {
        return Err(RuleError::LengthMismatch {
            pred: pred.len(),
            gold: gold.len(),
        });
    }

    let mut stats = RuleStats {
        total_parsed: 0,
        total_known: 0,
        known_correct: 0,
        unknown_correct: 0,
        known_accuracy: 0.0,
        unknown_accuracy: 0.0,
        skipped_entries: 0,
    };

    for (pred_entry, gold_entry) in pred.entries.iter().zip(&gold.entries) {
        if pred_entry.tree.leaves() != gold_entry.tree.leaves() {
            stats.skipped_entries += 1;
            continue;
        }
        let gold_nodes: HashSet<NodeShape> = gold_entry
            .tree
            .walk()
            .into_iter()
            .filter(|(_, n)| n.is_phrasal())
            .map(|(_, n)| NodeShape::of(n))
            .collect();

        for (_, node) in pred_entry.tree.walk() {
            let Some(rule) = Rule::of_node(node) else {
                continue;
            };
            stats.total_parsed += 1;
            let correct = gold_nodes.contains(&NodeShape::of(node));
            if index.is_known(&rule) {
                stats.total_known += 1;
                if correct {
                    stats.known_correct += 1;
                }
            } else if correct {
                stats.unknown_correct += 1;
            }
        }
    }

    stats.known_accuracy = ratio(stats.known_correct, stats.total_known);
    stats.unknown_accuracy = ratio(stats.unknown_correct, stats.total_parsed - stats.total_known);
    Ok(stats)
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

/// Span + parent label + child (label, span) sequence: the identity used to
/// call a rule occurrence correct.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
struct NodeShape {
    span: Span,
    label: String,
    children: Vec<(String, Span)>,
}

impl NodeShape {
    fn of(node: &Tree) -> NodeShape {
        NodeShape {
            span: node.span(),
            label: node.label().to_string(),
            children: node
                .children()
                .iter()
                .map(|c| (c.label().to_string(), c.span()))
                .collect(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::treebank::parse_bracketed;

    fn corpus_of(texts: &[&str]) -> Corpus {
        Corpus::from_trees(
            texts.iter().map(|t| parse_bracketed(t).unwrap()).collect(),
            "mem",
        )
    }

    #[test]
    fn extract_root_rule_from_possessive_figure() {
        let tree = parse_bracketed(
            "(NP (DT the) (VBN proposed) (ADJP (QP ($ $) (CD 7) (CD billion)) (NN bill)))",
        )
        .unwrap();
        let occs = extract_rules(&tree);
        assert_eq!(occs.len(), 3);
        assert_eq!(
            occs[0].rule,
            Rule::new("NP", vec!["DT".into(), "VBN".into(), "ADJP".into()])
        );
        assert_eq!(occs[0].node_path, Vec::<usize>::new());
        // ADJP -> QP NN, then QP -> $ CD CD, pre-order.
        assert_eq!(occs[1].rule.parent, "ADJP");
        assert_eq!(occs[2].rule.parent, "QP");
    }

    #[test]
    fn preterminal_has_no_rules() {
        let tree = parse_bracketed("(NN cat)").unwrap();
        assert!(extract_rules(&tree).is_empty());
    }

    #[test]
    fn child_expansions_align_with_children() {
        let tree = parse_bracketed("(NP (NP (JJ senior) (NN vice) (NN president)) (PP nearby))")
            .unwrap();
        let occs = extract_rules(&tree);
        let root = &occs[0];
        assert_eq!(root.rule, Rule::new("NP", vec!["NP".into(), "PP".into()]));
        assert_eq!(root.child_expansions.len(), root.rule.children.len());
        assert_eq!(root.child_expansions[0], vec!["JJ", "NN", "NN"]);
        assert!(root.child_expansions[1].is_empty()); // PP is preterminal here
    }

    #[test]
    fn index_frequencies_conserve_occurrences() {
        let corpus = corpus_of(&["(S (NP (DT a) (NN b)) (VP (VBD c)))"]);
        let index = build_index(&corpus).unwrap();
        assert_eq!(index.total_occurrences(), 3);
        assert!(index.distinct_rules() <= 3);
    }

    #[test]
    fn duplicating_a_tree_doubles_frequencies() {
        let text = "(S (NP (DT a) (NN b)) (VP (VBD c)))";
        let single = build_index(&corpus_of(&[text])).unwrap();
        let double = build_index(&corpus_of(&[text, text])).unwrap();
        for (rule, freq) in single.rules() {
            assert_eq!(double.frequency(rule), 2 * freq);
        }
    }

    #[test]
    fn adding_a_tree_never_decreases_frequencies() {
        let texts = [
            "(S (NP (DT a) (NN b)) (VP (VBD c)))",
            "(NP (DT d) (NN e))",
            "(S (NP (PRP f)) (VP (VBD g)))",
        ];
        let mut previous = build_index(&corpus_of(&texts[..1])).unwrap();
        for n in 2..=texts.len() {
            let grown = build_index(&corpus_of(&texts[..n])).unwrap();
            for (rule, freq) in previous.rules() {
                assert!(grown.frequency(rule) >= freq);
            }
            previous = grown;
        }
    }

    #[test]
    fn empty_corpus_is_an_error() {
        let corpus = Corpus::default();
        assert!(matches!(build_index(&corpus), Err(RuleError::NoTrees)));
    }

    #[test]
    fn known_lookup() {
        let corpus = corpus_of(&["(S (NP (DT a) (NN b)) (VP (VBD c)))"]);
        let index = build_index(&corpus).unwrap();
        assert!(index.is_known(&Rule::new("NP", vec!["DT".into(), "NN".into()])));
        assert!(!index.is_known(&Rule::new("ZZ", vec!["DT".into(), "NN".into()])));
        assert!(!index.is_known(&Rule::new("NP", vec!["NN".into(), "DT".into()])));
    }

    #[test]
    fn self_comparison_has_perfect_known_accuracy() {
        let corpus = corpus_of(&[
            "(S (NP (DT a) (NN b)) (VP (VBD c)))",
            "(S (NP (PRP d)) (VP (VBD e)))",
        ]);
        let index = build_index(&corpus).unwrap();
        let stats = known_rule_stats(&corpus, &corpus, &index).unwrap();
        assert_eq!(stats.total_parsed, stats.total_known);
        assert_eq!(stats.known_accuracy, 1.0);
        assert_eq!(stats.skipped_entries, 0);
    }

    #[test]
    fn relabeled_parent_counts_incorrect() {
        let gold = corpus_of(&["(S (NP (DT a) (NN b)) (VP (VBD c)))"]);
        let pred = corpus_of(&["(S (VP (DT a) (NN b)) (VP (VBD c)))"]);
        let index = build_index(&gold).unwrap();
        let stats = known_rule_stats(&pred, &gold, &index).unwrap();
        // Root rule S -> VP VP is unknown and wrong; inner VP -> DT NN is
        // unknown and wrong; VP -> VBD known and correct.
        assert_eq!(stats.total_parsed, 3);
        assert_eq!(stats.total_known, 1);
        assert_eq!(stats.known_correct, 1);
        assert_eq!(stats.unknown_correct, 0);
        assert_eq!(stats.known_accuracy, 1.0);
        assert_eq!(stats.unknown_accuracy, 0.0);
    }

    #[test]
    fn length_mismatch_is_an_error() {
        let gold = corpus_of(&["(S (NN a))", "(S (NN b))"]);
        let pred = corpus_of(&["(S (NN a))"]);
        let index = build_index(&gold).unwrap();
        assert!(matches!(
            known_rule_stats(&pred, &gold, &index),
            Err(RuleError::LengthMismatch { pred: 1, gold: 2 })
        ));
    }

    #[test]
    fn unmatched_leaves_are_skipped_and_reported() {
        let gold = corpus_of(&["(S (NN a))", "(S (NP (DT b) (NN c)))"]);
        let pred = corpus_of(&["(S (NN x))", "(S (NP (DT b) (NN c)))"]);
        let index = build_index(&gold).unwrap();
        let stats = known_rule_stats(&pred, &gold, &index).unwrap();
        assert_eq!(stats.skipped_entries, 1);
        assert_eq!(stats.total_parsed, 2); // S -> NP and NP -> DT NN
    }
}
