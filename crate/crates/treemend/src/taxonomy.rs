//! The four-way parse-error taxonomy: every predicted phrasal subtree is
//! classified against the gold tree as a span, label, flatness, or deepness
//! error, or as correct.
//!
//! Classification looks at two levels only, the node and its immediate
//! children. Span errors take priority: if the predicted node's span is not
//! a gold constituent, nothing else is inspected. Otherwise the child count
//! against the widest same-span gold node decides flatness (more children)
//! or deepness (fewer); only equal-arity nodes can be label errors, so
//! compound cases collapse to the structural type.

use std::collections::HashMap;

use serde::Serialize;
use thiserror::Error;

use crate::rules::Rule;
use crate::treebank::{NodePath, Span, Tree};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum ErrorType {
    Span,
    Label,
    Flatness,
    Deepness,
    Correct,
}

impl ErrorType {
    pub fn is_error(self) -> bool {
        self != ErrorType::Correct
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum TaxonomyError {
    #[error("predicted and gold leaves differ; run unmatch correction first")]
    LeafMismatch,
    #[error("node is not a phrasal constituent")]
    NotPhrasal,
}

/// The classification of one predicted phrasal node.
#[derive(Debug, Clone, Serialize)]
pub struct ErrorRecord {
    pub entry_index: usize,
    pub node_path: NodePath,
    pub error: ErrorType,
    pub pred_rule: String,
    /// (span, parent label, child labels) of the gold node compared
    /// against; absent exactly for span errors.
    pub gold_counterpart: Option<(Span, String, Vec<String>)>,
}

impl ErrorRecord {
    pub fn pred_rule(&self) -> &str {
        &self.pred_rule
    }
}

/// Counts per error type; `total` excludes correct nodes.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct ErrorDistribution {
    pub span: usize,
    pub label: usize,
    pub flatness: usize,
    pub deepness: usize,
    pub total: usize,
    pub correct: usize,
    /// All classified nodes: `total + correct`, the denominator for rates.
    pub classified: usize,
}

/// Classifies one predicted phrasal node against the gold tree.
pub fn classify_subtree(pred_node: &Tree, gold: &Tree) -> Result<ErrorType, TaxonomyError> {
    if !pred_node.is_phrasal() {
        return Err(TaxonomyError::NotPhrasal);
    }
    let gold_by_span = gold_nodes_by_span(gold);
    Ok(classify_with(pred_node, &gold_by_span))
}

fn classify_with(pred_node: &Tree, gold_by_span: &HashMap<Span, Vec<&Tree>>) -> ErrorType {
    let Some(same_span) = gold_by_span.get(&pred_node.span()) else {
        return ErrorType::Span;
    };
    // Unary chains share a span; compare against the member with the most
    // children so arity reflects the bracketing closest to the prediction.
    let gold_node = same_span
        .iter()
        .max_by_key(|n| n.children().len())
        .expect("span groups are non-empty");

    let pred_arity = pred_node.children().len();
    let gold_arity = gold_node.children().len();
    if pred_arity > gold_arity {
        return ErrorType::Flatness;
    }
    if pred_arity < gold_arity {
        return ErrorType::Deepness;
    }
    let labels_match = pred_node.label() == gold_node.label()
        && pred_node
            .children()
            .iter()
            .zip(gold_node.children())
            .all(|(p, g)| p.label() == g.label());
    if labels_match {
        ErrorType::Correct
    } else {
        ErrorType::Label
    }
}

fn gold_nodes_by_span(gold: &Tree) -> HashMap<Span, Vec<&Tree>> {
    let mut by_span: HashMap<Span, Vec<&Tree>> = HashMap::new();
    for (_, node) in gold.walk() {
        if node.is_phrasal() {
            by_span.entry(node.span()).or_default().push(node);
        }
    }
    by_span
}

/// One record per predicted phrasal node, pre-order. `entry_index` is zero;
/// corpus-level callers stamp it.
pub fn error_report(pred: &Tree, gold: &Tree) -> Result<Vec<ErrorRecord>, TaxonomyError> {
    if pred.leaves() != gold.leaves() {
        return Err(TaxonomyError::LeafMismatch);
    }
    let gold_by_span = gold_nodes_by_span(gold);
    let mut records = Vec::new();
    for (path, node) in pred.walk() {
        let Some(rule) = Rule::of_node(node) else {
            continue;
        };
        let error = classify_with(node, &gold_by_span);
        let gold_counterpart = if error == ErrorType::Span {
            None
        } else {
            let same_span = &gold_by_span[&node.span()];
            let g = same_span
                .iter()
                .max_by_key(|n| n.children().len())
                .expect("span groups are non-empty");
            Some((
                g.span(),
                g.label().to_string(),
                g.children().iter().map(|c| c.label().to_string()).collect(),
            ))
        };
        records.push(ErrorRecord {
            entry_index: 0,
            node_path: path,
            error,
            pred_rule: rule.to_string(),
            gold_counterpart,
        });
    }
    Ok(records)
}

/// Aggregates records (typically across a corpus) into per-type counts.
pub fn distribution<'a>(records: impl IntoIterator<Item = &'a ErrorRecord>) -> ErrorDistribution {
    let mut dist = ErrorDistribution::default();
    for record in records {
        match record.error {
            ErrorType::Span => dist.span += 1,
            ErrorType::Label => dist.label += 1,
            ErrorType::Flatness => dist.flatness += 1,
            ErrorType::Deepness => dist.deepness += 1,
            ErrorType::Correct => dist.correct += 1,
        }
    }
    dist.total = dist.span + dist.label + dist.flatness + dist.deepness;
    dist.classified = dist.total + dist.correct;
    dist
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::treebank::parse_bracketed;

    // The four canonical cases: a bracketed boundary missing from gold, a
    // relabeled constituent, a flattened subtree, and an over-nested one.

    #[test]
    fn span_error_when_boundary_absent_from_gold() {
        let gold = parse_bracketed(
            "(NP (NP (DT a) (JJ young) (NN man) (POS 's)) (NN sport))",
        )
        .unwrap();
        let pred = parse_bracketed(
            "(NP (NP (DT a) (JJ young) (NN man)) (NP (POS 's) (NN sport)))",
        )
        .unwrap();
        // Predicted inner NP covers [0,3), which is not a gold constituent.
        let inner = &pred.children()[0];
        assert_eq!(classify_subtree(inner, &gold).unwrap(), ErrorType::Span);
    }

    #[test]
    fn label_error_when_same_span_same_arity() {
        let gold = parse_bracketed(
            "(NP (DT the) (VBN proposed) (ADJP (QP ($ $) (CD 7) (CD billion)) (NN bill)))",
        )
        .unwrap();
        let pred = parse_bracketed(
            "(NP (DT the) (VBN proposed) (QP (QP ($ $) (CD 7) (CD billion)) (NN bill)))",
        )
        .unwrap();
        assert_eq!(classify_subtree(&pred, &gold).unwrap(), ErrorType::Label);
    }

    #[test]
    fn flatness_error_when_pred_has_more_children() {
        let gold =
            parse_bracketed("(NP (NP (JJ senior) (NN vice) (NN president)) (PP nearby))").unwrap();
        let pred =
            parse_bracketed("(NP (JJ senior) (NN vice) (NN president) (PP nearby))").unwrap();
        assert_eq!(classify_subtree(&pred, &gold).unwrap(), ErrorType::Flatness);
    }

    #[test]
    fn deepness_error_when_pred_has_fewer_children() {
        let gold =
            parse_bracketed("(S (CC but) (NP (NNS students)) (NP (NN laugh) (RB loudly)))")
                .unwrap();
        let pred =
            parse_bracketed("(S (CC but) (S (NP (NNS students)) (NP (NN laugh) (RB loudly))))")
                .unwrap();
        assert_eq!(classify_subtree(&pred, &gold).unwrap(), ErrorType::Deepness);
    }

    #[test]
    fn identical_trees_are_all_correct() {
        let tree = parse_bracketed("(S (NP (DT a) (NN b)) (VP (VBD c)))").unwrap();
        let records = error_report(&tree, &tree).unwrap();
        assert_eq!(records.len(), 3);
        assert!(records.iter().all(|r| r.error == ErrorType::Correct));
        assert!(records.iter().all(|r| r.gold_counterpart.is_some()));
    }

    #[test]
    fn single_relabeled_child_yields_one_label_record() {
        let gold = parse_bracketed("(S (NP (DT a) (NN b)) (VP (VBD c)))").unwrap();
        let pred = parse_bracketed("(S (NP (DT a) (JJ b)) (VP (VBD c)))").unwrap();
        let records = error_report(&pred, &gold).unwrap();
        let errors: Vec<_> = records.iter().filter(|r| r.error.is_error()).collect();
        assert_eq!(errors.len(), 1);
        assert_eq!(errors[0].error, ErrorType::Label);
        assert_eq!(errors[0].node_path, vec![0]);
    }

    #[test]
    fn leaf_mismatch_is_rejected() {
        let gold = parse_bracketed("(S (NN a))").unwrap();
        let pred = parse_bracketed("(S (NN x))").unwrap();
        assert!(matches!(
            error_report(&pred, &gold),
            Err(TaxonomyError::LeafMismatch)
        ));
    }

    #[test]
    fn unary_chain_compares_against_widest_member() {
        // Gold has S and NP over the same span; NP has 2 children.
        let gold = parse_bracketed("(S (NP (DT a) (NN b)))").unwrap();
        let pred = parse_bracketed("(X (DT a) (NN b))").unwrap();
        // Same span and arity as the NP member, so this is a label error,
        // not a deepness error against the unary S.
        assert_eq!(classify_subtree(&pred, &gold).unwrap(), ErrorType::Label);
    }

    #[test]
    fn distribution_counts_by_type() {
        let gold = parse_bracketed("(S (NP (DT a) (NN b)) (VP (VBD c)))").unwrap();
        let pred = parse_bracketed("(S (VP (DT a) (NN b)) (VP (VBD c)))").unwrap();
        let records = error_report(&pred, &gold).unwrap();
        let dist = distribution(&records);
        // The relabeled NP is a label error, and the root's child-label
        // sequence changes with it.
        assert_eq!(dist.label, 2);
        assert_eq!(dist.span, 0);
        assert_eq!(dist.correct, 1);
        assert_eq!(dist.total, 2);
        assert_eq!(dist.classified, records.len());
        assert_eq!(dist.total + dist.correct, dist.classified);
    }
}
