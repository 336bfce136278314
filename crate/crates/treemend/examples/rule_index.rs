//! Extract one-level grammar rules from a treebank, index them, and
//! compute known/unknown rule statistics for a predicted corpus.
//!
//! ```bash
//! cargo run -p treemend --example rule_index
//! ```

use treemend::rules::{build_index, extract_rules, known_rule_stats};
use treemend::treebank::{load_corpus, parse_bracketed, CorpusFormat};

fn fixture(name: &str) -> String {
    format!("{}/tests/fixtures/{name}", env!("CARGO_MANIFEST_DIR"))
}

fn main() {
    let tree = parse_bracketed(
        "(NP (DT the) (VBN proposed) (ADJP (QP ($ $) (CD 7) (CD billion)) (NN bill)))",
    )
    .unwrap();
    println!("rules of one tree:");
    for occ in extract_rules(&tree) {
        println!("  {} at {}", occ.rule, occ.span);
    }

    let treebank = load_corpus(fixture("toy_treebank.txt"), CorpusFormat::OneTreePerLine)
        .unwrap()
        .corpus;
    let index = build_index(&treebank).unwrap();
    println!(
        "\nindexed {} trees: {} occurrences, {} distinct rules",
        treebank.len(),
        index.total_occurrences(),
        index.distinct_rules()
    );

    println!("\nmost frequent rules:");
    let mut rules: Vec<_> = index.rules().collect();
    rules.sort_by_key(|(rule, freq)| (std::cmp::Reverse(*freq), rule.to_string()));
    for (rule, freq) in rules.iter().take(5) {
        println!("  {freq:>2}x {rule}");
    }

    // Predictions with a few planted mistakes: how many of their rules
    // exist in the treebank, and how accurate is each class?
    let pred = load_corpus(fixture("toy_perturbed.txt"), CorpusFormat::OneTreePerLine)
        .unwrap()
        .corpus;
    let stats = known_rule_stats(&pred, &treebank, &index).unwrap();
    println!("\npredicted corpus vs treebank:");
    println!("  total parsed     {}", stats.total_parsed);
    println!("  total known      {}", stats.total_known);
    println!("  known accuracy   {:.2}", stats.known_accuracy);
    println!("  unknown accuracy {:.2}", stats.unknown_accuracy);
}
