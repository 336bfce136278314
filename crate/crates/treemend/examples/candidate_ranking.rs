//! How the structure-correction engine picks its guidance: suspect
//! subtrees are found by rule lookup, treebank rules sharing the parent
//! label are transformed into comparable shapes, and the longest common
//! subsequence over child labels ranks them, frequency breaking ties.
//!
//! ```bash
//! cargo run -p treemend --example candidate_ranking
//! ```

use treemend::correction::{
    generate_candidates, identify_error_subtrees, lcs_len, rank_candidates, CorrectionConfig,
};
use treemend::rules::{build_index, Rule};
use treemend::treebank::{load_corpus, parse_bracketed, serialize, CorpusFormat};

fn fixture(name: &str) -> String {
    format!("{}/tests/fixtures/{name}", env!("CARGO_MANIFEST_DIR"))
}

fn main() {
    let treebank = load_corpus(fixture("toy_treebank.txt"), CorpusFormat::OneTreePerLine)
        .unwrap()
        .corpus;
    let index = build_index(&treebank).unwrap();
    let cfg = CorrectionConfig::default();

    println!(
        "lcs([DT VBN QP], [DT VBN ADJP]) = {}",
        lcs_len(&["DT", "VBN", "QP"], &["DT", "VBN", "ADJP"])
    );

    // A prediction that flattened a two-level noun phrase.
    let pred = parse_bracketed("(NP (JJ senior) (NN vice) (NN president) (PP nearby))").unwrap();
    println!("\nsuspect subtrees of {}:", serialize(&pred));
    for (path, node) in identify_error_subtrees(&pred, &index, &cfg) {
        println!("  {:?} {}", path, Rule::of_node(node).unwrap());
    }

    let pred_rule = Rule::of_node(&pred).unwrap();
    let candidates = generate_candidates(&pred_rule, &pred, &index).unwrap();
    println!("\nall candidate views: {}", candidates.len());
    let ranked = rank_candidates(candidates, &cfg);
    println!("top {} rules after ranking:", ranked.len());
    for c in &ranked {
        println!(
            "  lcs={} freq={} {:?} {:<22} comparable [{}]",
            c.lcs,
            c.frequency,
            c.transform,
            c.rule.to_string(),
            c.comparable_sequence.join(" ")
        );
    }
}
