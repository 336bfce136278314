//! Labeled-bracketing precision/recall/F1 with the usual evaluation
//! conventions: punctuation and root-symbol deletion, unmatch penalties,
//! micro-averaged corpus totals.
//!
//! ```bash
//! cargo run -p treemend --example score_corpora
//! ```

use treemend::scoring::{aggregate, detect_unmatch, score_pair, ScoringParams};
use treemend::treebank::{load_corpus, parse_bracketed, CorpusFormat};

fn fixture(name: &str) -> String {
    format!("{}/tests/fixtures/{name}", env!("CARGO_MANIFEST_DIR"))
}

fn main() {
    // Leaf alignment first: trees whose words disagree with the sentence
    // cannot be scored structurally.
    let sentence: Vec<String> = "the cat sat".split(' ').map(String::from).collect();
    let altered = parse_bracketed("(S (NP (DT the) (NN dog)) (VP (VBD sat)))").unwrap();
    println!("unmatch: {:?}", detect_unmatch(&sentence, &altered));

    let pred = parse_bracketed(
        "(NP (DT the) (VBN proposed) (QP (QP ($ $) (CD 7) (CD billion)) (NN bill)))",
    )
    .unwrap();
    let gold = parse_bracketed(
        "(NP (DT the) (VBN proposed) (ADJP (QP ($ $) (CD 7) (CD billion)) (NN bill)))",
    )
    .unwrap();
    let report = score_pair(&pred, &gold, &ScoringParams::plain());
    println!(
        "\nsingle pair: matched {}/{} gold, {} pred, F1 {:.4}",
        report.matched_brackets, report.gold_brackets, report.pred_brackets, report.f1
    );

    let gold = load_corpus(fixture("eval_gold.txt"), CorpusFormat::OneTreePerLine)
        .unwrap()
        .corpus;
    let base = load_corpus(fixture("eval_base.txt"), CorpusFormat::OneTreePerLine)
        .unwrap()
        .corpus;
    let params = ScoringParams::default();
    let reports: Vec<_> = base
        .entries
        .iter()
        .zip(&gold.entries)
        .map(|(p, g)| score_pair(&p.tree, &g.tree, &params))
        .collect();
    for (i, r) in reports.iter().enumerate() {
        println!(
            "  sentence {:>2}: P {:.2} R {:.2} F {:.2}{}",
            i + 1,
            r.precision,
            r.recall,
            r.f1,
            if r.unmatch_count > 0 { "  (unmatched)" } else { "" }
        );
    }
    let corpus = aggregate(&reports);
    println!(
        "corpus: P {:.4} R {:.4} F1 {:.4}, {} unmatched sentences",
        corpus.precision, corpus.recall, corpus.f1, corpus.unmatch_count
    );
}
