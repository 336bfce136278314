//! Classify predicted subtrees against gold trees into the four error
//! types and aggregate a corpus-level distribution.
//!
//! ```bash
//! cargo run -p treemend --example classify_errors
//! ```

use treemend::taxonomy::{classify_subtree, distribution, error_report};
use treemend::treebank::{load_corpus, parse_bracketed, CorpusFormat};

fn fixture(name: &str) -> String {
    format!("{}/tests/fixtures/{name}", env!("CARGO_MANIFEST_DIR"))
}

fn main() {
    // One pair per error type: wrong boundary, wrong label, too flat,
    // too deep.
    let cases = [
        (
            "(NP (NP (DT a) (JJ young) (NN man)) (NP (POS 's) (NN sport)))",
            "(NP (NP (DT a) (JJ young) (NN man) (POS 's)) (NN sport))",
            vec![0usize],
        ),
        (
            "(NP (DT the) (VBN proposed) (QP (QP ($ $) (CD 7) (CD billion)) (NN bill)))",
            "(NP (DT the) (VBN proposed) (ADJP (QP ($ $) (CD 7) (CD billion)) (NN bill)))",
            vec![],
        ),
        (
            "(NP (JJ senior) (NN vice) (NN president) (PP nearby))",
            "(NP (NP (JJ senior) (NN vice) (NN president)) (PP nearby))",
            vec![],
        ),
        (
            "(S (CC but) (S (NP (NNS students)) (NP (NN laugh) (RB loudly))))",
            "(S (CC but) (NP (NNS students)) (NP (NN laugh) (RB loudly)))",
            vec![],
        ),
    ];
    for (pred_text, gold_text, path) in cases {
        let pred = parse_bracketed(pred_text).unwrap();
        let gold = parse_bracketed(gold_text).unwrap();
        let node = pred.node_at(&path).unwrap();
        let error = classify_subtree(node, &gold).unwrap();
        println!("{error:?}: {pred_text}");
    }

    // Corpus level: every phrasal node of every predicted tree gets a
    // record; the distribution counts the non-correct ones.
    let gold = load_corpus(fixture("toy_treebank.txt"), CorpusFormat::OneTreePerLine)
        .unwrap()
        .corpus;
    let pred = load_corpus(fixture("toy_perturbed.txt"), CorpusFormat::OneTreePerLine)
        .unwrap()
        .corpus;
    let mut records = Vec::new();
    for (i, (p, g)) in pred.entries.iter().zip(&gold.entries).enumerate() {
        let mut rs = error_report(&p.tree, &g.tree).unwrap();
        for r in &mut rs {
            r.entry_index = i;
        }
        records.extend(rs);
    }
    let dist = distribution(&records);
    println!("\ncorpus distribution over {} nodes:", dist.classified);
    println!("  span     {}", dist.span);
    println!("  label    {}", dist.label);
    println!("  flatness {}", dist.flatness);
    println!("  deepness {}", dist.deepness);
    println!("  correct  {}", dist.correct);
}
