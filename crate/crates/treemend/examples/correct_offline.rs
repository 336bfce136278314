//! The full two-stage self-correction loop, driven offline by the bundled
//! replay backend: leaf-unmatch hints first, then rule-guided structure
//! correction from the top of the tree down.
//!
//! ```bash
//! cargo run -p treemend --example correct_offline
//! ```

use treemend::correction::{correct_tree, CorrectionConfig};
use treemend::llm::{RetryPolicy, ScriptedBackend};
use treemend::rules::build_index;
use treemend::scoring::{aggregate, score_pair, ScoringParams};
use treemend::treebank::{load_corpus, serialize, CorpusFormat};

fn fixture(name: &str) -> String {
    format!("{}/tests/fixtures/{name}", env!("CARGO_MANIFEST_DIR"))
}

fn main() {
    let treebank = load_corpus(fixture("toy_treebank.txt"), CorpusFormat::OneTreePerLine)
        .unwrap()
        .corpus;
    let index = build_index(&treebank).unwrap();
    let gold = load_corpus(fixture("eval_gold.txt"), CorpusFormat::OneTreePerLine)
        .unwrap()
        .corpus;
    let base = load_corpus(fixture("eval_base.txt"), CorpusFormat::OneTreePerLine)
        .unwrap()
        .corpus;

    // Recorded model replies, keyed by prompt hash: the run is fully
    // offline and bit-reproducible.
    let backend = ScriptedBackend::load(fixture("replay.jsonl")).unwrap();
    let cfg = CorrectionConfig::default();
    let retry = RetryPolicy::default();

    let mut corrected = Vec::new();
    for (gold_entry, base_entry) in gold.entries.iter().zip(&base.entries) {
        let outcome = correct_tree(
            &gold_entry.sentence,
            base_entry.tree.clone(),
            &index,
            &treebank,
            &backend,
            &retry,
            &cfg,
        )
        .expect("replay covers this corpus");
        println!("{}", gold_entry.sentence.join(" "));
        for record in &outcome.trace {
            println!("  [{:?}] {:?} on {}", record.stage, record.decision, record.target);
        }
        if outcome.trace.is_empty() {
            println!("  (nothing suspicious, no calls)");
        }
        if serialize(&outcome.tree) != serialize(&base_entry.tree) {
            println!("  => {}", serialize(&outcome.tree));
        }
        corrected.push(outcome.tree);
    }

    let params = ScoringParams::default();
    let score = |trees: &[treemend::treebank::Tree]| {
        aggregate(
            &trees
                .iter()
                .zip(&gold.entries)
                .map(|(p, g)| score_pair(p, &g.tree, &params))
                .collect::<Vec<_>>(),
        )
    };
    let base_trees: Vec<_> = base.entries.iter().map(|e| e.tree.clone()).collect();
    let before = score(&base_trees);
    let after = score(&corrected);
    println!("\nF1 before correction: {:.4}", before.f1);
    println!("F1 after correction : {:.4}", after.f1);
}
