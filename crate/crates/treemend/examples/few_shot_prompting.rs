//! Build the baseline few-shot parsing prompt and run it against the
//! bundled replay backend. With an OpenAI-compatible endpoint configured,
//! the same call goes over HTTP instead.
//!
//! ```bash
//! cargo run -p treemend --example few_shot_prompting
//! ```

use treemend::cli::sample_shots;
use treemend::correction::parse_reply;
use treemend::llm::{few_shot_parse, few_shot_prompt, RetryPolicy, ScriptedBackend};
use treemend::treebank::{load_corpus, CorpusFormat};

fn fixture(name: &str) -> String {
    format!("{}/tests/fixtures/{name}", env!("CARGO_MANIFEST_DIR"))
}

fn main() {
    let treebank = load_corpus(fixture("toy_treebank.txt"), CorpusFormat::OneTreePerLine)
        .unwrap()
        .corpus;

    // Five worked examples, sampled deterministically by seed.
    let shots = sample_shots(&treebank, 5, 0);
    let prompt = few_shot_prompt("the quiet village", &shots).unwrap();
    println!("--- rendered prompt ---");
    println!("{}", prompt.render());

    let backend = ScriptedBackend::load(fixture("parse_replay.jsonl")).unwrap();
    let retry = RetryPolicy::default();
    let completion =
        few_shot_parse("the quiet village", &shots, &backend, &retry).unwrap();
    println!("\n--- reply ---");
    println!("{}", completion.text);

    let tree = parse_reply(&completion.text).unwrap();
    println!("\nparsed spans:");
    for (path, node) in tree.walk() {
        if node.is_phrasal() {
            println!("  {:?} {} {}", path, node.label(), node.span());
        }
    }
}
