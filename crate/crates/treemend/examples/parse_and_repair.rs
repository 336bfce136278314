//! Parse bracketed trees, inspect their structure, and repair the
//! mismatched brackets that models tend to produce.
//!
//! ```bash
//! cargo run -p treemend --example parse_and_repair
//! ```

use treemend::treebank::{parse_bracketed, repair_brackets, serialize, subtrees_by_height};

fn main() {
    let text = "(S (NP (DT the) (NN cat)) (VP (VBD sat) (PP (IN on) (NP (DT the) (NN mat)))) (. .))";
    let tree = parse_bracketed(text).expect("well-formed input");

    println!("sentence : {}", tree.leaves().join(" "));
    println!("tags     : {}", tree.pos_yield().join(" "));
    println!("height   : {}", tree.height());
    println!("round    : {}", serialize(&tree));

    println!("\nphrasal subtrees, highest first:");
    for node in subtrees_by_height(&tree) {
        println!(
            "  h={} {:>7} {}",
            node.height(),
            node.span().to_string(),
            serialize(node)
        );
    }

    // Truncated model output: two closers missing.
    let broken = "(S (NP (DT the) (NN cat)) (VP (VBD sat)";
    let repaired = repair_brackets(broken).expect("repairable");
    println!("\nbroken   : {broken}");
    println!("repaired : {repaired}");

    // Hopeless input is reported rather than silently mangled.
    match repair_brackets("no tree here at all") {
        Ok(_) => unreachable!(),
        Err(err) => println!("rejected : {err}"),
    }
}
