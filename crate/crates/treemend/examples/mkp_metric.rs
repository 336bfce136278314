//! Min-K% probability over recorded token logprobs: the mean negative
//! log-probability of the least likely K% of tokens. Higher values
//! suggest the text was not part of a model's pre-training data.
//!
//! ```bash
//! cargo run -p treemend --example mkp_metric
//! ```

use treemend::llm::{mkp, TokenLogProbs};

fn main() {
    let records = [
        ("all tokens equally likely", vec![-2.0; 5]),
        ("one striking outlier", vec![-1.0, -3.0, -5.0, -7.0, -9.0]),
        ("short and confident", vec![-0.5, -1.5]),
    ];

    let mut values = Vec::new();
    for (name, logprobs) in records {
        let tokens: Vec<String> = (0..logprobs.len()).map(|i| format!("t{i}")).collect();
        let lp = TokenLogProbs::new(tokens, logprobs).unwrap();
        let k20 = mkp(&lp, 0.2).unwrap();
        let k100 = mkp(&lp, 1.0).unwrap();
        println!("{name:<28} K=20% -> {k20:.3}   K=100% -> {k100:.3}");
        values.push(k20);
    }
    println!(
        "mean over records at K=20%: {:.4}",
        values.iter().sum::<f64>() / values.len() as f64
    );
}
