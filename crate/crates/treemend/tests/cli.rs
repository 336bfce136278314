//! End-to-end tests of the `treemend` binary: golden report data, the
//! record/replay round trip, and the exit-code contract.

mod common;

use std::path::Path;
use std::process::{Command, Output};

use common::fixture;

fn treemend(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_treemend"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn report_data(path: &Path) -> serde_json::Value {
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap();
    assert!(
        report["config_hash"].as_str().is_some_and(|h| h.len() == 16),
        "reports carry a config hash"
    );
    report["data"].clone()
}

fn golden(name: &str) -> serde_json::Value {
    serde_json::from_str(&std::fs::read_to_string(fixture(name)).unwrap()).unwrap()
}

#[test]
fn score_report_matches_golden() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("score.json");
    let output = treemend(&[
        "score",
        "--pred",
        fixture("eval_base.txt").to_str().unwrap(),
        "--gold",
        fixture("eval_gold.txt").to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(output.status.success());
    let stdout = String::from_utf8(output.stdout).unwrap();
    assert!(stdout.contains("f1               0.6667"));
    assert_eq!(report_data(&out), golden("golden/score_data.json"));
}

#[test]
fn score_identical_files_is_perfect() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("score.json");
    let output = treemend(&[
        "score",
        "--pred",
        fixture("eval_gold.txt").to_str().unwrap(),
        "--gold",
        fixture("eval_gold.txt").to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(output.status.success());
    let data = report_data(&out);
    assert_eq!(data["corpus"]["f1"], 1.0);
    assert_eq!(data["corpus"]["unmatch_count"], 0);
}

#[test]
fn analyze_rules_matches_golden() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("rules.json");
    let output = treemend(&[
        "analyze-rules",
        "--pred",
        fixture("toy_perturbed.txt").to_str().unwrap(),
        "--gold",
        fixture("toy_treebank.txt").to_str().unwrap(),
        "--treebank",
        fixture("toy_treebank.txt").to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(output.status.success());
    assert_eq!(report_data(&out), golden("golden/rules_data.json"));
}

#[test]
fn analyze_errors_matches_golden_and_per_sentence_flag_adds_records() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("errors.json");
    let output = treemend(&[
        "analyze-errors",
        "--pred",
        fixture("toy_perturbed.txt").to_str().unwrap(),
        "--gold",
        fixture("toy_treebank.txt").to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(output.status.success());
    assert_eq!(report_data(&out), golden("golden/errors_data.json"));

    let output = treemend(&[
        "analyze-errors",
        "--pred",
        fixture("toy_perturbed.txt").to_str().unwrap(),
        "--gold",
        fixture("toy_treebank.txt").to_str().unwrap(),
        "--per-sentence",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(output.status.success());
    let data = report_data(&out);
    assert_eq!(data["records"].as_array().unwrap().len(), 58);
}

#[test]
fn mkp_matches_golden() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("mkp.json");
    let output = treemend(&[
        "mkp",
        "--logprobs",
        fixture("logprobs.jsonl").to_str().unwrap(),
        "--k",
        "0.2",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(output.status.success());
    assert_eq!(report_data(&out), golden("golden/mkp_data.json"));
}

#[test]
fn parse_record_replay_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let first_out = dir.path().join("trees_a.txt");
    let recorded = dir.path().join("recorded.jsonl");
    let output = treemend(&[
        "parse",
        "--sentences",
        fixture("eval_sentences.txt").to_str().unwrap(),
        "--treebank",
        fixture("toy_treebank.txt").to_str().unwrap(),
        "--replay",
        fixture("parse_replay.jsonl").to_str().unwrap(),
        "--record",
        recorded.to_str().unwrap(),
        "--seed",
        "0",
        "--out",
        first_out.to_str().unwrap(),
    ]);
    assert!(output.status.success(), "{output:?}");

    // The recording of a replayed run reproduces the replay file.
    let original = std::fs::read_to_string(fixture("parse_replay.jsonl")).unwrap();
    let rerecorded = std::fs::read_to_string(&recorded).unwrap();
    assert_eq!(original, rerecorded);

    // Replaying the fresh recording produces byte-identical trees.
    let second_out = dir.path().join("trees_b.txt");
    let output = treemend(&[
        "parse",
        "--sentences",
        fixture("eval_sentences.txt").to_str().unwrap(),
        "--treebank",
        fixture("toy_treebank.txt").to_str().unwrap(),
        "--replay",
        recorded.to_str().unwrap(),
        "--seed",
        "0",
        "--out",
        second_out.to_str().unwrap(),
    ]);
    assert!(output.status.success());
    assert_eq!(
        std::fs::read(&first_out).unwrap(),
        std::fs::read(&second_out).unwrap()
    );

    // The parsed trees are the oracle replies: identical to gold.
    assert_eq!(
        std::fs::read_to_string(&first_out).unwrap(),
        std::fs::read_to_string(fixture("eval_gold.txt")).unwrap()
    );
}

#[test]
fn parse_survives_missing_replay_entries_with_fallbacks() {
    let dir = tempfile::tempdir().unwrap();
    let sentences = dir.path().join("extra.txt");
    std::fs::write(&sentences, "the fox slept under the bridge .\nwords never recorded\n")
        .unwrap();
    let out = dir.path().join("trees.txt");
    let output = treemend(&[
        "parse",
        "--sentences",
        sentences.to_str().unwrap(),
        "--treebank",
        fixture("toy_treebank.txt").to_str().unwrap(),
        "--replay",
        fixture("parse_replay.jsonl").to_str().unwrap(),
        "--seed",
        "0",
        "--out",
        out.to_str().unwrap(),
    ]);
    // One sentence replays, the other falls back to a flat tree; the run
    // as a whole still succeeds.
    assert!(output.status.success());
    let trees = std::fs::read_to_string(&out).unwrap();
    let lines: Vec<&str> = trees.lines().collect();
    assert_eq!(lines.len(), 2);
    assert!(lines[0].starts_with("(S"));
    assert_eq!(lines[1], "(X (XX words) (XX never) (XX recorded))");
}

#[test]
fn exit_codes_distinguish_failure_kinds() {
    // Config failure: missing input file.
    let output = treemend(&[
        "score",
        "--pred",
        "/no/such/file.txt",
        "--gold",
        fixture("eval_gold.txt").to_str().unwrap(),
    ]);
    assert_eq!(output.status.code(), Some(2));

    // Data failure: length-mismatched corpora.
    let dir = tempfile::tempdir().unwrap();
    let short = dir.path().join("short.txt");
    std::fs::write(&short, "(S (NN a))\n").unwrap();
    let output = treemend(&[
        "score",
        "--pred",
        short.to_str().unwrap(),
        "--gold",
        fixture("eval_gold.txt").to_str().unwrap(),
    ]);
    assert_eq!(output.status.code(), Some(1));

    // Backend failure: every correction call misses the replay.
    let empty_replay = dir.path().join("empty.jsonl");
    std::fs::write(&empty_replay, "").unwrap();
    let base = dir.path().join("base.txt");
    std::fs::write(&base, "(NP (XQ odd) (ZZ base))\n").unwrap();
    let output = treemend(&[
        "correct",
        "--base",
        base.to_str().unwrap(),
        "--treebank",
        fixture("toy_treebank.txt").to_str().unwrap(),
        "--replay",
        empty_replay.to_str().unwrap(),
    ]);
    assert_eq!(output.status.code(), Some(3));
}

#[test]
fn correct_is_deterministic_under_parallelism() {
    let dir = tempfile::tempdir().unwrap();
    let run = |parallelism: &str, tag: &str| {
        let out = dir.path().join(format!("out_{tag}.txt"));
        let output = treemend(&[
            "correct",
            "--base",
            fixture("eval_base.txt").to_str().unwrap(),
            "--sentences",
            fixture("eval_sentences.txt").to_str().unwrap(),
            "--treebank",
            fixture("toy_treebank.txt").to_str().unwrap(),
            "--replay",
            fixture("replay.jsonl").to_str().unwrap(),
            "--parallelism",
            parallelism,
            "--seed",
            "0",
            "--out",
            out.to_str().unwrap(),
        ]);
        assert!(output.status.success());
        std::fs::read(&out).unwrap()
    };
    assert_eq!(run("1", "serial"), run("4", "parallel"));
}

#[test]
fn score_params_file_changes_label_matching() {
    let dir = tempfile::tempdir().unwrap();
    let pred = dir.path().join("pred.txt");
    let gold = dir.path().join("gold.txt");
    std::fs::write(&pred, "(S (NP (NN a)) (VP (VBD b)))\n").unwrap();
    std::fs::write(&gold, "(S (NP-SBJ (NN a)) (VP (VBD b)))\n").unwrap();
    let params = dir.path().join("params.json");
    std::fs::write(
        &params,
        r#"{"delete_labels": [], "normalize_labels": true, "unmatched_mode": "penalize"}"#,
    )
    .unwrap();
    let out = dir.path().join("score.json");

    let output = treemend(&[
        "score",
        "--pred",
        pred.to_str().unwrap(),
        "--gold",
        gold.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(output.status.success());
    let strict = report_data(&out);
    assert_eq!(strict["corpus"]["matched_brackets"], 2);

    let output = treemend(&[
        "score",
        "--pred",
        pred.to_str().unwrap(),
        "--gold",
        gold.to_str().unwrap(),
        "--params",
        params.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(output.status.success());
    let normalized = report_data(&out);
    assert_eq!(normalized["corpus"]["matched_brackets"], 3);
    assert_eq!(normalized["corpus"]["f1"], 1.0);
}

#[test]
fn config_file_drives_a_run_and_flags_override_it() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("mkp.json");
    let config = dir.path().join("run.json");
    std::fs::write(
        &config,
        serde_json::json!({
            "logprobs": fixture("logprobs.jsonl"),
            "k_percent": 1.0,
            "output": out,
        })
        .to_string(),
    )
    .unwrap();

    // k from the config file: mean over full sequences.
    let output = treemend(&[
        "mkp",
        "--config",
        config.to_str().unwrap(),
        "--logprobs",
        fixture("logprobs.jsonl").to_str().unwrap(),
    ]);
    assert!(output.status.success());
    let data = report_data(&out);
    assert_eq!(data["k_percent"], 1.0);

    // Flag overrides the file.
    let output = treemend(&[
        "mkp",
        "--config",
        config.to_str().unwrap(),
        "--logprobs",
        fixture("logprobs.jsonl").to_str().unwrap(),
        "--k",
        "0.2",
    ]);
    assert!(output.status.success());
    let data = report_data(&out);
    assert_eq!(data["k_percent"], 0.2);
    assert_eq!(data["mean"], 4.166666666666667);
}
