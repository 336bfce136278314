//! Shared helpers for integration tests: a deterministic RNG, random tree
//! generators, and independent oracles for the quantities the library
//! computes. The oracles recompute everything from the tree structure with
//! their own traversals and counters so they stay independent of the
//! implementation paths they check.

#![allow(dead_code)]

use std::collections::HashSet;
use std::path::PathBuf;

use treemend::treebank::Tree;

pub fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("tests/fixtures")
        .join(name)
}

/// SplitMix64: small, seedable, stable across platforms.
pub struct Rng(u64);

impl Rng {
    pub fn new(seed: u64) -> Rng {
        Rng(seed)
    }

    pub fn next_u64(&mut self) -> u64 {
        self.0 = self.0.wrapping_add(0x9e3779b97f4a7c15);
        let mut z = self.0;
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
        z ^ (z >> 31)
    }

    /// Uniform in [0, bound).
    pub fn below(&mut self, bound: usize) -> usize {
        assert!(bound > 0);
        (self.next_u64() % bound as u64) as usize
    }

    pub fn chance(&mut self, percent: usize) -> bool {
        self.below(100) < percent
    }
}

const PHRASE_LABELS: &[&str] = &["S", "NP", "VP", "PP", "ADJP", "ADVP", "SBAR", "QP"];
const POS_TAGS: &[&str] = &["DT", "NN", "NNS", "JJ", "VBD", "VBZ", "IN", "RB", "CC", "PRP"];
const WORDS: &[&str] = &[
    "the", "a", "cat", "dog", "man", "ran", "sat", "old", "young", "on", "under", "quickly",
    "and", "bird", "tree",
];

pub fn random_sentence(rng: &mut Rng, max_len: usize) -> Vec<String> {
    let len = 1 + rng.below(max_len);
    (0..len)
        .map(|_| WORDS[rng.below(WORDS.len())].to_string())
        .collect()
}

/// A random constituency tree over the given words: random contiguous
/// partitions under random phrase labels, occasional unary wraps.
pub fn random_tree_over(rng: &mut Rng, words: &[String]) -> Tree {
    let node = random_subtree(rng, words, 0);
    // Occasionally wrap the whole sentence once more (root unary chain).
    if rng.chance(20) {
        Tree::internal(PHRASE_LABELS[rng.below(PHRASE_LABELS.len())], vec![node])
    } else {
        node
    }
}

fn random_subtree(rng: &mut Rng, words: &[String], depth: usize) -> Tree {
    if words.len() == 1 {
        let tag = POS_TAGS[rng.below(POS_TAGS.len())];
        let pre = Tree::preterminal(tag, words[0].clone());
        if depth > 0 && rng.chance(15) {
            return Tree::internal(PHRASE_LABELS[rng.below(PHRASE_LABELS.len())], vec![pre]);
        }
        return pre;
    }
    // With all words tagged directly, this node is flat; otherwise split
    // into 2..=4 contiguous segments.
    if depth >= 6 || (words.len() <= 3 && rng.chance(40)) {
        let children = words
            .iter()
            .map(|w| Tree::preterminal(POS_TAGS[rng.below(POS_TAGS.len())], w.clone()))
            .collect();
        return Tree::internal(PHRASE_LABELS[rng.below(PHRASE_LABELS.len())], children);
    }
    let parts = 2 + rng.below(words.len().min(4) - 1);
    let cuts = random_cuts(rng, words.len(), parts);
    let mut children = Vec::new();
    let mut start = 0;
    for cut in cuts {
        children.push(random_subtree(rng, &words[start..cut], depth + 1));
        start = cut;
    }
    Tree::internal(PHRASE_LABELS[rng.below(PHRASE_LABELS.len())], children)
}

/// `parts` segment ends for a length-`len` sequence, the last being `len`.
fn random_cuts(rng: &mut Rng, len: usize, parts: usize) -> Vec<usize> {
    let parts = parts.min(len);
    let mut cuts: HashSet<usize> = HashSet::new();
    while cuts.len() < parts - 1 {
        cuts.insert(1 + rng.below(len - 1));
    }
    let mut cuts: Vec<usize> = cuts.into_iter().collect();
    cuts.sort_unstable();
    cuts.push(len);
    cuts
}

/// An aligned (pred, gold) pair: two independent random trees over the
/// same sentence.
pub fn random_aligned_pair(rng: &mut Rng, max_len: usize) -> (Tree, Tree) {
    let words = random_sentence(rng, max_len);
    (
        random_tree_over(rng, &words),
        random_tree_over(rng, &words),
    )
}

// ---------------------------------------------------------------------
// Oracles
// ---------------------------------------------------------------------

/// Full-matrix LCS reference.
pub fn lcs_oracle(a: &[String], b: &[String]) -> usize {
    let mut table = vec![vec![0usize; b.len() + 1]; a.len() + 1];
    for i in 0..a.len() {
        for j in 0..b.len() {
            table[i + 1][j + 1] = if a[i] == b[j] {
                table[i][j] + 1
            } else {
                table[i][j + 1].max(table[i + 1][j])
            };
        }
    }
    table[a.len()][b.len()]
}

/// Collects (label, start, end) for every node with a non-word child,
/// computing spans with its own leaf counter (ignoring the stored spans).
pub fn oracle_brackets(tree: &Tree) -> Vec<(String, usize, usize)> {
    let mut out = Vec::new();
    let mut cursor = 0usize;
    collect(tree, &mut cursor, &mut out);
    return out;

    fn collect(
        node: &Tree,
        cursor: &mut usize,
        out: &mut Vec<(String, usize, usize)>,
    ) -> (usize, usize) {
        if node.children().is_empty() {
            let start = *cursor;
            *cursor += 1;
            return (start, *cursor);
        }
        let start = *cursor;
        let mut any_internal = false;
        for child in node.children() {
            if !child.children().is_empty() {
                any_internal = true;
            }
            collect(child, cursor, out);
        }
        let end = *cursor;
        if any_internal {
            out.push((node.label().to_string(), start, end));
        }
        (start, end)
    }
}

/// Multiset intersection by sorting both sides and walking them together.
pub fn oracle_matched(pred: &Tree, gold: &Tree) -> (usize, usize, usize) {
    let mut p = oracle_brackets(pred);
    let mut g = oracle_brackets(gold);
    p.sort();
    g.sort();
    let mut matched = 0;
    let (mut i, mut j) = (0, 0);
    while i < p.len() && j < g.len() {
        match p[i].cmp(&g[j]) {
            std::cmp::Ordering::Equal => {
                matched += 1;
                i += 1;
                j += 1;
            }
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
        }
    }
    (matched, g.len(), p.len())
}

/// Rule strings of a tree, recomputed with an independent walk.
pub fn oracle_rule_strings(tree: &Tree) -> Vec<String> {
    let mut out = Vec::new();
    walk(tree, &mut out);
    return out;

    fn walk(node: &Tree, out: &mut Vec<String>) {
        if node.children().is_empty() {
            return;
        }
        if node.children().iter().any(|c| !c.children().is_empty()) {
            let children: Vec<&str> = node.children().iter().map(|c| c.label()).collect();
            out.push(format!("{} -> {}", node.label(), children.join(" ")));
        }
        for child in node.children() {
            walk(child, out);
        }
    }
}

/// Node identity strings (span + labels of node and children) used by the
/// rule-accuracy recount, in pre-order so they zip with
/// [`oracle_rule_strings`].
pub fn oracle_node_shapes(tree: &Tree) -> Vec<String> {
    let mut slots: Vec<Option<String>> = Vec::new();
    let mut cursor = 0usize;
    walk(tree, &mut cursor, &mut slots);
    // Unfilled slots are preterminal-like nodes that carry no rule.
    return slots.into_iter().flatten().collect();

    fn walk(node: &Tree, cursor: &mut usize, out: &mut Vec<Option<String>>) -> (usize, usize) {
        if node.children().is_empty() {
            let start = *cursor;
            *cursor += 1;
            return (start, *cursor);
        }
        let start = *cursor;
        // Reserve this node's pre-order slot before descending.
        let slot = out.len();
        out.push(None);
        let mut child_parts = Vec::new();
        let mut any_internal = false;
        for child in node.children() {
            if !child.children().is_empty() {
                any_internal = true;
            }
            let (cs, ce) = walk(child, cursor, out);
            child_parts.push(format!("{}:{cs}-{ce}", child.label()));
        }
        let end = *cursor;
        if any_internal {
            out[slot] = Some(format!(
                "{start}-{end}|{}|{}",
                node.label(),
                child_parts.join(",")
            ));
        }
        (start, end)
    }
}
