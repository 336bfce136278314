//! Bracketed constituency trees: parsing, validation, repair, traversal,
//! and corpus loading.
//!
//! Trees are stored in the usual treebank shape: a leaf node carries a word,
//! an internal node carries a constituent or part-of-speech label and one or
//! more children. A node whose children are all words is a preterminal
//! (e.g. `(NN cat)`); everything above that level is phrasal and is what the
//! rule and scoring machinery operates on.

use std::fmt;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Half-open word-index interval `[start, end)`, 0-based over the sentence.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Span {
    pub start: usize,
    pub end: usize,
}

impl Span {
    pub fn new(start: usize, end: usize) -> Self {
        Span { start, end }
    }

    pub fn width(&self) -> usize {
        self.end - self.start
    }
}

impl fmt::Display for Span {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{},{})", self.start, self.end)
    }
}

/// Child-index path from the root to a node; the root itself is `[]`.
pub type NodePath = Vec<usize>;

/// A rooted labeled ordered tree over a tokenized sentence.
///
/// A node is a leaf (its label is the word itself, no children) xor an
/// internal node (a tag label with at least one child). Spans are computed
/// at construction: a leaf covers one word, an internal node covers exactly
/// the concatenation of its children's spans.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Tree {
    label: String,
    children: Vec<Tree>,
    span: Span,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum TreebankError {
    #[error("unbalanced brackets: {open} opening vs {close} closing")]
    UnbalancedBrackets { open: usize, close: usize },
    #[error("empty constituent `({label})` with no children and no word")]
    EmptyConstituent { label: String },
    #[error("malformed token `{token}` outside any tree")]
    MalformedToken { token: String },
    #[error("input cannot be repaired into a parseable tree: {reason}")]
    Unrepairable { reason: String },
    #[error("no trees parsed from {path}")]
    NoTrees { path: String },
    #[error("cannot read {path}: {message}")]
    Io { path: String, message: String },
}

impl Tree {
    /// A leaf node covering one word. The span is placed by the enclosing
    /// internal-node constructor.
    pub fn leaf(word: impl Into<String>) -> Tree {
        Tree {
            label: word.into(),
            children: Vec::new(),
            span: Span::new(0, 1),
        }
    }

    /// An internal node. Word positions of the whole subtree are renumbered
    /// left to right from 0, so a finished tree always has consistent spans.
    ///
    /// Panics if `children` is empty; parsed input reports
    /// [`TreebankError::EmptyConstituent`] instead.
    pub fn internal(label: impl Into<String>, children: Vec<Tree>) -> Tree {
        assert!(!children.is_empty(), "internal node must have children");
        let mut tree = Tree {
            label: label.into(),
            children,
            span: Span::new(0, 0),
        };
        tree.renumber(0);
        tree
    }

    /// A preterminal tag over a single word, e.g. `(NN cat)`.
    pub fn preterminal(tag: impl Into<String>, word: impl Into<String>) -> Tree {
        Tree::internal(tag, vec![Tree::leaf(word)])
    }

    fn renumber(&mut self, start: usize) -> usize {
        if self.children.is_empty() {
            self.span = Span::new(start, start + 1);
            return start + 1;
        }
        let mut next = start;
        for child in &mut self.children {
            next = child.renumber(next);
        }
        self.span = Span::new(start, next);
        next
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn children(&self) -> &[Tree] {
        &self.children
    }

    pub fn span(&self) -> Span {
        self.span
    }

    /// True for word nodes.
    pub fn is_leaf(&self) -> bool {
        self.children.is_empty()
    }

    /// True for tag nodes whose children are all words, e.g. `(NN cat)`.
    pub fn is_preterminal(&self) -> bool {
        !self.children.is_empty() && self.children.iter().all(Tree::is_leaf)
    }

    /// True for internal nodes with at least one non-word child. These are
    /// the nodes that carry grammar rules and scoring brackets.
    pub fn is_phrasal(&self) -> bool {
        self.children.iter().any(|c| !c.is_leaf())
    }

    /// Word level is height 0, a preterminal is height 1, phrasal nodes
    /// are 2 or more.
    pub fn height(&self) -> usize {
        self.children
            .iter()
            .map(Tree::height)
            .max()
            .map_or(0, |h| h + 1)
    }

    /// The word at this node, present iff it is a leaf.
    pub fn word(&self) -> Option<&str> {
        if self.is_leaf() {
            Some(&self.label)
        } else {
            None
        }
    }

    /// Leaf words, left to right.
    pub fn leaves(&self) -> Vec<&str> {
        let mut out = Vec::new();
        self.collect_leaves(&mut out);
        out
    }

    fn collect_leaves<'a>(&'a self, out: &mut Vec<&'a str>) {
        if self.is_leaf() {
            out.push(&self.label);
        } else {
            for child in &self.children {
                child.collect_leaves(out);
            }
        }
    }

    /// Preterminal (POS tag) labels, left to right.
    pub fn pos_yield(&self) -> Vec<&str> {
        let mut out = Vec::new();
        self.collect_pos(&mut out);
        out
    }

    fn collect_pos<'a>(&'a self, out: &mut Vec<&'a str>) {
        if self.is_preterminal() {
            out.push(&self.label);
        } else {
            for child in &self.children {
                child.collect_pos(out);
            }
        }
    }

    /// Pre-order traversal of all nodes with their paths.
    pub fn walk(&self) -> Vec<(NodePath, &Tree)> {
        let mut out = Vec::new();
        self.walk_into(Vec::new(), &mut out);
        out
    }

    fn walk_into<'a>(&'a self, path: NodePath, out: &mut Vec<(NodePath, &'a Tree)>) {
        out.push((path.clone(), self));
        for (i, child) in self.children.iter().enumerate() {
            let mut child_path = path.clone();
            child_path.push(i);
            child.walk_into(child_path, out);
        }
    }

    pub fn node_at(&self, path: &[usize]) -> Option<&Tree> {
        let mut node = self;
        for &i in path {
            node = node.children.get(i)?;
        }
        Some(node)
    }

    /// Replaces the subtree at `path`, renumbering spans afterwards.
    pub fn replace_at(&mut self, path: &[usize], subtree: Tree) -> bool {
        let mut node = &mut *self;
        for &i in path {
            match node.children.get_mut(i) {
                Some(child) => node = child,
                None => return false,
            }
        }
        *node = subtree;
        self.renumber(0);
        true
    }
}

impl fmt::Display for Tree {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&serialize(self))
    }
}

/// Serializes a tree to single-line bracketed form;
/// `parse_bracketed(serialize(t))` is structurally identical to `t`.
pub fn serialize(tree: &Tree) -> String {
    let mut out = String::new();
    write_tree(tree, &mut out);
    out
}

fn write_tree(tree: &Tree, out: &mut String) {
    if tree.is_leaf() {
        out.push_str(&tree.label);
        return;
    }
    out.push('(');
    out.push_str(&tree.label);
    for child in &tree.children {
        out.push(' ');
        write_tree(child, out);
    }
    out.push(')');
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Token {
    Open,
    Close,
    Word(String),
}

/// `(` and `)` are always structural; words are maximal runs of anything
/// else. Literal parentheses inside words are expected in their PTB escaped
/// forms `-LRB-` / `-RRB-` and pass through untouched.
fn tokenize(text: &str) -> Vec<Token> {
    let mut tokens = Vec::new();
    let mut word = String::new();
    for ch in text.chars() {
        match ch {
            '(' | ')' => {
                if !word.is_empty() {
                    tokens.push(Token::Word(std::mem::take(&mut word)));
                }
                tokens.push(if ch == '(' { Token::Open } else { Token::Close });
            }
            c if c.is_whitespace() => {
                if !word.is_empty() {
                    tokens.push(Token::Word(std::mem::take(&mut word)));
                }
            }
            c => word.push(c),
        }
    }
    if !word.is_empty() {
        tokens.push(Token::Word(word));
    }
    tokens
}

/// Parses a single bracketed tree, computing spans.
///
/// A PTB-style unlabeled wrapper `( (S ...) )` is accepted and given the
/// label `TOP`.
pub fn parse_bracketed(text: &str) -> Result<Tree, TreebankError> {
    let tokens = tokenize(text);
    let open = tokens.iter().filter(|t| **t == Token::Open).count();
    let close = tokens.iter().filter(|t| **t == Token::Close).count();
    if open != close {
        return Err(TreebankError::UnbalancedBrackets { open, close });
    }

    let mut pos = 0;
    let tree = parse_node(&tokens, &mut pos)?;
    if pos < tokens.len() {
        return Err(TreebankError::MalformedToken {
            token: token_text(&tokens[pos]),
        });
    }
    let mut tree = tree;
    tree.renumber(0);
    Ok(tree)
}

fn token_text(token: &Token) -> String {
    match token {
        Token::Open => "(".to_string(),
        Token::Close => ")".to_string(),
        Token::Word(w) => w.clone(),
    }
}

fn parse_node(tokens: &[Token], pos: &mut usize) -> Result<Tree, TreebankError> {
    match tokens.get(*pos) {
        Some(Token::Open) => {}
        Some(other) => {
            return Err(TreebankError::MalformedToken {
                token: token_text(other),
            })
        }
        None => {
            return Err(TreebankError::MalformedToken {
                token: String::new(),
            })
        }
    }
    *pos += 1;

    // Label; a bare `( (S ...) )` wrapper gets the conventional TOP label.
    let label = match tokens.get(*pos) {
        Some(Token::Word(w)) => {
            *pos += 1;
            w.clone()
        }
        Some(Token::Open) => "TOP".to_string(),
        Some(Token::Close) => {
            *pos += 1;
            return Err(TreebankError::EmptyConstituent {
                label: String::new(),
            });
        }
        None => {
            return Err(TreebankError::MalformedToken {
                token: String::new(),
            })
        }
    };

    let mut children = Vec::new();
    loop {
        match tokens.get(*pos) {
            Some(Token::Open) => children.push(parse_node(tokens, pos)?),
            Some(Token::Word(w)) => {
                children.push(Tree::leaf(w.clone()));
                *pos += 1;
            }
            Some(Token::Close) => {
                *pos += 1;
                break;
            }
            None => {
                return Err(TreebankError::MalformedToken {
                    token: String::new(),
                })
            }
        }
    }

    if children.is_empty() {
        return Err(TreebankError::EmptyConstituent { label });
    }
    Ok(Tree {
        label,
        children,
        span: Span::new(0, 0),
    })
}

/// Balances brackets in raw model output: closers that would drive the
/// depth negative are stripped, missing closers are appended at the end.
/// Already balanced input comes back unchanged. The result is checked with
/// [`parse_bracketed`]; if it still does not parse, the input is
/// unrepairable.
pub fn repair_brackets(text: &str) -> Result<String, TreebankError> {
    let mut out = String::with_capacity(text.len());
    let mut depth: usize = 0;
    for ch in text.chars() {
        match ch {
            '(' => {
                depth += 1;
                out.push(ch);
            }
            ')' => {
                if depth == 0 {
                    continue; // surplus closer
                }
                depth -= 1;
                out.push(ch);
            }
            _ => out.push(ch),
        }
    }
    for _ in 0..depth {
        out.push(')');
    }
    match parse_bracketed(&out) {
        Ok(_) => Ok(out),
        Err(err) => Err(TreebankError::Unrepairable {
            reason: err.to_string(),
        }),
    }
}

/// Extracts the first balanced `(`...`)` region, for model replies that
/// wrap the tree in prose. Returns `None` when no opening bracket exists.
pub fn extract_bracketed(text: &str) -> Option<&str> {
    let start = text.find('(')?;
    let mut depth = 0usize;
    for (i, ch) in text[start..].char_indices() {
        match ch {
            '(' => depth += 1,
            ')' => {
                depth -= 1;
                if depth == 0 {
                    return Some(&text[start..start + i + 1]);
                }
            }
            _ => {}
        }
    }
    // Unclosed: take everything from the first bracket and let repair
    // append the missing closers.
    Some(&text[start..])
}

/// All phrasal subtrees (height ≥ 2), ordered by decreasing height, ties
/// broken by span start. This is the top-down correction order.
pub fn subtrees_by_height(tree: &Tree) -> Vec<&Tree> {
    let mut nodes: Vec<&Tree> = tree
        .walk()
        .into_iter()
        .map(|(_, node)| node)
        .filter(|node| node.is_phrasal())
        .collect();
    nodes.sort_by_key(|node| (std::cmp::Reverse(node.height()), node.span().start));
    nodes
}

/// Same ordering as [`subtrees_by_height`] but keeping node paths, for
/// callers that need to address the positions afterwards.
pub fn subtrees_by_height_with_paths(tree: &Tree) -> Vec<(NodePath, &Tree)> {
    let mut nodes: Vec<(NodePath, &Tree)> = tree
        .walk()
        .into_iter()
        .filter(|(_, node)| node.is_phrasal())
        .collect();
    nodes.sort_by_key(|(_, node)| (std::cmp::Reverse(node.height()), node.span().start));
    nodes
}

/// Strips PTB-style function tags: everything from the first `-` or `=`
/// in a label, keeping pure punctuation/escape labels like `-NONE-` or
/// `--` intact.
pub fn normalize_label(label: &str) -> &str {
    if label.starts_with('-') || label.starts_with('=') {
        return label;
    }
    match label.find(['-', '=']) {
        Some(idx) => &label[..idx],
        None => label,
    }
}

/// One sentence of a corpus: the tokens and the tree over them.
#[derive(Debug, Clone)]
pub struct CorpusEntry {
    pub sentence: Vec<String>,
    pub tree: Tree,
    /// 1-based line (or block start line) in the source file.
    pub line: usize,
}

/// An ordered collection of parsed trees; sentences are derived from leaf
/// words, so gold corpora satisfy leaf/sentence agreement by construction.
#[derive(Debug, Clone, Default)]
pub struct Corpus {
    pub entries: Vec<CorpusEntry>,
    pub source: String,
}

impl Corpus {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn from_trees(trees: Vec<Tree>, source: impl Into<String>) -> Corpus {
        let entries = trees
            .into_iter()
            .enumerate()
            .map(|(i, tree)| CorpusEntry {
                sentence: tree.leaves().iter().map(|w| w.to_string()).collect(),
                tree,
                line: i + 1,
            })
            .collect();
        Corpus {
            entries,
            source: source.into(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CorpusFormat {
    /// One complete tree per line (default).
    OneTreePerLine,
    /// Trees separated by blank lines, possibly spanning several lines.
    MultiLineBlocks,
}

/// A parse failure for one entry of a corpus file.
#[derive(Debug, Clone)]
pub struct LoadError {
    pub line: usize,
    pub error: TreebankError,
}

/// A loaded corpus plus the entries that failed to parse. Loading fails
/// outright only when not a single tree parses.
#[derive(Debug, Clone)]
pub struct LoadedCorpus {
    pub corpus: Corpus,
    pub skipped: Vec<LoadError>,
}

pub fn load_corpus(
    path: impl AsRef<Path>,
    format: CorpusFormat,
) -> Result<LoadedCorpus, TreebankError> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| TreebankError::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    })?;
    load_corpus_str(&text, format, &path.display().to_string())
}

pub fn load_corpus_str(
    text: &str,
    format: CorpusFormat,
    source: &str,
) -> Result<LoadedCorpus, TreebankError> {
    let blocks: Vec<(usize, String)> = match format {
        CorpusFormat::OneTreePerLine => text
            .lines()
            .enumerate()
            .filter(|(_, line)| !line.trim().is_empty())
            .map(|(i, line)| (i + 1, line.to_string()))
            .collect(),
        CorpusFormat::MultiLineBlocks => {
            let mut blocks = Vec::new();
            let mut current = String::new();
            let mut start_line = 0;
            for (i, line) in text.lines().enumerate() {
                if line.trim().is_empty() {
                    if !current.trim().is_empty() {
                        blocks.push((start_line, std::mem::take(&mut current)));
                    }
                    current.clear();
                } else {
                    if current.trim().is_empty() {
                        start_line = i + 1;
                    }
                    current.push_str(line);
                    current.push(' ');
                }
            }
            if !current.trim().is_empty() {
                blocks.push((start_line, current));
            }
            blocks
        }
    };

    let mut entries = Vec::new();
    let mut skipped = Vec::new();
    for (line, block) in blocks {
        match parse_bracketed(&block) {
            Ok(tree) => entries.push(CorpusEntry {
                sentence: tree.leaves().iter().map(|w| w.to_string()).collect(),
                tree,
                line,
            }),
            Err(error) => skipped.push(LoadError { line, error }),
        }
    }

    if entries.is_empty() {
        return Err(TreebankError::NoTrees {
            path: source.to_string(),
        });
    }
    Ok(LoadedCorpus {
        corpus: Corpus {
            entries,
            source: source.to_string(),
        },
        skipped,
    })
}

/// Writes trees one per line.
pub fn write_corpus(trees: &[Tree], path: impl AsRef<Path>) -> Result<(), TreebankError> {
    let path = path.as_ref();
    let mut out = String::new();
    for tree in trees {
        out.push_str(&serialize(tree));
        out.push('\n');
    }
    fs::write(path, out).map_err(|e| TreebankError::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    })
}
