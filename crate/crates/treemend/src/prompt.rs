//! Prompt assembly for parsing and correction requests.
//!
//! Every request sent to a backend is a [`PromptSpec`]: the parsing
//! instruction, optional worked examples, the model's prior answer when we
//! are asking for a correction, an error-specific hint, and the target
//! sentence. Rendering is deterministic; the rendered text is what scripted
//! backends hash.

use serde::Serialize;

/// The instruction block used for every parsing and correction request.
pub const PARSING_INSTRUCTION: &str = "You will be given one sentence for constituency parsing. \
Every word that is separated by a space should be considered an independent word and have its \
own constituency label. Please parse the sentence with given words.";

/// One worked example: a sentence with its bracketed tree, optionally
/// pointing at the subtree that makes it relevant.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ExampleBlock {
    pub sentence: String,
    pub tree_text: String,
    pub highlight: Option<String>,
}

impl ExampleBlock {
    pub fn new(sentence: impl Into<String>, tree_text: impl Into<String>) -> ExampleBlock {
        ExampleBlock {
            sentence: sentence.into(),
            tree_text: tree_text.into(),
            highlight: None,
        }
    }

    pub fn with_highlight(mut self, highlight: impl Into<String>) -> ExampleBlock {
        self.highlight = Some(highlight.into());
        self
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct PromptSpec {
    pub instruction: String,
    pub examples: Vec<ExampleBlock>,
    pub prior_answer: Option<String>,
    pub hint: Option<String>,
    pub target_sentence: String,
}

impl PromptSpec {
    pub fn new(target_sentence: impl Into<String>) -> PromptSpec {
        PromptSpec {
            instruction: PARSING_INSTRUCTION.to_string(),
            examples: Vec::new(),
            prior_answer: None,
            hint: None,
            target_sentence: target_sentence.into(),
        }
    }

    /// Renders the final text sent to the model.
    pub fn render(&self) -> String {
        let mut out = String::new();
        out.push_str(&self.instruction);
        out.push('\n');
        if !self.examples.is_empty() {
            out.push_str("Here are some examples:\n");
            for example in &self.examples {
                out.push_str(&example.sentence);
                out.push('\t');
                out.push_str(&example.tree_text);
                out.push('\n');
                if let Some(highlight) = &example.highlight {
                    out.push_str("Relevant subtree: ");
                    out.push_str(highlight);
                    out.push('\n');
                }
            }
        }
        if let Some(prior) = &self.prior_answer {
            out.push_str("Your previous answer: ");
            out.push_str(prior);
            out.push('\n');
        }
        if let Some(hint) = &self.hint {
            out.push_str(hint);
            out.push('\n');
        }
        out.push_str("Input: ");
        out.push_str(&self.target_sentence);
        out.push_str("\nOutput:");
        out
    }
}
