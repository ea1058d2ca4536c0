//! Prompt templates with `{placeholder}` substitution.
//!
//! | template   | placeholders                         |
//! |------------|--------------------------------------|
//! | extraction | `{text}`                             |
//! | repair     | `{text}`, `{output}`, `{error}`      |
//! | generation | `{question}`, `{context}`            |
//! | judge      | `{question}`, `{prediction}`, `{gold}` |

use std::fs;
use std::io;
use std::path::Path;

use crate::text::render;

pub const DEFAULT_EXTRACTION: &str = include_str!("../prompts/extraction.txt");
pub const DEFAULT_REPAIR: &str = include_str!("../prompts/repair.txt");
pub const DEFAULT_GENERATION: &str = include_str!("../prompts/generation.txt");
pub const DEFAULT_JUDGE: &str = include_str!("../prompts/judge.txt");

#[derive(Debug, Clone, PartialEq)]
pub struct Prompts {
    pub extraction: String,
    pub repair: String,
    pub generation: String,
    pub judge: String,
}

impl Default for Prompts {
    fn default() -> Self {
        Self {
            extraction: DEFAULT_EXTRACTION.into(),
            repair: DEFAULT_REPAIR.into(),
            generation: DEFAULT_GENERATION.into(),
            judge: DEFAULT_JUDGE.into(),
        }
    }
}

fn read_or(path: Option<&Path>, default: &str) -> io::Result<String> {
    match path {
        Some(p) => fs::read_to_string(p),
        None => Ok(default.to_string()),
    }
}

impl Prompts {
    /// Defaults, with any provided template files taking their place.
    pub fn load(
        extraction: Option<&Path>,
        repair: Option<&Path>,
        generation: Option<&Path>,
        judge: Option<&Path>,
    ) -> io::Result<Self> {
        Ok(Self {
            extraction: read_or(extraction, DEFAULT_EXTRACTION)?,
            repair: read_or(repair, DEFAULT_REPAIR)?,
            generation: read_or(generation, DEFAULT_GENERATION)?,
            judge: read_or(judge, DEFAULT_JUDGE)?,
        })
    }

    pub fn extraction_prompt(&self, text: &str) -> String {
        render(&self.extraction, &[("text", text)])
    }

    pub fn repair_prompt(&self, text: &str, output: &str, error: &str) -> String {
        render(
            &self.repair,
            &[("output", output), ("error", error), ("text", text)],
        )
    }

    /// Context is appended if the template has no `{context}` slot.
    pub fn generation_prompt(&self, question: &str, context: &str) -> String {
        let mut out = render(
            &self.generation,
            &[("context", context), ("question", question)],
        );
        if !self.generation.contains("{context}") && !context.is_empty() {
            out.push_str("\n\n");
            out.push_str(context);
        }
        out
    }

    pub fn judge_prompt(&self, question: &str, prediction: &str, gold: &str) -> String {
        render(
            &self.judge,
            &[("question", question), ("prediction", prediction), ("gold", gold)],
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_have_their_placeholders() {
        let p = Prompts::default();
        assert!(p.extraction.contains("{text}"));
        assert!(p.generation.contains("{context}") && p.generation.contains("{question}"));
        assert!(p.judge.contains("{prediction}") && p.judge.contains("{gold}"));
        assert!(p.repair.contains("{output}"));
    }

    #[test]
    fn generation_appends_context_without_slot() {
        let p = Prompts {
            generation: "Q: {question}".into(),
            ..Prompts::default()
        };
        assert_eq!(p.generation_prompt("why", "ctx"), "Q: why\n\nctx");
    }

    #[test]
    fn overrides_load_from_files() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("gen.txt");
        fs::write(&path, "custom {question}").unwrap();
        let p = Prompts::load(None, None, Some(&path), None).unwrap();
        assert_eq!(p.generation, "custom {question}");
        assert_eq!(p.extraction, DEFAULT_EXTRACTION);
    }
}
