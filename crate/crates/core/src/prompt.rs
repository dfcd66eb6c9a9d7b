//! Prompt assembly from the three natural-language inputs (summary,
//! description, signatures), ablation variants, and extraction of candidate
//! specifications from model responses.

use std::fmt::{self, Write};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::signatures::{SignatureTable, SymbolKind};

/// Default instruction header: a TSL cheat-sheet plus the output-format directive.
pub const DEFAULT_INSTRUCTIONS: &str = include_str!("../data/instructions_v1.txt");
pub const DEFAULT_INSTRUCTIONS_VERSION: &str = "v1";

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PromptBundle {
    pub benchmark_name: String,
    pub summary: String,
    pub description: String,
    pub signatures: SignatureTable,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum PromptVariant {
    #[serde(rename = "full")]
    Full,
    #[serde(rename = "no-sigs")]
    NoSignatures,
    #[serde(rename = "summary-only")]
    SummaryOnly,
}

impl PromptVariant {
    pub const ALL: [PromptVariant; 3] = [PromptVariant::Full, PromptVariant::NoSignatures, PromptVariant::SummaryOnly];

    pub fn as_str(self) -> &'static str {
        match self {
            PromptVariant::Full => "full",
            PromptVariant::NoSignatures => "no-sigs",
            PromptVariant::SummaryOnly => "summary-only",
        }
    }

    pub fn includes_description(self) -> bool {
        self != PromptVariant::SummaryOnly
    }

    pub fn includes_signatures(self) -> bool {
        self == PromptVariant::Full
    }
}

impl fmt::Display for PromptVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for PromptVariant {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "full" => Ok(PromptVariant::Full),
            "no-sigs" => Ok(PromptVariant::NoSignatures),
            "summary-only" => Ok(PromptVariant::SummaryOnly),
            other => Err(format!("unknown variant `{other}` (expected full, no-sigs or summary-only)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum PromptPart {
    Summary,
    Description,
    Signatures,
}

impl fmt::Display for PromptPart {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PromptPart::Summary => "summary",
            PromptPart::Description => "description",
            PromptPart::Signatures => "signatures",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error, Serialize)]
pub enum PromptError {
    #[error("prompt variant needs a non-empty {which}")]
    MissingPart { which: PromptPart },
}

/// Builds the prompt: instructions, then summary, then (per variant) the
/// description, then (per variant) the signatures in the
/// `Cells:` / `Functions:` / `Predicates:` layout.
pub fn assemble_prompt(
    bundle: &PromptBundle,
    variant: PromptVariant,
    instructions: &str,
) -> Result<String, PromptError> {
    let missing = |which| Err(PromptError::MissingPart { which });
    if bundle.summary.trim().is_empty() {
        return missing(PromptPart::Summary);
    }
    if variant.includes_description() && bundle.description.trim().is_empty() {
        return missing(PromptPart::Description);
    }
    if variant.includes_signatures() && bundle.signatures.is_empty() {
        return missing(PromptPart::Signatures);
    }

    let mut out = String::new();
    let header = instructions.trim_end();
    if !header.is_empty() {
        out.push_str(header);
        out.push_str("\n\n");
    }
    out.push_str("Summary:\n");
    out.push_str(bundle.summary.trim_end());
    out.push('\n');
    if variant.includes_description() {
        out.push_str("\nDescription:\n");
        out.push_str(bundle.description.trim_end());
        out.push('\n');
    }
    if variant.includes_signatures() {
        out.push('\n');
        out.push_str(&render_signatures(&bundle.signatures));
    }
    Ok(out)
}

/// Renders a table in the layout of the functions-and-predicates description.
pub fn render_signatures(table: &SignatureTable) -> String {
    let mut out = String::new();
    let sections = [
        ("Cells", SymbolKind::Cell),
        ("Inputs", SymbolKind::Input),
        ("Outputs", SymbolKind::Output),
        ("Functions", SymbolKind::Function),
        ("Predicates", SymbolKind::Predicate),
    ];
    for (title, kind) in sections {
        let mut decls = table.of_kind(kind).peekable();
        if decls.peek().is_none() {
            continue;
        }
        let _ = writeln!(out, "{title}:");
        for d in decls {
            match kind {
                SymbolKind::Cell | SymbolKind::Input | SymbolKind::Output => {
                    let _ = writeln!(out, "  \"{}\" {}", d.name, d.description.trim());
                }
                SymbolKind::Function | SymbolKind::Predicate => {
                    let _ = writeln!(out, "  {}({}) => {}", d.name, d.params.join(", "), d.description.trim());
                }
            }
        }
    }
    out
}

/// Hex SHA-256 of a text, used to log prompts and instruction headers.
pub fn text_hash(text: &str) -> String {
    hex::encode(Sha256::digest(text.as_bytes()))
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error, Serialize)]
#[error("no specification found in model response")]
pub struct ExtractionError;

/// Pulls the candidate specification out of a model response: the first fenced
/// code block if there is one, otherwise the longest run of `always assume` /
/// `always guarantee` blocks with balanced braces.
pub fn extract_spec(response: &str) -> Result<String, ExtractionError> {
    if let Some(block) = first_fenced_block(response) {
        return Ok(block.to_string());
    }
    let mut best: Option<&str> = None;
    let mut from = 0;
    while let Some(off) = response[from..].find("always") {
        let start = from + off;
        if let Some(end) = block_run_end(response, start) {
            let cand = &response[start..end];
            if best.is_none_or(|b| cand.len() > b.len()) {
                best = Some(cand);
            }
        }
        from = start + "always".len();
    }
    best.map(str::to_string).ok_or(ExtractionError)
}

fn first_fenced_block(text: &str) -> Option<&str> {
    let open = text.find("```")?;
    let after_ticks = &text[open + 3..];
    // the rest of the opening line is an optional language tag
    let body_start = after_ticks.find('\n')? + 1;
    let body = &after_ticks[body_start..];
    let mut offset = 0;
    for line in body.split_inclusive('\n') {
        if line.trim_start().starts_with("```") {
            let content = &body[..offset];
            return Some(content.strip_suffix('\n').unwrap_or(content));
        }
        offset += line.len();
    }
    Some(body)
}

/// End offset of the consecutive `always <block> { .. }` blocks starting at `start`.
fn block_run_end(text: &str, start: usize) -> Option<usize> {
    let mut pos = start;
    let mut end = None;
    loop {
        let Some(block_end) = one_block_end(text, pos) else { return end };
        end = Some(block_end);
        let rest = &text[block_end..];
        let trimmed = rest.trim_start();
        if !trimmed.starts_with("always") {
            return end;
        }
        pos = block_end + (rest.len() - trimmed.len());
    }
}

fn one_block_end(text: &str, pos: usize) -> Option<usize> {
    let rest = text[pos..].strip_prefix("always")?;
    let trimmed = rest.trim_start();
    if trimmed.len() == rest.len() {
        return None;
    }
    let after_kw = trimmed.strip_prefix("assume").or_else(|| trimmed.strip_prefix("guarantee"))?.trim_start();
    if !after_kw.starts_with('{') {
        return None;
    }
    let brace = text.len() - after_kw.len();
    let mut depth = 0usize;
    for (i, c) in text[brace..].char_indices() {
        match c {
            '{' => depth += 1,
            '}' => {
                depth -= 1;
                if depth == 0 {
                    return Some(brace + i + 1);
                }
            }
            _ => {}
        }
    }
    // unbalanced: take everything that follows
    Some(text.len())
}
