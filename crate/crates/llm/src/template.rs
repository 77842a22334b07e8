//! Prompt templates with `{TEXT}`, `{EVENT_1}`, `{EVENT_2}` (and, for the
//! classification prompts, `{RELATIONS}`) placeholders.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{LlmError, Result};

pub const EVENT_1_MARKER: &str = "###";
pub const EVENT_2_MARKER: &str = "***";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptTemplate {
    pub name: String,
    pub text: String,
    /// Answers the prompt asks for.
    pub answer_space: Vec<String>,
}

impl PromptTemplate {
    pub fn new(name: impl Into<String>, text: impl Into<String>, answer_space: &[&str]) -> Self {
        PromptTemplate {
            name: name.into(),
            text: text.into(),
            answer_space: answer_space.iter().map(|s| s.to_string()).collect(),
        }
    }

    /// Placeholder names in order of appearance.
    pub fn placeholders(&self) -> Vec<&str> {
        placeholder_spans(&self.text).into_iter().map(|(_, _, n)| n).collect()
    }

    /// Substitute every placeholder from `vars`.
    pub fn fill(&self, vars: &BTreeMap<&str, String>) -> Result<String> {
        let mut out = String::with_capacity(self.text.len());
        let mut last = 0;
        for (start, end, name) in placeholder_spans(&self.text) {
            let value = vars.get(name).ok_or_else(|| LlmError::MissingPlaceholder {
                template: self.name.clone(),
                name: name.to_string(),
            })?;
            out.push_str(&self.text[last..start]);
            out.push_str(value);
            last = end;
        }
        out.push_str(&self.text[last..]);
        Ok(out)
    }
}

fn placeholder_spans(text: &str) -> Vec<(usize, usize, &str)> {
    let bytes = text.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        if bytes[i] == b'{' {
            let name_len = bytes[i + 1..]
                .iter()
                .take_while(|b| b.is_ascii_uppercase() || b.is_ascii_digit() || **b == b'_')
                .count();
            let close = i + 1 + name_len;
            if name_len > 0 && bytes.get(close) == Some(&b'}') {
                out.push((i, close + 1, &text[i + 1..close]));
                i = close + 1;
                continue;
            }
        }
        i += 1;
    }
    out
}

pub const EVENT_LABELS: [&str; 2] = ["event_1", "event_2"];

pub fn prompt1() -> PromptTemplate {
    PromptTemplate::new("prompt1", include_str!("../templates/prompt1.txt"), &EVENT_LABELS)
}

pub fn prompt2() -> PromptTemplate {
    PromptTemplate::new("prompt2", include_str!("../templates/prompt2.txt"), &EVENT_LABELS)
}

pub fn prompt3() -> PromptTemplate {
    PromptTemplate::new("prompt3", include_str!("../templates/prompt3.txt"), &EVENT_LABELS)
}

pub fn prompt4() -> PromptTemplate {
    PromptTemplate::new("prompt4", include_str!("../templates/prompt4.txt"), &EVENT_LABELS)
}

/// Start-earlier, start-later, end-earlier, end-later.
pub fn unified_prompts() -> [PromptTemplate; 4] {
    [prompt1(), prompt2(), prompt3(), prompt4()]
}

pub fn classification(relations: &[String]) -> PromptTemplate {
    let space: Vec<&str> = relations.iter().map(String::as_str).collect();
    PromptTemplate::new("classification", include_str!("../templates/classification.txt"), &space)
}

pub fn classification_cot(relations: &[String]) -> PromptTemplate {
    let space: Vec<&str> = relations.iter().map(String::as_str).collect();
    PromptTemplate::new("classification_cot", include_str!("../templates/classification_cot.txt"), &space)
}

fn is_word_byte(b: u8) -> bool {
    b.is_ascii_alphanumeric() || b == b'_'
}

/// Byte offset of the first whole-word, case-sensitive occurrence of
/// `needle` in `text` at or after `from` that does not start inside `skip`.
pub(crate) fn find_word(text: &str, needle: &str, from: usize, skip: Option<(usize, usize)>) -> Option<usize> {
    let bytes = text.as_bytes();
    let mut pos = from;
    while let Some(off) = text.get(pos..)?.find(needle) {
        let start = pos + off;
        let end = start + needle.len();
        let left_ok = start == 0 || !is_word_byte(bytes[start - 1]) || !is_word_byte(needle.as_bytes()[0]);
        let right_ok = end == bytes.len() || !is_word_byte(bytes[end]) || !is_word_byte(*needle.as_bytes().last().unwrap());
        let skipped = skip.is_some_and(|(a, b)| start < b && end > a);
        if left_ok && right_ok && !skipped {
            return Some(start);
        }
        pos = start + text[start..].chars().next().map_or(1, char::len_utf8);
    }
    None
}

/// Insert `###` before event 1's trigger and `***` before event 2's, using
/// the first whole-word occurrence of each (event 2 may not reuse event 1's).
pub fn mark_events(text: &str, e1: &str, e2: &str) -> Result<String> {
    if e1.trim().is_empty() || e2.trim().is_empty() {
        return Err(LlmError::EmptyEvent);
    }
    let p1 = find_word(text, e1, 0, None).ok_or_else(|| LlmError::EventNotFound(e1.to_string()))?;
    let p2 = find_word(text, e2, 0, Some((p1, p1 + e1.len()))).ok_or_else(|| LlmError::EventNotFound(e2.to_string()))?;
    mark_events_at(text, p1, p2)
}

/// Insert the markers at explicit byte offsets.
pub fn mark_events_at(text: &str, p1: usize, p2: usize) -> Result<String> {
    for p in [p1, p2] {
        if !text.is_char_boundary(p) || p >= text.len() {
            return Err(LlmError::EventNotFound(format!("offset {p}")));
        }
    }
    let mut inserts = [(p1, EVENT_1_MARKER), (p2, EVENT_2_MARKER)];
    inserts.sort_by_key(|&(p, _)| p);
    let mut out = String::with_capacity(text.len() + 6);
    let mut last = 0;
    for (p, marker) in inserts {
        out.push_str(&text[last..p]);
        out.push_str(marker);
        last = p;
    }
    out.push_str(&text[last..]);
    Ok(out)
}

fn base_vars(text: &str, e1: &str, e2: &str) -> Result<BTreeMap<&'static str, String>> {
    let mut vars = BTreeMap::new();
    vars.insert("TEXT", mark_events(text, e1, e2)?);
    vars.insert("EVENT_1", e1.to_string());
    vars.insert("EVENT_2", e2.to_string());
    Ok(vars)
}

/// Render a unified or classification template for one event pair.
pub fn render(t: &PromptTemplate, text: &str, e1: &str, e2: &str) -> Result<String> {
    t.fill(&base_vars(text, e1, e2)?)
}

/// Render with the candidate list filled in, in the given order.
pub fn render_with_relations(t: &PromptTemplate, text: &str, e1: &str, e2: &str, relations: &[String]) -> Result<String> {
    let mut vars = base_vars(text, e1, e2)?;
    vars.insert("RELATIONS", relations.join(", "));
    t.fill(&vars)
}
