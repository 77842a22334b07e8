//! Reading labels back out of free-text completions.

use std::collections::BTreeMap;

use tpoint_core::inference::LlmAnswer;

fn is_word_char(c: char) -> bool {
    c.is_alphanumeric() || c == '_'
}

/// Whole-word, case-insensitive occurrences of `needle` in `haystack` as byte
/// spans of the lowercased haystack. Spaces, underscores and hyphens inside
/// the needle match each other.
fn word_spans(haystack: &str, needle: &str) -> Vec<(usize, usize)> {
    let hay = haystack.to_lowercase();
    let norm = |s: &str| s.chars().map(|c| if c == '-' || c == ' ' { '_' } else { c }).collect::<String>();
    let hay_n = norm(&hay);
    let needle_n = norm(&needle.to_lowercase());
    if needle_n.is_empty() {
        return Vec::new();
    }
    let mut out = Vec::new();
    let mut from = 0;
    while let Some(off) = hay_n[from..].find(&needle_n) {
        let start = from + off;
        let end = start + needle_n.len();
        let left = hay[..start].chars().next_back().is_none_or(|c| !is_word_char(c));
        let right = hay[end..].chars().next().is_none_or(|c| !is_word_char(c));
        if left && right {
            out.push((start, end));
        }
        from = start + hay_n[start..].chars().next().map_or(1, char::len_utf8);
    }
    out
}

fn label_mentioned(text: &str, n: u8) -> bool {
    [format!("event_{n}"), format!("event {n}"), format!("event{n}")]
        .iter()
        .any(|form| !word_spans(text, form).is_empty())
}

/// `event_1`, `event_2`, or `other` when both or neither are mentioned.
pub fn parse_answer(text: &str) -> LlmAnswer {
    parse_answer_with_triggers(text, None, None)
}

/// As [`parse_answer`], also accepting the trigger word that stands for each
/// event.
pub fn parse_answer_with_triggers(text: &str, e1: Option<&str>, e2: Option<&str>) -> LlmAnswer {
    let trigger = |t: Option<&str>| t.is_some_and(|t| !t.trim().is_empty() && !word_spans(text, t).is_empty());
    // A trigger shared by both events identifies neither.
    let shared = matches!((e1, e2), (Some(a), Some(b)) if a.eq_ignore_ascii_case(b));
    let one = label_mentioned(text, 1) || (!shared && trigger(e1));
    let two = label_mentioned(text, 2) || (!shared && trigger(e2));
    match (one, two) {
        (true, false) => LlmAnswer::Event1,
        (false, true) => LlmAnswer::Event2,
        _ => LlmAnswer::Other,
    }
}

/// The single candidate relation named in `text`, if exactly one is.
/// A candidate mentioned only inside a longer candidate (Included inside
/// Is_Included) does not count. Chain-of-thought answers are read from their
/// last non-empty line first.
pub fn parse_relation(text: &str, candidates: &[String]) -> Option<String> {
    let last = text.lines().rev().find(|l| !l.trim().is_empty()).unwrap_or("");
    parse_relation_in(last, candidates).or_else(|| parse_relation_in(text, candidates))
}

fn parse_relation_in(text: &str, candidates: &[String]) -> Option<String> {
    let spans: BTreeMap<&str, Vec<(usize, usize)>> =
        candidates.iter().map(|c| (c.as_str(), word_spans(text, c))).collect();
    let covered = |c: &str, (a, b): (usize, usize)| {
        spans
            .iter()
            .any(|(other, os)| *other != c && other.len() > c.len() && os.iter().any(|&(x, y)| x <= a && b <= y))
    };
    let found: Vec<&str> = spans
        .iter()
        .filter(|(c, ss)| ss.iter().any(|&s| !covered(c, s)))
        .map(|(c, _)| *c)
        .collect();
    match found.as_slice() {
        [only] => Some(only.to_string()),
        _ => None,
    }
}
