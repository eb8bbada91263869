use std::sync::LazyLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Same,
    Different,
    Unparseable,
}

// Negative cues come first so "not the same" is never read as "same".
static CUES: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(
        r"(?i)(?P<neg>\bnot\b(?:\W+\w+){0,4}?\W+same\b|\bdiffer(?:ent|s)?\b|\bno\b)|(?P<pos>\bsame\b|\byes\b)",
    )
    .unwrap()
});

static ANSWER_MARKER: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"(?i)\b(?:final\s+answer|answer|conclusion)\s*[:\-]").unwrap());

/// Reads the verdict from a model reply. When both cues appear the last one wins.
pub fn parse_verdict(text: &str) -> Verdict {
    let region = match ANSWER_MARKER.find_iter(text).last() {
        Some(m) => &text[m.end()..],
        None => text,
    };
    match CUES.captures_iter(region).last() {
        Some(c) if c.name("neg").is_some() => Verdict::Different,
        Some(_) => Verdict::Same,
        None => Verdict::Unparseable,
    }
}
