use serde::{Deserialize, Serialize};

use crate::text::padded_tokens;

/// A hand-authored candidate utterance.
///
/// Without `*` the pattern is a case-insensitive phrase that must occur on
/// token boundaries somewhere in the utterance. With `*` it is anchored
/// against the whole normalized utterance and each `*` matches any run of
/// text (including none), so `yes*` means "starts with yes" and `*` alone
/// accepts anything non-empty.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Pattern(String);

impl Pattern {
    pub fn new(raw: impl Into<String>) -> Self {
        Pattern(raw.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }

    pub fn matches(&self, utterance: &str) -> bool {
        let text = padded_tokens(utterance);
        if text.trim().is_empty() {
            return false;
        }
        if self.0.contains('*') {
            let pieces: Vec<String> = self
                .0
                .split('*')
                .map(|p| padded_tokens(p).trim().to_string())
                .collect();
            wildcard_match(text.trim(), &pieces)
        } else {
            let needle = padded_tokens(&self.0);
            !needle.trim().is_empty() && text.contains(&needle)
        }
    }
}

/// `pieces` are the literal segments between `*`s. The first must be a
/// prefix, the last a suffix, and the rest must appear in order.
fn wildcard_match(text: &str, pieces: &[String]) -> bool {
    let (first, rest) = match pieces.split_first() {
        Some(split) => split,
        None => return true,
    };
    let (last, middle) = match rest.split_last() {
        Some(split) => split,
        None => return text == first,
    };
    if !starts_on_boundary(text, first) {
        return false;
    }
    let mut cursor = first.len();
    for piece in middle.iter().filter(|p| !p.is_empty()) {
        match find_on_boundary(&text[cursor..], piece) {
            Some(end) => cursor += end,
            None => return false,
        }
    }
    if last.is_empty() {
        return true;
    }
    text.len() >= cursor + last.len() && ends_on_boundary(&text[cursor..], last)
}

fn starts_on_boundary(text: &str, prefix: &str) -> bool {
    prefix.is_empty()
        || (text.starts_with(prefix)
            && text[prefix.len()..].chars().next().is_none_or(|c| c == ' '))
}

fn ends_on_boundary(text: &str, suffix: &str) -> bool {
    text.ends_with(suffix)
        && text[..text.len() - suffix.len()]
            .chars()
            .next_back()
            .is_none_or(|c| c == ' ')
}

/// Returns the byte offset just past the first boundary-aligned occurrence.
fn find_on_boundary(text: &str, piece: &str) -> Option<usize> {
    let padded = format!(" {text} ");
    let needle = format!(" {piece} ");
    padded.find(&needle).map(|pos| pos + piece.len())
}
