//! Small text utilities shared by pattern matching, spot-name lookup and
//! the hashing embedder.

/// 64-bit FNV-1a.
pub fn fnv1a64(bytes: &[u8]) -> u64 {
    const OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
    const PRIME: u64 = 0x0000_0100_0000_01b3;
    bytes.iter().fold(OFFSET, |h, &b| (h ^ u64::from(b)).wrapping_mul(PRIME))
}

/// Lowercases and replaces every non-alphanumeric character with a single
/// space, then pads with one space on each side: `"Yes, sure!"` becomes
/// `" yes sure "`. Substring tests on two padded strings are therefore
/// token-boundary aware.
pub fn padded_tokens(text: &str) -> String {
    let mut out = String::with_capacity(text.len() + 2);
    out.push(' ');
    let mut last_space = true;
    for c in text.chars().flat_map(char::to_lowercase) {
        if c.is_alphanumeric() || c == '\'' {
            out.push(c);
            last_space = false;
        } else if !last_space {
            out.push(' ');
            last_space = true;
        }
    }
    if !last_space {
        out.push(' ');
    }
    out
}

/// True when `needle` occurs in `haystack` on token boundaries, ignoring
/// case and punctuation.
pub fn contains_phrase(haystack: &str, needle: &str) -> bool {
    let needle = padded_tokens(needle);
    if needle.trim().is_empty() {
        return false;
    }
    padded_tokens(haystack).contains(&needle)
}

/// Number of non-overlapping occurrences of `needle` in `haystack` on token
/// boundaries.
pub fn count_phrase(haystack: &str, needle: &str) -> usize {
    let needle = padded_tokens(needle);
    if needle.trim().is_empty() {
        return 0;
    }
    let hay = padded_tokens(haystack);
    // Occurrences share the boundary space, so step past all but the last char.
    let mut count = 0;
    let mut start = 0;
    while let Some(pos) = hay[start..].find(&needle) {
        count += 1;
        start += pos + needle.len() - 1;
    }
    count
}

/// Byte offset of the first token-boundary occurrence of `needle`.
pub fn find_phrase(haystack: &str, needle: &str) -> Option<usize> {
    let needle = padded_tokens(needle);
    if needle.trim().is_empty() {
        return None;
    }
    padded_tokens(haystack).find(&needle)
}

/// Replaces `{key}` placeholders (keys are ASCII alphanumerics and `_`).
/// Braces that do not enclose a key are copied through. Returns the first
/// unresolved key as the error.
pub fn render_placeholders(template: &str, mut lookup: impl FnMut(&str) -> Option<String>) -> Result<String, String> {
    let mut out = String::with_capacity(template.len());
    let mut rest = template;
    while let Some(open) = rest.find('{') {
        out.push_str(&rest[..open]);
        let after = &rest[open + 1..];
        let key_len = after
            .find(|c: char| !(c.is_ascii_alphanumeric() || c == '_'))
            .unwrap_or(after.len());
        if key_len > 0 && after[key_len..].starts_with('}') {
            let key = &after[..key_len];
            out.push_str(&lookup(key).ok_or_else(|| key.to_string())?);
            rest = &after[key_len + 1..];
        } else {
            out.push('{');
            rest = after;
        }
    }
    out.push_str(rest);
    Ok(out)
}
