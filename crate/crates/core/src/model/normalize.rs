//! Location-reference normalization: case-fold, collapse whitespace, trim.
//! Diacritics are kept as-is.

/// Normalized form used for equality between location references.
pub fn normalize_location(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    let mut pending_space = false;
    for c in text.chars() {
        if c.is_whitespace() {
            pending_space = !out.is_empty();
            continue;
        }
        if pending_space {
            out.push(' ');
            pending_space = false;
        }
        out.extend(c.to_lowercase());
    }
    out
}

/// Normalizes `text` and keeps, for every output char, the index of the
/// source char it came from. Used to map normalized matches back onto
/// spans of the original text.
pub(crate) fn normalize_with_map(text: &str) -> (Vec<char>, Vec<usize>) {
    let mut out = Vec::with_capacity(text.len());
    let mut map = Vec::with_capacity(text.len());
    let mut pending_space: Option<usize> = None;
    for (idx, c) in text.chars().enumerate() {
        if c.is_whitespace() {
            if !out.is_empty() && pending_space.is_none() {
                pending_space = Some(idx);
            }
            continue;
        }
        if let Some(space_idx) = pending_space.take() {
            out.push(' ');
            map.push(space_idx);
        }
        for lower in c.to_lowercase() {
            out.push(lower);
            map.push(idx);
        }
    }
    (out, map)
}

/// Char-index spans `[start, end)` in `text` where the normalized `needle`
/// occurs on word boundaries.
pub fn find_normalized(text: &str, needle: &str) -> Vec<(usize, usize)> {
    let needle: Vec<char> = normalize_location(needle).chars().collect();
    if needle.is_empty() {
        return Vec::new();
    }
    let (hay, map) = normalize_with_map(text);
    let mut spans = Vec::new();
    if needle.len() > hay.len() {
        return spans;
    }
    for start in 0..=hay.len() - needle.len() {
        if hay[start..start + needle.len()] != needle[..] {
            continue;
        }
        let end = start + needle.len();
        let left_ok = start == 0 || !hay[start - 1].is_alphanumeric();
        let right_ok = end == hay.len() || !hay[end].is_alphanumeric();
        if left_ok && right_ok {
            spans.push((map[start], map[end - 1] + 1));
        }
    }
    spans
}
