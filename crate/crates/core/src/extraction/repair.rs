//! Minimal JSON repair: strip prose around the document and drop trailing
//! commas. Nothing else is altered, so repair never adds content.

/// Returns the outermost `{ ... }` span with trailing commas removed, or
/// the input unchanged when it holds no object.
pub fn repair_json(text: &str) -> String {
    let Some(start) = text.find('{') else {
        return text.to_string();
    };
    let end = matching_close(text, start).or_else(|| text.rfind('}').map(|i| i + 1));
    let slice = match end {
        Some(end) if end > start => &text[start..end],
        _ => &text[start..],
    };
    strip_trailing_commas(slice)
}

/// End index (exclusive) of the object opened at `start`, honouring strings.
fn matching_close(text: &str, start: usize) -> Option<usize> {
    let mut depth = 0usize;
    let mut in_string = false;
    let mut escaped = false;
    for (i, c) in text[start..].char_indices() {
        if in_string {
            match c {
                _ if escaped => escaped = false,
                '\\' => escaped = true,
                '"' => in_string = false,
                _ => {}
            }
            continue;
        }
        match c {
            '"' => in_string = true,
            '{' | '[' => depth += 1,
            '}' | ']' => {
                depth = depth.checked_sub(1)?;
                if depth == 0 {
                    return Some(start + i + c.len_utf8());
                }
            }
            _ => {}
        }
    }
    None
}

fn strip_trailing_commas(json: &str) -> String {
    let chars: Vec<char> = json.chars().collect();
    let mut out = String::with_capacity(json.len());
    let mut in_string = false;
    let mut escaped = false;
    for (i, &c) in chars.iter().enumerate() {
        if in_string {
            out.push(c);
            match c {
                _ if escaped => escaped = false,
                '\\' => escaped = true,
                '"' => in_string = false,
                _ => {}
            }
            continue;
        }
        if c == '"' {
            in_string = true;
        }
        if c == ',' {
            let next = chars[i + 1..].iter().find(|c| !c.is_whitespace());
            if matches!(next, Some('}') | Some(']')) {
                continue;
            }
        }
        out.push(c);
    }
    out
}
