//! Locates the first well-formed top-level JSON array in provider output.

use serde_json::Value;

/// Byte range of the bracket-balanced span starting at `start`, skipping
/// brackets inside string literals.
fn balanced_end(text: &str, start: usize) -> Option<usize> {
    let bytes = text.as_bytes();
    let mut depth = 0usize;
    let mut in_string = false;
    let mut escaped = false;
    for (i, &b) in bytes.iter().enumerate().skip(start) {
        if in_string {
            match b {
                _ if escaped => escaped = false,
                b'\\' => escaped = true,
                b'"' => in_string = false,
                _ => {}
            }
            continue;
        }
        match b {
            b'"' => in_string = true,
            b'[' | b'{' => depth += 1,
            b']' | b'}' => {
                depth = depth.checked_sub(1)?;
                if depth == 0 {
                    return Some(i + 1);
                }
            }
            _ => {}
        }
    }
    None
}

/// The text of the first `[...]` span that parses as a JSON array.
pub fn first_json_array(text: &str) -> Option<&str> {
    let mut from = 0;
    while let Some(offset) = text[from..].find('[') {
        let start = from + offset;
        if let Some(end) = balanced_end(text, start) {
            let candidate = &text[start..end];
            if let Ok(Value::Array(_)) = serde_json::from_str::<Value>(candidate) {
                return Some(candidate);
            }
        }
        from = start + 1;
    }
    None
}

pub fn extract_array(text: &str) -> Option<Vec<Value>> {
    match serde_json::from_str(first_json_array(text)?) {
        Ok(Value::Array(items)) => Some(items),
        _ => None,
    }
}
