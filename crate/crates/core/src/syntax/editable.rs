//! The editable-region marker: a comment line after which participants may
//! replace the module text.

/// Trimmed content of the marker line.
pub const MARKER: &str = "-- %%% EDITABLE %%%";

/// 1-based line number of the first marker line, if any.
pub fn marker_line(text: &str) -> Option<u32> {
    text.lines()
        .position(|line| line.trim() == MARKER)
        .map(|i| i as u32 + 1)
}

/// Splits `text` after the marker line. The protected part includes the
/// marker line and its line break; `protected + editable == text`.
pub fn split_editable(text: &str) -> (&str, Option<&str>) {
    let mut offset = 0;
    for line in text.split_inclusive('\n') {
        offset += line.len();
        if line.trim() == MARKER {
            return (&text[..offset], Some(&text[offset..]));
        }
    }
    (text, None)
}

/// Reassembles a module from its protected part and a new editable region.
pub fn join_editable(protected: &str, editable: &str) -> String {
    let mut full = String::with_capacity(protected.len() + editable.len() + 1);
    full.push_str(protected);
    if !protected.is_empty() && !protected.ends_with('\n') {
        full.push('\n');
    }
    full.push_str(editable);
    full
}
