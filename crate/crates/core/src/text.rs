//! Label normalization shared by the graph and the response parser.

use alloc::string::String;

/// Case-fold, trim and collapse internal whitespace runs to one space.
pub fn normalize_label(raw: &str) -> String {
    let mut out = String::with_capacity(raw.len());
    for word in raw.split_whitespace() {
        if !out.is_empty() {
            out.push(' ');
        }
        for c in word.chars() {
            out.extend(c.to_lowercase());
        }
    }
    out
}
