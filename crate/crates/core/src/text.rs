//! Small text helpers shared by extraction, descriptors and metrics.

use std::collections::BTreeSet;

/// Lowercase and keep only alphanumeric characters.
pub fn normalize_token(token: &str) -> String {
    token
        .chars()
        .filter(|c| c.is_alphanumeric())
        .flat_map(char::to_lowercase)
        .collect()
}

/// Whitespace-split, normalized, non-empty tokens as a set.
pub fn token_set(text: &str) -> BTreeSet<String> {
    text.split_whitespace()
        .map(normalize_token)
        .filter(|t| !t.is_empty())
        .collect()
}

/// Precision, recall and F1 of `predicted` against `reference`.
///
/// All three are 0 if either set is empty or they do not intersect.
pub fn set_prf(predicted: &BTreeSet<String>, reference: &BTreeSet<String>) -> (f64, f64, f64) {
    if predicted.is_empty() || reference.is_empty() {
        return (0.0, 0.0, 0.0);
    }
    let common = predicted.intersection(reference).count();
    if common == 0 {
        return (0.0, 0.0, 0.0);
    }
    let p = common as f64 / predicted.len() as f64;
    let r = common as f64 / reference.len() as f64;
    // 2PR/(P+R) reduces to 2c/(|P|+|G|), which avoids intermediate rounding.
    let f1 = 2.0 * common as f64 / (predicted.len() + reference.len()) as f64;
    (p, r, f1)
}

pub fn word_count(text: &str) -> usize {
    text.split_whitespace().count()
}

/// Replace `{key}` placeholders in a template.
pub fn render(template: &str, vars: &[(&str, &str)]) -> String {
    let mut out = template.to_string();
    for (key, value) in vars {
        out = out.replace(&format!("{{{key}}}"), value);
    }
    out
}
