//! Query and lexicon normalization.
//!
//! Every string that is compared against another (query tokens, concept
//! names and synonyms, brand lexicon entries, unit names) passes through
//! [`normalize_tokens`] so lookups reduce to exact matches.

use std::sync::OnceLock;

use rust_stemmers::{Algorithm, Stemmer};

fn stemmer() -> &'static Stemmer {
    static STEMMER: OnceLock<Stemmer> = OnceLock::new();
    STEMMER.get_or_init(|| Stemmer::create(Algorithm::English))
}

/// Porter (English) stem of a single lowercase token. Numeric tokens are
/// returned untouched.
pub fn stem_token(token: &str) -> String {
    if token.is_empty() || token.starts_with(|c: char| c.is_ascii_digit()) {
        return token.to_owned();
    }
    stemmer().stem(token).into_owned()
}

/// Lowercases a raw token, drops a trailing possessive and any character
/// other than alphanumerics, `-` and `.`. Returns `None` if nothing is left.
pub fn clean_token(raw: &str) -> Option<String> {
    let lower = raw.to_lowercase();
    let base = lower
        .strip_suffix("'s")
        .or_else(|| lower.strip_suffix("\u{2019}s"))
        .unwrap_or(&lower);
    let kept: String = base
        .chars()
        .filter(|c| c.is_alphanumeric() || *c == '-' || *c == '.')
        .collect();
    let trimmed = kept.trim_matches(|c| c == '-' || c == '.');
    if trimmed.is_empty() {
        None
    } else {
        Some(trimmed.to_owned())
    }
}

/// Whitespace tokenization, cleaning and stemming.
pub fn normalize_tokens(raw: &str) -> Vec<String> {
    raw.split_whitespace()
        .filter_map(clean_token)
        .map(|t| stem_token(&t))
        .collect()
}

/// Lowercase, trim and collapse internal whitespace. This is the stored
/// form of concept names and synonyms; it is idempotent.
pub fn canonical_phrase(raw: &str) -> String {
    raw.split_whitespace()
        .map(str::to_lowercase)
        .collect::<Vec<_>>()
        .join(" ")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn porter_examples() {
        assert_eq!(stem_token("wipes"), "wipe");
        assert_eq!(stem_token("dress"), "dress");
        assert_eq!(stem_token(""), "");
        assert_eq!(stem_token("inches"), "inch");
        assert_eq!(stem_token("45"), "45");
    }

    #[test]
    fn possessive_and_punctuation() {
        assert_eq!(normalize_tokens("Men's  Black Leather Wallets!"), vec![
            "men", "black", "leather", "wallet"
        ]);
        assert_eq!(clean_token("q-tips").as_deref(), Some("q-tips"));
        assert_eq!(clean_token("4.5").as_deref(), Some("4.5"));
        assert_eq!(clean_token("!!!"), None);
    }

    #[test]
    fn canonical_phrase_collapses_whitespace() {
        assert_eq!(canonical_phrase("  Bar   Stool "), "bar stool");
        assert_eq!(canonical_phrase(&canonical_phrase(" A  b ")), "a b");
    }
}
