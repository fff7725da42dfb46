//! Tokenization and normalization shared by parsing, similarity and metrics.

/// A lowercase word with its byte span in the original text.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Token {
    pub text: String,
    pub start: usize,
    pub end: usize,
}

/// Lowercases and splits on every non-alphanumeric character.
pub fn tokenize(text: &str) -> Vec<Token> {
    let mut out = Vec::new();
    let mut start = None;
    for (i, ch) in text.char_indices() {
        if ch.is_alphanumeric() {
            start.get_or_insert(i);
        } else if let Some(s) = start.take() {
            out.push(Token { text: text[s..i].to_lowercase(), start: s, end: i });
        }
    }
    if let Some(s) = start {
        out.push(Token { text: text[s..].to_lowercase(), start: s, end: text.len() });
    }
    out
}

pub fn words(text: &str) -> Vec<String> {
    tokenize(text).into_iter().map(|t| t.text).collect()
}

pub const STOPWORDS: &[&str] = &[
    "a", "an", "the", "of", "in", "on", "at", "to", "for", "by", "with", "and", "or", "is", "are",
    "was", "were", "be", "been", "do", "does", "did", "has", "have", "had", "what", "which", "who",
    "how", "me", "my", "some", "any", "this", "that", "these", "those", "it", "its", "there", "from",
    "about", "as", "than", "each", "per", "over", "between", "among", "all", "show", "tell", "please",
    "give", "i", "you", "we", "they", "can", "could", "would", "should", "will", "much", "many",
];

pub fn is_stopword(word: &str) -> bool {
    STOPWORDS.contains(&word)
}

/// Canonical form for comparing questions up to template phrasing: lowercase words without
/// articles, with a trailing plural `s` dropped from words longer than three characters.
pub fn normalize_question(text: &str) -> String {
    words(text)
        .into_iter()
        .filter(|w| !matches!(w.as_str(), "a" | "an" | "the"))
        .map(|w| {
            if w.len() > 3 && w.ends_with('s') && !w.ends_with("ss") {
                w[..w.len() - 1].to_string()
            } else {
                w
            }
        })
        .collect::<Vec<_>>()
        .join(" ")
}

/// Case-folded column-name key (trim, lowercase, collapse separators).
pub fn fold(text: &str) -> String {
    words(text).join(" ")
}
