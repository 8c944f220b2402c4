//! Tokenization shared by passage splitting, BM25, answer matching and the
//! hashed encoders.

/// Whitespace-delimited words; punctuation stays attached.
pub fn words(text: &str) -> impl Iterator<Item = &str> {
    text.split_whitespace()
}

pub fn word_count(text: &str) -> usize {
    words(text).count()
}

/// Lowercases a word and drops every non-alphanumeric character.
pub fn normalize_word(word: &str) -> String {
    word.chars()
        .filter(|c| c.is_alphanumeric())
        .flat_map(char::to_lowercase)
        .collect()
}

/// Normalized term sequence: lowercase, punctuation stripped, whitespace
/// collapsed. Words that are pure punctuation disappear.
pub fn normalize_tokens(text: &str) -> Vec<String> {
    words(text).map(normalize_word).filter(|w| !w.is_empty()).collect()
}

/// Byte offsets at which each whitespace-delimited word starts.
pub(crate) fn word_starts(text: &str) -> Vec<usize> {
    let mut starts = Vec::new();
    let mut in_word = false;
    for (i, c) in text.char_indices() {
        if c.is_whitespace() {
            in_word = false;
        } else if !in_word {
            starts.push(i);
            in_word = true;
        }
    }
    starts
}
