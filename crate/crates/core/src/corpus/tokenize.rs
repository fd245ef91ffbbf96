//! Text analysis: lowercase, split on non-alphanumeric runs, stop, stem.

use std::collections::HashSet;

use super::stem::stem;

/// The default 25-word function-word stoplist (articles, conjunctions,
/// common prepositions, be-forms), newline-separated. Shipped fixed so runs
/// are reproducible; pass a different file to [`Tokenizer::with_stoplist`]
/// to override.
pub const DEFAULT_STOPLIST: &str = include_str!("stoplist.txt");

/// Tokenizer applying the full analysis chain.
#[derive(Debug, Clone)]
pub struct Tokenizer {
    stoplist: HashSet<String>,
}

impl Default for Tokenizer {
    fn default() -> Self {
        Self::new()
    }
}

impl Tokenizer {
    /// Tokenizer with the default stoplist.
    pub fn new() -> Self {
        Self::with_stoplist(parse_stoplist(DEFAULT_STOPLIST))
    }

    /// Tokenizer with an explicit stoplist (already-parsed word set).
    pub fn with_stoplist(stoplist: impl IntoIterator<Item = String>) -> Self {
        Self {
            stoplist: stoplist.into_iter().collect(),
        }
    }

    /// Words of the active stoplist, sorted.
    pub fn stoplist(&self) -> Vec<String> {
        let mut words: Vec<String> = self.stoplist.iter().cloned().collect();
        words.sort();
        words
    }

    /// Lowercase, split on non-alphanumeric runs, drop stopwords, stem.
    /// Token order is preserved. Empty output is allowed.
    pub fn tokenize(&self, text: &str) -> Vec<String> {
        text.to_lowercase()
            .split(|c: char| !c.is_alphanumeric())
            .filter(|tok| !tok.is_empty())
            .filter(|tok| !self.stoplist.contains(*tok))
            .map(stem)
            .collect()
    }
}

/// Parse a newline-separated stoplist file body. Blank lines and `#`
/// comments are ignored; words are lowercased.
pub fn parse_stoplist(body: &str) -> Vec<String> {
    body.lines()
        .map(str::trim)
        .filter(|line| !line.is_empty() && !line.starts_with('#'))
        .map(str::to_lowercase)
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lowercases_and_splits() {
        let t = Tokenizer::new();
        assert_eq!(t.tokenize("Air Traffic control"), ["air", "traffic", "control"]);
    }

    #[test]
    fn empty_input() {
        let t = Tokenizer::new();
        assert!(t.tokenize("").is_empty());
    }

    #[test]
    fn stems_after_stopping() {
        let t = Tokenizer::new();
        assert_eq!(t.tokenize("aviation safety"), ["aviat", "safeti"]);
        // "the" is stopped before stemming; "this" is not in the list and stems.
        assert_eq!(t.tokenize("the delays of this airline"), ["delai", "thi", "airlin"]);
    }

    #[test]
    fn splits_on_punctuation_and_digits_kept() {
        let t = Tokenizer::new();
        assert_eq!(t.tokenize("B-737, runway 27R!"), ["b", "737", "runwai", "27r"]);
    }

    #[test]
    fn default_stoplist_has_25_words() {
        assert_eq!(parse_stoplist(DEFAULT_STOPLIST).len(), 25);
    }

    #[test]
    fn idempotent_on_own_output() {
        let t = Tokenizer::new();
        let texts = [
            "air traffic control systems",
            "aviation safety delays in european airports",
            "the quick brown foxes jumped over lazy dogs",
        ];
        for text in texts {
            let once = t.tokenize(text);
            let twice = t.tokenize(&once.join(" "));
            assert_eq!(once, twice, "tokenize not idempotent on {text:?}");
        }
    }
}
