use rust_stemmers::{Algorithm, Stemmer};
use serde::{Deserialize, Serialize};

/// Lowercased Unicode-alphanumeric word splitting, optionally with English
/// Snowball stemming. No stopword removal.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Tokenizer {
    #[serde(default)]
    pub stem: bool,
}

impl Tokenizer {
    pub fn tokenize(&self, text: &str) -> Vec<String> {
        let words = text
            .split(|c: char| !c.is_alphanumeric())
            .filter(|w| !w.is_empty())
            .map(str::to_lowercase);
        if self.stem {
            let stemmer = Stemmer::create(Algorithm::English);
            words.map(|w| stemmer.stem(&w).into_owned()).collect()
        } else {
            words.collect()
        }
    }
}

/// Whitespace-token count scaled by 1.3 and rounded up; a model-agnostic
/// stand-in for tokenizer counts.
pub fn estimate_tokens(text: &str) -> usize {
    words_to_tokens(text.split_whitespace().count())
}

pub(crate) fn words_to_tokens(words: usize) -> usize {
    (words * 13).div_ceil(10)
}
