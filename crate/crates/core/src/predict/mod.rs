//! T6 predictive text.
//!
//! Letters are grouped onto six keys:
//!
//! | key | letters     |
//! |-----|-------------|
//! | 1   | a b c d e   |
//! | 2   | f g h i j   |
//! | 3   | k l m n o   |
//! | 4   | p q r s t   |
//! | 5   | u v w x y   |
//! | 6   | z           |
//!
//! so `apple` types as `14431`. A word's *code* is its key sequence; the
//! trie is keyed by code digits and each node keeps the words whose full
//! code ends there.

mod dictionary;
mod index;
mod trie;

pub use dictionary::{Dictionary, DictionaryReport};
pub use index::{build_index, IndexParseError, T6Index};
pub use trie::{NodeId, SearchBudget, Suggestion, T6Trie};

use thiserror::Error;

pub const KEY_COUNT: u8 = 6;
pub const DEFAULT_NUM_WORDS: usize = 5;
pub const DEFAULT_MAX_SEARCH: usize = 10_000;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PredictError {
    #[error("invalid character {ch:?} in {word:?}; only a-z is allowed")]
    InvalidCharacter { word: String, ch: char },
    #[error("empty word")]
    EmptyWord,
    #[error("digit {0} is not a key (expected 1..=6)")]
    DigitOutOfRange(u8),
    #[error("no dictionary word extends this input")]
    NoSuchPrefix,
    #[error("search budget values must be positive")]
    ZeroBudget,
    #[error("{0}")]
    Io(String),
}

/// Key (1..=6) for a lowercase ASCII letter.
pub const fn key_for(letter: u8) -> Option<u8> {
    match letter {
        b'a'..=b'e' => Some(1),
        b'f'..=b'j' => Some(2),
        b'k'..=b'o' => Some(3),
        b'p'..=b't' => Some(4),
        b'u'..=b'y' => Some(5),
        b'z' => Some(6),
        _ => None,
    }
}

/// Letters printed on a key, e.g. `"abcde"` for key 1.
pub fn letters_on(key: u8) -> &'static str {
    match key {
        1 => "abcde",
        2 => "fghij",
        3 => "klmno",
        4 => "pqrst",
        5 => "uvwxy",
        6 => "z",
        _ => "",
    }
}

/// Maps a lowercase a-z word to its digit string.
pub fn encode(word: &str) -> Result<String, PredictError> {
    if word.is_empty() {
        return Err(PredictError::EmptyWord);
    }
    word.chars()
        .map(|ch| {
            u8::try_from(ch)
                .ok()
                .and_then(key_for)
                .map(|k| char::from(b'0' + k))
                .ok_or_else(|| PredictError::InvalidCharacter {
                    word: word.to_string(),
                    ch,
                })
        })
        .collect()
}

/// True when every character of `code` is a key digit `1..=6`.
pub fn is_code(code: &str) -> bool {
    code.bytes().all(|b| (b'1'..=b'6').contains(&b))
}

/// Source of suggestions for the scanning keypad.
pub trait Predictor {
    /// Ranked words for the typed code. Empty code means no suggestions.
    fn predict(&self, code: &str) -> Vec<Suggestion>;
}

/// Trie-backed predictor that consults a precompiled index first.
#[derive(Debug, Clone)]
pub struct T6Predictor {
    trie: T6Trie,
    index: Option<T6Index>,
    num_words: usize,
    max_search: usize,
}

impl T6Predictor {
    pub fn new(trie: T6Trie, num_words: usize) -> Self {
        Self {
            trie,
            index: None,
            num_words: num_words.max(1),
            max_search: DEFAULT_MAX_SEARCH,
        }
    }

    pub fn with_index(mut self, index: T6Index) -> Self {
        self.index = Some(index);
        self
    }

    pub fn trie(&self) -> &T6Trie {
        &self.trie
    }

    pub fn num_words(&self) -> usize {
        self.num_words
    }
}

impl Predictor for T6Predictor {
    fn predict(&self, code: &str) -> Vec<Suggestion> {
        if code.is_empty() {
            return Vec::new();
        }
        if let Some(index) = self.index.as_ref().filter(|i| i.k() >= self.num_words) {
            if let Some(words) = index.lookup(code) {
                return words
                    .iter()
                    .take(self.num_words)
                    .enumerate()
                    .map(|(rank, w)| Suggestion {
                        word: w.clone(),
                        code: encode(w).expect("index words are normalized"),
                        rank,
                    })
                    .collect();
            }
        }
        let budget = SearchBudget::new(self.num_words, self.max_search).expect("positive budget");
        self.trie.suggest(code, budget)
    }
}
