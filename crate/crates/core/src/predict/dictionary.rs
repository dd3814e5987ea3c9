use std::collections::HashSet;
use std::path::Path;

use super::{encode, PredictError};

/// Normalized word list: lowercase a-z, no duplicates, original order kept.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Dictionary {
    words: Vec<String>,
}

/// What happened to the raw lines while loading.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct DictionaryReport {
    pub accepted: usize,
    pub duplicates: usize,
    /// Lines holding characters outside a-z after lowercasing.
    pub rejected: Vec<String>,
}

impl Dictionary {
    /// Builds a dictionary from already-normalized words. Any invalid entry
    /// is an error; duplicates are dropped.
    pub fn from_words<I, S>(words: I) -> Result<Self, PredictError>
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let mut seen = HashSet::new();
        let mut out = Vec::new();
        for w in words {
            let w = w.as_ref();
            encode(w)?;
            if seen.insert(w.to_string()) {
                out.push(w.to_string());
            }
        }
        Ok(Self { words: out })
    }

    /// Parses one word per line, lowercasing and trimming each. Blank lines
    /// are skipped; lines that still contain non a-z characters are rejected
    /// and listed in the report.
    pub fn parse(text: &str) -> (Self, DictionaryReport) {
        let mut report = DictionaryReport::default();
        let mut seen = HashSet::new();
        let mut words = Vec::new();
        for line in text.lines() {
            let w = line.trim().to_lowercase();
            if w.is_empty() {
                continue;
            }
            if encode(&w).is_err() {
                report.rejected.push(line.trim().to_string());
                continue;
            }
            if seen.insert(w.clone()) {
                words.push(w);
            } else {
                report.duplicates += 1;
            }
        }
        report.accepted = words.len();
        (Self { words }, report)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<(Self, DictionaryReport), PredictError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| PredictError::Io(format!("{}: {e}", path.display())))?;
        Ok(Self::parse(&text))
    }

    pub fn words(&self) -> &[String] {
        &self.words
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_normalizes_and_reports() {
        let (dict, report) = Dictionary::parse("Hello\n\n  world \nhello\nit's\nnaïve\n");
        assert_eq!(dict.words(), ["hello", "world"]);
        assert_eq!(report.accepted, 2);
        assert_eq!(report.duplicates, 1);
        assert_eq!(report.rejected, ["it's", "naïve"]);
    }

    #[test]
    fn from_words_is_strict() {
        assert!(Dictionary::from_words(["ok", "Nope"]).is_err());
        let d = Dictionary::from_words(["a", "b", "a"]).unwrap();
        assert_eq!(d.words(), ["a", "b"]);
    }
}
