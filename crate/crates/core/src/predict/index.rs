//! Precompiled code -> words table.
//!
//! Text format, one record per line:
//!
//! ```text
//! T6INDEX v1 max_len=<L> k=<K>
//! <code>\t<word>,<word>,...
//! ```
//!
//! Records are sorted by code length, then code.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::Path;

use thiserror::Error;

use super::{is_code, PredictError, SearchBudget, T6Trie};

const MAGIC: &str = "T6INDEX";
const VERSION: &str = "v1";

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct T6Index {
    max_len: usize,
    k: usize,
    records: Vec<(String, Vec<String>)>,
    by_code: HashMap<String, usize>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum IndexParseError {
    #[error("missing or malformed header line")]
    Header,
    #[error("line {line}: {reason}")]
    Record { line: usize, reason: String },
}

/// Suggestion lists for every reachable code prefix up to `max_len` digits,
/// each computed with an unbounded node budget and truncated to `k`.
pub fn build_index(trie: &T6Trie, max_len: usize, k: usize) -> T6Index {
    let k = k.max(1);
    let records = trie
        .prefixes(max_len)
        .into_iter()
        .map(|code| {
            let words = trie
                .suggest(&code, SearchBudget::unbounded(k))
                .into_iter()
                .map(|s| s.word)
                .collect();
            (code, words)
        })
        .collect();
    T6Index::from_records(max_len, k, records)
}

impl T6Index {
    fn from_records(max_len: usize, k: usize, records: Vec<(String, Vec<String>)>) -> Self {
        let by_code = records
            .iter()
            .enumerate()
            .map(|(i, (code, _))| (code.clone(), i))
            .collect();
        Self {
            max_len,
            k,
            records,
            by_code,
        }
    }

    pub fn max_len(&self) -> usize {
        self.max_len
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn records(&self) -> impl Iterator<Item = (&str, &[String])> {
        self.records.iter().map(|(c, w)| (c.as_str(), w.as_slice()))
    }

    /// Stored list for `code`. `None` past `max_len` or when nothing matches;
    /// callers fall back to a live trie search.
    pub fn lookup(&self, code: &str) -> Option<&[String]> {
        if code.len() > self.max_len {
            return None;
        }
        self.by_code
            .get(code)
            .map(|&i| self.records[i].1.as_slice())
    }

    pub fn to_text(&self) -> String {
        let mut out = format!("{MAGIC} {VERSION} max_len={} k={}\n", self.max_len, self.k);
        for (code, words) in &self.records {
            let _ = writeln!(out, "{code}\t{}", words.join(","));
        }
        out
    }

    pub fn parse(text: &str) -> Result<Self, IndexParseError> {
        let mut lines = text.lines();
        let header = lines.next().ok_or(IndexParseError::Header)?;
        let (max_len, k) = parse_header(header).ok_or(IndexParseError::Header)?;
        let mut records: Vec<(String, Vec<String>)> = Vec::new();
        for (i, line) in lines.enumerate() {
            let line_no = i + 2;
            let bad = |reason: &str| IndexParseError::Record {
                line: line_no,
                reason: reason.to_string(),
            };
            if line.is_empty() {
                continue;
            }
            let (code, words) = line.split_once('\t').ok_or_else(|| bad("missing tab"))?;
            if code.is_empty() || !is_code(code) || code.len() > max_len {
                return Err(bad("invalid code"));
            }
            let words: Vec<String> = words.split(',').map(str::to_string).collect();
            if words.iter().any(|w| super::encode(w).is_err()) {
                return Err(bad("invalid word"));
            }
            if let Some((prev, _)) = records.last() {
                if (prev.len(), prev.as_str()) >= (code.len(), code) {
                    return Err(bad("records out of order"));
                }
            }
            records.push((code.to_string(), words));
        }
        Ok(Self::from_records(max_len, k, records))
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<(), PredictError> {
        let path = path.as_ref();
        std::fs::write(path, self.to_text())
            .map_err(|e| PredictError::Io(format!("{}: {e}", path.display())))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, PredictError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| PredictError::Io(format!("{}: {e}", path.display())))?;
        Self::parse(&text).map_err(|e| PredictError::Io(format!("{}: {e}", path.display())))
    }
}

fn parse_header(line: &str) -> Option<(usize, usize)> {
    let mut parts = line.split(' ');
    if parts.next()? != MAGIC || parts.next()? != VERSION {
        return None;
    }
    let max_len = parts.next()?.strip_prefix("max_len=")?.parse().ok()?;
    let k = parts.next()?.strip_prefix("k=")?.parse().ok()?;
    if parts.next().is_some() || k == 0 {
        return None;
    }
    Some((max_len, k))
}

#[cfg(test)]
mod tests {
    use super::super::Dictionary;
    use super::*;

    fn five_word_index(max_len: usize) -> T6Index {
        let dict = Dictionary::from_words(["there", "their", "answer", "any", "bye"]).unwrap();
        build_index(&T6Trie::build(&dict).unwrap(), max_len, 5)
    }

    #[test]
    fn records_for_depth_two() {
        let idx = five_word_index(2);
        let codes: Vec<&str> = idx.records().map(|(c, _)| c).collect();
        assert_eq!(codes, ["1", "4", "13", "15", "42"]);
        assert_eq!(idx.lookup("13").unwrap(), ["any", "answer"]);
        assert_eq!(idx.lookup("42").unwrap(), ["their", "there"]);
    }

    #[test]
    fn lookup_misses() {
        let idx = five_word_index(2);
        assert_eq!(idx.lookup("6"), None);
        assert_eq!(idx.lookup("421"), None);
    }

    #[test]
    fn empty_dictionary_gives_empty_index() {
        let idx = build_index(&T6Trie::default(), 3, 5);
        assert!(idx.is_empty());
        assert_eq!(idx.to_text(), "T6INDEX v1 max_len=3 k=5\n");
    }

    #[test]
    fn text_format_is_exact() {
        let text = five_word_index(2).to_text();
        assert_eq!(
            text,
            "T6INDEX v1 max_len=2 k=5\n\
             1\tany,bye,answer\n\
             4\ttheir,there\n\
             13\tany,answer\n\
             15\tbye\n\
             42\ttheir,there\n"
        );
        assert_eq!(T6Index::parse(&text).unwrap(), five_word_index(2));
    }

    #[test]
    fn parse_rejects_garbage() {
        assert_eq!(T6Index::parse(""), Err(IndexParseError::Header));
        assert_eq!(
            T6Index::parse("T6INDEX v2 max_len=2 k=5"),
            Err(IndexParseError::Header)
        );
        assert!(matches!(
            T6Index::parse("T6INDEX v1 max_len=2 k=5\n13 any"),
            Err(IndexParseError::Record { line: 2, .. })
        ));
        assert!(matches!(
            T6Index::parse("T6INDEX v1 max_len=2 k=5\n13\tany\n1\tany"),
            Err(IndexParseError::Record { line: 3, .. })
        ));
        assert!(matches!(
            T6Index::parse("T6INDEX v1 max_len=2 k=5\n137\tany"),
            Err(IndexParseError::Record { .. })
        ));
    }
}
