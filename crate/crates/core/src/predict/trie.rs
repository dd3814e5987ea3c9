use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use super::{encode, Dictionary, PredictError, KEY_COUNT};

/// Position in a [`T6Trie`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct NodeId(u32);

impl NodeId {
    pub const ROOT: NodeId = NodeId(0);
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Suggestion {
    pub word: String,
    pub code: String,
    pub rank: usize,
}

/// Limits for one breadth-first search.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SearchBudget {
    num_words: usize,
    max_search: usize,
}

impl SearchBudget {
    pub fn new(num_words: usize, max_search: usize) -> Result<Self, PredictError> {
        if num_words == 0 || max_search == 0 {
            return Err(PredictError::ZeroBudget);
        }
        Ok(Self {
            num_words,
            max_search,
        })
    }

    /// At most `num_words` results, no cap on dequeued nodes.
    pub fn unbounded(num_words: usize) -> Self {
        Self {
            num_words: num_words.max(1),
            max_search: usize::MAX,
        }
    }

    pub fn num_words(&self) -> usize {
        self.num_words
    }

    pub fn max_search(&self) -> usize {
        self.max_search
    }
}

#[derive(Debug, Clone, Default)]
struct Node {
    children: [Option<NodeId>; KEY_COUNT as usize],
    words: Vec<String>,
}

/// Digit trie over T6 codes. Immutable once built.
#[derive(Debug, Clone)]
pub struct T6Trie {
    nodes: Vec<Node>,
    word_count: usize,
}

impl Default for T6Trie {
    fn default() -> Self {
        Self {
            nodes: vec![Node::default()],
            word_count: 0,
        }
    }
}

impl T6Trie {
    pub fn build(dictionary: &Dictionary) -> Result<Self, PredictError> {
        let mut trie = Self::default();
        for word in dictionary.words() {
            trie.insert(word)?;
        }
        Ok(trie)
    }

    fn insert(&mut self, word: &str) -> Result<(), PredictError> {
        let code = encode(word)?;
        let mut cur = NodeId::ROOT;
        for d in code.bytes() {
            let slot = (d - b'1') as usize;
            cur = match self.nodes[cur.0 as usize].children[slot] {
                Some(next) => next,
                None => {
                    let id = NodeId(self.nodes.len() as u32);
                    self.nodes.push(Node::default());
                    self.nodes[cur.0 as usize].children[slot] = Some(id);
                    id
                }
            };
        }
        self.nodes[cur.0 as usize].words.push(word.to_string());
        self.word_count += 1;
        Ok(())
    }

    pub fn root(&self) -> NodeId {
        NodeId::ROOT
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn word_count(&self) -> usize {
        self.word_count
    }

    /// Follows the edge for `digit` (1..=6) out of `cursor`.
    pub fn advance(&self, cursor: NodeId, digit: u8) -> Result<NodeId, PredictError> {
        if !(1..=KEY_COUNT).contains(&digit) {
            return Err(PredictError::DigitOutOfRange(digit));
        }
        self.nodes[cursor.0 as usize].children[(digit - 1) as usize]
            .ok_or(PredictError::NoSuchPrefix)
    }

    /// Node addressed by a digit string, starting from the root.
    pub fn walk(&self, code: &str) -> Result<NodeId, PredictError> {
        code.bytes().try_fold(NodeId::ROOT, |cur, b| {
            let digit = b.checked_sub(b'0').filter(|d| *d <= 9).unwrap_or(u8::MAX);
            self.advance(cur, digit)
        })
    }

    /// Words whose full code is exactly this node's path, in dictionary order.
    pub fn words_at(&self, node: NodeId) -> &[String] {
        &self.nodes[node.0 as usize].words
    }

    /// Whether a complete word ends at this node.
    pub fn is_word_node(&self, node: NodeId) -> bool {
        !self.nodes[node.0 as usize].words.is_empty()
    }

    /// Breadth-first search below the node for `prefix`.
    ///
    /// Children are queued in ascending digit order and a node's words are
    /// taken when it is dequeued, so results come out ordered by code length,
    /// then code, then dictionary order. The search stops once
    /// `budget.num_words()` words are collected, the queue empties, or
    /// `budget.max_search()` nodes have been dequeued.
    pub fn suggest(&self, prefix: &str, budget: SearchBudget) -> Vec<Suggestion> {
        let Ok(start) = self.walk(prefix) else {
            return Vec::new();
        };
        let mut found: Vec<&String> = Vec::new();
        let mut queue = VecDeque::from([start]);
        let mut remaining = budget.max_search;
        while found.len() < budget.num_words && remaining > 0 {
            let Some(cur) = queue.pop_front() else { break };
            remaining -= 1;
            let node = &self.nodes[cur.0 as usize];
            queue.extend(node.children.iter().flatten());
            found.extend(&node.words);
        }
        found
            .into_iter()
            .take(budget.num_words)
            .enumerate()
            .map(|(rank, word)| Suggestion {
                code: encode(word).expect("stored words are valid"),
                word: word.clone(),
                rank,
            })
            .collect()
    }

    /// Every code prefix (of length `1..=max_len`) that leads to at least one
    /// word, in breadth-first order.
    pub fn prefixes(&self, max_len: usize) -> Vec<String> {
        let mut out = Vec::new();
        let mut queue = VecDeque::from([(NodeId::ROOT, String::new())]);
        while let Some((id, code)) = queue.pop_front() {
            if code.len() >= max_len {
                continue;
            }
            for (slot, child) in self.nodes[id.0 as usize].children.iter().enumerate() {
                if let Some(child) = child {
                    let mut next = code.clone();
                    next.push(char::from(b'1' + slot as u8));
                    out.push(next.clone());
                    queue.push_back((*child, next));
                }
            }
        }
        out
    }
}
