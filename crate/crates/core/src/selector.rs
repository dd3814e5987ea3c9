//! Single-switch scanning selector.
//!
//! Focus steps through the controls of the current panel on every `tick`;
//! a blink activates whatever has focus. The machine is a pure function of
//! its inputs: ticks are scheduled by the caller and the predictor is passed
//! in on every blink.
//!
//! Picking a stored message from the home panel takes four blinks:
//!
//! 1. choose "Customized Message" on the mode panel,
//! 2. choose a category (focus parks on that category),
//! 3. start scanning the category's messages,
//! 4. choose the focused message.

use std::path::Path;

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::predict::{letters_on, Predictor, Suggestion, KEY_COUNT};

pub const MODES: [&str; 2] = ["Customized Message", "Compose Text"];

/// The keypad controls, in scan order.
pub const KEYPAD: [KeypadKey; 10] = [
    KeypadKey::Digit(1),
    KeypadKey::Digit(2),
    KeypadKey::Digit(3),
    KeypadKey::Digit(4),
    KeypadKey::Digit(5),
    KeypadKey::Digit(6),
    KeypadKey::Suggest,
    KeypadKey::Space,
    KeypadKey::Delete,
    KeypadKey::Speak,
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum KeypadKey {
    Digit(u8),
    Suggest,
    Space,
    Delete,
    Speak,
}

impl KeypadKey {
    pub fn label(&self) -> String {
        match self {
            KeypadKey::Digit(d) => format!("{d} {}", letters_on(*d).to_uppercase()),
            KeypadKey::Suggest => "SUGGEST".into(),
            KeypadKey::Space => "SPACE".into(),
            KeypadKey::Delete => "DELETE".into(),
            KeypadKey::Speak => "SPEAK".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CatalogError {
    #[error("catalog has no categories")]
    NoCategories,
    #[error("category {0:?} has no messages")]
    EmptyCategory(String),
    #[error("category {0:?} contains a blank message")]
    BlankMessage(String),
    #[error("catalog {path}: {reason}")]
    Load { path: String, reason: String },
}

/// Stored messages grouped by category, in file order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PanelCatalog {
    categories: IndexMap<String, Vec<String>>,
}

impl Default for PanelCatalog {
    fn default() -> Self {
        let cat = |msgs: &[&str]| msgs.iter().map(|m| m.to_string()).collect::<Vec<_>>();
        let mut categories = IndexMap::new();
        categories.insert(
            "home".into(),
            cat(&["I am hungry", "Please turn on the TV", "I want to rest"]),
        );
        categories.insert(
            "office".into(),
            cat(&[
                "Please call me back",
                "I need a break",
                "The meeting can start",
            ]),
        );
        categories.insert(
            "hospital".into(),
            cat(&["I need water", "I am in pain", "Please call the nurse"]),
        );
        categories.insert("frequently used".into(), cat(&["Yes", "No", "Thank you"]));
        Self { categories }
    }
}

impl PanelCatalog {
    pub fn new(categories: IndexMap<String, Vec<String>>) -> Result<Self, CatalogError> {
        let catalog = Self { categories };
        catalog.validate()?;
        Ok(catalog)
    }

    /// Parses `{"categories": {"home": [...], ...}}`; category order follows
    /// the document.
    pub fn from_json(text: &str) -> Result<Self, CatalogError> {
        let catalog: Self = serde_json::from_str(text).map_err(|e| CatalogError::Load {
            path: "<inline>".into(),
            reason: e.to_string(),
        })?;
        catalog.validate()?;
        Ok(catalog)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, CatalogError> {
        let path = path.as_ref();
        let load_err = |reason: String| CatalogError::Load {
            path: path.display().to_string(),
            reason,
        };
        let text = std::fs::read_to_string(path).map_err(|e| load_err(e.to_string()))?;
        let catalog: Self = serde_json::from_str(&text).map_err(|e| load_err(e.to_string()))?;
        catalog.validate()?;
        Ok(catalog)
    }

    fn validate(&self) -> Result<(), CatalogError> {
        if self.categories.is_empty() {
            return Err(CatalogError::NoCategories);
        }
        for (name, msgs) in &self.categories {
            if msgs.is_empty() {
                return Err(CatalogError::EmptyCategory(name.clone()));
            }
            if msgs.iter().any(|m| m.trim().is_empty()) {
                return Err(CatalogError::BlankMessage(name.clone()));
            }
        }
        Ok(())
    }

    pub fn category_names(&self) -> impl Iterator<Item = &str> {
        self.categories.keys().map(String::as_str)
    }

    pub fn category_count(&self) -> usize {
        self.categories.len()
    }

    pub fn category(&self, i: usize) -> Option<(&str, &[String])> {
        self.categories
            .get_index(i)
            .map(|(name, msgs)| (name.as_str(), msgs.as_slice()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Panel {
    ModeScan,
    CategoryScan,
    /// Inside a category. Until `scanning` is set, focus rests on the
    /// category itself; after that it moves over the messages.
    MessageScan {
        category: usize,
        scanning: bool,
    },
    KeypadScan,
    SuggestionScan,
}

impl Panel {
    pub fn name(&self) -> &'static str {
        match self {
            Panel::ModeScan => "ModeScan",
            Panel::CategoryScan => "CategoryScan",
            Panel::MessageScan { .. } => "MessageScan",
            Panel::KeypadScan => "KeypadScan",
            Panel::SuggestionScan => "SuggestionScan",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SelectorOutput {
    TextEmitted(String),
    SpeechRequested(String),
    StateChanged,
}

/// Everything the selector remembers between events.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct ScanState {
    panel: Panel,
    focus: usize,
    composed_code: String,
    composed_text: String,
    suggestions: Vec<Suggestion>,
}

impl Default for ScanState {
    fn default() -> Self {
        Self::initial()
    }
}

impl ScanState {
    pub fn initial() -> Self {
        Self {
            panel: Panel::ModeScan,
            focus: 0,
            composed_code: String::new(),
            composed_text: String::new(),
            suggestions: Vec::new(),
        }
    }

    pub fn panel(&self) -> Panel {
        self.panel
    }

    pub fn focus(&self) -> usize {
        self.focus
    }

    pub fn composed_code(&self) -> &str {
        &self.composed_code
    }

    pub fn composed_text(&self) -> &str {
        &self.composed_text
    }

    pub fn suggestions(&self) -> &[Suggestion] {
        &self.suggestions
    }

    /// Labels of the current panel's controls, in scan order.
    pub fn controls(&self, catalog: &PanelCatalog) -> Vec<String> {
        match self.panel {
            Panel::ModeScan => MODES.iter().map(|m| m.to_string()).collect(),
            Panel::CategoryScan => catalog.category_names().map(str::to_string).collect(),
            Panel::MessageScan { category, scanning } => match catalog.category(category) {
                Some((_, msgs)) if scanning => msgs.to_vec(),
                Some((name, _)) => vec![name.to_string()],
                None => vec![],
            },
            Panel::KeypadScan => KEYPAD.iter().map(KeypadKey::label).collect(),
            Panel::SuggestionScan => self.suggestions.iter().map(|s| s.word.clone()).collect(),
        }
    }

    pub fn control_count(&self, catalog: &PanelCatalog) -> usize {
        match self.panel {
            Panel::ModeScan => MODES.len(),
            Panel::CategoryScan => catalog.category_count(),
            Panel::MessageScan { category, scanning } => match catalog.category(category) {
                Some((_, msgs)) if scanning => msgs.len(),
                Some(_) => 1,
                None => 0,
            },
            Panel::KeypadScan => KEYPAD.len(),
            Panel::SuggestionScan => self.suggestions.len(),
        }
    }

    /// Moves focus to the next control, wrapping at the end of the panel.
    pub fn tick(&self, catalog: &PanelCatalog) -> ScanState {
        let n = self.control_count(catalog).max(1);
        ScanState {
            focus: (self.focus + 1) % n,
            ..self.clone()
        }
    }

    /// Activates the focused control.
    pub fn on_blink(
        &self,
        catalog: &PanelCatalog,
        predictor: &dyn Predictor,
    ) -> (ScanState, Vec<SelectorOutput>) {
        let mut next = self.clone();
        let mut out = Vec::new();
        match self.panel {
            Panel::ModeScan => {
                next.panel = if self.focus == 0 {
                    Panel::CategoryScan
                } else {
                    Panel::KeypadScan
                };
                next.focus = 0;
            }
            Panel::CategoryScan => {
                next.panel = Panel::MessageScan {
                    category: self.focus,
                    scanning: false,
                };
                next.focus = 0;
            }
            Panel::MessageScan {
                category,
                scanning: false,
            } => {
                next.panel = Panel::MessageScan {
                    category,
                    scanning: true,
                };
                next.focus = 0;
            }
            Panel::MessageScan {
                category,
                scanning: true,
            } => {
                if let Some(msg) = catalog
                    .category(category)
                    .and_then(|(_, msgs)| msgs.get(self.focus))
                {
                    emit(&mut out, msg);
                }
                next.panel = Panel::ModeScan;
                next.focus = 0;
            }
            Panel::KeypadScan => match KEYPAD[self.focus] {
                KeypadKey::Digit(d) => {
                    debug_assert!((1..=KEY_COUNT).contains(&d));
                    next.composed_code.push(char::from(b'0' + d));
                    next.suggestions = predictor.predict(&next.composed_code);
                }
                KeypadKey::Suggest => {
                    if !self.suggestions.is_empty() {
                        next.panel = Panel::SuggestionScan;
                        next.focus = 0;
                    }
                }
                KeypadKey::Space => {
                    if let Some(first) = self.suggestions.first() {
                        next.commit(&first.word);
                    }
                }
                KeypadKey::Delete => {
                    if next.composed_code.pop().is_none() {
                        next.drop_last_word();
                    }
                    next.suggestions = predictor.predict(&next.composed_code);
                }
                KeypadKey::Speak => {
                    let text = self.composed_text.trim_end();
                    if !text.is_empty() {
                        emit(&mut out, text);
                    }
                    next.composed_text.clear();
                    next.composed_code.clear();
                    next.suggestions.clear();
                    next.panel = Panel::ModeScan;
                    next.focus = 0;
                }
            },
            Panel::SuggestionScan => {
                if let Some(s) = self.suggestions.get(self.focus) {
                    let word = s.word.clone();
                    next.commit(&word);
                }
                next.panel = Panel::KeypadScan;
                next.focus = 0;
            }
        }
        if next != *self {
            out.push(SelectorOutput::StateChanged);
        }
        (next, out)
    }

    fn commit(&mut self, word: &str) {
        self.composed_text.push_str(word);
        self.composed_text.push(' ');
        self.composed_code.clear();
        self.suggestions.clear();
    }

    fn drop_last_word(&mut self) {
        let kept = self
            .composed_text
            .trim_end()
            .rfind(' ')
            .map_or(0, |i| i + 1);
        self.composed_text.truncate(kept);
    }
}

fn emit(out: &mut Vec<SelectorOutput>, text: &str) {
    out.push(SelectorOutput::TextEmitted(text.to_string()));
    out.push(SelectorOutput::SpeechRequested(text.to_string()));
}
