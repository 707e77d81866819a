//! Plain-text keyword → tone maps used by simulated workers.
//!
//! ```text
//! # comment
//! keyword => primary | secondary [| intensity]
//! ```

use std::collections::BTreeMap;
use std::str::FromStr;

use thiserror::Error;

use crate::tone::{parse_tone, ToneTuple, UnknownLabel};

pub const BUILTIN: &str = "builtin";
const BUILTIN_SOURCE: &str = include_str!("../../resources/lexicon.default.txt");

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum LexiconError {
    #[error("line {line}: expected `keyword => primary | secondary [| intensity]`")]
    Syntax { line: usize },
    #[error("line {line}: {source}")]
    Label { line: usize, source: UnknownLabel },
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Lexicon {
    entries: Vec<(String, ToneTuple)>,
}

impl Lexicon {
    pub fn builtin() -> Self {
        BUILTIN_SOURCE.parse().expect("bundled lexicon parses")
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Tone of the first keyword found in `text`.
    pub fn lookup(&self, text: &str) -> Option<ToneTuple> {
        let lower = text.to_lowercase();
        self.entries
            .iter()
            .find(|(k, _)| lower.contains(k.as_str()))
            .map(|(_, t)| *t)
    }
}

impl FromStr for Lexicon {
    type Err = LexiconError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let mut entries = Vec::new();
        for (i, raw) in s.lines().enumerate() {
            let line = i + 1;
            let content = raw.trim();
            if content.is_empty() || content.starts_with('#') {
                continue;
            }
            let (keyword, tone) = content.split_once("=>").ok_or(LexiconError::Syntax { line })?;
            let keyword = keyword.trim().to_lowercase();
            let parts: Vec<&str> = tone.split('|').map(str::trim).collect();
            if keyword.is_empty() || !(2..=3).contains(&parts.len()) {
                return Err(LexiconError::Syntax { line });
            }
            let tuple = parse_tone(parts[0], parts[1], parts.get(2).copied())
                .map_err(|source| LexiconError::Label { line, source })?;
            entries.push((keyword, tuple));
        }
        Ok(Lexicon { entries })
    }
}

/// Named lexicons available to a bot roster; always contains `builtin`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LexiconSet {
    lexicons: BTreeMap<String, Lexicon>,
}

impl Default for LexiconSet {
    fn default() -> Self {
        let mut lexicons = BTreeMap::new();
        lexicons.insert(BUILTIN.to_string(), Lexicon::builtin());
        Self { lexicons }
    }
}

impl LexiconSet {
    pub fn insert(&mut self, name: impl Into<String>, lexicon: Lexicon) {
        self.lexicons.insert(name.into(), lexicon);
    }

    pub fn get(&self, name: &str) -> Option<&Lexicon> {
        self.lexicons.get(name)
    }

    pub fn contains(&self, name: &str) -> bool {
        self.lexicons.contains_key(name)
    }
}
