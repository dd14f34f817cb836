//! Finance sentiment keyword sets (Lex) and their embedding expansion (LexExt).

use std::collections::{BTreeSet, HashMap};
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::embeddings::EmbeddingTable;
use crate::filings::porter;

#[derive(Debug, Error)]
pub enum LexiconError {
    #[error("lexicon line {line}: {message}")]
    Format { line: usize, message: String },
    #[error("no lexicon entries survive the category filter")]
    EmptyLexicon,
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Category {
    Positive,
    Negative,
    Uncertainty,
}

impl Category {
    pub const ALL: [Category; 3] = [Category::Positive, Category::Negative, Category::Uncertainty];
}

impl FromStr for Category {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "positive" => Ok(Category::Positive),
            "negative" => Ok(Category::Negative),
            "uncertainty" | "uncertain" => Ok(Category::Uncertainty),
            other => Err(format!("unknown category {other:?}")),
        }
    }
}

impl fmt::Display for Category {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Category::Positive => "positive",
            Category::Negative => "negative",
            Category::Uncertainty => "uncertainty",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Origin {
    Original,
    /// Added as an embedding neighbor of the named original term.
    Expansion { source: String },
}

#[derive(Debug, Clone, PartialEq)]
pub struct LexiconEntry {
    pub term: String,
    pub categories: BTreeSet<Category>,
    pub origin: Origin,
}

/// Ordered, deduplicated set of stemmed keywords.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Lexicon {
    entries: Vec<LexiconEntry>,
    index: HashMap<String, usize>,
}

impl Lexicon {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> &[LexiconEntry] {
        &self.entries
    }

    pub fn terms(&self) -> impl Iterator<Item = &str> {
        self.entries.iter().map(|e| e.term.as_str())
    }

    pub fn get(&self, term: &str) -> Option<&LexiconEntry> {
        self.index.get(term).map(|&i| &self.entries[i])
    }

    pub fn contains(&self, term: &str) -> bool {
        self.index.contains_key(term)
    }

    /// Adds `term` or merges categories into an existing original entry.
    fn insert_original(&mut self, term: String, category: Category) {
        match self.index.get(&term) {
            Some(&i) => {
                self.entries[i].categories.insert(category);
            }
            None => {
                self.index.insert(term.clone(), self.entries.len());
                self.entries.push(LexiconEntry {
                    term,
                    categories: BTreeSet::from([category]),
                    origin: Origin::Original,
                });
            }
        }
    }

    /// Build from an in-memory list of (word, category) pairs; words are
    /// lowercased and stemmed.
    pub fn from_pairs<S: AsRef<str>>(pairs: &[(S, Category)]) -> Result<Self, LexiconError> {
        let mut lex = Lexicon::default();
        for (word, cat) in pairs {
            lex.insert_original(porter::stem(&word.as_ref().trim().to_ascii_lowercase()), *cat);
        }
        if lex.is_empty() {
            return Err(LexiconError::EmptyLexicon);
        }
        Ok(lex)
    }

    /// Load a delimited (comma or tab) `word,category` file, keeping rows
    /// whose category is in `keep`. A header row is optional.
    pub fn load(path: &Path, keep: &[Category]) -> Result<Self, LexiconError> {
        let text = std::fs::read_to_string(path)?;
        Self::parse(&text, keep)
    }

    pub fn parse(text: &str, keep: &[Category]) -> Result<Self, LexiconError> {
        let mut lex = Lexicon::default();
        let mut seen_content = false;
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let raw = raw.trim();
            if raw.is_empty() {
                continue;
            }
            let fields: Vec<&str> = if raw.contains('\t') {
                raw.split('\t').collect()
            } else {
                raw.split(',').collect()
            };
            let first = !seen_content;
            seen_content = true;
            if fields.len() != 2 {
                return Err(LexiconError::Format {
                    line,
                    message: format!("expected 2 fields, found {}", fields.len()),
                });
            }
            let word = fields[0].trim();
            let category = match fields[1].parse::<Category>() {
                Ok(c) => c,
                Err(_) if first && word.eq_ignore_ascii_case("word") => continue,
                Err(message) => return Err(LexiconError::Format { line, message }),
            };
            if word.is_empty() || !word.chars().all(|c| c.is_ascii_alphabetic()) {
                return Err(LexiconError::Format {
                    line,
                    message: format!("word {word:?} is not alphabetic"),
                });
            }
            if keep.contains(&category) {
                lex.insert_original(porter::stem(&word.to_ascii_lowercase()), category);
            }
        }
        if lex.is_empty() {
            return Err(LexiconError::EmptyLexicon);
        }
        Ok(lex)
    }

    /// Add the `k` nearest embedding neighbors of every original entry.
    /// Existing terms are never overwritten; originals are processed in
    /// order, so earlier sources claim shared neighbors first.
    pub fn expand(&self, table: &EmbeddingTable, k: usize) -> Lexicon {
        let mut out = self.clone();
        for entry in self.entries.iter().filter(|e| e.origin == Origin::Original) {
            let Ok(neighbors) = table.top_k_neighbors(&entry.term, k) else {
                continue;
            };
            for (term, _) in neighbors.neighbors {
                if out.index.contains_key(&term) {
                    continue;
                }
                out.index.insert(term.clone(), out.entries.len());
                out.entries.push(LexiconEntry {
                    term,
                    categories: entry.categories.clone(),
                    origin: Origin::Expansion {
                        source: entry.term.clone(),
                    },
                });
            }
        }
        out
    }
}
