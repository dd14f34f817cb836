//! Keyword weighting (TC, TF, TFIDF, BM25 and their embedding-extended
//! variants) and dense feature matrices.

mod matrix;
mod pca;

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::embeddings::EmbeddingTable;
use crate::filings::TokenizedDoc;
use crate::lexicon::Lexicon;

pub use matrix::FeatureMatrix;
pub use pca::{PcaModel, DEFAULT_COMPONENTS};

#[derive(Debug, Error)]
pub enum FeatureError {
    #[error("corpus is empty")]
    EmptyCorpus,
    #[error("lexicon is empty")]
    EmptyLexicon,
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("degenerate input: {0}")]
    DegenerateInput(String),
    #[error("invalid weighting parameters: {0}")]
    InvalidSpec(String),
    #[error("feature file: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Corpus-level statistics needed by the weighting schemes.
#[derive(Debug, Clone, PartialEq)]
pub struct CorpusStats {
    pub doc_count: usize,
    pub avgdl: f64,
    pub df: HashMap<String, usize>,
    pub doc_lengths: HashMap<String, usize>,
}

impl CorpusStats {
    pub fn build(docs: &[TokenizedDoc]) -> Result<Self, FeatureError> {
        if docs.is_empty() {
            return Err(FeatureError::EmptyCorpus);
        }
        let mut df: HashMap<String, usize> = HashMap::new();
        let mut doc_lengths = HashMap::with_capacity(docs.len());
        let mut total = 0usize;
        for doc in docs {
            let mut seen: Vec<&str> = doc.tokens.iter().map(String::as_str).collect();
            seen.sort_unstable();
            seen.dedup();
            for t in seen {
                *df.entry(t.to_string()).or_default() += 1;
            }
            total += doc.len();
            doc_lengths.insert(doc.doc_id.clone(), doc.len());
        }
        Ok(CorpusStats {
            doc_count: docs.len(),
            avgdl: total as f64 / docs.len() as f64,
            df,
            doc_lengths,
        })
    }

    pub fn df(&self, term: &str) -> usize {
        self.df.get(term).copied().unwrap_or(0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scheme {
    Tc,
    Tf,
    Tfidf,
    Bm25,
}

impl Scheme {
    pub const ALL: [Scheme; 4] = [Scheme::Tc, Scheme::Tf, Scheme::Tfidf, Scheme::Bm25];
}

impl FromStr for Scheme {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "tc" => Ok(Scheme::Tc),
            "tf" => Ok(Scheme::Tf),
            "tfidf" => Ok(Scheme::Tfidf),
            "bm25" => Ok(Scheme::Bm25),
            other => Err(format!("unknown weighting scheme {other:?}")),
        }
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Scheme::Tc => "TC",
            Scheme::Tf => "TF",
            Scheme::Tfidf => "TFIDF",
            Scheme::Bm25 => "BM25",
        })
    }
}

pub const DEFAULT_BM25_K: f64 = 1.2;
pub const DEFAULT_BM25_B: f64 = 0.65;
pub const DEFAULT_SIMILARITY_THRESHOLD: f64 = 0.70;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeightingSpec {
    pub scheme: Scheme,
    /// Use the embedding-extended term count.
    pub extended: bool,
    pub k: f64,
    pub b: f64,
    pub similarity_threshold: f64,
    /// IDF argument is the document length |d| instead of the corpus size.
    pub idf_literal: bool,
}

impl WeightingSpec {
    pub fn new(scheme: Scheme, extended: bool) -> Self {
        WeightingSpec {
            scheme,
            extended,
            k: DEFAULT_BM25_K,
            b: DEFAULT_BM25_B,
            similarity_threshold: DEFAULT_SIMILARITY_THRESHOLD,
            idf_literal: false,
        }
    }

    pub fn validate(&self) -> Result<(), FeatureError> {
        if !(self.k > 0.0 && self.k.is_finite()) {
            return Err(FeatureError::InvalidSpec(format!("k = {} must be > 0", self.k)));
        }
        if !(0.0..=1.0).contains(&self.b) {
            return Err(FeatureError::InvalidSpec(format!("b = {} must be in [0, 1]", self.b)));
        }
        if !(self.similarity_threshold > 0.0 && self.similarity_threshold <= 1.0) {
            return Err(FeatureError::InvalidSpec(format!(
                "similarity threshold {} must be in (0, 1]",
                self.similarity_threshold
            )));
        }
        Ok(())
    }

    /// Short label such as `BM25^` for extended BM25.
    pub fn label(&self) -> String {
        if self.extended {
            format!("{}^", self.scheme)
        } else {
            self.scheme.to_string()
        }
    }
}

impl Default for WeightingSpec {
    fn default() -> Self {
        WeightingSpec::new(Scheme::Bm25, true)
    }
}

/// Term counts of one document.
pub fn term_counts(doc: &TokenizedDoc) -> HashMap<&str, usize> {
    let mut counts = HashMap::new();
    for t in &doc.tokens {
        *counts.entry(t.as_str()).or_default() += 1;
    }
    counts
}

/// Related-term sets R(t) for every lexicon term, computed once.
#[derive(Debug, Clone, Default)]
pub struct NeighborCache {
    related: HashMap<String, Vec<(String, f64)>>,
}

impl NeighborCache {
    pub fn build(lexicon: &Lexicon, table: &EmbeddingTable, threshold: f64) -> Self {
        let terms: Vec<&str> = lexicon.terms().collect();
        let related = terms
            .par_iter()
            .filter_map(|t| {
                table
                    .related_terms(t, threshold)
                    .ok()
                    .map(|set| (t.to_string(), set.neighbors))
            })
            .collect();
        NeighborCache { related }
    }

    pub fn related(&self, term: &str) -> &[(String, f64)] {
        self.related.get(term).map(Vec::as_slice).unwrap_or(&[])
    }
}

fn extended_count(counts: &HashMap<&str, usize>, term: &str, related: &[(String, f64)]) -> f64 {
    let base = counts.get(term).copied().unwrap_or(0) as f64;
    base + related
        .iter()
        .map(|(t, sim)| sim * counts.get(t.as_str()).copied().unwrap_or(0) as f64)
        .sum::<f64>()
}

/// tc_d(t) plus the similarity-weighted counts of t's related terms at the
/// given threshold. Out-of-vocabulary terms fall back to the plain count.
pub fn extended_term_count(doc: &TokenizedDoc, term: &str, table: &EmbeddingTable, threshold: f64) -> f64 {
    let counts = term_counts(doc);
    let related = table
        .related_terms(term, threshold)
        .map(|s| s.neighbors)
        .unwrap_or_default();
    extended_count(&counts, term, &related)
}

/// Raw (possibly extended) counts for every lexicon term of one document.
fn lexicon_counts(doc: &TokenizedDoc, lexicon: &Lexicon, spec: &WeightingSpec, cache: &NeighborCache) -> Vec<f64> {
    let counts = term_counts(doc);
    lexicon
        .terms()
        .map(|t| {
            if spec.extended {
                extended_count(&counts, t, cache.related(t))
            } else {
                counts.get(t).copied().unwrap_or(0) as f64
            }
        })
        .collect()
}

/// Euclidean norm of the document's TC vector over all lexicon terms.
fn tc_norm(counts: &[f64]) -> f64 {
    counts.iter().map(|c| c.ln_1p().powi(2)).sum::<f64>().sqrt()
}

/// Weight of a term with (possibly extended) count `c`.
fn scheme_weight(c: f64, norm: f64, df: usize, doc_len: usize, spec: &WeightingSpec, stats: &CorpusStats) -> f64 {
    let tc = c.ln_1p();
    match spec.scheme {
        Scheme::Tc => tc,
        Scheme::Tf | Scheme::Tfidf => {
            let tf = if norm > 0.0 { tc / norm } else { 0.0 };
            if spec.scheme == Scheme::Tf {
                return tf;
            }
            if df == 0 {
                return 0.0;
            }
            let n = if spec.idf_literal {
                doc_len as f64
            } else {
                stats.doc_count as f64
            };
            tf * (n / df as f64).ln_1p()
        }
        Scheme::Bm25 => {
            let len_norm = if stats.avgdl > 0.0 {
                (1.0 - spec.b) + spec.b * doc_len as f64 / stats.avgdl
            } else {
                1.0
            };
            let cbar = c / len_norm;
            (spec.k + 1.0) * cbar / (spec.k + cbar)
        }
    }
}

fn weigh_row(doc_len: usize, counts: &[f64], terms: &[&str], spec: &WeightingSpec, stats: &CorpusStats) -> Vec<f64> {
    let norm = tc_norm(counts);
    counts
        .iter()
        .zip(terms)
        .map(|(&c, t)| scheme_weight(c, norm, stats.df(t), doc_len, spec, stats))
        .collect()
}

/// Weight of a single term in `doc`. TF and TFIDF normalize by the
/// Euclidean norm of the document's TC vector over the whole lexicon.
pub fn term_weight(
    doc: &TokenizedDoc,
    term: &str,
    lexicon: &Lexicon,
    spec: &WeightingSpec,
    stats: &CorpusStats,
    table: &EmbeddingTable,
) -> f64 {
    let cache = if spec.extended {
        NeighborCache::build(lexicon, table, spec.similarity_threshold)
    } else {
        NeighborCache::default()
    };
    let norm = tc_norm(&lexicon_counts(doc, lexicon, spec, &cache));
    let c = if spec.extended {
        extended_term_count(doc, term, table, spec.similarity_threshold)
    } else {
        doc.tokens.iter().filter(|t| *t == term).count() as f64
    };
    scheme_weight(c, norm, stats.df(term), doc.len(), spec, stats)
}

/// One row per document, one column per lexicon term (lexicon order).
pub fn build_feature_matrix(
    docs: &[TokenizedDoc],
    lexicon: &Lexicon,
    spec: &WeightingSpec,
    stats: &CorpusStats,
    table: &EmbeddingTable,
) -> Result<FeatureMatrix, FeatureError> {
    let cache = if spec.extended {
        NeighborCache::build(lexicon, table, spec.similarity_threshold)
    } else {
        NeighborCache::default()
    };
    build_with_cache(docs, lexicon, spec, stats, &cache)
}

/// As [`build_feature_matrix`] with precomputed related-term sets.
pub fn build_with_cache(
    docs: &[TokenizedDoc],
    lexicon: &Lexicon,
    spec: &WeightingSpec,
    stats: &CorpusStats,
    cache: &NeighborCache,
) -> Result<FeatureMatrix, FeatureError> {
    spec.validate()?;
    if docs.is_empty() {
        return Err(FeatureError::EmptyCorpus);
    }
    if lexicon.is_empty() {
        return Err(FeatureError::EmptyLexicon);
    }
    let terms: Vec<&str> = lexicon.terms().collect();
    let rows: Vec<Vec<f64>> = docs
        .par_iter()
        .map(|doc| {
            let counts = lexicon_counts(doc, lexicon, spec, cache);
            weigh_row(doc.len(), &counts, &terms, spec, stats)
        })
        .collect();
    FeatureMatrix::from_rows(
        docs.iter().map(|d| d.doc_id.clone()).collect(),
        terms.iter().map(|t| t.to_string()).collect(),
        rows,
    )
}
