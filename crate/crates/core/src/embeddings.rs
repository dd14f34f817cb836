//! Word vectors in the word2vec text format and exact similarity queries.

use std::collections::HashMap;
use std::io::BufRead;
use std::path::Path;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum EmbeddingError {
    #[error("line {line}: {message}")]
    Format { line: usize, message: String },
    #[error("term {0:?} not in vocabulary")]
    UnknownTerm(String),
    #[error("term {0:?} has an all-zero vector")]
    ZeroVector(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Immutable term -> vector table.
#[derive(Debug, Clone, Default)]
pub struct EmbeddingTable {
    dim: usize,
    terms: Vec<String>,
    index: HashMap<String, usize>,
    // row-major, terms.len() x dim
    vectors: Vec<f64>,
    norms: Vec<f64>,
}

/// Neighbors of `term`, most similar first; ties ordered by term.
#[derive(Debug, Clone, PartialEq)]
pub struct NeighborSet {
    pub term: String,
    pub neighbors: Vec<(String, f64)>,
}

impl NeighborSet {
    pub fn len(&self) -> usize {
        self.neighbors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.neighbors.is_empty()
    }

    pub fn terms(&self) -> impl Iterator<Item = &str> {
        self.neighbors.iter().map(|(t, _)| t.as_str())
    }
}

impl EmbeddingTable {
    pub fn load(path: &Path) -> Result<Self, EmbeddingError> {
        let file = std::fs::File::open(path)?;
        Self::from_reader(std::io::BufReader::new(file))
    }

    /// Parse the text interchange format: an optional `count dim` header,
    /// then one `term v1 .. vdim` row per line. Without a header the
    /// dimension is taken from the first row. Duplicate terms keep their
    /// first occurrence.
    pub fn from_reader<R: BufRead>(reader: R) -> Result<Self, EmbeddingError> {
        let mut table = EmbeddingTable::default();
        let mut declared_dim: Option<usize> = None;
        let mut first_content = true;
        for (i, line) in reader.lines().enumerate() {
            let line_no = i + 1;
            let line = line?;
            let fields: Vec<&str> = line.split_whitespace().collect();
            if fields.is_empty() {
                continue;
            }
            if first_content {
                first_content = false;
                if fields.len() == 2 {
                    if let (Ok(_), Ok(dim)) = (fields[0].parse::<usize>(), fields[1].parse::<usize>()) {
                        if dim == 0 {
                            return Err(EmbeddingError::Format {
                                line: line_no,
                                message: "header declares dimension 0".into(),
                            });
                        }
                        declared_dim = Some(dim);
                        continue;
                    }
                }
            }
            let values = &fields[1..];
            let dim = *declared_dim.get_or_insert(values.len());
            if values.len() != dim || dim == 0 {
                return Err(EmbeddingError::Format {
                    line: line_no,
                    message: format!("expected {dim} values, found {}", values.len()),
                });
            }
            let mut row = Vec::with_capacity(dim);
            for v in values {
                let x: f64 = v.parse().map_err(|_| EmbeddingError::Format {
                    line: line_no,
                    message: format!("non-numeric entry {v:?}"),
                })?;
                if !x.is_finite() {
                    return Err(EmbeddingError::Format {
                        line: line_no,
                        message: format!("non-finite entry {v:?}"),
                    });
                }
                row.push(x);
            }
            let term = fields[0];
            if table.index.contains_key(term) {
                log::warn!("embeddings line {line_no}: duplicate term {term:?} ignored");
                continue;
            }
            table.dim = dim;
            table.push(term, &row);
        }
        if let Some(dim) = declared_dim {
            table.dim = dim;
        }
        Ok(table)
    }

    /// Build a table from in-memory rows. Panics if row lengths differ.
    pub fn from_rows<S: AsRef<str>>(rows: &[(S, Vec<f64>)]) -> Self {
        let mut table = EmbeddingTable::default();
        for (term, v) in rows {
            if table.terms.is_empty() {
                table.dim = v.len();
            }
            assert_eq!(v.len(), table.dim, "inconsistent embedding dimension");
            if !table.index.contains_key(term.as_ref()) {
                table.push(term.as_ref(), v);
            }
        }
        table
    }

    fn push(&mut self, term: &str, v: &[f64]) {
        self.index.insert(term.to_string(), self.terms.len());
        self.terms.push(term.to_string());
        self.vectors.extend_from_slice(v);
        self.norms.push(v.iter().map(|x| x * x).sum::<f64>().sqrt());
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn contains(&self, term: &str) -> bool {
        self.index.contains_key(term)
    }

    pub fn terms(&self) -> &[String] {
        &self.terms
    }

    pub fn vector(&self, term: &str) -> Option<&[f64]> {
        self.index.get(term).map(|&i| self.row(i))
    }

    fn row(&self, i: usize) -> &[f64] {
        &self.vectors[i * self.dim..(i + 1) * self.dim]
    }

    fn lookup(&self, term: &str) -> Result<usize, EmbeddingError> {
        self.index
            .get(term)
            .copied()
            .ok_or_else(|| EmbeddingError::UnknownTerm(term.to_string()))
    }

    fn sim_by_index(&self, i: usize, j: usize) -> f64 {
        let dot: f64 = self.row(i).iter().zip(self.row(j)).map(|(a, b)| a * b).sum();
        (dot / (self.norms[i] * self.norms[j])).clamp(-1.0, 1.0)
    }

    pub fn cosine_sim(&self, a: &str, b: &str) -> Result<f64, EmbeddingError> {
        let i = self.lookup(a)?;
        let j = self.lookup(b)?;
        for (idx, term) in [(i, a), (j, b)] {
            if self.norms[idx] == 0.0 {
                return Err(EmbeddingError::ZeroVector(term.to_string()));
            }
        }
        Ok(self.sim_by_index(i, j))
    }

    /// Similarity of `term` to every other non-zero vocabulary term, sorted.
    fn ranked(&self, term: &str) -> Result<Vec<(usize, f64)>, EmbeddingError> {
        let i = self.lookup(term)?;
        if self.norms[i] == 0.0 {
            return Ok(Vec::new());
        }
        let mut ranked: Vec<(usize, f64)> = (0..self.terms.len())
            .filter(|&j| j != i && self.norms[j] > 0.0)
            .map(|j| (j, self.sim_by_index(i, j)))
            .collect();
        ranked.sort_by(|(ja, sa), (jb, sb)| {
            sb.total_cmp(sa).then_with(|| self.terms[*ja].cmp(&self.terms[*jb]))
        });
        Ok(ranked)
    }

    fn to_set(&self, term: &str, ranked: impl Iterator<Item = (usize, f64)>) -> NeighborSet {
        NeighborSet {
            term: term.to_string(),
            neighbors: ranked.map(|(j, s)| (self.terms[j].clone(), s)).collect(),
        }
    }

    /// All terms with similarity at least `threshold` to `term`.
    pub fn related_terms(&self, term: &str, threshold: f64) -> Result<NeighborSet, EmbeddingError> {
        let ranked = self.ranked(term)?;
        Ok(self.to_set(term, ranked.into_iter().take_while(|&(_, s)| s >= threshold)))
    }

    /// The `k` most similar terms.
    pub fn top_k_neighbors(&self, term: &str, k: usize) -> Result<NeighborSet, EmbeddingError> {
        let ranked = self.ranked(term)?;
        Ok(self.to_set(term, ranked.into_iter().take(k)))
    }
}
