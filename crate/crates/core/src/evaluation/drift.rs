//! Year-to-year drift of report content measured by centroid cosines.

use std::collections::BTreeMap;

use chrono::Datelike;

use super::EvalError;
use crate::embeddings::EmbeddingTable;
use crate::features::{build_feature_matrix, CorpusStats, FeatureMatrix, PcaModel, WeightingSpec};
use crate::filings::TokenizedDoc;
use crate::lexicon::Lexicon;

pub fn centroid(matrix: &FeatureMatrix) -> Vec<f64> {
    let mut c = vec![0.0; matrix.cols()];
    for i in 0..matrix.rows() {
        for (a, v) in c.iter_mut().zip(matrix.row(i)) {
            *a += v;
        }
    }
    let n = matrix.rows() as f64;
    c.iter_mut().for_each(|a| *a /= n);
    c
}

fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        0.0
    } else {
        (dot / (na * nb)).clamp(-1.0, 1.0)
    }
}

/// Cosine similarity between the centroids of each pair of yearly matrices.
/// The diagonal is 1 by definition.
pub fn drift_matrix(yearly: &[FeatureMatrix]) -> Result<Vec<Vec<f64>>, EvalError> {
    if yearly.len() < 2 {
        return Err(EvalError::InvalidSpec(format!(
            "drift needs at least 2 years, got {}",
            yearly.len()
        )));
    }
    let cols = yearly[0].cols();
    for (i, m) in yearly.iter().enumerate() {
        if m.rows() == 0 {
            return Err(EvalError::EmptyYear(i));
        }
        if m.cols() != cols {
            return Err(EvalError::InvalidSpec("yearly matrices use different feature spaces".into()));
        }
    }
    let centroids: Vec<Vec<f64>> = yearly.iter().map(centroid).collect();
    let n = yearly.len();
    let mut out = vec![vec![1.0; n]; n];
    for i in 0..n {
        for j in i + 1..n {
            let c = cosine(&centroids[i], &centroids[j]);
            out[i][j] = c;
            out[j][i] = c;
        }
    }
    Ok(out)
}

/// Build one corpus-wide feature space (optionally PCA-reduced) and split
/// its rows by issue year, in ascending year order.
pub fn yearly_feature_matrices(
    docs: &[TokenizedDoc],
    lexicon: &Lexicon,
    weighting: &WeightingSpec,
    table: &EmbeddingTable,
    pca_dims: Option<usize>,
) -> Result<Vec<(i32, FeatureMatrix)>, EvalError> {
    let stats = CorpusStats::build(docs).map_err(|e| EvalError::stage("corpus stats", e))?;
    let mut matrix =
        build_feature_matrix(docs, lexicon, weighting, &stats, table).map_err(|e| EvalError::stage("features", e))?;
    if let Some(dims) = pca_dims {
        let dims = dims.min(matrix.rows()).min(matrix.cols());
        let pca = PcaModel::fit(&matrix, dims).map_err(|e| EvalError::stage("pca", e))?;
        matrix = pca.transform(&matrix).map_err(|e| EvalError::stage("pca", e))?;
    }
    let mut by_year: BTreeMap<i32, Vec<usize>> = BTreeMap::new();
    for (i, d) in docs.iter().enumerate() {
        by_year.entry(d.issue_date.year()).or_default().push(i);
    }
    Ok(by_year
        .into_iter()
        .map(|(year, rows)| (year, matrix.select_rows(&rows)))
        .collect())
}
