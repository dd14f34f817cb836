//! Per-sector linear-regression term importance.

use std::collections::HashMap;

use super::EvalError;
use crate::embeddings::EmbeddingTable;
use crate::features::{build_feature_matrix, CorpusStats, WeightingSpec};
use crate::filings::{Sector, TokenizedDoc};
use crate::learning::linreg_fit;
use crate::lexicon::Lexicon;

/// Fit least squares on the unreduced term features of the sector's reports
/// (all reports when `sector` is `None`) and rank terms by coefficient,
/// largest first. Reports without a target are skipped.
pub fn sector_coefficient_report(
    docs: &[TokenizedDoc],
    targets: &HashMap<String, f64>,
    lexicon: &Lexicon,
    weighting: &WeightingSpec,
    table: &EmbeddingTable,
    sector: Option<Sector>,
) -> Result<Vec<(String, f64)>, EvalError> {
    let selected: Vec<TokenizedDoc> = docs
        .iter()
        .filter(|d| sector.is_none_or(|s| d.sector == s) && targets.contains_key(&d.doc_id))
        .cloned()
        .collect();
    if selected.len() < 2 {
        return Err(EvalError::TooFewDocs {
            needed: 2,
            found: selected.len(),
        });
    }
    let stats = CorpusStats::build(&selected).map_err(|e| EvalError::stage("corpus stats", e))?;
    let matrix = build_feature_matrix(&selected, lexicon, weighting, &stats, table)
        .map_err(|e| EvalError::stage("features", e))?;
    let y: Vec<f64> = selected.iter().map(|d| targets[&d.doc_id]).collect();
    let model = linreg_fit(&matrix.row_vecs(), &y).map_err(|e| EvalError::stage("linreg", e))?;
    let mut ranked: Vec<(String, f64)> = matrix
        .feature_names()
        .iter()
        .cloned()
        .zip(model.coefficients)
        .collect();
    ranked.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    Ok(ranked)
}
