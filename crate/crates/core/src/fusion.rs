//! Text and market feature fusion: column concatenation and 70/30 stacking.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::features::{FeatureError, FeatureMatrix};
use crate::learning::{gram_matrix, Kernel, LearningError, SvrModel, SvrParams};

pub const BASE_FRACTION: f64 = 0.7;
pub const MIN_STACKING_ROWS: usize = 10;

#[derive(Debug, Error)]
pub enum FusionError {
    #[error("row mismatch: {0}")]
    RowMismatch(String),
    #[error("stacking needs at least {MIN_STACKING_ROWS} rows, got {0}")]
    TooFewRows(usize),
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("stack model format: {0}")]
    Format(String),
    #[error(transparent)]
    Learning(#[from] LearningError),
    #[error(transparent)]
    Feature(#[from] FeatureError),
}

/// Concatenate columns, text first. Doc ids must agree row by row.
pub fn early_fusion(text: &FeatureMatrix, market: &FeatureMatrix) -> Result<FeatureMatrix, FusionError> {
    if text.doc_ids() != market.doc_ids() {
        return Err(FusionError::RowMismatch(
            "text and market matrices list different doc ids".into(),
        ));
    }
    let names = text
        .feature_names()
        .iter()
        .chain(market.feature_names())
        .cloned()
        .collect();
    let rows = (0..text.rows())
        .map(|i| text.row(i).iter().chain(market.row(i)).copied().collect())
        .collect();
    Ok(FeatureMatrix::from_rows(text.doc_ids().to_vec(), names, rows)?)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Portion {
    Base,
    Meta,
}

/// Seeded 70/30 assignment of doc ids. Ids are sorted before shuffling, so
/// the result depends only on the id set and the seed.
pub fn stacking_split(doc_ids: &[String], seed: u64) -> Vec<(String, Portion)> {
    let mut ids = doc_ids.to_vec();
    ids.sort();
    ids.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let n_base = (BASE_FRACTION * ids.len() as f64).floor() as usize;
    ids.into_iter()
        .enumerate()
        .map(|(i, id)| (id, if i < n_base { Portion::Base } else { Portion::Meta }))
        .collect()
}

/// Per-column standardization; constant columns keep unit scale.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    pub scale: Vec<f64>,
}

impl Standardizer {
    pub fn fit(rows: &[Vec<f64>]) -> Self {
        let p = rows.first().map_or(0, Vec::len);
        let n = rows.len().max(1) as f64;
        let mut mean = vec![0.0; p];
        let mut scale = vec![1.0; p];
        for j in 0..p {
            mean[j] = rows.iter().map(|r| r[j]).sum::<f64>() / n;
            let var = rows.iter().map(|r| (r[j] - mean[j]).powi(2)).sum::<f64>() / n;
            if var > 0.0 {
                scale[j] = var.sqrt();
            }
        }
        Standardizer { mean, scale }
    }

    pub fn apply(&self, row: &[f64]) -> Result<Vec<f64>, FusionError> {
        if row.len() != self.mean.len() {
            return Err(FusionError::DimensionMismatch {
                expected: self.mean.len(),
                found: row.len(),
            });
        }
        Ok(row
            .iter()
            .zip(self.mean.iter().zip(&self.scale))
            .map(|(x, (m, s))| (x - m) / s)
            .collect())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StackModel {
    pub base_text: SvrModel,
    pub base_market: SvrModel,
    /// Trained on the two base predictions.
    pub meta: SvrModel,
    pub market_scaler: Standardizer,
    pub split_seed: u64,
    pub split_fractions: (f64, f64),
    pub split: Vec<(String, Portion)>,
}

fn check_rows(text: &FeatureMatrix, market: &FeatureMatrix, y: &[f64]) -> Result<(), FusionError> {
    if text.doc_ids() != market.doc_ids() {
        return Err(FusionError::RowMismatch(
            "text and market matrices list different doc ids".into(),
        ));
    }
    if y.len() != text.rows() {
        return Err(FusionError::RowMismatch(format!(
            "{} labels for {} rows",
            y.len(),
            text.rows()
        )));
    }
    Ok(())
}

pub(crate) fn train_rbf(x: &[Vec<f64>], y: &[f64], params: &SvrParams) -> Result<SvrModel, LearningError> {
    SvrModel::train(x, y, Kernel::rbf_scaled(x), params)
}

/// Base models that predict constants give identical meta rows; the meta
/// model then reduces to the constant the solver picks for them.
fn train_meta(x: &[Vec<f64>], y: &[f64], params: &SvrParams) -> Result<SvrModel, LearningError> {
    let kernel = Kernel::rbf_scaled(x);
    let gram = gram_matrix(&kernel, x)?;
    Ok(SvrModel::fit_gram(x, y, kernel, &gram, params)?.0)
}

pub fn stacking_train(
    text: &FeatureMatrix,
    market: &FeatureMatrix,
    y: &[f64],
    seed: u64,
    params: &SvrParams,
) -> Result<StackModel, FusionError> {
    check_rows(text, market, y)?;
    if text.rows() < MIN_STACKING_ROWS {
        return Err(FusionError::TooFewRows(text.rows()));
    }
    let position: std::collections::HashMap<&str, usize> = text
        .doc_ids()
        .iter()
        .enumerate()
        .map(|(i, id)| (id.as_str(), i))
        .collect();
    if position.len() != text.rows() {
        return Err(FusionError::RowMismatch("duplicate doc ids".into()));
    }
    let split = stacking_split(text.doc_ids(), seed);
    let rows_of = |portion: Portion| -> Vec<usize> {
        split
            .iter()
            .filter(|(_, p)| *p == portion)
            .map(|(id, _)| position[id.as_str()])
            .collect()
    };
    let (base_rows, meta_rows) = (rows_of(Portion::Base), rows_of(Portion::Meta));

    let text_base: Vec<Vec<f64>> = base_rows.iter().map(|&i| text.row(i).to_vec()).collect();
    let raw_market: Vec<Vec<f64>> = base_rows.iter().map(|&i| market.row(i).to_vec()).collect();
    let market_scaler = Standardizer::fit(&raw_market);
    let market_base = raw_market
        .iter()
        .map(|r| market_scaler.apply(r))
        .collect::<Result<Vec<_>, _>>()?;
    let y_base: Vec<f64> = base_rows.iter().map(|&i| y[i]).collect();

    let base_text = train_rbf(&text_base, &y_base, params)?;
    let base_market = train_rbf(&market_base, &y_base, params)?;

    let mut meta_x = Vec::with_capacity(meta_rows.len());
    for &i in &meta_rows {
        meta_x.push(vec![
            base_text.predict(text.row(i))?,
            base_market.predict(&market_scaler.apply(market.row(i))?)?,
        ]);
    }
    let y_meta: Vec<f64> = meta_rows.iter().map(|&i| y[i]).collect();
    let meta = train_meta(&meta_x, &y_meta, params)?;

    Ok(StackModel {
        base_text,
        base_market,
        meta,
        market_scaler,
        split_seed: seed,
        split_fractions: (BASE_FRACTION, 1.0 - BASE_FRACTION),
        split,
    })
}

impl StackModel {
    /// The two meta inputs for one document.
    pub fn base_predictions(&self, text_row: &[f64], market_row: &[f64]) -> Result<[f64; 2], FusionError> {
        Ok([
            self.base_text.predict(text_row)?,
            self.base_market.predict(&self.market_scaler.apply(market_row)?)?,
        ])
    }

    pub fn predict(&self, text_row: &[f64], market_row: &[f64]) -> Result<f64, FusionError> {
        let z = self.base_predictions(text_row, market_row)?;
        Ok(self.meta.predict(&z)?)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("stack model serializes")
    }

    pub fn from_json(s: &str) -> Result<Self, FusionError> {
        let m: StackModel = serde_json::from_str(s).map_err(|e| FusionError::Format(e.to_string()))?;
        if m.meta.input_dim().is_some_and(|d| d != 2) {
            return Err(FusionError::Format("meta model must take 2 inputs".into()));
        }
        Ok(m)
    }
}

pub fn stacking_predict(model: &StackModel, text_row: &[f64], market_row: &[f64]) -> Result<f64, FusionError> {
    model.predict(text_row, market_row)
}
