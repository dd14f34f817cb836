//! Ordinary least squares with minimum-norm solutions.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::kernel::check_rows;
use super::LearningError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearModel {
    pub coefficients: Vec<f64>,
    pub intercept: f64,
}

impl LinearModel {
    pub fn predict(&self, x: &[f64]) -> Result<f64, LearningError> {
        if x.len() != self.coefficients.len() {
            return Err(LearningError::DimensionMismatch {
                expected: self.coefficients.len(),
                found: x.len(),
            });
        }
        Ok(self.intercept + x.iter().zip(&self.coefficients).map(|(a, b)| a * b).sum::<f64>())
    }
}

/// Fit on centred data by SVD; singular values below the usual rank
/// tolerance are dropped, giving the minimum-norm coefficients.
pub fn linreg_fit(x: &[Vec<f64>], y: &[f64]) -> Result<LinearModel, LearningError> {
    if x.len() != y.len() {
        return Err(LearningError::DimensionMismatch {
            expected: x.len(),
            found: y.len(),
        });
    }
    if x.is_empty() {
        return Err(LearningError::DegenerateInput("no samples".into()));
    }
    let p = check_rows(x)?;
    let n = x.len();
    let mut x_mean = vec![0.0; p];
    for r in x {
        for (m, v) in x_mean.iter_mut().zip(r) {
            *m += v / n as f64;
        }
    }
    let y_mean = y.iter().sum::<f64>() / n as f64;
    if p == 0 {
        return Ok(LinearModel {
            coefficients: Vec::new(),
            intercept: y_mean,
        });
    }
    let a = DMatrix::from_fn(n, p, |i, j| x[i][j] - x_mean[j]);
    let b = DVector::from_fn(n, |i, _| y[i] - y_mean);
    let svd = a.svd(true, true);
    let s_max = svd.singular_values.iter().copied().fold(0.0, f64::max);
    let cutoff = s_max * n.max(p) as f64 * f64::EPSILON;
    let w = if s_max == 0.0 {
        DVector::zeros(p)
    } else {
        svd.solve(&b, cutoff)
            .map_err(|e| LearningError::DegenerateInput(e.to_string()))?
    };
    let coefficients: Vec<f64> = w.iter().copied().collect();
    let intercept = y_mean - coefficients.iter().zip(&x_mean).map(|(c, m)| c * m).sum::<f64>();
    Ok(LinearModel {
        coefficients,
        intercept,
    })
}
