//! Kernel functions and Gram matrices.

use std::ops::Range;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::LearningError;

/// A kernel over a contiguous block of input columns, scaled by `weight`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightedKernel {
    pub kernel: Kernel,
    pub columns: Range<usize>,
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Kernel {
    Rbf { gamma: f64 },
    Linear,
    Cosine,
    /// Weighted sum of kernels over column blocks.
    Combined { parts: Vec<WeightedKernel> },
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

impl Kernel {
    /// RBF with the "scale" bandwidth 1 / (n_features * mean column variance).
    /// Falls back to gamma = 1 when the data have no variance.
    pub fn rbf_scaled(rows: &[Vec<f64>]) -> Kernel {
        Kernel::Rbf {
            gamma: scale_gamma(rows),
        }
    }

    pub fn validate(&self) -> Result<(), LearningError> {
        match self {
            Kernel::Rbf { gamma } if !(gamma.is_finite() && *gamma > 0.0) => Err(
                LearningError::InvalidParameter(format!("rbf gamma must be positive, got {gamma}")),
            ),
            Kernel::Combined { parts } => {
                for p in parts {
                    if !(p.weight.is_finite() && p.weight >= 0.0) {
                        return Err(LearningError::InvalidParameter(format!(
                            "kernel weight must be non-negative, got {}",
                            p.weight
                        )));
                    }
                    p.kernel.validate()?;
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }

    /// Evaluate without checking dimensions.
    pub(crate) fn eval_unchecked(&self, x: &[f64], z: &[f64]) -> f64 {
        match self {
            Kernel::Rbf { gamma } => {
                let d: f64 = x.iter().zip(z).map(|(a, b)| (a - b) * (a - b)).sum();
                (-gamma * d).exp()
            }
            Kernel::Linear => dot(x, z),
            Kernel::Cosine => {
                let (nx, nz) = (dot(x, x).sqrt(), dot(z, z).sqrt());
                if nx == 0.0 || nz == 0.0 {
                    0.0
                } else {
                    dot(x, z) / (nx * nz)
                }
            }
            Kernel::Combined { parts } => parts
                .iter()
                .map(|p| {
                    let r = p.columns.clone();
                    p.weight * p.kernel.eval_unchecked(&x[r.clone()], &z[r])
                })
                .sum(),
        }
    }

    /// Smallest input dimension this kernel accepts, if constrained.
    fn min_dim(&self) -> usize {
        match self {
            Kernel::Combined { parts } => parts.iter().map(|p| p.columns.end).max().unwrap_or(0),
            _ => 0,
        }
    }

    pub fn eval(&self, x: &[f64], z: &[f64]) -> Result<f64, LearningError> {
        if x.len() != z.len() {
            return Err(LearningError::DimensionMismatch {
                expected: x.len(),
                found: z.len(),
            });
        }
        if x.len() < self.min_dim() {
            return Err(LearningError::DimensionMismatch {
                expected: self.min_dim(),
                found: x.len(),
            });
        }
        Ok(self.eval_unchecked(x, z))
    }
}

pub fn kernel_eval(kernel: &Kernel, x: &[f64], z: &[f64]) -> Result<f64, LearningError> {
    kernel.eval(x, z)
}

pub(crate) fn scale_gamma(rows: &[Vec<f64>]) -> f64 {
    let Some(first) = rows.first() else {
        return 1.0;
    };
    let (n, p) = (rows.len() as f64, first.len());
    if p == 0 {
        return 1.0;
    }
    let mut total = 0.0;
    for j in 0..p {
        let mean = rows.iter().map(|r| r[j]).sum::<f64>() / n;
        total += rows.iter().map(|r| (r[j] - mean).powi(2)).sum::<f64>() / n;
    }
    let mean_var = total / p as f64;
    if mean_var > 0.0 && mean_var.is_finite() {
        1.0 / (p as f64 * mean_var)
    } else {
        1.0
    }
}

pub(crate) fn check_rows(rows: &[Vec<f64>]) -> Result<usize, LearningError> {
    let dim = rows.first().map_or(0, Vec::len);
    for r in rows {
        if r.len() != dim {
            return Err(LearningError::DimensionMismatch {
                expected: dim,
                found: r.len(),
            });
        }
    }
    Ok(dim)
}

/// Row-major `n x n` Gram matrix.
pub fn gram_matrix(kernel: &Kernel, rows: &[Vec<f64>]) -> Result<Vec<f64>, LearningError> {
    kernel.validate()?;
    let dim = check_rows(rows)?;
    if dim < kernel.min_dim() {
        return Err(LearningError::DimensionMismatch {
            expected: kernel.min_dim(),
            found: dim,
        });
    }
    let n = rows.len();
    let mut out = vec![0.0; n * n];
    out.par_chunks_mut(n.max(1)).enumerate().for_each(|(i, row)| {
        for (j, v) in row.iter_mut().enumerate() {
            *v = kernel.eval_unchecked(&rows[i], &rows[j]);
        }
    });
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DMatrix;
    use proptest::prelude::*;

    #[test]
    fn examples() {
        let rbf = Kernel::Rbf { gamma: 0.5 };
        assert_eq!(rbf.eval(&[0.3, -2.0], &[0.3, -2.0]).unwrap(), 1.0);
        assert!((rbf.eval(&[0.0, 0.0], &[1.0, 1.0]).unwrap() - (-1.0f64).exp()).abs() < 1e-15);
        assert_eq!(Kernel::Linear.eval(&[1.0, 2.0], &[3.0, 4.0]).unwrap(), 11.0);
        assert_eq!(Kernel::Cosine.eval(&[0.0, 0.0], &[3.0, 4.0]).unwrap(), 0.0);
        assert!((Kernel::Cosine.eval(&[1.0, 0.0], &[3.0, 3.0]).unwrap() - 0.5f64.sqrt()).abs() < 1e-15);
        assert!(matches!(
            Kernel::Linear.eval(&[1.0], &[1.0, 2.0]),
            Err(LearningError::DimensionMismatch { .. })
        ));
        assert!(Kernel::Rbf { gamma: 0.0 }.validate().is_err());
    }

    #[test]
    fn combined_splits_columns() {
        let k = Kernel::Combined {
            parts: vec![
                WeightedKernel {
                    kernel: Kernel::Linear,
                    columns: 0..2,
                    weight: 0.25,
                },
                WeightedKernel {
                    kernel: Kernel::Rbf { gamma: 1.0 },
                    columns: 2..3,
                    weight: 0.75,
                },
            ],
        };
        let (x, z) = ([1.0, 2.0, 0.0], [3.0, 4.0, 1.0]);
        let expected = 0.25 * 11.0 + 0.75 * (-1.0f64).exp();
        assert!((k.eval(&x, &z).unwrap() - expected).abs() < 1e-15);
        assert!(k.eval(&[1.0, 2.0], &[1.0, 2.0]).is_err());
    }

    #[test]
    fn scale_gamma_matches_definition() {
        let rows = vec![vec![0.0, 0.0], vec![2.0, 4.0]];
        // column variances 1 and 4, mean 2.5, two features
        assert!((scale_gamma(&rows) - 1.0 / 5.0).abs() < 1e-15);
        assert_eq!(scale_gamma(&[vec![1.0, 1.0], vec![1.0, 1.0]]), 1.0);
    }

    fn min_eigenvalue(g: &[f64], n: usize) -> f64 {
        let m = DMatrix::from_row_slice(n, n, g);
        m.symmetric_eigen().eigenvalues.iter().copied().fold(f64::INFINITY, f64::min)
    }

    proptest! {
        #[test]
        fn gram_symmetric_psd(
            pts in prop::collection::vec(prop::collection::vec(-3.0f64..3.0, 3), 2..10),
            gamma in 0.05f64..2.0,
        ) {
            let n = pts.len();
            for kernel in [Kernel::Rbf { gamma }, Kernel::Linear, Kernel::Cosine] {
                let g = gram_matrix(&kernel, &pts).unwrap();
                for i in 0..n {
                    for j in 0..n {
                        prop_assert_eq!(g[i * n + j], g[j * n + i]);
                    }
                }
                prop_assert!(min_eigenvalue(&g, n) >= -1e-8);
            }
        }
    }
}
