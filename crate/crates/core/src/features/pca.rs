//! Principal component analysis by SVD of the mean-centred data.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::{FeatureError, FeatureMatrix};

/// Default number of retained components.
pub const DEFAULT_COMPONENTS: usize = 400;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PcaModel {
    pub n_features: usize,
    pub n_components: usize,
    pub mean: Vec<f64>,
    /// Row-major, `n_components x n_features`; rows are orthonormal.
    pub components: Vec<f64>,
    pub explained_variance: Vec<f64>,
    /// Sum of the variances of all features.
    pub total_variance: f64,
}

impl PcaModel {
    /// Fit on `matrix`. Each component is signed so that its entry of largest
    /// magnitude is positive.
    pub fn fit(matrix: &FeatureMatrix, n_components: usize) -> Result<Self, FeatureError> {
        let (rows, cols) = (matrix.rows(), matrix.cols());
        if rows < 2 {
            return Err(FeatureError::DegenerateInput(format!(
                "PCA needs at least 2 rows, got {rows}"
            )));
        }
        if n_components == 0 || n_components > rows.min(cols) {
            return Err(FeatureError::DegenerateInput(format!(
                "n_components = {n_components} outside 1..={}",
                rows.min(cols)
            )));
        }
        let mut mean = vec![0.0; cols];
        for i in 0..rows {
            for (m, v) in mean.iter_mut().zip(matrix.row(i)) {
                *m += v;
            }
        }
        mean.iter_mut().for_each(|m| *m /= rows as f64);
        let centred = DMatrix::from_fn(rows, cols, |i, j| matrix.get(i, j) - mean[j]);
        let total_variance = centred.iter().map(|x| x * x).sum::<f64>() / (rows - 1) as f64;

        let svd = centred.svd(false, true);
        let v_t = svd.v_t.expect("requested right singular vectors");
        let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
        order.sort_by(|&a, &b| {
            svd.singular_values[b]
                .total_cmp(&svd.singular_values[a])
                .then(a.cmp(&b))
        });

        let mut components = Vec::with_capacity(n_components * cols);
        let mut explained_variance = Vec::with_capacity(n_components);
        for &k in order.iter().take(n_components) {
            let mut row: Vec<f64> = v_t.row(k).iter().copied().collect();
            let pivot = row
                .iter()
                .copied()
                .fold(0.0f64, |acc, x| if x.abs() > acc.abs() { x } else { acc });
            if pivot < 0.0 {
                row.iter_mut().for_each(|x| *x = -*x);
            }
            components.extend(row);
            let s = svd.singular_values[k];
            explained_variance.push(s * s / (rows - 1) as f64);
        }
        Ok(PcaModel {
            n_features: cols,
            n_components,
            mean,
            components,
            explained_variance,
            total_variance,
        })
    }

    pub fn component(&self, k: usize) -> &[f64] {
        &self.components[k * self.n_features..(k + 1) * self.n_features]
    }

    /// Fraction of total variance captured by each component.
    pub fn explained_variance_ratio(&self) -> Vec<f64> {
        if self.total_variance == 0.0 {
            return vec![0.0; self.n_components];
        }
        self.explained_variance
            .iter()
            .map(|v| v / self.total_variance)
            .collect()
    }

    /// Project a single row.
    pub fn project(&self, row: &[f64]) -> Result<Vec<f64>, FeatureError> {
        if row.len() != self.n_features {
            return Err(FeatureError::DimensionMismatch {
                expected: self.n_features,
                found: row.len(),
            });
        }
        Ok((0..self.n_components)
            .map(|k| {
                self.component(k)
                    .iter()
                    .zip(row.iter().zip(&self.mean))
                    .map(|(c, (x, m))| c * (x - m))
                    .sum()
            })
            .collect())
    }

    /// `(X - mean) * components^T`, keeping doc ids; features are named `pc1..`.
    pub fn transform(&self, matrix: &FeatureMatrix) -> Result<FeatureMatrix, FeatureError> {
        if matrix.cols() != self.n_features {
            return Err(FeatureError::DimensionMismatch {
                expected: self.n_features,
                found: matrix.cols(),
            });
        }
        let rows = (0..matrix.rows())
            .map(|i| self.project(matrix.row(i)))
            .collect::<Result<Vec<_>, _>>()?;
        let names = (1..=self.n_components).map(|k| format!("pc{k}")).collect();
        FeatureMatrix::from_rows(matrix.doc_ids().to_vec(), names, rows)
    }

    /// Map projected coordinates back to feature space.
    pub fn inverse_transform(&self, coords: &[f64]) -> Vec<f64> {
        let mut out = self.mean.clone();
        for (k, &c) in coords.iter().enumerate().take(self.n_components) {
            for (o, v) in out.iter_mut().zip(self.component(k)) {
                *o += c * v;
            }
        }
        out
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("PCA model serializes")
    }

    pub fn from_json(s: &str) -> Result<Self, FeatureError> {
        let model: PcaModel = serde_json::from_str(s).map_err(|e| FeatureError::Format(e.to_string()))?;
        if model.mean.len() != model.n_features
            || model.components.len() != model.n_components * model.n_features
            || model.explained_variance.len() != model.n_components
        {
            return Err(FeatureError::Format("PCA model dimensions are inconsistent".into()));
        }
        Ok(model)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};

    fn random_matrix(rows: usize, cols: usize, seed: u64) -> FeatureMatrix {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let rows_v: Vec<Vec<f64>> = (0..rows)
            .map(|_| (0..cols).map(|j| rng.random_range(-1.0..1.0) * (j + 1) as f64).collect())
            .collect();
        FeatureMatrix::from_rows(
            (0..rows).map(|i| format!("d{i}")).collect(),
            (0..cols).map(|j| format!("f{j}")).collect(),
            rows_v,
        )
        .unwrap()
    }

    /// Covariance eigenvalues by symmetric eigendecomposition, descending.
    fn covariance_eigenvalues(m: &FeatureMatrix) -> Vec<f64> {
        let (r, c) = (m.rows(), m.cols());
        let x = DMatrix::from_fn(r, c, |i, j| m.get(i, j));
        let means = x.row_mean();
        let centred = DMatrix::from_fn(r, c, |i, j| x[(i, j)] - means[j]);
        let cov = centred.transpose() * &centred / (r - 1) as f64;
        let mut ev: Vec<f64> = cov.symmetric_eigen().eigenvalues.iter().copied().collect();
        ev.sort_by(|a, b| b.total_cmp(a));
        ev
    }

    #[test]
    fn line_data_has_one_component() {
        let rows: Vec<Vec<f64>> = (0..6).map(|i| vec![i as f64, 2.0 * i as f64 + 1.0]).collect();
        let m = FeatureMatrix::from_rows(
            (0..6).map(|i| i.to_string()).collect(),
            vec!["x".into(), "y".into()],
            rows,
        )
        .unwrap();
        let pca = PcaModel::fit(&m, 2).unwrap();
        let ratio = pca.explained_variance_ratio();
        assert!((ratio[0] - 1.0).abs() < 1e-12);
        assert!(ratio[1].abs() < 1e-12);
        let c = pca.component(0);
        assert!((c[1] / c[0] - 2.0).abs() < 1e-10);
        assert!(c[1] > 0.0);
    }

    #[test]
    fn full_rank_reconstruction_and_eigenvalues() {
        let m = random_matrix(20, 8, 3);
        let pca = PcaModel::fit(&m, 8).unwrap();
        for i in 0..m.rows() {
            let z = pca.project(m.row(i)).unwrap();
            let back = pca.inverse_transform(&z);
            for (a, b) in back.iter().zip(m.row(i)) {
                assert!((a - b).abs() < 1e-8);
            }
        }
        for (a, b) in pca.explained_variance.iter().zip(covariance_eigenvalues(&m)) {
            assert!((a - b).abs() < 1e-8, "{a} vs {b}");
        }
        for w in pca.explained_variance.windows(2) {
            assert!(w[0] >= w[1]);
        }
    }

    #[test]
    fn transform_matches_direct_product() {
        let m = random_matrix(10, 5, 9);
        let pca = PcaModel::fit(&m, 3).unwrap();
        let t = pca.transform(&m).unwrap();
        for i in 0..m.rows() {
            for k in 0..3 {
                let mut s = 0.0;
                for j in 0..5 {
                    s += (m.get(i, j) - pca.mean[j]) * pca.components[k * 5 + j];
                }
                assert!((t.get(i, k) - s).abs() < 1e-12);
            }
        }
        let zero = pca.project(&pca.mean).unwrap();
        assert!(zero.iter().all(|z| z.abs() < 1e-12));
    }

    #[test]
    fn errors() {
        let m = random_matrix(1, 3, 1);
        assert!(matches!(PcaModel::fit(&m, 1), Err(FeatureError::DegenerateInput(_))));
        let m = random_matrix(5, 3, 1);
        assert!(PcaModel::fit(&m, 4).is_err());
        let pca = PcaModel::fit(&m, 2).unwrap();
        let other = random_matrix(5, 4, 1);
        assert!(matches!(pca.transform(&other), Err(FeatureError::DimensionMismatch { .. })));
    }

    #[test]
    fn json_roundtrip_is_exact() {
        let m = random_matrix(12, 6, 5);
        let pca = PcaModel::fit(&m, 4).unwrap();
        assert_eq!(PcaModel::from_json(&pca.to_json()).unwrap(), pca);
    }

    #[test]
    fn default_dimension() {
        assert_eq!(DEFAULT_COMPONENTS, 400);
    }
}
