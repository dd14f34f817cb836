//! Convex multiple-kernel SVR by alternating optimization.
//!
//! Each round trains an SVR on K* = sum_i d_i K_i, then moves d along the
//! negative gradient of the dual objective (-1/2 beta' K_i beta) and projects
//! back onto the simplex.

use std::ops::Range;

use serde::{Deserialize, Serialize};

use super::kernel::{check_rows, gram_matrix, Kernel, WeightedKernel};
use super::svr::{SvrModel, SvrParams};
use super::LearningError;

pub const MAX_ROUNDS: usize = 20;
pub const WEIGHT_TOLERANCE: f64 = 1e-4;
const INITIAL_STEP: f64 = 0.5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MklModel {
    pub base_kernels: Vec<(Kernel, Range<usize>)>,
    pub weights: Vec<f64>,
    pub inner: SvrModel,
    pub rounds: usize,
}

impl MklModel {
    pub fn predict(&self, x: &[f64]) -> Result<f64, LearningError> {
        self.inner.predict(x)
    }
}

/// Euclidean projection onto the probability simplex.
pub fn project_simplex(v: &[f64]) -> Vec<f64> {
    let mut u = v.to_vec();
    u.sort_by(|a, b| b.total_cmp(a));
    let mut cumulative = 0.0;
    let mut theta = 0.0;
    for (k, &uk) in u.iter().enumerate() {
        cumulative += uk;
        let t = (cumulative - 1.0) / (k + 1) as f64;
        if uk - t > 0.0 {
            theta = t;
        }
    }
    v.iter().map(|x| (x - theta).max(0.0)).collect()
}

fn combine(grams: &[Vec<f64>], weights: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; grams[0].len()];
    for (g, &d) in grams.iter().zip(weights) {
        for (o, v) in out.iter_mut().zip(g) {
            *o += d * v;
        }
    }
    out
}

fn combined_kernel(blocks: &[(Kernel, Range<usize>)], weights: &[f64]) -> Kernel {
    Kernel::Combined {
        parts: blocks
            .iter()
            .zip(weights)
            .map(|((k, r), &w)| WeightedKernel {
                kernel: k.clone(),
                columns: r.clone(),
                weight: w,
            })
            .collect(),
    }
}

fn block_grams(x: &[Vec<f64>], blocks: &[(Kernel, Range<usize>)]) -> Result<Vec<Vec<f64>>, LearningError> {
    let dim = check_rows(x)?;
    blocks
        .iter()
        .map(|(k, r)| {
            if r.end > dim || r.start > r.end {
                return Err(LearningError::InvalidParameter(format!(
                    "column block {r:?} outside {dim} input columns"
                )));
            }
            let sub: Vec<Vec<f64>> = x.iter().map(|row| row[r.clone()].to_vec()).collect();
            gram_matrix(k, &sub)
        })
        .collect()
}

fn train_inner(
    x: &[Vec<f64>],
    y: &[f64],
    blocks: &[(Kernel, Range<usize>)],
    grams: &[Vec<f64>],
    weights: &[f64],
    params: &SvrParams,
) -> Result<(SvrModel, Vec<f64>), LearningError> {
    let gram = combine(grams, weights);
    SvrModel::fit_gram(x, y, combined_kernel(blocks, weights), &gram, params)
}

/// Train with kernel weights held fixed.
pub fn mkl_with_weights(
    x: &[Vec<f64>],
    blocks: &[(Kernel, Range<usize>)],
    weights: &[f64],
    y: &[f64],
    params: &SvrParams,
) -> Result<MklModel, LearningError> {
    if weights.len() != blocks.len() {
        return Err(LearningError::DimensionMismatch {
            expected: blocks.len(),
            found: weights.len(),
        });
    }
    if weights.iter().any(|w| *w < 0.0) || (weights.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
        return Err(LearningError::InvalidParameter("kernel weights must lie on the simplex".into()));
    }
    let grams = block_grams(x, blocks)?;
    Ok(MklModel {
        base_kernels: blocks.to_vec(),
        weights: weights.to_vec(),
        inner: train_inner(x, y, blocks, &grams, weights, params)?.0,
        rounds: 0,
    })
}

pub fn mkl_train(
    x: &[Vec<f64>],
    blocks: &[(Kernel, Range<usize>)],
    y: &[f64],
    params: &SvrParams,
) -> Result<MklModel, LearningError> {
    if blocks.is_empty() {
        return Err(LearningError::InvalidParameter("MKL needs at least one kernel block".into()));
    }
    let grams = block_grams(x, blocks)?;
    let n = y.len();
    let mut weights = vec![1.0 / blocks.len() as f64; blocks.len()];
    let (mut inner, mut beta) = train_inner(x, y, blocks, &grams, &weights, params)?;
    if blocks.len() == 1 {
        return Ok(MklModel {
            base_kernels: blocks.to_vec(),
            weights,
            inner,
            rounds: 0,
        });
    }

    let mut rounds = 0;
    while rounds < MAX_ROUNDS {
        rounds += 1;
        let grad: Vec<f64> = grams
            .iter()
            .map(|g| {
                let mut q = 0.0;
                for i in 0..n {
                    if beta[i] == 0.0 {
                        continue;
                    }
                    for j in 0..n {
                        q += beta[i] * beta[j] * g[i * n + j];
                    }
                }
                -0.5 * q
            })
            .collect();
        let scale = grad.iter().fold(0.0f64, |m, g| m.max(g.abs()));
        if scale == 0.0 {
            break;
        }
        let step = INITIAL_STEP / rounds as f64;
        let moved: Vec<f64> = weights.iter().zip(&grad).map(|(d, g)| d - step * g / scale).collect();
        let next = project_simplex(&moved);
        let change: f64 = next.iter().zip(&weights).map(|(a, b)| (a - b).abs()).sum();
        weights = next;
        (inner, beta) = train_inner(x, y, blocks, &grams, &weights, params)?;
        if change < WEIGHT_TOLERANCE {
            break;
        }
    }
    Ok(MklModel {
        base_kernels: blocks.to_vec(),
        weights,
        inner,
        rounds,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};

    fn informative_and_noise(seed: u64, n: usize) -> (Vec<Vec<f64>>, Vec<f64>) {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let x: Vec<Vec<f64>> = (0..n)
            .map(|_| (0..4).map(|_| rng.random_range(-1.0..1.0)).collect())
            .collect();
        let y = x.iter().map(|r| 2.0 * r[0] - r[1] + rng.random_range(-0.05..0.05)).collect();
        (x, y)
    }

    fn blocks() -> Vec<(Kernel, Range<usize>)> {
        vec![(Kernel::Rbf { gamma: 0.5 }, 0..2), (Kernel::Rbf { gamma: 0.5 }, 2..4)]
    }

    fn params() -> SvrParams {
        SvrParams {
            unaveraged_loss: true,
            ..SvrParams::default()
        }
    }

    #[test]
    fn informative_block_dominates() {
        let (x, y) = informative_and_noise(21, 60);
        let m = mkl_train(&x, &blocks(), &y, &params()).unwrap();
        assert!(m.weights[0] >= 0.7, "{:?}", m.weights);
        assert!((m.weights.iter().sum::<f64>() - 1.0).abs() < 1e-12);

        // the learned weight agrees with the best point of a 0.05 grid
        let (xt, yt) = informative_and_noise(22, 60);
        let grid_best = (0..=20)
            .map(|k| {
                let d = k as f64 / 20.0;
                let fixed = mkl_with_weights(&x, &blocks(), &[d, 1.0 - d], &y, &params()).unwrap();
                let mse: f64 = xt
                    .iter()
                    .zip(&yt)
                    .map(|(r, t)| (fixed.predict(r).unwrap() - t).powi(2))
                    .sum();
                (d, mse)
            })
            .min_by(|a, b| a.1.total_cmp(&b.1))
            .unwrap();
        assert!(grid_best.0 >= 0.7, "grid optimum {grid_best:?}");
    }

    #[test]
    fn single_block_equals_plain_svr() {
        let (x, y) = informative_and_noise(5, 30);
        let block = vec![(Kernel::Rbf { gamma: 0.5 }, 0..4)];
        let m = mkl_train(&x, &block, &y, &params()).unwrap();
        assert_eq!(m.weights, vec![1.0]);
        let plain = SvrModel::train(&x, &y, Kernel::Rbf { gamma: 0.5 }, &params()).unwrap();
        for r in &x {
            assert!((m.predict(r).unwrap() - plain.predict(r).unwrap()).abs() < 1e-9);
        }
    }

    #[test]
    fn vertex_weights_reproduce_first_kernel() {
        let (x, y) = informative_and_noise(6, 30);
        let m = mkl_with_weights(&x, &blocks(), &[1.0, 0.0], &y, &params()).unwrap();
        let sub: Vec<Vec<f64>> = x.iter().map(|r| r[0..2].to_vec()).collect();
        let plain = SvrModel::train(&sub, &y, Kernel::Rbf { gamma: 0.5 }, &params()).unwrap();
        for (r, s) in x.iter().zip(&sub) {
            assert!((m.predict(r).unwrap() - plain.predict(s).unwrap()).abs() < 1e-6);
        }
    }

    #[test]
    fn identical_kernels_ignore_weights() {
        let (x, y) = informative_and_noise(7, 25);
        let same = vec![(Kernel::Rbf { gamma: 0.5 }, 0..4), (Kernel::Rbf { gamma: 0.5 }, 0..4)];
        let a = mkl_with_weights(&x, &same, &[0.2, 0.8], &y, &params()).unwrap();
        let b = mkl_with_weights(&x, &same, &[0.9, 0.1], &y, &params()).unwrap();
        for r in &x {
            assert!((a.predict(r).unwrap() - b.predict(r).unwrap()).abs() < 1e-9);
        }
    }

    #[test]
    fn simplex_projection_examples() {
        assert_eq!(project_simplex(&[0.5, 0.5]), vec![0.5, 0.5]);
        assert_eq!(project_simplex(&[2.0, 0.0]), vec![1.0, 0.0]);
        let p = project_simplex(&[0.3, 0.3, 0.3]);
        assert!(p.iter().all(|v| (v - 1.0 / 3.0).abs() < 1e-15));
    }

    proptest! {
        #[test]
        fn projection_lands_on_simplex(v in prop::collection::vec(-3.0f64..3.0, 1..8)) {
            let p = project_simplex(&v);
            prop_assert!(p.iter().all(|x| *x >= 0.0));
            prop_assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }
}
