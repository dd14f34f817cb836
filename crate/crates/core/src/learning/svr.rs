//! Epsilon-insensitive support vector regression solved by SMO.
//!
//! The dual is posed over 2N variables beta = (alpha, alpha*) with labels
//! z = (+1, -1), minimizing 1/2 beta' Q beta + p' beta subject to z' beta = 0
//! and 0 <= beta <= box. The loss is averaged over samples, so the box is
//! C / N unless `unaveraged_loss` is set.

use serde::{Deserialize, Serialize};

use super::kernel::{check_rows, gram_matrix, Kernel};
use super::LearningError;

pub const DEFAULT_C: f64 = 1.0;
pub const DEFAULT_EPSILON: f64 = 0.1;
pub const DEFAULT_TOLERANCE: f64 = 1e-4;
/// Iteration cap per training sample.
pub const DEFAULT_MAX_ITER_PER_SAMPLE: usize = 10_000;

const TAU: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SvrParams {
    pub c: f64,
    pub epsilon: f64,
    /// Box bound C per sample instead of C / N.
    pub unaveraged_loss: bool,
    /// Stop when the maximal KKT violation drops below this.
    pub tolerance: f64,
    pub max_iter_per_sample: usize,
}

impl Default for SvrParams {
    fn default() -> Self {
        SvrParams {
            c: DEFAULT_C,
            epsilon: DEFAULT_EPSILON,
            unaveraged_loss: false,
            tolerance: DEFAULT_TOLERANCE,
            max_iter_per_sample: DEFAULT_MAX_ITER_PER_SAMPLE,
        }
    }
}

impl SvrParams {
    pub fn box_bound(&self, n: usize) -> f64 {
        if self.unaveraged_loss {
            self.c
        } else {
            self.c / n as f64
        }
    }

    fn validate(&self) -> Result<(), LearningError> {
        if !(self.c.is_finite() && self.c > 0.0) {
            return Err(LearningError::InvalidParameter(format!("C must be positive, got {}", self.c)));
        }
        if !(self.epsilon.is_finite() && self.epsilon >= 0.0) {
            return Err(LearningError::InvalidParameter(format!(
                "epsilon must be non-negative, got {}",
                self.epsilon
            )));
        }
        if !(self.tolerance > 0.0) {
            return Err(LearningError::InvalidParameter("tolerance must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SvrModel {
    pub kernel: Kernel,
    pub support_inputs: Vec<Vec<f64>>,
    /// alpha_i - alpha*_i for each retained support vector.
    pub dual_coefs: Vec<f64>,
    pub bias: f64,
    pub c: f64,
    pub epsilon: f64,
    /// Per-sample bound on |dual_coefs|.
    pub box_bound: f64,
    pub iterations: usize,
    /// False when the iteration cap was reached before the KKT tolerance.
    pub converged: bool,
}

/// Dual solution before support vectors are extracted.
#[derive(Debug, Clone)]
pub(crate) struct DualSolution {
    /// alpha - alpha* for every training sample.
    pub coefs: Vec<f64>,
    pub bias: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// SMO on a precomputed row-major Gram matrix.
pub(crate) fn solve_dual(gram: &[f64], y: &[f64], params: &SvrParams) -> DualSolution {
    let n = y.len();
    let m = 2 * n;
    let cap = params.box_bound(n);
    let eps = params.epsilon;
    let sign = |t: usize| if t < n { 1.0 } else { -1.0 };
    let k = |a: usize, b: usize| gram[(a % n) * n + (b % n)];
    let q = |s: usize, t: usize| sign(s) * sign(t) * k(s, t);

    let mut beta = vec![0.0; m];
    let mut grad: Vec<f64> = (0..m)
        .map(|t| if t < n { eps - y[t] } else { eps + y[t - n] })
        .collect();
    let at_upper = |b: f64| b >= cap;
    let at_lower = |b: f64| b <= 0.0;

    let max_iter = params.max_iter_per_sample.saturating_mul(n).max(1);
    let mut iterations = 0;
    let mut converged = false;
    while iterations < max_iter {
        // maximal violating pair; strict comparisons keep the lowest index on ties
        let (mut i, mut g_max) = (usize::MAX, f64::NEG_INFINITY);
        let (mut j, mut g_min) = (usize::MAX, f64::INFINITY);
        for t in 0..m {
            let v = -sign(t) * grad[t];
            let up = if t < n { !at_upper(beta[t]) } else { !at_lower(beta[t]) };
            let low = if t < n { !at_lower(beta[t]) } else { !at_upper(beta[t]) };
            if up && v > g_max {
                g_max = v;
                i = t;
            }
            if low && v < g_min {
                g_min = v;
                j = t;
            }
        }
        if i == usize::MAX || j == usize::MAX || g_max - g_min < params.tolerance {
            converged = true;
            break;
        }
        iterations += 1;

        let (old_i, old_j) = (beta[i], beta[j]);
        let qij = q(i, j);
        if sign(i) != sign(j) {
            let quad = (q(i, i) + q(j, j) + 2.0 * qij).max(TAU);
            let delta = (-grad[i] - grad[j]) / quad;
            let diff = beta[i] - beta[j];
            beta[i] += delta;
            beta[j] += delta;
            if diff > 0.0 {
                if beta[j] < 0.0 {
                    beta[j] = 0.0;
                    beta[i] = diff;
                }
            } else if beta[i] < 0.0 {
                beta[i] = 0.0;
                beta[j] = -diff;
            }
            if diff > 0.0 {
                if beta[i] > cap {
                    beta[i] = cap;
                    beta[j] = cap - diff;
                }
            } else if beta[j] > cap {
                beta[j] = cap;
                beta[i] = cap + diff;
            }
        } else {
            let quad = (q(i, i) + q(j, j) - 2.0 * qij).max(TAU);
            let delta = (grad[i] - grad[j]) / quad;
            let sum = beta[i] + beta[j];
            beta[i] -= delta;
            beta[j] += delta;
            if sum > cap {
                if beta[i] > cap {
                    beta[i] = cap;
                    beta[j] = sum - cap;
                }
                if beta[j] > cap {
                    beta[j] = cap;
                    beta[i] = sum - cap;
                }
            } else {
                if beta[j] < 0.0 {
                    beta[j] = 0.0;
                    beta[i] = sum;
                }
                if beta[i] < 0.0 {
                    beta[i] = 0.0;
                    beta[j] = sum;
                }
            }
        }
        let (di, dj) = (beta[i] - old_i, beta[j] - old_j);
        for (t, g) in grad.iter_mut().enumerate() {
            *g += q(i, t) * di + q(j, t) * dj;
        }
    }

    // bias from free variables, else the midpoint of the feasible interval
    let (mut ub, mut lb) = (f64::INFINITY, f64::NEG_INFINITY);
    let (mut free_sum, mut free_count) = (0.0, 0usize);
    for t in 0..m {
        let yg = sign(t) * grad[t];
        if at_upper(beta[t]) {
            if sign(t) < 0.0 {
                ub = ub.min(yg);
            } else {
                lb = lb.max(yg);
            }
        } else if at_lower(beta[t]) {
            if sign(t) > 0.0 {
                ub = ub.min(yg);
            } else {
                lb = lb.max(yg);
            }
        } else {
            free_sum += yg;
            free_count += 1;
        }
    }
    let rho = if free_count > 0 {
        free_sum / free_count as f64
    } else {
        (ub + lb) / 2.0
    };
    DualSolution {
        coefs: (0..n).map(|i| beta[i] - beta[i + n]).collect(),
        bias: -rho,
        iterations,
        converged,
    }
}

fn check_training(x: &[Vec<f64>], y: &[f64]) -> Result<(), LearningError> {
    if x.len() != y.len() {
        return Err(LearningError::DimensionMismatch {
            expected: x.len(),
            found: y.len(),
        });
    }
    if x.len() < 2 {
        return Err(LearningError::DegenerateInput(format!(
            "SVR needs at least 2 samples, got {}",
            x.len()
        )));
    }
    if y.iter().any(|v| !v.is_finite()) {
        return Err(LearningError::DegenerateInput("labels must be finite".into()));
    }
    check_rows(x)?;
    Ok(())
}

fn check_distinct(x: &[Vec<f64>]) -> Result<(), LearningError> {
    if x.iter().all(|r| r == &x[0]) {
        return Err(LearningError::DegenerateInput("all training rows are identical".into()));
    }
    Ok(())
}

impl SvrModel {
    pub fn train(x: &[Vec<f64>], y: &[f64], kernel: Kernel, params: &SvrParams) -> Result<Self, LearningError> {
        check_training(x, y)?;
        check_distinct(x)?;
        let gram = gram_matrix(&kernel, x)?;
        Self::train_with_gram(x, y, kernel, &gram, params)
    }

    /// Train when the Gram matrix of `kernel` over `x` is already known.
    pub fn train_with_gram(
        x: &[Vec<f64>],
        y: &[f64],
        kernel: Kernel,
        gram: &[f64],
        params: &SvrParams,
    ) -> Result<Self, LearningError> {
        check_training(x, y)?;
        check_distinct(x)?;
        Self::fit_gram(x, y, kernel, gram, params).map(|(m, _)| m)
    }

    /// As `train_with_gram`, also returning the dual coefficient of every
    /// training row. Identical rows are accepted; the fit is then a constant.
    pub(crate) fn fit_gram(
        x: &[Vec<f64>],
        y: &[f64],
        kernel: Kernel,
        gram: &[f64],
        params: &SvrParams,
    ) -> Result<(Self, Vec<f64>), LearningError> {
        params.validate()?;
        kernel.validate()?;
        check_training(x, y)?;
        if gram.len() != x.len() * x.len() {
            return Err(LearningError::DimensionMismatch {
                expected: x.len() * x.len(),
                found: gram.len(),
            });
        }
        let sol = solve_dual(gram, y, params);
        if !sol.converged {
            log::warn!("SVR stopped at the iteration cap ({} iterations)", sol.iterations);
        }
        let (mut support_inputs, mut dual_coefs) = (Vec::new(), Vec::new());
        for (row, &c) in x.iter().zip(&sol.coefs) {
            if c != 0.0 {
                support_inputs.push(row.clone());
                dual_coefs.push(c);
            }
        }
        let model = SvrModel {
            kernel,
            support_inputs,
            dual_coefs,
            bias: sol.bias,
            c: params.c,
            epsilon: params.epsilon,
            box_bound: params.box_bound(x.len()),
            iterations: sol.iterations,
            converged: sol.converged,
        };
        Ok((model, sol.coefs))
    }

    pub fn input_dim(&self) -> Option<usize> {
        self.support_inputs.first().map(Vec::len)
    }

    pub fn predict(&self, x: &[f64]) -> Result<f64, LearningError> {
        let mut f = self.bias;
        for (sv, c) in self.support_inputs.iter().zip(&self.dual_coefs) {
            f += c * self.kernel.eval(sv, x)?;
        }
        Ok(f)
    }

    pub fn predict_rows(&self, rows: &[Vec<f64>]) -> Result<Vec<f64>, LearningError> {
        rows.iter().map(|r| self.predict(r)).collect()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("SVR model serializes")
    }

    pub fn from_json(s: &str) -> Result<Self, LearningError> {
        let model: SvrModel = serde_json::from_str(s).map_err(|e| LearningError::Format(e.to_string()))?;
        if model.support_inputs.len() != model.dual_coefs.len() {
            return Err(LearningError::Format("support inputs and dual coefficients differ in length".into()));
        }
        Ok(model)
    }
}

pub fn svr_train(x: &[Vec<f64>], y: &[f64], kernel: Kernel, params: &SvrParams) -> Result<SvrModel, LearningError> {
    SvrModel::train(x, y, kernel, params)
}

pub fn svr_predict(model: &SvrModel, x: &[f64]) -> Result<f64, LearningError> {
    model.predict(x)
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use nalgebra::{DMatrix, DVector};
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};

    /// Dense log-barrier interior-point solve of the same dual, with the
    /// equality constraint handled by a KKT Newton system. Returns
    /// (alpha - alpha*, bias).
    pub(crate) fn qp_oracle(gram: &[f64], y: &[f64], c_box: f64, eps: f64) -> (Vec<f64>, f64) {
        let n = y.len();
        let m = 2 * n;
        let kk = DMatrix::from_row_slice(n, n, gram);
        let mut q = DMatrix::zeros(m, m);
        for i in 0..n {
            for j in 0..n {
                q[(i, j)] = kk[(i, j)];
                q[(i + n, j + n)] = kk[(i, j)];
                q[(i, j + n)] = -kk[(i, j)];
                q[(i + n, j)] = -kk[(i, j)];
            }
        }
        let p = DVector::from_fn(m, |t, _| if t < n { eps - y[t] } else { eps + y[t - n] });
        let a = DVector::from_fn(m, |t, _| if t < n { 1.0 } else { -1.0 });
        let objective = |z: &DVector<f64>, mu: f64| -> f64 {
            let mut v = 0.5 * z.dot(&(&q * z)) + p.dot(z);
            for t in 0..m {
                v -= mu * (z[t].ln() + (c_box - z[t]).ln());
            }
            v
        };

        let mut z = DVector::from_element(m, c_box / 2.0);
        let mut mu = c_box;
        while mu > 1e-14 * c_box {
            for _ in 0..100 {
                let qz = &q * &z;
                let mut grad = &qz + &p;
                let mut hess = q.clone();
                for t in 0..m {
                    let (lo, hi) = (z[t], c_box - z[t]);
                    grad[t] += -mu / lo + mu / hi;
                    hess[(t, t)] += mu / (lo * lo) + mu / (hi * hi);
                }
                let mut kkt = DMatrix::zeros(m + 1, m + 1);
                kkt.view_mut((0, 0), (m, m)).copy_from(&hess);
                for t in 0..m {
                    kkt[(t, m)] = a[t];
                    kkt[(m, t)] = a[t];
                }
                let mut rhs = DVector::zeros(m + 1);
                for t in 0..m {
                    rhs[t] = -grad[t];
                }
                let sol = kkt.lu().solve(&rhs).expect("KKT system solvable");
                let dz = sol.rows(0, m).into_owned();
                let decrement = -grad.dot(&dz);
                if decrement < 1e-18 {
                    break;
                }
                let mut step = 1.0;
                for t in 0..m {
                    if dz[t] < 0.0 {
                        step = f64::min(step, -0.99 * z[t] / dz[t]);
                    } else if dz[t] > 0.0 {
                        step = f64::min(step, 0.99 * (c_box - z[t]) / dz[t]);
                    }
                }
                let f0 = objective(&z, mu);
                while objective(&(&z + &dz * step), mu) > f0 - 0.25 * step * decrement && step > 1e-16 {
                    step *= 0.5;
                }
                z += &dz * step;
            }
            mu *= 0.2;
        }

        let coefs: Vec<f64> = (0..n).map(|i| z[i] - z[i + n]).collect();
        let residual: Vec<f64> = (0..n)
            .map(|i| y[i] - (0..n).map(|j| coefs[j] * gram[i * n + j]).sum::<f64>())
            .collect();
        let tol = 1e-6 * c_box;
        let (mut free, mut lb, mut ub) = (Vec::new(), f64::NEG_INFINITY, f64::INFINITY);
        for i in 0..n {
            let (al, als) = (z[i], z[i + n]);
            if al > tol && al < c_box - tol {
                free.push(residual[i] - eps);
            }
            if als > tol && als < c_box - tol {
                free.push(residual[i] + eps);
            }
            if al <= tol {
                lb = lb.max(residual[i] - eps);
            }
            if al >= c_box - tol {
                ub = ub.min(residual[i] - eps);
            }
            if als <= tol {
                ub = ub.min(residual[i] + eps);
            }
            if als >= c_box - tol {
                lb = lb.max(residual[i] + eps);
            }
        }
        let bias = if free.is_empty() {
            (lb + ub) / 2.0
        } else {
            free.iter().sum::<f64>() / free.len() as f64
        };
        (coefs, bias)
    }

    pub(crate) fn random_instance(rng: &mut impl Rng, n: usize, dim: usize) -> (Vec<Vec<f64>>, Vec<f64>) {
        let w: Vec<f64> = (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect();
        let x: Vec<Vec<f64>> = (0..n)
            .map(|_| (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect())
            .collect();
        let y = x
            .iter()
            .map(|r| r.iter().zip(&w).map(|(a, b)| a * b).sum::<f64>() + rng.random_range(-0.3..0.3))
            .collect();
        (x, y)
    }

    #[test]
    fn constant_labels_predict_constant() {
        let x: Vec<Vec<f64>> = (0..10).map(|i| vec![i as f64, (i * i) as f64]).collect();
        let y = vec![2.5; 10];
        let m = SvrModel::train(&x, &y, Kernel::rbf_scaled(&x), &SvrParams::default()).unwrap();
        assert!(m.dual_coefs.is_empty());
        for r in &x {
            assert!((m.predict(r).unwrap() - 2.5).abs() < 1e-12);
        }
        assert!((m.predict(&[100.0, -3.0]).unwrap() - m.bias).abs() < 1e-15);
    }

    #[test]
    fn defaults() {
        let p = SvrParams::default();
        assert_eq!((p.c, p.epsilon), (1.0, 0.1));
        assert_eq!(p.box_bound(4), 0.25);
        assert_eq!(SvrParams { unaveraged_loss: true, ..p }.box_bound(4), 1.0);
    }

    #[test]
    fn degenerate_inputs() {
        let x = vec![vec![1.0, 2.0]; 4];
        assert!(matches!(
            SvrModel::train(&x, &[1.0, 2.0, 3.0, 4.0], Kernel::Linear, &SvrParams::default()),
            Err(LearningError::DegenerateInput(_))
        ));
        assert!(SvrModel::train(&[vec![1.0]], &[1.0], Kernel::Linear, &SvrParams::default()).is_err());
        let x = vec![vec![1.0], vec![2.0]];
        assert!(SvrModel::train(&x, &[1.0, f64::NAN], Kernel::Linear, &SvrParams::default()).is_err());
    }

    #[test]
    fn matches_qp_oracle_on_small_instances() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(17);
        for trial in 0..10 {
            let n = rng.random_range(4..=12);
            let (x, y) = random_instance(&mut rng, n, 2);
            let kernel = if trial % 2 == 0 { Kernel::Linear } else { Kernel::Rbf { gamma: 0.7 } };
            let params = SvrParams::default();
            let model = SvrModel::train(&x, &y, kernel.clone(), &params).unwrap();
            let gram = gram_matrix(&kernel, &x).unwrap();
            let (coefs, bias) = qp_oracle(&gram, &y, params.box_bound(n), params.epsilon);
            for i in 0..n {
                let oracle: f64 = bias + (0..n).map(|j| coefs[j] * gram[i * n + j]).sum::<f64>();
                let got = model.predict(&x[i]).unwrap();
                assert!((got - oracle).abs() < 1e-3, "trial {trial}: {got} vs {oracle}");
            }
        }
    }

    #[test]
    fn low_noise_fit_within_tube() {
        let x: Vec<Vec<f64>> = (0..30).map(|i| vec![i as f64 / 10.0]).collect();
        let y: Vec<f64> = x.iter().map(|r| 0.5 * r[0] + 0.2).collect();
        let params = SvrParams {
            c: 100.0,
            ..SvrParams::default()
        };
        let m = SvrModel::train(&x, &y, Kernel::Linear, &params).unwrap();
        for (r, t) in x.iter().zip(&y) {
            assert!((m.predict(r).unwrap() - t).abs() <= params.epsilon + 1e-3);
        }
    }

    #[test]
    fn json_roundtrip_is_exact() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let (x, y) = random_instance(&mut rng, 15, 3);
        let m = SvrModel::train(&x, &y, Kernel::rbf_scaled(&x), &SvrParams::default()).unwrap();
        let back = SvrModel::from_json(&m.to_json()).unwrap();
        assert_eq!(back, m);
        assert_eq!(back.predict(&x[0]).unwrap().to_bits(), m.predict(&x[0]).unwrap().to_bits());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn duals_sum_to_zero_and_respect_box(seed in 0u64..1000, n in 3usize..20) {
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let (x, y) = random_instance(&mut rng, n, 3);
            let params = SvrParams::default();
            let m = SvrModel::train(&x, &y, Kernel::rbf_scaled(&x), &params).unwrap();
            prop_assert!(m.dual_coefs.iter().sum::<f64>().abs() < 1e-6);
            prop_assert!(m.dual_coefs.iter().all(|c| c.abs() <= params.box_bound(n) + 1e-12));
        }

        #[test]
        fn permutation_invariant(seed in 0u64..1000) {
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let (x, y) = random_instance(&mut rng, 10, 2);
            let params = SvrParams { tolerance: 1e-8, ..SvrParams::default() };
            let a = SvrModel::train(&x, &y, Kernel::Rbf { gamma: 0.5 }, &params).unwrap();
            let (xr, yr): (Vec<_>, Vec<_>) = x.iter().cloned().zip(y.iter().copied()).rev().unzip();
            let b = SvrModel::train(&xr, &yr, Kernel::Rbf { gamma: 0.5 }, &params).unwrap();
            for r in &x {
                prop_assert!((a.predict(r).unwrap() - b.predict(r).unwrap()).abs() < 1e-5);
            }
        }
    }
}
