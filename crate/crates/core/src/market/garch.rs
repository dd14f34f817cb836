//! GARCH(1,1) fitted by Gaussian maximum likelihood.
//!
//! sigma^2_t = omega + alpha * r^2_{t-1} + beta * sigma^2_{t-1}, with
//! sigma^2_1 set to the sample variance of the returns.

use serde::{Deserialize, Serialize};

use super::optim::nelder_mead;
use super::MarketError;

/// Default minimum number of returns required for a fit.
pub const DEFAULT_MIN_OBSERVATIONS: usize = 100;
/// Upper bound on alpha + beta.
pub const MAX_PERSISTENCE: f64 = 0.999;

const FTOL: f64 = 1e-8;
const MAX_ITER: usize = 2000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GarchParams {
    pub omega: f64,
    pub alpha: f64,
    pub beta: f64,
    /// Conditional variance at the last observation.
    pub last_variance: f64,
}

impl GarchParams {
    pub fn persistence(&self) -> f64 {
        self.alpha + self.beta
    }

    /// Long-run variance omega / (1 - alpha - beta).
    pub fn unconditional_variance(&self) -> f64 {
        self.omega / (1.0 - self.persistence())
    }

    /// Variance forecast `h` steps past the last observation.
    pub fn variance_forecast(&self, h: u32) -> f64 {
        let v = self.unconditional_variance();
        v + self.persistence().powi(h as i32) * (self.last_variance - v)
    }

    /// Forecast on the ln-std scale of realized volatility.
    pub fn forecast(&self, h: u32) -> f64 {
        self.variance_forecast(h).sqrt().ln()
    }

    /// ln(sqrt(V)); the quarter-ahead market feature.
    pub fn unconditional_volatility(&self) -> f64 {
        self.unconditional_variance().sqrt().ln()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GarchFit {
    pub params: GarchParams,
    pub log_likelihood: f64,
    /// Log-likelihood at the optimizer's start point.
    pub start_log_likelihood: f64,
    pub iterations: usize,
    /// False when the iteration cap was hit; `params` are then best-so-far.
    pub converged: bool,
}

fn sample_variance(returns: &[f64]) -> f64 {
    let n = returns.len() as f64;
    let mean = returns.iter().sum::<f64>() / n;
    returns.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / (n - 1.0)
}

/// Gaussian log-likelihood (without the constant term) and final variance.
pub fn log_likelihood(returns: &[f64], omega: f64, alpha: f64, beta: f64) -> (f64, f64) {
    let mut var = sample_variance(returns);
    let mut ll = 0.0;
    for (t, r) in returns.iter().enumerate() {
        if t > 0 {
            var = omega + alpha * returns[t - 1].powi(2) + beta * var;
        }
        ll += var.ln() + r * r / var;
    }
    (-0.5 * ll, var)
}

fn logistic(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

fn logit(p: f64) -> f64 {
    (p / (1.0 - p)).ln()
}

/// Unconstrained coordinates: (ln omega, logit of persistence share, logit of
/// alpha's share of the persistence).
fn to_params(u: &[f64]) -> (f64, f64, f64) {
    let omega = u[0].exp();
    let persistence = MAX_PERSISTENCE * logistic(u[1]);
    let alpha = persistence * logistic(u[2]);
    (omega, alpha, persistence - alpha)
}

fn to_coords(omega: f64, alpha: f64, beta: f64) -> Vec<f64> {
    let p = alpha + beta;
    vec![omega.ln(), logit(p / MAX_PERSISTENCE), logit(alpha / p)]
}

pub fn garch_fit(returns: &[f64], min_observations: usize) -> Result<GarchFit, MarketError> {
    if returns.len() < min_observations.max(2) {
        return Err(MarketError::TooShort {
            needed: min_observations.max(2),
            found: returns.len(),
        });
    }
    if returns.iter().any(|r| !r.is_finite()) {
        return Err(MarketError::NonFinite);
    }
    let var = sample_variance(returns);
    if var <= 0.0 || returns.iter().all(|&r| r == returns[0]) {
        return Err(MarketError::ZeroVolatility);
    }

    let objective = |u: &[f64]| {
        let (omega, alpha, beta) = to_params(u);
        -log_likelihood(returns, omega, alpha, beta).0
    };
    let start = to_coords(0.1 * var, 0.1, 0.8);
    let start_ll = -objective(&start);

    let mut result = nelder_mead(objective, &start, 0.5, FTOL, MAX_ITER);
    let mut iterations = result.iterations;
    // one restart from the optimum guards against a prematurely collapsed simplex
    if result.converged && iterations < MAX_ITER {
        let again = nelder_mead(objective, &result.x, 0.1, FTOL, MAX_ITER - iterations);
        iterations += again.iterations;
        if again.value <= result.value {
            result.x = again.x;
            result.value = again.value;
        }
        result.converged = again.converged;
    }
    let (omega, alpha, beta) = to_params(&result.x);
    let (ll, last_variance) = log_likelihood(returns, omega, alpha, beta);
    Ok(GarchFit {
        params: GarchParams {
            omega,
            alpha,
            beta,
            last_variance,
        },
        log_likelihood: ll,
        start_log_likelihood: start_ll,
        iterations,
        converged: result.converged,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_distr::{Distribution, StandardNormal};

    pub(crate) fn simulate(omega: f64, alpha: f64, beta: f64, n: usize, seed: u64) -> Vec<f64> {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let mut var = omega / (1.0 - alpha - beta);
        let mut prev: f64 = 0.0;
        let mut out = Vec::with_capacity(n);
        for t in 0..n + 500 {
            if t > 0 {
                var = omega + alpha * prev * prev + beta * var;
            }
            let z: f64 = StandardNormal.sample(&mut rng);
            prev = var.sqrt() * z;
            if t >= 500 {
                out.push(prev);
            }
        }
        out
    }

    #[test]
    fn closed_form_forecasts() {
        let p = GarchParams {
            omega: 0.1,
            alpha: 0.1,
            beta: 0.8,
            last_variance: 3.0,
        };
        assert!((p.unconditional_variance() - 1.0).abs() < 1e-12);
        assert!((p.forecast(500) - p.unconditional_volatility()).abs() < 1e-6);
        let fixed = GarchParams { last_variance: 1.0, ..p };
        for h in [1, 5, 50] {
            assert!((fixed.forecast(h) - fixed.forecast(1)).abs() < 1e-12);
        }
        let mut prev = p.variance_forecast(0);
        for h in 1..100 {
            let cur = p.variance_forecast(h);
            assert!(cur <= prev && cur >= 1.0);
            prev = cur;
        }
    }

    #[test]
    fn iid_returns_recover_variance() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let v: f64 = 2.5e-4;
        let returns: Vec<f64> = (0..5000)
            .map(|_| {
                let z: f64 = StandardNormal.sample(&mut rng);
                z * v.sqrt()
            })
            .collect();
        let fit = garch_fit(&returns, DEFAULT_MIN_OBSERVATIONS).unwrap();
        let uv = fit.params.unconditional_variance();
        assert!((uv - v).abs() / v < 0.2, "{uv} vs {v}");
        assert!(fit.log_likelihood >= fit.start_log_likelihood);
    }

    #[test]
    fn recovers_simulated_parameters() {
        let returns = simulate(0.1, 0.1, 0.8, 10_000, 11);
        let fit = garch_fit(&returns, DEFAULT_MIN_OBSERVATIONS).unwrap();
        let p = fit.params;
        assert!(fit.converged);
        assert!((p.omega - 0.1).abs() < 0.05, "{p:?}");
        assert!((p.alpha - 0.1).abs() < 0.05, "{p:?}");
        assert!((p.beta - 0.8).abs() < 0.05, "{p:?}");
        assert!((p.unconditional_variance() - 1.0).abs() < 0.1, "{p:?}");
    }

    #[test]
    fn degenerate_inputs() {
        assert!(matches!(
            garch_fit(&[0.0; 200], DEFAULT_MIN_OBSERVATIONS),
            Err(MarketError::ZeroVolatility)
        ));
        assert!(matches!(
            garch_fit(&[0.01; 50], DEFAULT_MIN_OBSERVATIONS),
            Err(MarketError::TooShort { .. })
        ));
    }

    #[test]
    fn constraints_hold() {
        let returns = simulate(0.05, 0.2, 0.7, 2000, 3);
        let fit = garch_fit(&returns, 100).unwrap();
        let p = fit.params;
        assert!(p.omega > 0.0 && p.alpha >= 0.0 && p.beta >= 0.0);
        assert!(p.persistence() <= MAX_PERSISTENCE);
        assert!(fit.log_likelihood >= fit.start_log_likelihood);
    }
}
