//! Squared correlation and mean squared error.

use serde::{Deserialize, Serialize};

use super::EvalError;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RSquared {
    pub value: f64,
    /// Either side had zero variance; `value` is then 0.
    pub degenerate: bool,
}

fn check(pred: &[f64], labels: &[f64]) -> Result<(), EvalError> {
    if pred.len() != labels.len() {
        return Err(EvalError::LengthMismatch {
            predictions: pred.len(),
            labels: labels.len(),
        });
    }
    if pred.is_empty() {
        return Err(EvalError::Empty);
    }
    Ok(())
}

/// Squared Pearson correlation between predictions and labels.
pub fn r_squared(pred: &[f64], labels: &[f64]) -> Result<RSquared, EvalError> {
    check(pred, labels)?;
    let n = pred.len() as f64;
    let mp = pred.iter().sum::<f64>() / n;
    let ml = labels.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (p, l) in pred.iter().zip(labels) {
        let (dp, dl) = (p - mp, l - ml);
        sxy += dp * dl;
        sxx += dp * dp;
        syy += dl * dl;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Ok(RSquared {
            value: 0.0,
            degenerate: true,
        });
    }
    Ok(RSquared {
        value: (sxy * sxy / (sxx * syy)).min(1.0),
        degenerate: false,
    })
}

pub fn mse(pred: &[f64], labels: &[f64]) -> Result<f64, EvalError> {
    check(pred, labels)?;
    Ok(pred.iter().zip(labels).map(|(p, l)| (p - l) * (p - l)).sum::<f64>() / pred.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn examples() {
        let y = [0.5, 1.0, -2.0, 3.0];
        assert!((r_squared(&y, &y).unwrap().value - 1.0).abs() < 1e-15);
        let neg: Vec<f64> = y.iter().map(|v| -v).collect();
        assert!((r_squared(&neg, &y).unwrap().value - 1.0).abs() < 1e-15);
        let r = r_squared(&[1.0, 2.0, 3.0], &[2.0, 2.9, 4.2]).unwrap();
        // sxy = 2.2, sxx = 2, syy = 2.446667
        assert!((r.value - 0.989_100_817_438_692_2).abs() < 1e-12, "{}", r.value);
        let flat = r_squared(&[1.0; 4], &y).unwrap();
        assert_eq!(flat, RSquared { value: 0.0, degenerate: true });
        assert!(matches!(r_squared(&[1.0], &[1.0, 2.0]), Err(EvalError::LengthMismatch { .. })));
        assert!(matches!(mse(&[], &[]), Err(EvalError::Empty)));
        assert_eq!(mse(&y, &y).unwrap(), 0.0);
        let shifted: Vec<f64> = y.iter().map(|v| v + 1.0).collect();
        assert_eq!(mse(&shifted, &y).unwrap(), 1.0);
    }

    #[test]
    fn mse_matches_loop() {
        let p: [f64; 5] = [0.3, -1.2, 4.0, 2.2, 0.0];
        let l = [1.0, -1.0, 3.5, 2.0, 0.1];
        let mut s = 0.0;
        for i in 0..5 {
            s += (p[i] - l[i]).powi(2);
        }
        assert_eq!(mse(&p, &l).unwrap(), s / 5.0);
    }

    proptest! {
        #[test]
        fn r2_affine_invariant(
            pairs in prop::collection::vec((-10.0f64..10.0, -10.0f64..10.0), 3..40),
            a in prop_oneof![-5.0f64..-0.1, 0.1f64..5.0],
            b in -10.0f64..10.0,
        ) {
            let (p, l): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
            let base = r_squared(&p, &l).unwrap();
            prop_assume!(!base.degenerate);
            let q: Vec<f64> = p.iter().map(|x| a * x + b).collect();
            prop_assert!((r_squared(&q, &l).unwrap().value - base.value).abs() < 1e-10);
            prop_assert!((0.0..=1.0).contains(&base.value));
        }

        #[test]
        fn mse_shift_symmetric(
            pairs in prop::collection::vec((-10.0f64..10.0, -10.0f64..10.0), 1..40),
            c in -5.0f64..5.0,
        ) {
            let (p, l): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
            let ps: Vec<f64> = p.iter().map(|x| x + c).collect();
            let ls: Vec<f64> = l.iter().map(|x| x + c).collect();
            let lm: Vec<f64> = l.iter().map(|x| x - c).collect();
            let a = mse(&ps, &l).unwrap();
            let scale = 1.0 + a;
            prop_assert!((a - mse(&p, &lm).unwrap()).abs() < 1e-12 * scale);
            prop_assert!((mse(&ps, &ls).unwrap() - mse(&p, &l).unwrap()).abs() < 1e-12 * scale);
            prop_assert!(a >= 0.0);
        }
    }
}
