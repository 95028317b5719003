//! Least-squares power-law fits on log-log data.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExponentFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    /// Range of the abscissa (untransformed).
    pub window: (f64, f64),
}

impl ExponentFit {
    pub fn predict(&self, x: f64) -> f64 {
        (self.intercept + self.slope * x.ln()).exp()
    }
}

/// Ordinary least squares `y ≈ a + b x`; returns (b, a, r²).
pub fn linear_fit(x: &[f64], y: &[f64]) -> Result<(f64, f64, f64)> {
    if x.len() != y.len() || x.len() < 2 {
        return Err(Error::DegenerateFit(format!("need ≥ 2 paired points, got {}", x.len())));
    }
    if x.iter().chain(y).any(|v| !v.is_finite()) {
        return Err(Error::DegenerateFit("non-finite data".into()));
    }
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|v| (v - mx).powi(2)).sum();
    let syy: f64 = y.iter().map(|v| (v - my).powi(2)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    if sxx <= 0.0 {
        return Err(Error::DegenerateFit("zero variance in abscissa".into()));
    }
    let b = sxy / sxx;
    let a = my - b * mx;
    let r2 = if syy > 0.0 { (sxy * sxy / (sxx * syy)).clamp(0.0, 1.0) } else { 1.0 };
    Ok((b, a, r2))
}

/// Fit `log y = intercept + slope · log x`.
pub fn fit_loglog(x: &[f64], y: &[f64]) -> Result<ExponentFit> {
    if x.iter().chain(y).any(|v| !(*v > 0.0)) {
        return Err(Error::DegenerateFit("log-log fit needs positive data".into()));
    }
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let (slope, intercept, r_squared) = linear_fit(&lx, &ly)?;
    let lo = x.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = x.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    Ok(ExponentFit { slope, intercept, r_squared, window: (lo, hi) })
}

/// `n` log-spaced points from `a` to `b` inclusive.
pub fn logspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![a];
    }
    let (la, lb) = (a.ln(), b.ln());
    (0..n).map(|i| (la + (lb - la) * i as f64 / (n - 1) as f64).exp()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn synthetic_power_law() {
        let q = logspace(100.0, 1e4, 8);
        let y: Vec<f64> = q.iter().map(|v| 3.0 * v.powf(0.5)).collect();
        let f = fit_loglog(&q, &y).unwrap();
        assert!((f.slope - 0.5).abs() < 1e-6);
        assert!((f.intercept - 3f64.ln()).abs() < 1e-9);
        assert!((f.r_squared - 1.0).abs() < 1e-12);
        assert!((f.window.0 - 100.0).abs() < 1e-9 && (f.window.1 - 1e4).abs() < 1e-6);
    }

    #[test]
    fn degenerate_inputs() {
        assert!(fit_loglog(&[2.0, 2.0, 2.0], &[1.0, 2.0, 3.0]).is_err());
        assert!(fit_loglog(&[1.0], &[1.0]).is_err());
        assert!(fit_loglog(&[1.0, 2.0], &[0.0, 1.0]).is_err());
    }

    proptest! {
        #[test]
        fn r_squared_in_unit_interval(y in prop::collection::vec(0.1f64..10.0, 5..20)) {
            let x: Vec<f64> = (1..=y.len()).map(|i| i as f64).collect();
            let f = fit_loglog(&x, &y).unwrap();
            prop_assert!((0.0..=1.0).contains(&f.r_squared));
        }

        #[test]
        fn recovers_exact_slopes(s in -3.0f64..3.0, c in 0.1f64..10.0) {
            let x = logspace(1.0, 1e3, 6);
            let y: Vec<f64> = x.iter().map(|v| c * v.powf(s)).collect();
            let f = fit_loglog(&x, &y).unwrap();
            prop_assert!((f.slope - s).abs() < 1e-9);
        }
    }
}
