//! Exponential-tail fitting for survival curves.

use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum FitError {
    #[error("need at least 5 points above the floor, got {0}")]
    TooFewPoints(usize),
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct TailFit {
    pub gamma: f64,
    pub c: f64,
    pub r2: f64,
    /// Set when the usable points are (numerically) constant.
    pub degenerate: bool,
    pub points_used: usize,
}

/// Least squares on `log s_n` over points with `s_n > floor`.
pub fn fit_exponential_tail(survival: &[(f64, f64)], floor: f64) -> Result<TailFit, FitError> {
    let pts: Vec<(f64, f64)> = survival
        .iter()
        .filter(|&&(_, s)| s > floor && s > 0.0)
        .cloned()
        .collect();
    if pts.len() < 5 {
        return Err(FitError::TooFewPoints(pts.len()));
    }
    let (slope, intercept, r2) = lab_core::oracles::log_linear_fit(&pts);
    let ys: Vec<f64> = pts.iter().map(|&(_, s)| s.ln()).collect();
    let my = ys.iter().sum::<f64>() / ys.len() as f64;
    let ss_tot: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    let degenerate = ss_tot < 1e-24;
    Ok(TailFit {
        gamma: -slope,
        c: intercept.exp(),
        r2: if degenerate { 0.0 } else { r2 },
        degenerate,
        points_used: pts.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_exponential_recovered() {
        let pts: Vec<(f64, f64)> = (0..40)
            .map(|n| (n as f64, (-0.5 * n as f64).exp()))
            .collect();
        let fit = fit_exponential_tail(&pts, 1e-9).unwrap();
        assert!((fit.gamma - 0.5).abs() < 1e-9);
        assert!((fit.c - 1.0).abs() < 1e-9);
        assert!(!fit.degenerate);
    }

    #[test]
    fn constant_curve_flagged_degenerate() {
        let pts: Vec<(f64, f64)> = (0..10).map(|n| (n as f64, 0.5)).collect();
        let fit = fit_exponential_tail(&pts, 1e-9).unwrap();
        assert_eq!(fit.gamma, 0.0);
        assert!(fit.degenerate);
        assert_eq!(fit.r2, 0.0);
    }

    #[test]
    fn too_few_points() {
        let pts = vec![(0.0, 1.0), (1.0, 0.5)];
        assert_eq!(
            fit_exponential_tail(&pts, 1e-9).unwrap_err(),
            FitError::TooFewPoints(2)
        );
    }

    #[test]
    fn scale_equivariance_exact() {
        // scaling s_n by a constant changes only C, never gamma
        let pts: Vec<(f64, f64)> = (0..30)
            .map(|n| (n as f64, (-0.31 * n as f64).exp() * (1.0 + 0.01 * (n as f64).sin())))
            .collect();
        let scaled: Vec<(f64, f64)> = pts.iter().map(|&(n, s)| (n, 7.5 * s)).collect();
        let f1 = fit_exponential_tail(&pts, 0.0).unwrap();
        let f2 = fit_exponential_tail(&scaled, 0.0).unwrap();
        assert_eq!(f1.gamma, f2.gamma);
        assert!((f2.c / f1.c - 7.5).abs() < 1e-9);
    }

    #[test]
    fn jittered_exponential_within_five_percent() {
        // 1% multiplicative jitter, deterministic pattern
        let pts: Vec<(f64, f64)> = (0..60)
            .map(|n| {
                let jitter = 1.0 + 0.01 * ((n * 2654435761u64 % 1000) as f64 / 500.0 - 1.0);
                (n as f64, (-0.42 * n as f64).exp() * jitter)
            })
            .collect();
        let fit = fit_exponential_tail(&pts, 1e-13).unwrap();
        assert!((fit.gamma - 0.42).abs() / 0.42 < 0.05);
    }
}
