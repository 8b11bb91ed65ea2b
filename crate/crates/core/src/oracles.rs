//! Brute-force reference implementations used only by tests and the
//! acceptance suite.
//!
//! These transcribe the definitions literally (double loops, explicit
//! products) and must stay independent of the optimized detectors they
//! check.

use crate::orbit::Orbit;
use crate::times::{HyperbolicParams, TimeKind, TimeSet};

/// O(n^2) Pliss detector: for each n walk k backward, summing directly.
pub fn pliss_times_brute(seq: &[f64], c1: f64) -> Vec<usize> {
    let mut out = Vec::new();
    for n in 1..=seq.len() {
        let mut ok = true;
        let mut s = 0.0;
        for k in (0..n).rev() {
            s += seq[k];
            if s < c1 * (n - k) as f64 {
                ok = false;
                break;
            }
        }
        if ok {
            out.push(n);
        }
    }
    out
}

/// O(n^2) hyperbolic-time detector transcribing both displayed conditions.
pub fn hyperbolic_times_brute(orbit: &Orbit, p: &HyperbolicParams) -> TimeSet {
    let sigma = p.sigma2.sqrt();
    let mut out = Vec::new();
    for n in 1..=orbit.n {
        let mut ok = true;
        let mut logsum = 0.0;
        for k in (0..n).rev() {
            // product_{j=k}^{n-1} |df_j|^{-1} <= sigma^{2(n-k)}
            logsum += orbit.logd[k];
            if -logsum > (n - k) as f64 * p.sigma2.ln() {
                ok = false;
                break;
            }
            // dist_r(x_{n-k}, C_{theta^{n-k} w}) >= sigma^{b k}
            if orbit.distr[n - k] < sigma.powf(p.b * k as f64) {
                ok = false;
                break;
            }
        }
        if ok {
            out.push(n);
        }
    }
    TimeSet::new(out, TimeKind::Hyperbolic)
}

/// Least-squares fit of `log y` against `x`; returns (slope, intercept, r2).
pub fn log_linear_fit(points: &[(f64, f64)]) -> (f64, f64, f64) {
    let n = points.len() as f64;
    let xs: Vec<f64> = points.iter().map(|&(x, _)| x).collect();
    let ys: Vec<f64> = points.iter().map(|&(_, y)| y.ln()).collect();
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    let intercept = my - slope * mx;
    let ss_tot: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    let ss_res: f64 = xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| (y - (intercept + slope * x)).powi(2))
        .sum();
    let r2 = if ss_tot > 0.0 { 1.0 - ss_res / ss_tot } else { 0.0 };
    (slope, intercept, r2)
}
