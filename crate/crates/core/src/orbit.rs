//! Orbit iteration, the derivative cocycle, Birkhoff sums and the
//! large-deviation probes behind the sparse-time machinery.
//!
//! An [`Orbit`] caches everything the time detectors consume: positions,
//! log-derivatives along the path, and truncated distances to the moving
//! critical set.  The probe quantities follow the stationary-measure side of
//! the analysis: `G(R)` is the strong-expansion region, the `P(k)` shells
//! grade the complement by derivative size, and
//! `Z(h) = log(R)(1-h) - V/(2 eps)` with `V = -int_{|df|<1} log|df|` is the
//! margin that must stay positive for the expansion estimate to close.

use crate::map::{dist_r_to_critical, MapFamily};
use crate::noise::{draw_uniform, NoisePath, Purpose};
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum OrbitError {
    #[error("noise window does not cover 0..={0}")]
    WindowTooShort(usize),
    #[error("derivative vanished to |df| < 1e-300 at step {0}")]
    CriticalHit(usize),
    #[error("orbit length must be at least 1")]
    EmptyOrbit,
}

/// A finite trajectory with cached log-derivatives and truncated critical
/// distances.
#[derive(Debug, Clone)]
pub struct Orbit {
    /// Positions x_0 .. x_n.
    pub x: Vec<f64>,
    /// log|df_{theta^i w}(x_i)| for i = 0..n-1.
    pub logd: Vec<f64>,
    /// dist_r(x_i, C_{theta^i w}) for i = 0..n.
    pub distr: Vec<f64>,
    /// Truncation radius the distances were computed with.
    pub r: f64,
    /// Steps where |df| fell below 1e-15 (near-critical hits, flagged).
    pub flagged: Vec<usize>,
    pub n: usize,
}

/// Iterate `f_w^n` from `x0`, filling every cache.
///
/// The window must cover noise indices `0..=n`: the distance at the final
/// position needs `omega_n` because the moving critical set there is
/// `C - omega_n`.
pub fn iterate(
    family: &MapFamily,
    path: &NoisePath,
    x0: f64,
    n: usize,
    r: f64,
) -> Result<Orbit, OrbitError> {
    if n == 0 {
        return Err(OrbitError::EmptyOrbit);
    }
    if !path.covers(0, n as i64 + 1) {
        return Err(OrbitError::WindowTooShort(n));
    }
    iterate_values(family, &path.slice(0, n as i64 + 1), x0, n, r)
}

/// Same as [`iterate`] but driven by a materialised slice of noise values
/// for indices `0..=n`.
pub fn iterate_values(
    family: &MapFamily,
    noise_values: &[f64],
    x0: f64,
    n: usize,
    r: f64,
) -> Result<Orbit, OrbitError> {
    if n == 0 {
        return Err(OrbitError::EmptyOrbit);
    }
    if noise_values.len() < n + 1 {
        return Err(OrbitError::WindowTooShort(n));
    }
    let crit = family.critical_positions();
    let mut x = Vec::with_capacity(n + 1);
    let mut logd = Vec::with_capacity(n);
    let mut distr = Vec::with_capacity(n + 1);
    let mut flagged = Vec::new();
    let mut cur = x0;
    for (i, &w) in noise_values.iter().enumerate().take(n) {
        x.push(cur);
        distr.push(dist_r_to_critical(cur, crit, w, r));
        let d = family.deriv(w, cur).abs();
        if d < 1e-300 {
            return Err(OrbitError::CriticalHit(i));
        }
        if d < 1e-15 {
            flagged.push(i);
        }
        logd.push(d.ln());
        cur = family.eval(w, cur);
    }
    x.push(cur);
    distr.push(dist_r_to_critical(cur, crit, noise_values[n], r));
    Ok(Orbit {
        x,
        logd,
        distr,
        r,
        flagged,
        n,
    })
}

/// Compensated (Kahan) sum.
pub fn kahan_sum(values: impl IntoIterator<Item = f64>) -> f64 {
    let mut s = 0.0;
    let mut c = 0.0;
    for v in values {
        let y = v - c;
        let t = s + y;
        c = (t - s) - y;
        s = t;
    }
    s
}

/// Birkhoff sums over `[k, n)`: `S = sum logd_i` and
/// `D = sum -log(distr_i)`.
pub fn birkhoff_sums(orbit: &Orbit, k: usize, n: usize) -> (f64, f64) {
    assert!(k < n && n <= orbit.n, "need 0 <= k < n <= orbit.n");
    let s = kahan_sum(orbit.logd[k..n].iter().copied());
    let d = kahan_sum(orbit.distr[k..n].iter().map(|&v| -v.ln()));
    (s, d)
}

#[derive(Debug, Clone, Serialize)]
pub struct LyapunovEstimate {
    pub lambda_hat: f64,
    pub stderr: f64,
    pub per_path: Vec<f64>,
}

/// Ensemble estimate of the Lyapunov exponent: mean of `S_n/n` over
/// independent paths started from Lebesgue-random initial points.
pub fn lyapunov_estimate(
    family: &MapFamily,
    noise: crate::map::NoiseModel,
    n: usize,
    ensemble: usize,
    seed: u64,
) -> Result<LyapunovEstimate, OrbitError> {
    assert!(n >= 1 && ensemble >= 1);
    let per_path: Vec<f64> = (0..ensemble as u64)
        .into_par_iter()
        .map(|p| {
            let path = NoisePath::new(noise, seed, p, 0, n + 1);
            let x0 = draw_uniform(seed, Purpose::Init, p, 0);
            let orbit = iterate(family, &path, x0, n, 0.05)?;
            Ok(birkhoff_sums(&orbit, 0, n).0 / n as f64)
        })
        .collect::<Result<_, OrbitError>>()?;
    let mean = pairwise_mean(&per_path);
    let var = if ensemble > 1 {
        per_path.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (ensemble - 1) as f64
    } else {
        0.0
    };
    Ok(LyapunovEstimate {
        lambda_hat: mean,
        stderr: (var / ensemble as f64).sqrt(),
        per_path,
    })
}

/// Order-insensitive mean: pairwise reduction over the index-ordered slice.
pub fn pairwise_mean(v: &[f64]) -> f64 {
    fn pairwise_sum(v: &[f64]) -> f64 {
        match v.len() {
            0 => 0.0,
            1 => v[0],
            n => {
                let mid = n / 2;
                pairwise_sum(&v[..mid]) + pairwise_sum(&v[mid..])
            }
        }
    }
    if v.is_empty() {
        return 0.0;
    }
    pairwise_sum(v) / v.len() as f64
}

/// Large-deviation probe quantities.
#[derive(Debug, Clone, Serialize)]
pub struct LargeDevProbe {
    pub big_r: f64,
    pub h: f64,
    pub ell: u32,
    /// m(G(R)) where G(R) = { |df| > R }.
    pub g_measure: f64,
    /// Masses m(P(k)) for k >= -ell, keyed by k.
    pub pk_masses: Vec<(i64, f64)>,
    /// V = -int_{ {|df| < 1} } log|df| dx.
    pub v: f64,
    /// Z(h) = log(R)(1-h) - V/(2 eps).
    pub z: f64,
    /// Z1(h) = log(R)(1-h) - (beta2+1)/(2 eps) * V.
    pub z1: f64,
    pub beta2: f64,
    /// Hypothesis Z(h) > 0.
    pub z_positive: bool,
    /// Hypothesis eps > (1 - m(G))/h.
    pub eps_condition: bool,
}

/// Grid quadrature of the probe quantities.
///
/// The derivative-size shells are
/// `P(k) = { R^{-k/ell} > |df| > R^{-(k+1)/ell} }`; together with `G` they
/// partition the circle up to the measure-zero level sets, so the masses are
/// accumulated cell-by-cell and sum to one by construction.  Cells within
/// 1e-9 of a critical point are subdivided 20 levels for the logarithmic
/// integrand of `V`.
pub fn large_dev_probe(
    family: &MapFamily,
    noise: crate::map::NoiseModel,
    big_r: f64,
    h: f64,
    ell: u32,
    grid: usize,
    beta2: f64,
) -> LargeDevProbe {
    assert!(big_r > 1.0 && h > 0.0 && h < 1.0 && ell >= 8);
    let n = grid;
    let cell = 1.0 / n as f64;
    let ln_r = big_r.ln();
    let mut g_measure = 0.0;
    let mut pk = std::collections::BTreeMap::<i64, f64>::new();
    let mut v = 0.0;
    let crit = family.critical_positions();
    let near_crit =
        |x: f64| crit.iter().any(|&c| crate::map::circle_dist(x, c) < 1e-9);

    // usual cells by midpoint; near-critical cells recursively split
    fn add_cell(
        family: &MapFamily,
        x: f64,
        w: f64,
        depth: u32,
        near: &dyn Fn(f64) -> bool,
        ln_r: f64,
        ell: u32,
        big_r: f64,
        g: &mut f64,
        pk: &mut std::collections::BTreeMap<i64, f64>,
        v: &mut f64,
    ) {
        if depth > 0 && near(x) {
            let q = w / 4.0;
            for j in 0..4 {
                add_cell(
                    family,
                    x - w / 2.0 + (j as f64 + 0.5) * q,
                    q,
                    depth - 1,
                    near,
                    ln_r,
                    ell,
                    big_r,
                    g,
                    pk,
                    v,
                );
            }
            return;
        }
        let d = family.deriv(0.0, x).abs();
        if d > big_r {
            *g += w;
        } else {
            // R^{-k/ell} > d  =>  k = floor(-ell ln d / ln R), clamped to -ell
            let kf = -(ell as f64) * d.max(1e-300).ln() / ln_r;
            let k = (kf.floor() as i64).max(-(ell as i64));
            *pk.entry(k).or_insert(0.0) += w;
        }
        if d < 1.0 {
            *v -= w * d.max(1e-300).ln();
        }
    }

    for i in 0..n {
        let x = (i as f64 + 0.5) * cell;
        add_cell(
            family, x, cell, 20, &near_crit, ln_r, ell, big_r, &mut g_measure, &mut pk, &mut v,
        );
    }

    let z = ln_r * (1.0 - h) - v / (2.0 * noise.epsilon);
    let z1 = ln_r * (1.0 - h) - (beta2 + 1.0) / (2.0 * noise.epsilon) * v;
    LargeDevProbe {
        big_r,
        h,
        ell,
        g_measure,
        pk_masses: pk.into_iter().collect(),
        v,
        z,
        z1,
        beta2,
        z_positive: z > 0.0,
        eps_condition: noise.epsilon > (1.0 - g_measure) / h,
    }
}
