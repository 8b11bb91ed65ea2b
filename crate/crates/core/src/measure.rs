//! Ulam transfer-operator discretisation, pullback sample densities, the
//! annealed stationary density and quenched correlation estimation.
//!
//! The sample measure at a noise realisation is approximated by pushing the
//! uniform density forward from the distant past,
//! `h = L_{w_{-1}} L_{w_{-2}} ... L_{w_{-n}} u`, with `L` the row-stochastic
//! Ulam matrix of one noise value.  Correlations are estimated two ways: a
//! Monte-Carlo estimator that pushes stratified nodes through the orbit
//! (unbiased, noise floor `~1/sqrt(mc)`), and an operator estimator that
//! evaluates the same pairing through the Ulam chain and resolves the decay
//! far below the Monte-Carlo floor.

use crate::map::{wrap, MapFamily, NoiseModel};
use crate::noise::{draw_uniform, NoisePath, Purpose};
use rayon::prelude::*;
use serde::Serialize;
use std::collections::HashMap;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum MeasureError {
    #[error("path window does not cover the requested past depth {0}")]
    WindowTooShort(usize),
    #[error("power iteration did not converge within {0} iterations")]
    NoConvergence(usize),
    #[error("all points lie at or below the noise floor")]
    AllBelowFloor,
    #[error("need at least {0} usable points")]
    TooFewPoints(usize),
}

/// How the Ulam matrix is constructed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum UlamMode {
    /// Exact bin-boundary crossings on each monotone piece.
    BranchExact,
    /// Stratified samples per bin with linear interpolation in between.
    Sampled { per_bin: usize },
}

/// Row-stochastic pushforward matrix for one noise value.
#[derive(Debug, Clone)]
pub struct UlamOperator {
    pub n_bins: usize,
    pub mode: UlamMode,
    pub omega0: f64,
    /// Row-major: `rows[i*n + j] = m(bin_i and f^{-1} bin_j) / m(bin_i)`.
    rows: Vec<f64>,
}

/// Piecewise-constant probability density on the bin grid.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityVector {
    /// Bin masses, summing to one.
    pub masses: Vec<f64>,
}

impl DensityVector {
    pub fn uniform(n: usize) -> DensityVector {
        DensityVector {
            masses: vec![1.0 / n as f64; n],
        }
    }

    pub fn l1_distance(&self, other: &DensityVector) -> f64 {
        self.masses
            .iter()
            .zip(&other.masses)
            .map(|(a, b)| (a - b).abs())
            .sum()
    }

    pub fn total(&self) -> f64 {
        self.masses.iter().sum()
    }

    pub fn min_mass(&self) -> f64 {
        self.masses.iter().cloned().fold(f64::INFINITY, f64::min)
    }
}

/// Bounded or Lipschitz observable sampled on bin centers.
#[derive(Debug, Clone, Serialize)]
pub struct Observable {
    pub values: Vec<f64>,
    pub sup_norm: f64,
    /// `||psi||_Lip = ||psi||_inf + sup difference quotient`, when tracked.
    pub lip_norm: Option<f64>,
}

impl Observable {
    pub fn grid_fn(n: usize, f: impl Fn(f64) -> f64) -> Observable {
        let values: Vec<f64> = (0..n).map(|i| f((i as f64 + 0.5) / n as f64)).collect();
        let sup = values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        Observable {
            values,
            sup_norm: sup,
            lip_norm: None,
        }
    }

    pub fn lipschitz(n: usize, f: impl Fn(f64) -> f64) -> Observable {
        let mut o = Observable::grid_fn(n, f);
        let mut quot = 0.0f64;
        for i in 0..n {
            let a = o.values[i];
            let b = o.values[(i + 1) % n];
            quot = quot.max((b - a).abs() * n as f64);
        }
        o.lip_norm = Some(o.sup_norm + quot);
        o
    }

    pub fn cos(n: usize) -> Observable {
        Observable::lipschitz(n, |x| (2.0 * std::f64::consts::PI * x).cos())
    }

    pub fn one(n: usize) -> Observable {
        Observable::lipschitz(n, |_| 1.0)
    }

    pub fn eval(&self, x: f64) -> f64 {
        let n = self.values.len();
        let i = ((wrap(x) * n as f64) as usize).min(n - 1);
        self.values[i]
    }

    /// Mean against the Lebesgue measure.
    pub fn lebesgue_mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.values.len() as f64
    }

    /// Mean against a density on the same grid.
    pub fn mean_against(&self, density: &DensityVector) -> f64 {
        self.values
            .iter()
            .zip(&density.masses)
            .map(|(v, m)| v * m)
            .sum()
    }
}

impl UlamOperator {
    pub fn row(&self, i: usize) -> &[f64] {
        &self.rows[i * self.n_bins..(i + 1) * self.n_bins]
    }

    /// Pushforward of a mass vector.
    pub fn apply(&self, v: &DensityVector) -> DensityVector {
        let n = self.n_bins;
        let mut out = vec![0.0f64; n];
        for (i, &m) in v.masses.iter().enumerate() {
            if m == 0.0 {
                continue;
            }
            let row = self.row(i);
            for (o, r) in out.iter_mut().zip(row) {
                *o += m * r;
            }
        }
        DensityVector { masses: out }
    }

    pub fn max_row_sum_error(&self) -> f64 {
        (0..self.n_bins)
            .map(|i| (self.row(i).iter().sum::<f64>() - 1.0).abs())
            .fold(0.0f64, f64::max)
    }
}

/// Build the Ulam matrix of `f_{w0}` on `n` bins.
pub fn ulam_matrix(family: &MapFamily, omega0: f64, n: usize, mode: UlamMode) -> UlamOperator {
    assert!(n >= 2);
    if let UlamMode::Sampled { per_bin } = mode {
        assert!(per_bin >= 1000, "sampled mode needs k >= 1e3");
    }
    let rows: Vec<f64> = (0..n)
        .into_par_iter()
        .flat_map_iter(|i| {
            let mut row = vec![0.0f64; n];
            fill_row(family, omega0, n, i, mode, &mut row);
            row
        })
        .collect();
    UlamOperator {
        n_bins: n,
        mode,
        omega0,
        rows,
    }
}

fn fill_row(family: &MapFamily, omega0: f64, n: usize, i: usize, mode: UlamMode, row: &mut [f64]) {
    let lo = i as f64 / n as f64;
    let hi = (i + 1) as f64 / n as f64;
    match mode {
        UlamMode::BranchExact => {
            // split the bin at critical preimages, then walk exact
            // bin-boundary crossings on each monotone piece
            let mut cuts: Vec<f64> = family
                .critical_positions()
                .iter()
                .flat_map(|&c| {
                    let base = c - omega0;
                    let k0 = (lo - base).ceil() as i64;
                    let k1 = (hi - base).floor() as i64;
                    (k0..=k1).map(move |k| base + k as f64)
                })
                .filter(|&t| t > lo && t < hi)
                .collect();
            cuts.sort_by(|a, b| a.partial_cmp(b).unwrap());
            let mut p = lo;
            for q in cuts.into_iter().chain(std::iter::once(hi)) {
                if q > p {
                    distribute_exact(family, omega0, n, p, q, row);
                }
                p = q;
            }
        }
        UlamMode::Sampled { per_bin } => {
            let w = (hi - lo) / per_bin as f64;
            let mut t = lo;
            let mut y = family.lift(omega0, t);
            for s in 0..per_bin {
                let t2 = if s + 1 == per_bin { hi } else { lo + (s + 1) as f64 * w };
                let y2 = family.lift(omega0, t2);
                distribute_linear(n, t, t2, y, y2, row);
                t = t2;
                y = y2;
            }
        }
    }
    // normalise away accumulation drift
    let sum: f64 = row.iter().sum();
    if sum > 0.0 {
        let inv = (n as f64) * (hi - lo) / sum;
        for r in row.iter_mut() {
            *r *= inv;
        }
    }
}

/// Exact crossing walk on a monotone piece [p, q].
fn distribute_exact(family: &MapFamily, omega0: f64, n: usize, p: f64, q: f64, row: &mut [f64]) {
    let ya = family.lift(omega0, p);
    let yb = family.lift(omega0, q);
    let nf = n as f64;
    let increasing = yb >= ya;
    let (mut y_lo, y_hi) = (ya.min(yb), ya.max(yb));
    let mut t_prev = if increasing { p } else { q };
    // walk boundary values upward from y_lo to y_hi
    let mut m = (y_lo * nf).floor() as i64 + 1;
    loop {
        let v = m as f64 / nf;
        if v >= y_hi {
            break;
        }
        // solve lift(t) = v on the piece by safeguarded Newton
        let t = solve_on_piece(family, omega0, p, q, v, increasing);
        let seg = (t - t_prev).abs();
        let mid_bin = bin_of(0.5 * (y_lo + v), n);
        row[mid_bin] += seg * nf;
        t_prev = t;
        y_lo = v;
        m += 1;
    }
    let t_end = if increasing { q } else { p };
    let seg = (t_end - t_prev).abs();
    row[bin_of(0.5 * (y_lo + y_hi), n)] += seg * nf;
}

/// Linear interpolation walk between two sampled points.
fn distribute_linear(n: usize, t1: f64, t2: f64, y1: f64, y2: f64, row: &mut [f64]) {
    let nf = n as f64;
    if y1 == y2 {
        row[bin_of(y1, n)] += (t2 - t1).abs() * nf;
        return;
    }
    let (y_lo, y_hi) = (y1.min(y2), y1.max(y2));
    let dt_dy = (t2 - t1).abs() / (y_hi - y_lo);
    let mut y = y_lo;
    let mut m = (y_lo * nf).floor() as i64 + 1;
    loop {
        let v = m as f64 / nf;
        if v >= y_hi {
            break;
        }
        row[bin_of(0.5 * (y + v), n)] += (v - y) * dt_dy * nf;
        y = v;
        m += 1;
    }
    row[bin_of(0.5 * (y + y_hi), n)] += (y_hi - y) * dt_dy * nf;
}

fn bin_of(y: f64, n: usize) -> usize {
    ((wrap(y) * n as f64) as usize).min(n - 1)
}

fn solve_on_piece(
    family: &MapFamily,
    omega0: f64,
    p: f64,
    q: f64,
    target: f64,
    increasing: bool,
) -> f64 {
    let (mut lo, mut hi) = (p, q);
    let mut t = 0.5 * (lo + hi);
    for _ in 0..80 {
        let y = family.lift(omega0, t);
        if (y - target).abs() <= 1e-13 * (1.0 + target.abs()) {
            break;
        }
        if (y < target) == increasing {
            lo = t;
        } else {
            hi = t;
        }
        let d = family.alpha * family.xi_prime(t + omega0);
        let newton = t - (y - target) / d;
        let next = if d.abs() > 1e-12 && newton > lo && newton < hi {
            newton
        } else {
            0.5 * (lo + hi)
        };
        if next == t || hi - lo < 1e-16 {
            break;
        }
        t = next;
    }
    t
}

/// Gauss-Legendre nodes/weights on [-1, 1].
fn gauss_legendre(n: usize) -> Vec<(f64, f64)> {
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        // Newton from the Chebyshev-ish initial guess
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        for _ in 0..100 {
            // Legendre P_n and P'_n by recurrence
            let (mut p0, mut p1) = (1.0f64, x);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            let dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-15 {
                break;
            }
        }
        let (mut p0, mut p1) = (1.0f64, x);
        for k in 2..=n {
            let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
            p0 = p1;
            p1 = p2;
        }
        let dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        out.push((x, w));
    }
    out.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    out
}

/// Noise-averaged (annealed) Ulam operator over Gauss-Legendre nodes.
pub fn annealed_operator(
    family: &MapFamily,
    noise: NoiseModel,
    n: usize,
    k_noise: usize,
    mode: UlamMode,
) -> UlamOperator {
    assert!(k_noise >= 16, "need at least 16 quadrature nodes");
    let gl = gauss_legendre(k_noise);
    let mut rows = vec![0.0f64; n * n];
    for &(x, w) in &gl {
        let op = ulam_matrix(family, noise.epsilon * x, n, mode);
        let scale = w / 2.0; // GL weights sum to 2
        for (acc, v) in rows.iter_mut().zip(&op.rows) {
            *acc += scale * v;
        }
    }
    UlamOperator {
        n_bins: n,
        mode,
        omega0: f64::NAN,
        rows,
    }
}

/// Annealed stationary density by power iteration to L1 residual <= 1e-10.
pub fn stationary_density(
    family: &MapFamily,
    noise: NoiseModel,
    n: usize,
    k_noise: usize,
) -> Result<(DensityVector, f64), MeasureError> {
    let op = annealed_operator(family, noise, n, k_noise, UlamMode::BranchExact);
    let mut v = DensityVector::uniform(n);
    for _ in 0..100_000 {
        let next = op.apply(&v);
        let res = next.l1_distance(&v);
        v = next;
        if res <= 1e-10 {
            return Ok((v, res));
        }
    }
    Err(MeasureError::NoConvergence(100_000))
}

/// Operator cache for one noise path.
pub struct CorrelationLab<'a> {
    pub family: &'a MapFamily,
    pub path: &'a NoisePath,
    pub n_bins: usize,
    cache: HashMap<i64, UlamOperator>,
}

impl<'a> CorrelationLab<'a> {
    pub fn new(family: &'a MapFamily, path: &'a NoisePath, n_bins: usize) -> CorrelationLab<'a> {
        CorrelationLab {
            family,
            path,
            n_bins,
            cache: HashMap::new(),
        }
    }

    pub fn operator(&mut self, index: i64) -> &UlamOperator {
        let (family, n) = (self.family, self.n_bins);
        let w = self.path.value(index);
        self.cache
            .entry(index)
            .or_insert_with(|| ulam_matrix(family, w, n, UlamMode::BranchExact))
    }
}

/// Pullback density `h = L_{w_{-1}} ... L_{w_{-n_back}} u`.
pub fn pullback_density(
    lab: &mut CorrelationLab,
    n_back: usize,
) -> Result<DensityVector, MeasureError> {
    if !lab.path.covers(-(n_back as i64), 0) {
        return Err(MeasureError::WindowTooShort(n_back));
    }
    let mut v = DensityVector::uniform(lab.n_bins);
    for s in (1..=n_back as i64).rev() {
        v = lab.operator(-s).apply(&v);
    }
    Ok(v)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Forward,
    Backward,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Estimator {
    /// Stratified Monte-Carlo nodes pushed through the orbit.
    Mc,
    /// Ulam-chain evaluation of the pairing.
    Operator,
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct CorrelationPoint {
    pub n: usize,
    pub c_n: f64,
    /// Monte-Carlo standard error (0 for the operator route).
    pub sigma: f64,
}

/// Quenched correlation
/// `|int phi(f^n x) psi(x) dx - int phi dmu int psi dx|` with `mu` the
/// pullback density at the appropriate fibre.
#[allow(clippy::too_many_arguments)]
pub fn quenched_correlation(
    family: &MapFamily,
    path: &NoisePath,
    phi: &Observable,
    psi: &Observable,
    n: usize,
    direction: Direction,
    n_bins: usize,
    mc: usize,
    estimator: Estimator,
    n_back: usize,
) -> Result<CorrelationPoint, MeasureError> {
    let curve = correlation_curve(
        family, path, phi, psi, n, n, direction, n_bins, mc, estimator, n_back,
    )?;
    Ok(curve[0])
}

/// The whole correlation curve for `n = n_lo..=n_hi` (shared operator cache).
#[allow(clippy::too_many_arguments)]
pub fn correlation_curve(
    family: &MapFamily,
    path: &NoisePath,
    phi: &Observable,
    psi: &Observable,
    n_lo: usize,
    n_hi: usize,
    direction: Direction,
    n_bins: usize,
    mc: usize,
    estimator: Estimator,
    n_back: usize,
) -> Result<Vec<CorrelationPoint>, MeasureError> {
    match direction {
        Direction::Backward => {
            if !path.covers(-((n_back + n_hi) as i64), 1) {
                return Err(MeasureError::WindowTooShort(n_back + n_hi));
            }
        }
        Direction::Forward => {
            if !path.covers(-(n_back as i64), n_hi as i64 + 1) {
                return Err(MeasureError::WindowTooShort(n_back));
            }
        }
    }
    let mut lab = CorrelationLab::new(family, path, n_bins);
    let mut out = Vec::with_capacity(n_hi - n_lo + 1);
    for n in n_lo..=n_hi {
        // second term: int phi dmu at the fibre the theorem pairs with n;
        // the forward fibre theta^n w reuses the shared operator cache via
        // absolute indices n-1 .. n-n_back
        let mu = match direction {
            Direction::Backward => pullback_density(&mut lab, n_back)?,
            Direction::Forward => {
                let mut v = DensityVector::uniform(n_bins);
                for s in (1..=n_back as i64).rev() {
                    v = lab.operator(n as i64 - s).apply(&v);
                }
                v
            }
        };
        let phi_mu = phi.mean_against(&mu);
        let (term1, term2, sigma) = match estimator {
            Estimator::Operator => {
                // signed measure psi dm pushed through the chain
                let mut v = DensityVector {
                    masses: psi.values.iter().map(|p| p / n_bins as f64).collect(),
                };
                match direction {
                    Direction::Backward => {
                        for s in (1..=n as i64).rev() {
                            v = lab.operator(-s).apply(&v);
                        }
                    }
                    Direction::Forward => {
                        for s in 0..n as i64 {
                            v = lab.operator(s).apply(&v);
                        }
                    }
                }
                let t1: f64 = phi.values.iter().zip(&v.masses).map(|(p, m)| p * m).sum();
                // int psi dx through the same chain mass so that constant
                // phi cancels exactly
                (t1, phi_mu * v.total(), 0.0)
            }
            Estimator::Mc => {
                let seed = path.seed;
                let pid = path.path_id;
                let offset = path.offset;
                let vals: Vec<(f64, f64)> = (0..mc as i64)
                    .into_par_iter()
                    .map(|i| {
                        let u = draw_uniform(seed, Purpose::Mc, pid, offset + i);
                        let x0 = (i as f64 + u) / mc as f64;
                        let mut x = x0;
                        match direction {
                            Direction::Backward => {
                                for s in (1..=n as i64).rev() {
                                    x = family.eval(path.value(-s), x);
                                }
                            }
                            Direction::Forward => {
                                for s in 0..n as i64 {
                                    x = family.eval(path.value(s), x);
                                }
                            }
                        }
                        (phi.eval(x) * psi.eval(x0), psi.eval(x0))
                    })
                    .collect();
                let prods: Vec<f64> = vals.iter().map(|v| v.0).collect();
                let psis: Vec<f64> = vals.iter().map(|v| v.1).collect();
                let mean = crate::orbit::pairwise_mean(&prods);
                // the psi integral is estimated on the same nodes so that
                // constant phi cancels exactly
                let psi_nodes = crate::orbit::pairwise_mean(&psis);
                let var = prods.iter().map(|v| (v - mean).powi(2)).sum::<f64>()
                    / (mc.max(2) - 1) as f64;
                (mean, phi_mu * psi_nodes, (var / mc as f64).sqrt())
            }
        };
        out.push(CorrelationPoint {
            n,
            c_n: (term1 - term2).abs(),
            sigma,
        });
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct DecayFit {
    pub gamma_hat: f64,
    pub c_hat: f64,
    pub r2: f64,
    pub points_used: usize,
}

/// Least-squares fit of `log C_n` over the points above the noise floor.
pub fn decay_fit(curve: &[(f64, f64)], floor: f64) -> Result<DecayFit, MeasureError> {
    let pts: Vec<(f64, f64)> = curve
        .iter()
        .filter(|&&(_, c)| c > floor && c > 0.0)
        .cloned()
        .collect();
    if pts.len() < 5 {
        return Err(MeasureError::AllBelowFloor);
    }
    let (slope, intercept, r2) = crate::oracles::log_linear_fit(&pts);
    Ok(DecayFit {
        gamma_hat: -slope,
        c_hat: intercept.exp(),
        r2,
        points_used: pts.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn doubling_ulam_two_bins() {
        let fam = MapFamily::test_linear(2.0, 0.0);
        let op = ulam_matrix(&fam, 0.0, 2, UlamMode::BranchExact);
        for i in 0..2 {
            assert!((op.row(i)[0] - 0.5).abs() < 1e-12);
            assert!((op.row(i)[1] - 0.5).abs() < 1e-12);
        }
    }

    #[test]
    fn identity_ulam_is_identity() {
        let fam = MapFamily::test_linear(1.0, 0.0);
        let op = ulam_matrix(&fam, 0.0, 16, UlamMode::BranchExact);
        for i in 0..16 {
            for j in 0..16 {
                let expect = if i == j { 1.0 } else { 0.0 };
                assert!(
                    (op.row(i)[j] - expect).abs() < 1e-9,
                    "({i},{j}) = {}",
                    op.row(i)[j]
                );
            }
        }
    }

    #[test]
    fn rows_stochastic_and_nonnegative() {
        let fam = MapFamily::sine(400.0, 0.3);
        for mode in [UlamMode::BranchExact, UlamMode::Sampled { per_bin: 1000 }] {
            let op = ulam_matrix(&fam, 0.013, 64, mode);
            assert!(op.max_row_sum_error() < 1e-12);
            assert!(op.rows.iter().all(|&v| v >= 0.0));
        }
    }

    #[test]
    fn branch_exact_vs_sampled_cross_check() {
        let fam = MapFamily::sine(400.0, 0.3);
        let exact = ulam_matrix(&fam, 0.02, 256, UlamMode::BranchExact);
        let sampled = ulam_matrix(&fam, 0.02, 256, UlamMode::Sampled { per_bin: 10_000 });
        let mut worst = 0.0f64;
        for i in 0..256 {
            let l1: f64 = exact
                .row(i)
                .iter()
                .zip(sampled.row(i))
                .map(|(a, b)| (a - b).abs())
                .sum();
            worst = worst.max(l1);
        }
        assert!(worst <= 0.02, "max row L1 discrepancy {worst}");
    }

    #[test]
    fn stationary_doubling_uniform() {
        let fam = MapFamily::test_linear(2.0, 0.0);
        let (v, res) = stationary_density(&fam, NoiseModel::new(0.05), 32, 16).unwrap();
        assert!(res <= 1e-10);
        for &m in &v.masses {
            assert!((m - 1.0 / 32.0).abs() < 1e-10);
        }
    }

    #[test]
    fn stationary_identity_returns_uniform_start() {
        // every density is fixed; the residual is 0 at the first step
        let fam = MapFamily::test_linear(1.0, 0.0);
        let (v, res) = stationary_density(&fam, NoiseModel::new(0.05), 16, 16).unwrap();
        let _ = res;
        // annealed identity map with noise is a translation average; the
        // uniform density is exactly invariant
        for &m in &v.masses {
            assert!((m - 1.0 / 16.0).abs() < 1e-9);
        }
    }

    #[test]
    fn stationary_sine_positive() {
        let fam = MapFamily::sine(400.0, 0.3);
        let (v, res) = stationary_density(&fam, NoiseModel::new(0.05), 128, 16).unwrap();
        assert!(res <= 1e-10);
        assert!(v.min_mass() > 0.0, "density must be strictly positive");
        assert!((v.total() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn pullback_trivial_cases() {
        let fam = MapFamily::test_linear(2.0, 0.0);
        let noise = NoiseModel::new(0.05);
        let path = NoisePath::new(noise, 1, 0, 100, 4);
        let mut lab = CorrelationLab::new(&fam, &path, 32);
        // n_back = 0: uniform
        let h0 = pullback_density(&mut lab, 0).unwrap();
        assert_eq!(h0, DensityVector::uniform(32));
        // doubling: uniform is exactly invariant
        let h = pullback_density(&mut lab, 20).unwrap();
        for &m in &h.masses {
            assert!((m - 1.0 / 32.0).abs() < 1e-12);
        }
        // window too short
        let short = NoisePath::new(noise, 1, 0, 2, 1);
        let mut lab2 = CorrelationLab::new(&fam, &short, 32);
        assert_eq!(
            pullback_density(&mut lab2, 10).unwrap_err(),
            MeasureError::WindowTooShort(10)
        );
    }

    #[test]
    fn pullback_association_exact() {
        // pushing h(n_back) one more step equals h(n_back+1) on the shifted
        // path, exactly
        let fam = MapFamily::sine(400.0, 0.3);
        let noise = NoiseModel::new(0.05);
        let path = NoisePath::new(noise, 7, 0, 50, 4);
        let mut lab = CorrelationLab::new(&fam, &path, 64);
        let h = pullback_density(&mut lab, 20).unwrap();
        let shifted = path.shift(1);
        let mut lab_s = CorrelationLab::new(&fam, &shifted, 64);
        let h_next = pullback_density(&mut lab_s, 21).unwrap();
        let pushed = lab_s.operator(-1).apply(&h);
        assert_eq!(pushed.masses, h_next.masses);
    }

    #[test]
    fn correlation_normalisation_identity() {
        // phi == 1 gives C_n <= 1e-10 for every n, both estimators
        let fam = MapFamily::sine(400.0, 0.3);
        let noise = NoiseModel::new(0.05);
        let path = NoisePath::new(noise, 1, 0, 120, 24);
        let n_bins = 128;
        let phi = Observable::one(n_bins);
        let psi = Observable::cos(n_bins);
        for est in [Estimator::Operator, Estimator::Mc] {
            for n in [0usize, 3, 9] {
                let c = quenched_correlation(
                    &fam,
                    &path,
                    &phi,
                    &psi,
                    n,
                    Direction::Backward,
                    n_bins,
                    2000,
                    est,
                    40,
                )
                .unwrap();
                assert!(c.c_n <= 1e-10, "C_{n} = {} ({est:?})", c.c_n);
            }
        }
    }

    #[test]
    fn doubling_closed_form_oracle() {
        // Fourier orthogonality: for the doubling map and cos observables,
        // C_0 = 1/2 and C_n = 0 for n >= 1 (int cos(2pi 2^n x) cos(2pi x) dx
        // vanishes); the MC estimator must match within 3 sigma
        let fam = MapFamily::test_linear(2.0, 0.0);
        let noise = NoiseModel::new(1e-12);
        let path = NoisePath::new(noise, 3, 0, 80, 20);
        let n_bins = 512;
        let phi = Observable::cos(n_bins);
        let psi = Observable::cos(n_bins);
        for n in 0..=8usize {
            let c = quenched_correlation(
                &fam,
                &path,
                &phi,
                &psi,
                n,
                Direction::Backward,
                n_bins,
                100_000,
                Estimator::Mc,
                40,
            )
            .unwrap();
            let expect = if n == 0 { 0.5 } else { 0.0 };
            let tol = 3.0 * c.sigma + 1e-4;
            assert!(
                (c.c_n - expect).abs() <= tol,
                "n={n}: C_n={} expect {expect} (3sig={tol})",
                c.c_n
            );
        }
    }

    #[test]
    fn decay_fit_exact_exponential() {
        let curve: Vec<(f64, f64)> = (1..=12).map(|n| (n as f64, (-0.7 * n as f64).exp())).collect();
        let fit = decay_fit(&curve, 1e-12).unwrap();
        assert!((fit.gamma_hat - 0.7).abs() < 1e-9);
        assert!((fit.r2 - 1.0).abs() < 1e-12);
        // constant curve: gamma 0
        let flat: Vec<(f64, f64)> = (1..=8).map(|n| (n as f64, 0.25)).collect();
        let fit = decay_fit(&flat, 1e-12).unwrap();
        assert_eq!(fit.gamma_hat, 0.0);
        // all below floor
        assert_eq!(
            decay_fit(&curve, 10.0).unwrap_err(),
            MeasureError::AllBelowFloor
        );
    }

    #[test]
    fn reference_backward_decay_resolves() {
        let fam = MapFamily::sine(400.0, 0.3);
        let noise = NoiseModel::new(0.05);
        let path = NoisePath::new(noise, 1, 0, 140, 4);
        let n_bins = 256;
        let phi = Observable::cos(n_bins);
        let psi = Observable::cos(n_bins);
        let curve = correlation_curve(
            &fam,
            &path,
            &phi,
            &psi,
            1,
            10,
            Direction::Backward,
            n_bins,
            0,
            Estimator::Operator,
            60,
        )
        .unwrap();
        let pts: Vec<(f64, f64)> = curve.iter().map(|c| (c.n as f64, c.c_n)).collect();
        let fit = decay_fit(&pts, 1e-14).unwrap();
        assert!(fit.gamma_hat > 0.0, "gamma {}", fit.gamma_hat);
        assert!(fit.r2 >= 0.8, "r2 {}", fit.r2);
    }
}
