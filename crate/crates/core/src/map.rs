//! The map family `f_{alpha,a} = alpha * xi + a (mod 1)` and its critical-set
//! geometry.
//!
//! Two physical profiles are built in (`sine` and `two-bump`, both
//! non-degenerate C^2 circle maps of degree zero) plus a synthetic linear
//! family used as an oracle in tests.  Everything downstream -- derivatives,
//! truncated critical distances, the admissibility radius `delta0`, the
//! small-derivative measure bound -- is defined here so that there is a single
//! source of truth for the dynamics.

use crate::dd::{self, Dd};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Built-in profiles for `xi`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum XiKind {
    /// `xi(x) = sin(2 pi x)`, critical set {1/4, 3/4}.
    Sine,
    /// `xi(x) = sin(2 pi x) + 0.3 sin(4 pi x)`.
    TwoBump,
    /// `xi(x) = x` scaled by `alpha = slope`; piecewise-linear oracle map,
    /// flagged non-physical (no critical points, `xi'' = 0`).
    TestLinear { slope: f64 },
}

#[derive(Debug, Error, PartialEq)]
pub enum MapError {
    #[error("alpha must be positive, got {0}")]
    BadAlpha(f64),
    #[error("offset a must lie in [0,1), got {0}")]
    BadOffset(f64),
    #[error("critical-set operations are undefined for the test-linear profile")]
    NonPhysicalProfile,
    #[error("second derivative {second:.3e} at critical point {point} is below 10*tol")]
    DegenerateCritical { point: f64, second: f64 },
    #[error("delta0 = {0:.6} >= 1/4: alpha too small for the admissibility condition")]
    AlphaTooSmall(f64),
}

/// The map family with its noise-free geometry.
#[derive(Debug, Clone)]
pub struct MapFamily {
    pub xi_kind: XiKind,
    pub alpha: f64,
    pub a: f64,
    critical: Vec<f64>,
    min_second: f64,
}

/// Critical set of `xi` with the non-degeneracy certificate.
#[derive(Debug, Clone, Serialize)]
pub struct CriticalSet {
    pub points: Vec<f64>,
    pub min_second_deriv: f64,
    pub count: usize,
}

/// Uniform noise law on `[-epsilon, epsilon]`.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct NoiseModel {
    pub epsilon: f64,
}

impl NoiseModel {
    pub fn new(epsilon: f64) -> NoiseModel {
        assert!(epsilon > 0.0, "epsilon must be positive");
        NoiseModel { epsilon }
    }

    /// Whether the theorem regime `epsilon > alpha^(c-1)` holds.
    pub fn in_theorem_regime(&self, alpha: f64, c: f64) -> bool {
        self.epsilon > alpha.powf(c - 1.0)
    }
}

/// Positions are stored in `[0,1)`.
#[inline]
pub fn wrap(x: f64) -> f64 {
    let r = x.rem_euclid(1.0);
    // rem_euclid can return 1.0 for tiny negative inputs
    if r >= 1.0 {
        0.0
    } else {
        r
    }
}

/// Circle distance `d(x,y) = min(|x-y|, 1-|x-y|)`.
#[inline]
pub fn circle_dist(x: f64, y: f64) -> f64 {
    let d = (x - y).rem_euclid(1.0);
    d.min(1.0 - d)
}

impl MapFamily {
    pub fn new(xi_kind: XiKind, alpha: f64, a: f64) -> Result<MapFamily, MapError> {
        if !(alpha > 0.0) {
            return Err(MapError::BadAlpha(alpha));
        }
        if !(0.0..1.0).contains(&a) {
            return Err(MapError::BadOffset(a));
        }
        let (critical, min_second) = match xi_kind {
            XiKind::Sine => (vec![0.25, 0.75], 4.0 * std::f64::consts::PI.powi(2)),
            XiKind::TwoBump => {
                let pts = scan_critical_points(|x| xi_prime_raw(xi_kind, x), 1 << 16, 1e-14);
                let min2 = pts
                    .iter()
                    .map(|&c| xi_second_raw(xi_kind, c).abs())
                    .fold(f64::INFINITY, f64::min);
                (pts, min2)
            }
            XiKind::TestLinear { .. } => (Vec::new(), f64::INFINITY),
        };
        Ok(MapFamily {
            xi_kind,
            alpha,
            a,
            critical,
            min_second,
        })
    }

    pub fn sine(alpha: f64, a: f64) -> MapFamily {
        MapFamily::new(XiKind::Sine, alpha, a).unwrap()
    }

    pub fn two_bump(alpha: f64, a: f64) -> MapFamily {
        MapFamily::new(XiKind::TwoBump, alpha, a).unwrap()
    }

    /// Linear test map `x -> slope*x + a`; `alpha` is set to the slope so the
    /// derivative bookkeeping stays uniform.
    pub fn test_linear(slope: f64, a: f64) -> MapFamily {
        MapFamily::new(XiKind::TestLinear { slope }, slope, a).unwrap()
    }

    pub fn is_physical(&self) -> bool {
        !matches!(self.xi_kind, XiKind::TestLinear { .. })
    }

    /// Raw critical positions of `xi` (empty for the linear profile).
    pub fn critical_positions(&self) -> &[f64] {
        &self.critical
    }

    pub fn min_second_deriv(&self) -> f64 {
        self.min_second
    }

    /// `sup |xi'|`, used by the aperiodicity bound.
    pub fn xi_prime_sup(&self) -> f64 {
        match self.xi_kind {
            XiKind::Sine => 2.0 * std::f64::consts::PI,
            // |xi'| is maximal at x = 0 where both harmonics align.
            XiKind::TwoBump => 3.2 * std::f64::consts::PI,
            XiKind::TestLinear { .. } => 1.0,
        }
    }

    #[inline]
    pub fn xi(&self, x: f64) -> f64 {
        match self.xi_kind {
            XiKind::Sine => (2.0 * std::f64::consts::PI * x).sin(),
            XiKind::TwoBump => {
                (2.0 * std::f64::consts::PI * x).sin()
                    + 0.3 * (4.0 * std::f64::consts::PI * x).sin()
            }
            XiKind::TestLinear { .. } => x,
        }
    }

    #[inline]
    pub fn xi_prime(&self, x: f64) -> f64 {
        xi_prime_raw(self.xi_kind, x)
    }

    #[inline]
    pub fn xi_second(&self, x: f64) -> f64 {
        xi_second_raw(self.xi_kind, x)
    }

    /// `f_{w0}(x) = alpha * xi(x + w0) + a` reduced to `[0,1)` with a single
    /// fused modulo; the argument is canonicalised first so equal circle
    /// points give bit-equal results.
    #[inline]
    pub fn eval(&self, omega0: f64, x: f64) -> f64 {
        let u = wrap(x + omega0);
        wrap(self.alpha * self.xi(u) + self.a)
    }

    /// Real-line lift `t -> alpha * xi~(t + w0) + a` (no reduction).  For the
    /// periodic profiles `xi~` is the entire periodic extension, so this is a
    /// genuine continuous lift of the composition when chained.
    #[inline]
    pub fn lift(&self, omega0: f64, t: f64) -> f64 {
        self.alpha * self.xi(t + omega0) + self.a
    }

    /// Same lift in double-double; the argument is reduced mod 1 in dd before
    /// the trig evaluation for the periodic profiles.
    pub fn lift_dd(&self, omega0: f64, t: Dd) -> Dd {
        let u = t.add_f64(omega0);
        match self.xi_kind {
            XiKind::Sine => dd::sin_2pi(u).mul_f64(self.alpha).add_f64(self.a),
            XiKind::TwoBump => {
                let (s, c) = dd::sincos_2pi(u);
                // sin(4 pi u) = 2 sin(2 pi u) cos(2 pi u)
                let s2 = s.mul(c).mul_f64(2.0);
                s.add(s2.mul_f64(0.3)).mul_f64(self.alpha).add_f64(self.a)
            }
            XiKind::TestLinear { .. } => u.mul_f64(self.alpha).add_f64(self.a),
        }
    }

    /// `df_{w0}(x) = alpha * xi'(x + w0)`.
    #[inline]
    pub fn deriv(&self, omega0: f64, x: f64) -> f64 {
        self.alpha * self.xi_prime(wrap(x + omega0))
    }

    /// `d2 f_{w0}(x) = alpha * xi''(x + w0)`.
    #[inline]
    pub fn second_deriv(&self, omega0: f64, x: f64) -> f64 {
        self.alpha * self.xi_second(wrap(x + omega0))
    }
}

fn xi_prime_raw(kind: XiKind, x: f64) -> f64 {
    use std::f64::consts::PI;
    match kind {
        XiKind::Sine => 2.0 * PI * (2.0 * PI * x).cos(),
        XiKind::TwoBump => 2.0 * PI * (2.0 * PI * x).cos() + 1.2 * PI * (4.0 * PI * x).cos(),
        XiKind::TestLinear { .. } => 1.0,
    }
}

fn xi_second_raw(kind: XiKind, x: f64) -> f64 {
    use std::f64::consts::PI;
    match kind {
        XiKind::Sine => -4.0 * PI * PI * (2.0 * PI * x).sin(),
        XiKind::TwoBump => {
            -4.0 * PI * PI * (2.0 * PI * x).sin() - 4.8 * PI * PI * (4.0 * PI * x).sin()
        }
        XiKind::TestLinear { .. } => 0.0,
    }
}

/// Sign-scan over `cells` grid cells followed by bisection to `tol`.
fn scan_critical_points(f: impl Fn(f64) -> f64, cells: usize, tol: f64) -> Vec<f64> {
    let mut roots = Vec::new();
    let mut prev_x = 0.0;
    let mut prev = f(0.0);
    for i in 1..=cells {
        let x = i as f64 / cells as f64;
        let cur = f(x);
        if prev == 0.0 {
            roots.push(prev_x);
        } else if (prev < 0.0) != (cur < 0.0) {
            let (mut lo, mut hi) = (prev_x, x);
            let mut flo = prev;
            while hi - lo > tol {
                let mid = 0.5 * (lo + hi);
                let fm = f(mid);
                if fm == 0.0 {
                    lo = mid;
                    break;
                }
                if (flo < 0.0) != (fm < 0.0) {
                    hi = mid;
                } else {
                    lo = mid;
                    flo = fm;
                }
            }
            roots.push(wrap(0.5 * (lo + hi)));
        }
        prev_x = x;
        prev = cur;
    }
    roots.sort_by(|a, b| a.partial_cmp(b).unwrap());
    roots.dedup_by(|a, b| circle_dist(*a, *b) < 10.0 * tol);
    if roots.len() > 1 && circle_dist(roots[0], *roots.last().unwrap()) < 10.0 * tol {
        roots.pop();
    }
    roots
}

/// All roots of `xi'` in `[0,1)` to within `tol`, with non-degeneracy
/// certified by `|xi''|` at each root.
pub fn critical_set(family: &MapFamily, tol: f64) -> Result<CriticalSet, MapError> {
    if !family.is_physical() {
        return Err(MapError::NonPhysicalProfile);
    }
    assert!(tol > 0.0);
    let points = scan_critical_points(|x| family.xi_prime(x), 1 << 16, tol);
    let mut min_second = f64::INFINITY;
    for &p in &points {
        let s = family.xi_second(p).abs();
        if s < 10.0 * tol {
            return Err(MapError::DegenerateCritical { point: p, second: s });
        }
        min_second = min_second.min(s);
    }
    Ok(CriticalSet {
        count: points.len(),
        points,
        min_second_deriv: min_second,
    })
}

/// Truncated distance to the shifted critical set `C - w0`: the circle
/// distance if it is `<= r`, and 1 otherwise.
pub fn dist_r_to_critical(x: f64, crit: &[f64], omega0: f64, r: f64) -> f64 {
    debug_assert!(r > 0.0 && r < 0.5);
    let mut d = f64::INFINITY;
    for &c in crit {
        d = d.min(circle_dist(x, c - omega0));
    }
    if d <= r {
        d
    } else {
        1.0
    }
}

/// Admissibility radius `delta0 = ((#C + 1) + #C / min|xi''|) * alpha^(-1/2)`.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct Delta0 {
    pub value: f64,
    /// The admissibility condition `delta0 < 1/4`.
    pub admissible: bool,
}

pub fn delta0(family: &MapFamily) -> Delta0 {
    let nc = family.critical_positions().len() as f64;
    let coef = (nc + 1.0)
        + if nc > 0.0 {
            nc / family.min_second_deriv()
        } else {
            0.0
        };
    let value = coef / family.alpha.sqrt();
    Delta0 {
        value,
        admissible: value < 0.25,
    }
}

pub fn delta0_checked(family: &MapFamily) -> Result<f64, MapError> {
    let d = delta0(family);
    if d.admissible {
        Ok(d.value)
    } else {
        Err(MapError::AlphaTooSmall(d.value))
    }
}

/// Result of the small-derivative measure check.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct SmallDerivMeasure {
    pub measured: f64,
    pub bound: f64,
    pub ratio: f64,
}

/// Lebesgue measure of `{x : |df(x)| < K0 * alpha^gamma}` by uniform-grid
/// counting (cell boundaries refined by bisection so the count is exact to
/// ~1e-12), against the bound `2 K0 #C / min|xi''| * alpha^(gamma-1)`.
pub fn small_derivative_measure(
    family: &MapFamily,
    k0: f64,
    gamma: f64,
    grid: usize,
) -> SmallDerivMeasure {
    assert!(grid >= 100_000, "grid must be at least 1e5");
    let thr = k0 * family.alpha.powf(gamma);
    let inside = |x: f64| family.deriv(0.0, x).abs() < thr;
    let h = 1.0 / grid as f64;
    let mut cells_in: usize = 0;
    let mut corr = 0.0;
    let mut prev_mid = (grid as f64 - 0.5) * h - 1.0; // midpoint of last cell, shifted
    let mut prev_in = inside(wrap(prev_mid));
    for i in 0..grid {
        let mid = (i as f64 + 0.5) * h;
        let cur_in = inside(mid);
        if cur_in {
            cells_in += 1;
        }
        if cur_in != prev_in {
            // one indicator boundary sits between the two midpoints; locating
            // it turns the midpoint count into an exact length: against the
            // shared cell edge e, the correction is +-(cross - e)
            let (mut lo, mut hi) = (prev_mid, mid);
            for _ in 0..60 {
                let m = 0.5 * (lo + hi);
                if inside(wrap(m)) == prev_in {
                    lo = m;
                } else {
                    hi = m;
                }
            }
            let cross = 0.5 * (lo + hi);
            let edge = mid - 0.5 * h;
            if prev_in {
                corr += cross - edge;
            } else {
                corr += edge - cross;
            }
        }
        prev_in = cur_in;
        prev_mid = mid;
    }
    let measured = cells_in as f64 * h + corr;
    let nc = family.critical_positions().len() as f64;
    let bound = if nc > 0.0 {
        2.0 * k0 * nc / family.min_second_deriv() * family.alpha.powf(gamma - 1.0)
    } else {
        0.0
    };
    let ratio = if bound > 0.0 { measured / bound } else { f64::NAN };
    SmallDerivMeasure {
        measured,
        bound,
        ratio,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sine_critical_set() {
        let fam = MapFamily::sine(400.0, 0.3);
        let cs = critical_set(&fam, 1e-12).unwrap();
        assert_eq!(cs.count, 2);
        assert!((cs.points[0] - 0.25).abs() < 1e-12);
        assert!((cs.points[1] - 0.75).abs() < 1e-12);
        // min|xi''| = 4 pi^2 = 39.4784176...
        assert!((cs.min_second_deriv - 39.47841760435743).abs() < 1e-9);
        // exact root: |xi'(0.25)| < 1e-12
        assert!(fam.xi_prime(0.25).abs() < 1e-12);
    }

    #[test]
    fn two_bump_critical_set_matches_sign_scan_oracle() {
        // Sign-scan + bisection oracle (40-digit reference):
        // roots at 0.18379734833914829 and 0.81620265166085171,
        // |xi''| = 71.132372310808437 at both.  The profile has exactly two
        // critical points; its second harmonic is too weak to create more.
        let fam = MapFamily::two_bump(400.0, 0.3);
        let cs = critical_set(&fam, 1e-12).unwrap();
        assert_eq!(cs.count, 2);
        assert!((cs.points[0] - 0.18379734833914829).abs() < 1e-10);
        assert!((cs.points[1] - 0.81620265166085171).abs() < 1e-10);
        assert!((cs.min_second_deriv - 71.132372310808437).abs() < 1e-6);
    }

    #[test]
    fn non_physical_profile_rejected() {
        let fam = MapFamily::test_linear(2.0, 0.0);
        assert_eq!(
            critical_set(&fam, 1e-12).unwrap_err(),
            MapError::NonPhysicalProfile
        );
    }

    #[test]
    fn eval_examples() {
        let fam = MapFamily::sine(400.0, 0.3);
        // sin(0) = 0
        assert!((fam.eval(0.0, 0.0) - 0.3).abs() < 1e-15);
        // sin(pi) = 0 (x + w0 = 0.5)
        assert!((fam.eval(0.25, 0.25) - 0.3).abs() < 1e-12);
        // 400*sin(2*pi*0.11) + 0.3 mod 1, 40-digit reference:
        // 0.2695958994758840706851246704064781739693
        assert!((fam.eval(0.01, 0.1) - 0.26959589947588407).abs() < 1e-10);
    }

    #[test]
    fn derivative_closed_forms() {
        let fam = MapFamily::sine(400.0, 0.3);
        // df(0) = 2*pi*400 = 800*pi
        assert!((fam.deriv(0.0, 0.0) - 800.0 * std::f64::consts::PI).abs() < 1e-9);
        // critical point
        assert!(fam.deriv(0.0, 0.25).abs() < 1e-9);
        assert!(fam.deriv(0.1, 0.15).abs() < 1e-9);
    }

    #[test]
    fn derivative_matches_central_difference() {
        let fam = MapFamily::sine(400.0, 0.3);
        let h = 1e-6;
        for i in 0..50 {
            let x = i as f64 * 0.019 + 0.001;
            let w = (i as f64 * 0.003).sin() * 0.05;
            let fd = (fam.lift(w, x + h) - fam.lift(w, x - h)) / (2.0 * h);
            let d = fam.deriv(w, x);
            assert!(
                (d - fd).abs() <= 1e-5 * (1.0 + d.abs()),
                "x={x} w={w}: {d} vs {fd}"
            );
        }
    }

    #[test]
    fn dist_r_cases() {
        let crit = [0.25, 0.75];
        assert!((dist_r_to_critical(0.30, &crit, 0.0, 0.1) - 0.05).abs() < 1e-15);
        assert_eq!(dist_r_to_critical(0.50, &crit, 0.0, 0.1), 1.0);
        // shifted set {0.20, 0.70}
        assert!((dist_r_to_critical(0.25, &crit, 0.05, 0.1) - 0.05).abs() < 1e-15);
        // empty critical set
        assert_eq!(dist_r_to_critical(0.3, &[], 0.0, 0.1), 1.0);
    }

    #[test]
    fn delta0_examples() {
        // (3 + 2/(4 pi^2)) / sqrt(alpha); coefficient = 3.0506605918211689
        let fam = MapFamily::sine(400.0, 0.3);
        let d = delta0(&fam);
        assert!((d.value - 0.15253302959105844).abs() < 1e-12);
        assert!(d.admissible);
        let fam100 = MapFamily::sine(100.0, 0.3);
        let d100 = delta0(&fam100);
        assert!((d100.value - 0.30506605918211689).abs() < 1e-12);
        assert!(!d100.admissible);
        assert!(matches!(
            delta0_checked(&fam100),
            Err(MapError::AlphaTooSmall(_))
        ));
        // alpha -> infinity: delta0 -> 0
        let big = MapFamily::sine(1e12, 0.0);
        assert!(delta0(&big).value < 1e-5);
    }

    #[test]
    fn small_derivative_measure_sine_closed_form() {
        // sine, alpha=1e4, K0=1, gamma=0.5:
        // exact measure 2*asin(1/(200 pi))/pi = 1.013212264173126e-3,
        // bound 1e-2/pi^2 = 1.013211836423378e-3, ratio = 1 + 4.22e-7.
        let fam = MapFamily::sine(1e4, 0.0);
        let m = small_derivative_measure(&fam, 1.0, 0.5, 1_000_000);
        assert!(
            (m.measured - 1.013212264173126e-3).abs() < 1e-11,
            "measured = {}",
            m.measured
        );
        assert!((m.bound - 1.013211836423378e-3).abs() < 1e-15);
        assert!((m.ratio - 1.0).abs() < 1e-5);
    }

    #[test]
    fn small_derivative_measure_trivial_cases() {
        // constant slope above the threshold: empty set
        let lin = MapFamily::test_linear(8.0, 0.0);
        let m = small_derivative_measure(&lin, 1.0, 0.5, 100_000);
        assert_eq!(m.measured, 0.0);
        assert_eq!(m.bound, 0.0);
        // threshold above sup|df|: whole circle
        let fam = MapFamily::sine(100.0, 0.0);
        let m = small_derivative_measure(&fam, 700.0, 1.0, 100_000);
        assert!((m.measured - 1.0).abs() < 1e-12);
    }

    #[test]
    fn lift_projects_to_eval() {
        let fam = MapFamily::sine(400.0, 0.3);
        for i in 0..100 {
            let x = i as f64 / 100.0;
            let w = 0.013;
            assert!(
                circle_dist(wrap(fam.lift(w, x)), fam.eval(w, x)) < 1e-9,
                "lift/eval mismatch at {x}"
            );
        }
    }

    #[test]
    fn winding_number_from_lift_differences() {
        // telescoping lifted differences over a fine grid recover the
        // degree: 0 for the periodic profiles, the slope for the linear one
        for (fam, degree) in [
            (MapFamily::sine(400.0, 0.3), 0.0),
            (MapFamily::two_bump(250.0, 0.1), 0.0),
            (MapFamily::test_linear(2.0, 0.0), 2.0),
        ] {
            let n = 4096;
            let mut total = 0.0;
            for i in 0..n {
                let a = fam.lift(0.01, i as f64 / n as f64);
                let b = fam.lift(0.01, (i + 1) as f64 / n as f64);
                total += b - a;
            }
            assert!(
                (total - degree).abs() < 1e-8,
                "{:?}: winding {total}",
                fam.xi_kind
            );
        }
    }

    #[test]
    fn lift_dd_agrees_with_f64_lift() {
        let fam = MapFamily::sine(400.0, 0.3);
        let fam2 = MapFamily::two_bump(300.0, 0.1);
        for i in 0..60 {
            let t = i as f64 * 0.217 - 5.0;
            for f in [&fam, &fam2] {
                let a = f.lift(0.02, t);
                let b = f.lift_dd(0.02, Dd::from_f64(t));
                assert!(
                    (a - b.to_f64()).abs() < 1e-9 * (1.0 + f.alpha),
                    "t={t}: {a} vs {}",
                    b.to_f64()
                );
            }
        }
    }
}
