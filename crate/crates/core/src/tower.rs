//! Pathwise construction of the return-time partition, the tower map, and
//! the structural diagnostics.
//!
//! The base is `Delta = B_{delta0}(x0)`.  Step 1 places the unique quick
//! return: the leftmost monotone sub-interval of `Delta` on which the slope
//! stays at least `alpha^{1/2}` and whose one-step image is exactly a full
//! copy of `Delta`; it carries return time `R = 1`.  From step `N0` on, every
//! grid-detected Young point proposes an element: the pullback of the inner
//! half of its event target through the full composition, admitted greedily
//! left to right if it stays inside the remainder, avoids every active
//! exclusion shell `A_n`, and certifies its Markov image to tolerance.
//!
//! Elements contract like `exp(-lambda (n + l))`, so endpoints and forward
//! verification run in double-double arithmetic ([`crate::dd`]); candidates
//! whose certified forward residual cannot reach the pinned tolerance are
//! skipped and counted rather than admitted loosely.

use crate::branch::{self, EventParams, Lifted};
use crate::dd::Dd;
use crate::map::{self, MapFamily};
use crate::noise::NoisePath;
use crate::orbit::{iterate_values, Orbit};
use crate::times::HyperbolicParams;
use crate::young::YoungError;
use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum TowerError {
    #[error("configuration not admissible: {0}")]
    NotAdmissible(String),
    #[error("no step-1 interval with slope >= sqrt(alpha) maps onto Delta")]
    NoStepOneElement,
    #[error("element cap {0} exceeded")]
    ElementCap(usize),
    #[error("pullback obstructed by a critical point at time {0}")]
    BranchObstruction(usize),
    #[error("point {0} lies outside Delta")]
    OutsideDelta(f64),
    #[error("invalid tower level {level} for return time {r}")]
    InvalidLevel { level: usize, r: usize },
    #[error(transparent)]
    Young(#[from] YoungError),
    #[error(transparent)]
    Orbit(#[from] crate::orbit::OrbitError),
}

/// Constants of the construction, instantiated from the measured `C1`.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct TowerConstants {
    pub delta0: f64,
    pub delta1: f64,
    /// `delta2 = delta0 + 9 delta1 C1 / 2`.
    pub delta2: f64,
    pub sigma: f64,
    pub c1: f64,
    /// Measured distortion scale for the (P2) report; filled by `verify`.
    pub c0_estimate: f64,
    /// `beta = C1 sigma^{N0} < 1`.
    pub beta: f64,
    pub n0: usize,
    pub n1: usize,
    pub big_l: usize,
    pub x0: f64,
    pub epsilon0: f64,
}

impl TowerConstants {
    pub fn derive(
        family: &MapFamily,
        hp: &HyperbolicParams,
        ep: &EventParams,
        c1: f64,
    ) -> Result<TowerConstants, TowerError> {
        let d0 = ep.delta0;
        if d0 >= 0.25 {
            return Err(TowerError::NotAdmissible(format!(
                "delta0 = {d0:.4} >= 1/4"
            )));
        }
        // step-1 slope set: (2 delta0 - 2 #C/(min|xi''| sqrt(a)))/(#C+1) >= 1/sqrt(a)
        let nc = family.critical_positions().len() as f64;
        if nc > 0.0 {
            let lhs = (2.0 * d0 - 2.0 * nc / (family.min_second_deriv() * family.alpha.sqrt()))
                / (nc + 1.0);
            if lhs < 1.0 / family.alpha.sqrt() {
                return Err(TowerError::NotAdmissible(
                    "step-1 slope set may be empty at this alpha".into(),
                ));
            }
        }
        let c1 = c1.max(1.0);
        let sigma = hp.sigma();
        let delta2 = d0 + 9.0 * ep.delta1 * c1 / 2.0;
        // smallest N0 > 1 with C1 sigma^{N0} < 1
        let mut n0 = 2usize;
        while c1 * sigma.powi(n0 as i32) >= 1.0 && n0 < 4096 {
            n0 += 1;
        }
        // smallest N1 with delta2 sigma^{N1} <= delta0 and
        // 2 delta1 sigma^{N1} <= delta0 (1 - sigma^{N1}) / C1
        let mut n1 = 1usize;
        while n1 < 4096 {
            let s = sigma.powi(n1 as i32);
            if delta2 * s <= d0 && 2.0 * ep.delta1 * s <= d0 * (1.0 - s) / c1 {
                break;
            }
            n1 += 1;
        }
        Ok(TowerConstants {
            delta0: d0,
            delta1: ep.delta1,
            delta2,
            sigma,
            c1,
            c0_estimate: 0.0,
            beta: c1 * sigma.powi(n0 as i32),
            n0,
            n1,
            big_l: ep.big_l,
            x0: ep.x0,
            epsilon0: ep.epsilon0,
        })
    }
}

/// Build parameters beyond the shared hyperbolic/event blocks.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct TowerParams {
    pub horizon: usize,
    /// Grid resolution 2^-grid_exp for the H_n enumeration.
    pub grid_exp: u32,
    /// Candidates narrower than this are skipped (precision floor).
    pub width_floor: f64,
    pub max_elements: usize,
}

impl Default for TowerParams {
    fn default() -> Self {
        TowerParams {
            horizon: 400,
            grid_exp: 14,
            width_floor: 1e-21,
            max_elements: 200_000,
        }
    }
}

/// One element `w_{n,l}` of the partition.
#[derive(Debug, Clone)]
pub struct PartitionElement {
    pub n: usize,
    pub ell: usize,
    /// Return time `R = n + ell`.
    pub r: usize,
    /// The element, in double-double lift coordinates of `Delta`.
    pub lo: Dd,
    pub hi: Dd,
    /// Enclosing interval mapping onto the doubled target (w-tilde).
    pub enc_lo: Dd,
    pub enc_hi: Dd,
    /// Integer translate of the final target: `G_R(w) = Delta + translate`.
    pub translate: f64,
    pub orientation: i8,
    /// Forward residual of the endpoints against the target, from the build.
    pub markov_residual: f64,
    /// Grid cover point the candidate came from.
    pub cover_x: f64,
    /// Estimated mass of the B_{3 delta1} pullback around the cover point.
    pub wtilde3_mass: f64,
}

impl PartitionElement {
    pub fn width(&self) -> f64 {
        self.hi.sub(self.lo).to_f64()
    }

    pub fn contains_f64(&self, t: f64) -> bool {
        let td = Dd::from_f64(t);
        !td.lt(self.lo) && !td.gt(self.hi)
    }
}

#[derive(Debug, Clone, Copy, Default, Serialize)]
pub struct BuildDiagnostics {
    pub grid_points: usize,
    pub young_candidates: usize,
    pub skipped_precision: usize,
    pub skipped_disjoint: usize,
    pub skipped_exclusion: usize,
    pub skipped_obstruction: usize,
    pub skipped_outside: usize,
}

/// The pathwise partition of `Delta` up to a horizon.
#[derive(Debug, Clone)]
pub struct TowerPartition {
    /// Elements sorted by left endpoint.
    pub elements: Vec<PartitionElement>,
    /// Lift interval of `Delta`.
    pub delta_lo: f64,
    pub delta_hi: f64,
    pub consts: TowerConstants,
    pub horizon: usize,
    pub covered_mass: f64,
    /// Diagnostic masses of the bookkeeping sets `S_n(w)`.
    pub s_n_mass: Vec<f64>,
    pub diagnostics: BuildDiagnostics,
    /// Noise values 0..horizon+L+1 the construction consumed.
    noise_values: Vec<f64>,
}

/// A point of the tower fibre: base coordinate and level.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TowerPoint {
    pub x: f64,
    pub ell: usize,
}

fn delta_interval(consts: &TowerConstants) -> (f64, f64) {
    (consts.x0 - consts.delta0, consts.x0 + consts.delta0)
}

/// dd composition lift.
pub fn compose_lift_dd(family: &MapFamily, noise: &[f64], depth: usize, t: Dd) -> Dd {
    let mut y = t;
    for &w in noise.iter().take(depth) {
        y = family.lift_dd(w, y);
    }
    y
}

/// dd value and f64 derivative of the composition lift in one pass.
fn compose_lift_dd_with_deriv(
    family: &MapFamily,
    noise: &[f64],
    depth: usize,
    t: Dd,
) -> (Dd, f64) {
    let mut y = t;
    let mut d = 1.0f64;
    for &w in noise.iter().take(depth) {
        d *= family.alpha * family.xi_prime(y.to_f64() + w);
        y = family.lift_dd(w, y);
    }
    (y, d)
}

/// Safeguarded Newton/bisection solve of `G_depth(t) = target` on a bracket
/// with the given orientation: Newton proposals (f64 derivative, dd value)
/// clipped to a sign-maintained bracket, refined to dd exhaustion.
fn dd_solve(
    family: &MapFamily,
    noise: &[f64],
    depth: usize,
    mut lo: Dd,
    mut hi: Dd,
    target: Dd,
    increasing: bool,
) -> Dd {
    let mut t = lo.midpoint(hi);
    for _ in 0..64 {
        if !t.gt(lo) || !t.lt(hi) {
            t = lo.midpoint(hi);
            if !t.gt(lo) || !t.lt(hi) {
                break;
            }
        }
        let (v, d) = compose_lift_dd_with_deriv(family, noise, depth, t);
        // maintain the bracket
        if v.lt(target) == increasing {
            lo = t;
        } else {
            hi = t;
        }
        let step = v.sub(target).to_f64() / d;
        let next = if step.is_finite() {
            t.add_f64(-step)
        } else {
            lo.midpoint(hi)
        };
        t = if next.gt(lo) && next.lt(hi) {
            next
        } else {
            lo.midpoint(hi)
        };
        if !hi.sub(lo).gt(lo.abs().add(hi.abs()).mul_f64(1e-31)) {
            break;
        }
    }
    let flo = compose_lift_dd(family, noise, depth, lo).sub(target).abs();
    let fhi = compose_lift_dd(family, noise, depth, hi).sub(target).abs();
    if !flo.gt(fhi) {
        lo
    } else {
        hi
    }
}

/// Pull `[t_lo, t_hi] + k` back through `G_depth` inside a monotone bracket,
/// in dd; returns the interval and the worst forward residual.
#[allow(clippy::too_many_arguments)]
fn dd_pullback(
    family: &MapFamily,
    noise: &[f64],
    depth: usize,
    bracket: (f64, f64),
    target: (f64, f64),
    translate: f64,
) -> (Dd, Dd, i8, f64) {
    let b_lo = Dd::from_f64(bracket.0);
    let b_hi = Dd::from_f64(bracket.1);
    let g_lo = compose_lift_dd(family, noise, depth, b_lo);
    let g_hi = compose_lift_dd(family, noise, depth, b_hi);
    let increasing = g_hi.gt(g_lo);
    let t_lo = Dd::from_f64(target.0).add_f64(translate);
    let t_hi = Dd::from_f64(target.1).add_f64(translate);
    // the bracket must straddle both targets, else the pullback is void
    let (img_min, img_max) = if increasing { (g_lo, g_hi) } else { (g_hi, g_lo) };
    if t_lo.lt(img_min) || t_hi.gt(img_max) {
        return (b_lo, b_lo, 1, f64::INFINITY);
    }
    let a = dd_solve(
        family,
        noise,
        depth,
        b_lo,
        b_hi,
        if increasing { t_lo } else { t_hi },
        increasing,
    );
    let b = dd_solve(
        family,
        noise,
        depth,
        b_lo,
        b_hi,
        if increasing { t_hi } else { t_lo },
        increasing,
    );
    let (w_lo, w_hi) = if a.lt(b) { (a, b) } else { (b, a) };
    let e1 = compose_lift_dd(family, noise, depth, w_lo);
    let e2 = compose_lift_dd(family, noise, depth, w_hi);
    let (img_lo, img_hi) = if e1.lt(e2) { (e1, e2) } else { (e2, e1) };
    let residual = img_lo
        .sub(t_lo)
        .abs()
        .to_f64()
        .max(img_hi.sub(t_hi).abs().to_f64());
    (w_lo, w_hi, if increasing { 1 } else { -1 }, residual)
}

/// Build the partition along a noise path.
pub fn build_partition(
    family: &MapFamily,
    path: &NoisePath,
    hp: &HyperbolicParams,
    ep: &EventParams,
    params: &TowerParams,
    c1: f64,
) -> Result<TowerPartition, TowerError> {
    let window = params.horizon + ep.big_l + 1;
    let values = path.slice(0, window as i64);
    build_partition_values(family, &values, hp, ep, params, c1)
}

/// Build from materialised noise values (`0..horizon+L+1`).
pub fn build_partition_values(
    family: &MapFamily,
    values: &[f64],
    hp: &HyperbolicParams,
    ep: &EventParams,
    params: &TowerParams,
    c1: f64,
) -> Result<TowerPartition, TowerError> {
    let consts = TowerConstants::derive(family, hp, ep, c1)?;
    let (d_lo, d_hi) = delta_interval(&consts);
    assert!(values.len() >= params.horizon + ep.big_l + 1);
    let mut diagnostics = BuildDiagnostics::default();

    // -- step 1: the quick-return core ------------------------------------
    let step1 = build_step_one(family, values, &consts)?;
    let mut elements: Vec<PartitionElement> = vec![step1];

    // -- grid Young records ------------------------------------------------
    let spacing = 0.5f64.powi(params.grid_exp as i32);
    let count = ((d_hi - d_lo) / spacing).floor() as usize;
    diagnostics.grid_points = count;
    let horizon = params.horizon;
    // feasibility cut-off for the event probe: if the n-step derivative
    // already shrinks the target below the width floor, the candidate can
    // never be admitted
    let log_floor = (2.0 * consts.delta0 / params.width_floor).ln();

    struct Candidate {
        cover_x: f64,
        orbit: Orbit,
        young: Vec<(usize, branch::EventWitness)>,
    }

    use rayon::prelude::*;
    let grid_records: Vec<Candidate> = (0..count)
        .into_par_iter()
        .filter_map(|j| {
            let xg = d_lo + (j as f64 + 0.5) * spacing;
            let orbit = iterate_values(family, values, map::wrap(xg), horizon, hp.r).ok()?;
            // prefix log-derivative sums for the feasibility cut: once the
            // pullback scale is beyond the width floor, no later time can
            // yield an admissible element, so the event probe is skipped
            let mut feasible_to = horizon;
            let mut acc = 0.0;
            for (i, &l) in orbit.logd.iter().enumerate() {
                acc += l;
                if acc > log_floor {
                    feasible_to = i + 1;
                    break;
                }
            }
            let hyp = crate::times::hyperbolic_times(&orbit, hp);
            let sparse = crate::times::sparse_times(&hyp, hp.big_l);
            let mut young = Vec::new();
            for &i in &sparse.indices {
                if i < 2 || i > feasible_to {
                    continue;
                }
                let noise = &values[i..i + ep.big_l];
                let ball = Lifted::new(orbit.x[i] - ep.delta1, orbit.x[i] + ep.delta1);
                if let Ok(w) = branch::event_e(family, noise, ball, ep) {
                    if w.hit {
                        young.push((i, w));
                    }
                }
            }
            Some(Candidate {
                cover_x: xg,
                orbit,
                young,
            })
        })
        .collect();

    // candidates per step n
    let mut per_step: Vec<Vec<&Candidate>> = vec![Vec::new(); horizon + 1];
    for c in &grid_records {
        for &(n, _) in &c.young {
            per_step[n].push(c);
        }
    }

    let mut s_n_mass = vec![0.0f64; horizon + 1];
    // -- steps N0..horizon --------------------------------------------------
    for n in consts.n0..=horizon {
        // deterministic left-to-right sweep of the H_n grid points
        let mut cands: Vec<(&Candidate, branch::EventWitness)> = per_step[n]
            .iter()
            .filter_map(|c| {
                c.young
                    .iter()
                    .find(|&&(m, _)| m == n)
                    .map(|&(_, w)| (*c, w))
            })
            .collect();
        cands.sort_by(|a, b| a.0.cover_x.partial_cmp(&b.0.cover_x).unwrap());
        // greedy cover limits: drop points inside the previous cover ball
        let mut covered: Vec<(&Candidate, branch::EventWitness)> = Vec::with_capacity(cands.len());
        let mut cover_limit = f64::NEG_INFINITY;
        for (cand, w) in cands {
            if cand.cover_x <= cover_limit {
                continue;
            }
            let s_n: f64 = cand.orbit.logd[..n].iter().sum();
            cover_limit = cand.cover_x + consts.delta1 * (-s_n).exp();
            covered.push((cand, w));
        }
        diagnostics.young_candidates += covered.len();
        // expensive pullbacks in parallel, admission in deterministic order
        let constructed: Vec<Result<PartitionElement, Skip>> = covered
            .par_iter()
            .map(|(cand, witness)| {
                construct_element(
                    family, values, &consts, params, cand.cover_x, &cand.orbit, n, witness,
                )
            })
            .collect();
        for built in constructed {
            match built {
                Ok(elem) => {
                    match admit(&mut elements, elem, family, values, &consts, n, d_lo, d_hi) {
                        Admission::Admitted => {}
                        Admission::Disjoint => diagnostics.skipped_disjoint += 1,
                        Admission::Exclusion => diagnostics.skipped_exclusion += 1,
                        Admission::Outside => diagnostics.skipped_outside += 1,
                    }
                    if elements.len() > params.max_elements {
                        return Err(TowerError::ElementCap(params.max_elements));
                    }
                }
                Err(Skip::Precision) => diagnostics.skipped_precision += 1,
                Err(Skip::Obstruction) => diagnostics.skipped_obstruction += 1,
            }
        }
        // bookkeeping mass S_n = boundary collar + per-element shells
        let mut sn = 4.0 * consts.delta1 * consts.sigma.powi(n as i32);
        for e in &elements {
            if e.n >= n {
                continue;
            }
            let age = n - e.n;
            if age < consts.n1 {
                sn += e.wtilde3_mass;
            } else {
                // shell of depth delta2 sigma^{n-k} around the element image,
                // pulled back: mass ~ 2 delta2 sigma^{n-k} * width / (2 delta0)
                sn += 2.0 * consts.delta2 * consts.sigma.powi(age as i32) * e.width()
                    / (2.0 * consts.delta0);
            }
        }
        s_n_mass[n] = sn;
    }

    elements.sort_by(|a, b| a.lo.hi.partial_cmp(&b.lo.hi).unwrap());
    let covered_mass = elements.iter().map(|e| e.width()).sum();
    Ok(TowerPartition {
        elements,
        delta_lo: d_lo,
        delta_hi: d_hi,
        consts,
        horizon,
        covered_mass,
        s_n_mass,
        diagnostics,
        noise_values: values.to_vec(),
    })
}

enum Skip {
    Precision,
    Obstruction,
}

/// Construct the candidate `w_{n,l}` for a Young grid point.
#[allow(clippy::too_many_arguments)]
fn construct_element(
    family: &MapFamily,
    values: &[f64],
    consts: &TowerConstants,
    params: &TowerParams,
    cover_x: f64,
    orbit: &Orbit,
    n: usize,
    witness: &branch::EventWitness,
) -> Result<PartitionElement, Skip> {
    let ell = witness.ell;
    let r = n + ell;
    // width estimate from the derivative cocycle
    let s_n: f64 = orbit.logd[..n].iter().sum();
    let width_est = 2.0 * consts.delta0 * (-s_n).exp();
    if width_est < params.width_floor {
        return Err(Skip::Precision);
    }
    // witness frame: J maps onto B_{2 delta0}(x0) + k under the event steps;
    // the inner half U' maps onto Delta + k.  Pull U' back through G_n.
    let noise_ev = &values[n..n + consts.big_l.max(ell)];
    let j = witness.j;
    // f64 bracket around the cover point (lift coordinates throughout; the
    // periodic lifts make wrapping unnecessary) wide enough to span the ball
    let xn_lift = branch::compose_lift(family, values, n, cover_x);
    let mut h = 2.0 * consts.delta1 * (-s_n).exp();
    let (mut blo, mut bhi) = (cover_x - h, cover_x + h);
    let mut ok_bracket = false;
    for _ in 0..40 {
        let g_lo = branch::compose_lift(family, values, n, blo);
        let g_hi = branch::compose_lift(family, values, n, bhi);
        let lo_t = xn_lift - consts.delta1 * 1.05;
        let hi_t = xn_lift + consts.delta1 * 1.05;
        if (g_lo.min(g_hi) <= lo_t) && (g_lo.max(g_hi) >= hi_t) {
            ok_bracket = true;
            break;
        }
        h *= 2.0;
        blo = cover_x - h;
        bhi = cover_x + h;
        if h > 9.0 * consts.delta1 {
            break;
        }
    }
    if !ok_bracket {
        return Err(Skip::Obstruction);
    }
    // the witness frame centres the ball at x_n as a circle point; align it
    // with the lift at the cover point (an integer for periodic profiles)
    let frame_shift = xn_lift - orbit.x[n];
    // inner target of the event: U' maps onto Delta + k_w; find U' in the
    // witness frame (f64: depth <= L)
    let t_in_lo = consts.x0 - consts.delta0 + witness.translate;
    let t_in_hi = consts.x0 + consts.delta0 + witness.translate;
    let inc_ev = witness.orientation > 0;
    let u_a = branch::bisect_preimage(
        family,
        noise_ev,
        ell,
        j.lo,
        j.hi,
        if inc_ev { t_in_lo } else { t_in_hi },
        inc_ev,
    );
    let u_b = branch::bisect_preimage(
        family,
        noise_ev,
        ell,
        j.lo,
        j.hi,
        if inc_ev { t_in_hi } else { t_in_lo },
        inc_ev,
    );
    let u_prime = (u_a.min(u_b), u_a.max(u_b));
    let u_outer = (j.lo, j.hi);

    // pull U' + frame_shift back through G_n in f64 to localise, then bisect
    // the full composition G_R against Delta + k in dd
    let g_blo = branch::compose_lift(family, values, n, blo);
    let g_bhi = branch::compose_lift(family, values, n, bhi);
    let inc_n = g_bhi > g_blo;
    let wlo_f = branch::bisect_preimage(
        family,
        values,
        n,
        blo,
        bhi,
        if inc_n {
            u_prime.0 + frame_shift
        } else {
            u_prime.1 + frame_shift
        },
        inc_n,
    );
    let whi_f = branch::bisect_preimage(
        family,
        values,
        n,
        blo,
        bhi,
        if inc_n {
            u_prime.1 + frame_shift
        } else {
            u_prime.0 + frame_shift
        },
        inc_n,
    );
    // the full-depth translate: G_R(w) = Delta + k_full
    let mid_f = 0.5 * (wlo_f + whi_f);
    let g_mid = branch::compose_lift(family, values, r, mid_f);
    let k_full = (g_mid - consts.x0).round();
    // widen the f64 bracket a touch and refine in dd against Delta + k_full
    let pad = (whi_f - wlo_f).abs().max(1e-15) * 4.0 + 1e-14;
    let (w_lo, w_hi, orientation, residual) = dd_pullback(
        family,
        values,
        r,
        (wlo_f.min(whi_f) - pad, wlo_f.max(whi_f) + pad),
        (consts.x0 - consts.delta0, consts.x0 + consts.delta0),
        k_full,
    );
    if !residual.is_finite() || residual > 1e-9 {
        return Err(Skip::Obstruction);
    }
    // enclosing w-tilde: pullback of the doubled target
    let (enc_lo, enc_hi, _, enc_res) = dd_pullback(
        family,
        values,
        r,
        (
            wlo_f.min(whi_f) - pad - 4.0 * consts.delta0 * width_est,
            wlo_f.max(whi_f) + pad + 4.0 * consts.delta0 * width_est,
        ),
        (
            consts.x0 - 2.0 * consts.delta0,
            consts.x0 + 2.0 * consts.delta0,
        ),
        k_full,
    );
    if !enc_res.is_finite() || enc_res > 1e-6 {
        return Err(Skip::Obstruction);
    }
    let _ = u_outer;
    let width = w_hi.sub(w_lo).to_f64();
    if width <= 0.0 || width < params.width_floor * 1e-3 {
        return Err(Skip::Precision);
    }
    // the composition must be strictly monotone across the element; a fold
    // means the candidate is not a genuine Markov branch
    let mut prev = compose_lift_dd(family, values, r, w_lo);
    let first = prev;
    let mut last = prev;
    for s in 1..=8 {
        let t = w_lo.add(w_hi.sub(w_lo).mul_f64(s as f64 / 8.0));
        let v = compose_lift_dd(family, values, r, t);
        if orientation > 0 && v.lt(prev) || orientation < 0 && v.gt(prev) {
            return Err(Skip::Obstruction);
        }
        prev = v;
        last = v;
    }
    if (last.sub(first).abs().to_f64() - 2.0 * consts.delta0).abs() > 1e-8 {
        return Err(Skip::Obstruction);
    }
    Ok(PartitionElement {
        n,
        ell,
        r,
        lo: w_lo,
        hi: w_hi,
        enc_lo,
        enc_hi,
        translate: k_full,
        orientation,
        markov_residual: residual,
        cover_x,
        wtilde3_mass: 6.0 * consts.delta1 * (-s_n).exp(),
    })
}

enum Admission {
    Admitted,
    Disjoint,
    Exclusion,
    Outside,
}

/// Admission test: inside Delta, disjoint from every admitted element, and
/// clear of every active exclusion shell `A_n`.
#[allow(clippy::too_many_arguments)]
fn admit(
    elements: &mut Vec<PartitionElement>,
    elem: PartitionElement,
    family: &MapFamily,
    values: &[f64],
    consts: &TowerConstants,
    n: usize,
    d_lo: f64,
    d_hi: f64,
) -> Admission {
    let lo = elem.lo.to_f64();
    let hi = elem.hi.to_f64();
    if lo < d_lo || hi > d_hi {
        return Admission::Outside;
    }
    for e in elements.iter() {
        // disjointness against the element itself
        if !(elem.hi.lt(e.lo) || elem.lo.gt(e.hi)) {
            return Admission::Disjoint;
        }
        // exclusion shells A_n exist only for elements with k >= N0
        if e.n < consts.n0 || e.n >= n {
            continue;
        }
        // quick reject: the shell lives inside the enclosing interval
        if elem.hi.lt(e.enc_lo) || elem.lo.gt(e.enc_hi) {
            continue;
        }
        // exact shell: pullback of the target inflated by delta0 sigma^{n-k}
        let inflate = consts.delta0 * consts.sigma.powi((n - e.n) as i32);
        let (z_lo, z_hi, _, _) = dd_pullback(
            family,
            values,
            e.r,
            (e.enc_lo.to_f64(), e.enc_hi.to_f64()),
            (
                consts.x0 - consts.delta0 - inflate,
                consts.x0 + consts.delta0 + inflate,
            ),
            e.translate,
        );
        if !(elem.hi.lt(z_lo) || elem.lo.gt(z_hi)) {
            return Admission::Exclusion;
        }
    }
    // insert keeping order by lo
    let pos = elements
        .binary_search_by(|e| e.lo.hi.partial_cmp(&elem.lo.hi).unwrap())
        .unwrap_or_else(|p| p);
    elements.insert(pos, elem);
    Admission::Admitted
}

/// Step 1: leftmost monotone sub-interval of Delta with slope >= sqrt(alpha)
/// mapping exactly onto a copy of Delta.
fn build_step_one(
    family: &MapFamily,
    values: &[f64],
    consts: &TowerConstants,
) -> Result<PartitionElement, TowerError> {
    let (d_lo, d_hi) = delta_interval(consts);
    let w0 = values[0];
    let branches = branch::decompose(family, w0, Lifted::new(d_lo, d_hi))
        .map_err(|_| TowerError::NoStepOneElement)?;
    let slope_min = family.alpha.sqrt();
    let mut best: Option<PartitionElement> = None;
    for b in &branches {
        // candidate translates of Delta inside the branch image
        let k_lo = (b.image.lo - (consts.x0 - consts.delta0)).ceil() as i64;
        let k_hi = (b.image.hi - (consts.x0 + consts.delta0)).floor() as i64;
        for k in k_lo..=k_hi {
            let (w_lo, w_hi, orientation, residual) = dd_pullback(
                family,
                values,
                1,
                (b.domain.lo, b.domain.hi),
                (consts.x0 - consts.delta0, consts.x0 + consts.delta0),
                k as f64,
            );
            if residual > 1e-10 {
                continue;
            }
            // slope certificate on the pulled-back interval
            let lo_f = w_lo.to_f64();
            let hi_f = w_hi.to_f64();
            let mut min_slope = f64::INFINITY;
            for s in 0..=32 {
                let t = lo_f + (hi_f - lo_f) * s as f64 / 32.0;
                min_slope = min_slope.min(family.alpha.abs() * family.xi_prime(t + w0).abs());
            }
            if min_slope < slope_min {
                continue;
            }
            let cand = PartitionElement {
                n: 1,
                ell: 0,
                r: 1,
                lo: w_lo,
                hi: w_hi,
                enc_lo: w_lo,
                enc_hi: w_hi,
                translate: k as f64,
                orientation,
                markov_residual: residual,
                cover_x: lo_f,
                wtilde3_mass: hi_f - lo_f,
            };
            match &best {
                Some(cur) if cur.lo.to_f64() <= lo_f => {}
                _ => best = Some(cand),
            }
        }
    }
    let mut elem = best.ok_or(TowerError::NoStepOneElement)?;
    // enclosing interval: pullback of the doubled target, clamped to the
    // branch by residual acceptance
    let (enc_lo, enc_hi, _, enc_res) = dd_pullback(
        family,
        values,
        1,
        (
            elem.lo.to_f64() - 2.0 * consts.delta0 / family.alpha.sqrt(),
            elem.hi.to_f64() + 2.0 * consts.delta0 / family.alpha.sqrt(),
        ),
        (
            consts.x0 - 2.0 * consts.delta0,
            consts.x0 + 2.0 * consts.delta0,
        ),
        elem.translate,
    );
    if enc_res < 1e-8 {
        elem.enc_lo = enc_lo;
        elem.enc_hi = enc_hi;
    }
    Ok(elem)
}

impl TowerPartition {
    /// Return time of the element covering `t` (lift coordinates of Delta).
    pub fn return_time(&self, t: f64) -> Option<usize> {
        if t < self.delta_lo || t > self.delta_hi {
            return None;
        }
        let td = Dd::from_f64(t);
        // elements sorted by lo: binary search the last with lo <= t
        let mut idx = self
            .elements
            .partition_point(|e| !e.lo.gt(td));
        while idx > 0 {
            idx -= 1;
            let e = &self.elements[idx];
            if !td.lt(e.lo) && !td.gt(e.hi) {
                return Some(e.r);
            }
            if e.hi.to_f64() < t - 1e-9 {
                break;
            }
        }
        None
    }

    /// Element covering `t`, if any.
    pub fn element_at(&self, t: f64) -> Option<&PartitionElement> {
        let td = Dd::from_f64(t);
        self.elements
            .iter()
            .find(|e| !td.lt(e.lo) && !td.gt(e.hi))
    }

    /// Survival curve `m{R > n or unassigned} / m(Delta)` for n = 0..=horizon.
    pub fn survival(&self) -> Vec<f64> {
        let total = self.delta_hi - self.delta_lo;
        let mut assigned = vec![0.0f64; self.horizon + 2];
        for e in &self.elements {
            if e.r <= self.horizon + 1 {
                assigned[e.r] += e.width();
            }
        }
        let mut out = Vec::with_capacity(self.horizon + 1);
        let mut acc = 0.0;
        for n in 0..=self.horizon {
            acc += assigned[n];
            out.push(1.0 - acc / total);
        }
        out
    }

    pub fn noise_values(&self) -> &[f64] {
        &self.noise_values
    }
}

/// Ensemble survival curves and their pointwise median.
pub fn tail_survival(partitions: &[TowerPartition]) -> (Vec<Vec<f64>>, Vec<f64>) {
    assert!(!partitions.is_empty());
    let per_path: Vec<Vec<f64>> = partitions.iter().map(|p| p.survival()).collect();
    let n = per_path.iter().map(|c| c.len()).min().unwrap();
    let mut median = Vec::with_capacity(n);
    let mut scratch = vec![0.0; per_path.len()];
    for i in 0..n {
        for (j, c) in per_path.iter().enumerate() {
            scratch[j] = c[i];
        }
        scratch.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let m = scratch.len();
        median.push(if m % 2 == 1 {
            scratch[m / 2]
        } else {
            0.5 * (scratch[m / 2 - 1] + scratch[m / 2])
        });
    }
    (per_path, median)
}

/// One application of the tower map to a point at level `ell` with element
/// return time `r`: climb, or return to the base through `f^R`.
pub fn tower_step(
    family: &MapFamily,
    path: &NoisePath,
    point: TowerPoint,
    r: usize,
) -> Result<TowerPoint, TowerError> {
    if point.ell + 1 > r {
        return Err(TowerError::InvalidLevel {
            level: point.ell,
            r,
        });
    }
    if point.ell + 1 < r {
        return Ok(TowerPoint {
            x: point.x,
            ell: point.ell + 1,
        });
    }
    // return: apply f^R from theta^{-ell} w
    let base = path.shift(-(point.ell as i64));
    let mut y = point.x;
    for i in 0..r {
        y = family.eval(base.value(i as i64), y);
    }
    Ok(TowerPoint { x: y, ell: 0 })
}

/// Separation time of two base points on the same fibre: the number of
/// completed base returns before they land in distinct partition elements.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum SeparationTime {
    Separated(usize),
    /// Undecided at the cap (includes equal points).
    Cap(usize),
}

#[allow(clippy::too_many_arguments)]
pub fn separation_time(
    family: &MapFamily,
    path: &NoisePath,
    hp: &HyperbolicParams,
    ep: &EventParams,
    params: &TowerParams,
    c1: f64,
    z1: f64,
    z2: f64,
    cap: usize,
) -> Result<SeparationTime, TowerError> {
    let mut shift = 0i64;
    let mut a = z1;
    let mut b = z2;
    for ret in 0..cap {
        if a == b {
            return Ok(SeparationTime::Cap(cap));
        }
        let fiber = path.shift(shift);
        let part = build_partition(family, &fiber, hp, ep, params, c1)?;
        let ea = part.element_at(lift_to_delta(a, &part));
        let eb = part.element_at(lift_to_delta(b, &part));
        match (ea, eb) {
            (Some(x), Some(y)) => {
                if x.n != y.n || x.ell != y.ell || x.lo.hi != y.lo.hi {
                    return Ok(SeparationTime::Separated(ret));
                }
                let r = x.r;
                let mut ya = a;
                let mut yb = b;
                for i in 0..r {
                    let w = fiber.value(i as i64);
                    ya = family.eval(w, ya);
                    yb = family.eval(w, yb);
                }
                a = ya;
                b = yb;
                shift += r as i64;
            }
            // a point still in the remainder: undecided
            _ => return Ok(SeparationTime::Cap(cap)),
        }
    }
    Ok(SeparationTime::Cap(cap))
}

/// Map a circle point into the lift frame of Delta.
fn lift_to_delta(x: f64, part: &TowerPartition) -> f64 {
    let x = map::wrap(x);
    let k = ((part.delta_lo + part.delta_hi) * 0.5 - x).round();
    x + k
}

/// Structural verification report.
#[derive(Debug, Clone, Serialize)]
pub struct TowerReport {
    pub elements: usize,
    pub disjoint_violations: usize,
    pub exclusion_violations: usize,
    pub markov_violations: usize,
    pub markov_max_residual: f64,
    pub monotone_violations: usize,
    pub contraction_violations: usize,
    pub fr_c_violations: usize,
    /// (P4): m{R=1} and the bound diam(Delta)/(alpha ||xi'||).
    pub r1_mass: f64,
    pub r1_bound: f64,
    pub r1_ok: bool,
    /// (P5): elements with n <= split-L identical under future resampling.
    pub stopping_time_ok: bool,
    /// (P3): max refinement diameters at levels 1 and 2.
    pub p3_diam_level1: f64,
    pub p3_diam_level2: f64,
    /// Estimated distortion constant for (P2), reported not asserted.
    pub c0_estimate: f64,
    pub covered_mass: f64,
}

/// Run every structural check on a built partition.
pub fn verify_tower(
    family: &MapFamily,
    path: &NoisePath,
    part: &TowerPartition,
    hp: &HyperbolicParams,
    ep: &EventParams,
    params: &TowerParams,
    pair_samples: usize,
) -> Result<TowerReport, TowerError> {
    let values = part.noise_values();
    let consts = &part.consts;
    let mut report = TowerReport {
        elements: part.elements.len(),
        disjoint_violations: 0,
        exclusion_violations: 0,
        markov_violations: 0,
        markov_max_residual: 0.0,
        monotone_violations: 0,
        contraction_violations: 0,
        fr_c_violations: 0,
        r1_mass: 0.0,
        r1_bound: 2.0 * consts.delta0 / (family.alpha * family.xi_prime_sup()),
        r1_ok: false,
        stopping_time_ok: true,
        p3_diam_level1: 0.0,
        p3_diam_level2: 0.0,
        c0_estimate: 0.0,
        covered_mass: part.covered_mass,
    };

    // disjointness: exact interval overlap on the sorted list
    for w in part.elements.windows(2) {
        if !w[0].hi.lt(w[1].lo) && w[0].hi.sub(w[1].lo).to_f64().abs() > 1e-12 {
            report.disjoint_violations += 1;
        }
    }

    // exclusion compliance re-check: every admitted element against every
    // older shell
    for (i, e) in part.elements.iter().enumerate() {
        for o in &part.elements[..i] {
            if o.n < consts.n0 || o.n >= e.n {
                continue;
            }
            if e.hi.lt(o.enc_lo) || e.lo.gt(o.enc_hi) {
                continue;
            }
            let inflate = consts.delta0 * consts.sigma.powi((e.n - o.n) as i32);
            let (z_lo, z_hi, _, _) = dd_pullback(
                family,
                values,
                o.r,
                (o.enc_lo.to_f64(), o.enc_hi.to_f64()),
                (
                    consts.x0 - consts.delta0 - inflate,
                    consts.x0 + consts.delta0 + inflate,
                ),
                o.translate,
            );
            if !(e.hi.lt(z_lo) || e.lo.gt(z_hi)) {
                report.exclusion_violations += 1;
            }
        }
    }

    // Markov + monotone interior + contraction + fr items per element
    let beta = consts.beta;
    let mut c0_est = 0.0f64;
    for e in &part.elements {
        let t_lo = Dd::from_f64(consts.x0 - consts.delta0).add_f64(e.translate);
        let t_hi = Dd::from_f64(consts.x0 + consts.delta0).add_f64(e.translate);
        let g1 = compose_lift_dd(family, values, e.r, e.lo);
        let g2 = compose_lift_dd(family, values, e.r, e.hi);
        let (i_lo, i_hi) = if g1.lt(g2) { (g1, g2) } else { (g2, g1) };
        let res = i_lo
            .sub(t_lo)
            .abs()
            .to_f64()
            .max(i_hi.sub(t_hi).abs().to_f64());
        report.markov_max_residual = report.markov_max_residual.max(res);
        if res > 1e-8 {
            report.markov_violations += 1;
        }
        // monotone interior, sampled
        let mut prev = g1;
        let mut ok = true;
        let m = 16;
        for s in 1..=m {
            let t = e
                .lo
                .add(e.hi.sub(e.lo).mul_f64(s as f64 / m as f64));
            let v = compose_lift_dd(family, values, e.r, t);
            if e.orientation > 0 {
                if v.lt(prev) {
                    ok = false;
                }
            } else if v.gt(prev) {
                ok = false;
            }
            prev = v;
        }
        if !ok {
            report.monotone_violations += 1;
        }
        // beta-contraction and the fr distance bound on sampled pairs
        let pairs = pair_samples.min(6);
        for s in 0..pairs {
            let f1 = (s as f64 + 0.31) / (pairs as f64 + 1.0);
            let f2 = (s as f64 + 0.97) / (pairs as f64 + 0.5);
            let p1 = e.lo.add(e.hi.sub(e.lo).mul_f64(f1.min(0.99)));
            let p2 = e.lo.add(e.hi.sub(e.lo).mul_f64(f2.min(1.0)));
            let dx = p2.sub(p1).abs().to_f64();
            if dx == 0.0 {
                continue;
            }
            let q1 = compose_lift_dd(family, values, e.r, p1);
            let q2 = compose_lift_dd(family, values, e.r, p2);
            let dfr = q2.sub(q1).abs().to_f64();
            if dx > beta * dfr * (1.0 + 1e-9) {
                report.contraction_violations += 1;
            }
            // |f^j x - f^j y| <= C1 |f^R x - f^R y| for all 0 <= j <= R
            let mut y1 = p1;
            let mut y2 = p2;
            let mut worst = dx / dfr;
            for &w in values.iter().take(e.r) {
                let d = y2.sub(y1).abs().to_f64();
                worst = worst.max(d / dfr);
                y1 = family.lift_dd(w, y1);
                y2 = family.lift_dd(w, y2);
            }
            if worst > consts.c1 * (1.0 + 1e-6) {
                report.fr_c_violations += 1;
            }
            // (P2) distortion scale: |log dF^R ratio| / beta^(s); use s = 1
            // as the conservative separation proxy
            let ld1 = deriv_along(family, values, e.r, p1);
            let ld2 = deriv_along(family, values, e.r, p2);
            if ld1 > 0.0 && ld2 > 0.0 {
                let logratio = (ld1.ln() - ld2.ln()).abs();
                c0_est = c0_est.max(logratio / beta);
            }
        }
    }
    report.c0_estimate = c0_est;

    // (P4)
    if let Some(e1) = part.elements.iter().find(|e| e.r == 1) {
        report.r1_mass = e1.width();
        report.r1_ok = report.r1_mass >= report.r1_bound;
    }

    // (P3): refinement diameters through the step-1 element
    if let Some(e1) = part.elements.iter().find(|e| e.r == 1) {
        report.p3_diam_level1 = part
            .elements
            .iter()
            .map(|e| e.width())
            .fold(0.0f64, f64::max);
        let mut level2 = 0.0f64;
        let slope_min = family.alpha.sqrt();
        for e in part.elements.iter().take(64) {
            // preimage of e inside the step-1 core: width <= |e| / slope
            level2 = level2.max(e.width() / slope_min);
        }
        let _ = e1;
        report.p3_diam_level2 = level2;
    }

    // (P5): rebuild with a resampled future and compare the early elements
    let split = (part.horizon / 2) as i64;
    let resampled = path.resampled_future(split, 0x5A17);
    let re_values =
        resampled.values(0, (part.horizon + ep.big_l + 1) as i64);
    let part2 = build_partition_values(family, &re_values, hp, ep, params, consts.c1)?;
    let early = |p: &TowerPartition| -> Vec<(usize, usize, f64, f64)> {
        p.elements
            .iter()
            .filter(|e| e.n + ep.big_l <= split as usize)
            .map(|e| (e.n, e.ell, e.lo.hi, e.hi.hi))
            .collect()
    };
    if early(part) != early(&part2) {
        report.stopping_time_ok = false;
    }

    Ok(report)
}

/// |dG_depth| along the orbit of a dd point, as f64.
fn deriv_along(family: &MapFamily, noise: &[f64], depth: usize, t: Dd) -> f64 {
    let mut y = t;
    let mut d = 1.0f64;
    for &w in noise.iter().take(depth) {
        d *= (family.alpha * family.xi_prime(y.to_f64() + w)).abs();
        y = family.lift_dd(w, y);
    }
    d
}

/// Hyperbolic-time neighbourhoods `V_n, W_n, W~_n` around `orbit.x[0]`.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct HyperbolicNeighborhoods {
    /// Pullback of B_delta.
    pub v: Lifted,
    /// Pullback of B_{delta1}.
    pub w: Lifted,
    /// Pullback of B_{3 delta1}.
    pub w_tilde: Lifted,
    /// Sampled backward-contraction check against sigma^k.
    pub contraction_ok: bool,
    pub max_contraction_excess: f64,
}

/// Pull the balls around `x_n` back through the orbit branch at `x_0`.
pub fn hyperbolic_neighborhoods(
    family: &MapFamily,
    values: &[f64],
    orbit: &Orbit,
    n: usize,
    delta: f64,
    delta1: f64,
    sigma: f64,
) -> Result<HyperbolicNeighborhoods, TowerError> {
    assert!(n <= orbit.n && delta > 0.0);
    let x = orbit.x[0];
    let xn_lift = branch::compose_lift(family, values, n, x);
    let big = delta.max(3.0 * delta1);
    // grow a bracket until the image spans the largest ball
    let s_n: f64 = orbit.logd[..n].iter().sum();
    let mut h = 1.2 * big * (-s_n).exp();
    let mut ok = false;
    for _ in 0..48 {
        let g_lo = branch::compose_lift(family, values, n, x - h);
        let g_hi = branch::compose_lift(family, values, n, x + h);
        if g_lo.min(g_hi) <= xn_lift - big && g_lo.max(g_hi) >= xn_lift + big {
            ok = true;
            break;
        }
        h *= 2.0;
        if h > 0.5 {
            break;
        }
    }
    if !ok {
        return Err(TowerError::BranchObstruction(n));
    }
    let g_lo = branch::compose_lift(family, values, n, x - h);
    let g_hi = branch::compose_lift(family, values, n, x + h);
    let inc = g_hi > g_lo;
    let pull = |radius: f64| -> Lifted {
        let a = branch::bisect_preimage(
            family,
            values,
            n,
            x - h,
            x + h,
            if inc { xn_lift - radius } else { xn_lift + radius },
            inc,
        );
        let b = branch::bisect_preimage(
            family,
            values,
            n,
            x - h,
            x + h,
            if inc { xn_lift + radius } else { xn_lift - radius },
            inc,
        );
        Lifted::new(a.min(b), a.max(b))
    };
    let v = pull(delta);
    let w = pull(delta1);
    let w_tilde = pull(3.0 * delta1);
    // validate the pullback by forward evaluation (obstruction check)
    let fwd = branch::compose_lift(family, values, n, v.lo);
    if (fwd - (xn_lift - delta)).abs().min((fwd - (xn_lift + delta)).abs()) > 1e-6 * (1.0 + delta)
    {
        return Err(TowerError::BranchObstruction(n));
    }
    // sampled backward contraction: |f^{n-k} z - f^{n-k} y| <= sigma^k |f^n z - f^n y|
    let mut max_excess = 0.0f64;
    for s in 0..8 {
        let t1 = v.lo + v.len() * (s as f64 + 0.2) / 8.0;
        let t2 = v.lo + v.len() * (s as f64 + 0.8) / 8.0;
        let mut y1 = t1;
        let mut y2 = t2;
        let mut gaps = Vec::with_capacity(n + 1);
        gaps.push((y2 - y1).abs());
        for &wv in values.iter().take(n) {
            y1 = family.lift(wv, y1);
            y2 = family.lift(wv, y2);
            gaps.push((y2 - y1).abs());
        }
        let final_gap = gaps[n];
        for k in 1..=n {
            let lhs = gaps[n - k];
            let rhs = sigma.powi(k as i32) * final_gap;
            if rhs > 0.0 {
                max_excess = max_excess.max(lhs / rhs - 1.0);
            }
        }
    }
    Ok(HyperbolicNeighborhoods {
        v,
        w,
        w_tilde,
        contraction_ok: max_excess <= 1e-6,
        max_contraction_excess: max_excess,
    })
}

/// Measure the bi-Lipschitz / distortion constant `C1` of the event tail
/// maps by sampling witnesses on random balls.
pub fn measure_c1(
    family: &MapFamily,
    noise: crate::map::NoiseModel,
    ep: &EventParams,
    seed: u64,
    witnesses: usize,
) -> f64 {
    let mut c1 = 1.0f64;
    for t in 0..witnesses as u64 {
        let path = NoisePath::new(noise, seed ^ 0xC1C1, t, 0, (ep.big_l + 2) as usize);
        let vals = path.slice(0, ep.big_l as i64);
        let center = crate::noise::draw_uniform(seed ^ 0xC1C1, crate::noise::Purpose::Diag, t, 0);
        let ball = Lifted::new(center - ep.delta1, center + ep.delta1);
        let Ok(w) = branch::event_e(family, &vals, ball, ep) else {
            continue;
        };
        if !w.hit {
            continue;
        }
        // pairs in J, ratios of I3
        for s in 0..6 {
            let f1 = (s as f64 + 0.25) / 7.0;
            let f2 = (s as f64 + 1.0) / 7.0;
            let p1 = w.j.lo + w.j.len() * f1;
            let p2 = w.j.lo + w.j.len() * f2;
            let mut y1 = p1;
            let mut y2 = p2;
            let mut gaps = vec![(y2 - y1).abs()];
            for &wv in vals.iter().take(w.ell) {
                y1 = family.lift(wv, y1);
                y2 = family.lift(wv, y2);
                gaps.push((y2 - y1).abs());
            }
            let last = gaps[w.ell];
            if last <= 0.0 {
                continue;
            }
            for g in &gaps {
                c1 = c1.max(g / last);
            }
            let d1 = branch::compose_deriv(family, &vals, w.ell, p1).abs();
            let d2 = branch::compose_deriv(family, &vals, w.ell, p2).abs();
            if d1 > 0.0 && d2 > 0.0 {
                c1 = c1.max((d1.ln() - d2.ln()).abs() / last);
            }
        }
    }
    c1
}
