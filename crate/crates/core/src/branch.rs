//! Monotone branch tracking of interval images under random compositions,
//! and the expansion event.
//!
//! An interval pushed through `f_{w_{n-1}} o ... o f_{w_0}` is carried as a
//! union of branches, each strictly monotone, with the image kept on the real
//! line (lengths routinely exceed 1).  Because the periodic profiles lift to
//! 1-periodic entire functions, composing raw lifts step by step *is* a
//! continuous lift of the composition, so preimages of any target interval
//! can be pulled back by plain monotone bisection.
//!
//! The expansion event `E(I)` asks for a depth `l <= L` and a subinterval
//! `J <= I` with `f^l_w(J) = B_{2 delta0}(x0)` whose intermediate images stay
//! `eps0` away from the moving critical set; pruning those neighbourhoods
//! during the push keeps exactly the admissible candidate regions alive.

use crate::map::MapFamily;
use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum BranchError {
    #[error("interval must have positive length (at most 1)")]
    EmptyInterval,
    #[error("live branch count {count} exceeded the cap at depth {depth}")]
    BranchExplosion { depth: usize, count: usize },
    #[error("target is not covered by the branch image")]
    TargetNotCovered,
}

/// Closed interval on the real line.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Lifted {
    pub lo: f64,
    pub hi: f64,
}

impl Lifted {
    pub fn new(lo: f64, hi: f64) -> Lifted {
        assert!(lo <= hi);
        Lifted { lo, hi }
    }

    pub fn len(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn contains(&self, other: &Lifted) -> bool {
        self.lo <= other.lo && other.hi <= self.hi
    }
}

/// One strictly monotone piece of the tracked composition.
#[derive(Debug, Clone, Serialize)]
pub struct MonotoneBranch {
    /// Pullback domain inside the original interval (lift coordinates of the
    /// start circle).
    pub domain: Lifted,
    /// Image on the real line after `depth` steps.
    pub image: Lifted,
    /// Sign of the composition derivative on the branch.
    pub orientation: i8,
    /// Steps composed so far.
    pub depth: usize,
    /// Grid-estimated min |d(composition)| over the branch.
    pub min_abs_deriv: f64,
    /// Min over intermediate steps of the circle distance from the branch
    /// image to the shifted critical set (infinity until step 1).
    pub min_crit_dist: f64,
}

/// Evaluate the composition lift `G_depth(t)` for the given noise prefix.
pub fn compose_lift(family: &MapFamily, noise: &[f64], depth: usize, t: f64) -> f64 {
    let mut y = t;
    for &w in noise.iter().take(depth) {
        y = family.lift(w, y);
    }
    y
}

/// Derivative of the composition lift along the orbit of `t`.
pub fn compose_deriv(family: &MapFamily, noise: &[f64], depth: usize, t: f64) -> f64 {
    let mut y = t;
    let mut d = 1.0;
    for &w in noise.iter().take(depth) {
        d *= family.alpha * family.xi_prime(y + w);
        y = family.lift(w, y);
    }
    d
}

/// Monotone bisection for `G_depth(t) = target` inside `[lo, hi]`.
///
/// `increasing` is the orientation of the composition on the bracket.  Runs
/// to f64 exhaustion and returns the endpoint whose image is closest.
pub fn bisect_preimage(
    family: &MapFamily,
    noise: &[f64],
    depth: usize,
    mut lo: f64,
    mut hi: f64,
    target: f64,
    increasing: bool,
) -> f64 {
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let v = compose_lift(family, noise, depth, mid);
        if (v < target) == increasing {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let flo = (compose_lift(family, noise, depth, lo) - target).abs();
    let fhi = (compose_lift(family, noise, depth, hi) - target).abs();
    if flo <= fhi {
        lo
    } else {
        hi
    }
}

/// Split the unit-step image of `interval` at the shifted critical points
/// `C - w0`; each piece is one monotone branch of `f_{w0}`.
pub fn decompose(
    family: &MapFamily,
    omega0: f64,
    interval: Lifted,
) -> Result<Vec<MonotoneBranch>, BranchError> {
    if !(interval.len() > 0.0 && interval.len() <= 1.0) {
        return Err(BranchError::EmptyInterval);
    }
    // a full circle is re-anchored at a critical cut so the wrap-around
    // piece stays one monotone branch (#branches = #C)
    let interval = if interval.len() == 1.0 {
        let cuts = critical_cuts(family, omega0, &interval, 0.0);
        match cuts.iter().find(|&&c| c > interval.lo && c < interval.hi) {
            Some(&c) => Lifted::new(c, c + 1.0),
            None => interval,
        }
    } else {
        interval
    };
    let root = MonotoneBranch {
        domain: interval,
        image: interval,
        orientation: 1,
        depth: 0,
        min_abs_deriv: f64::INFINITY,
        min_crit_dist: f64::INFINITY,
    };
    push_branch(family, &[omega0], &root, omega0, None, false)
}

/// Cut points of the next map inside the lifted interval: all `t` with
/// `t + w0` congruent to a critical point of `xi`.
fn critical_cuts(family: &MapFamily, omega0: f64, image: &Lifted, pad: f64) -> Vec<f64> {
    let mut cuts = Vec::new();
    for &c in family.critical_positions() {
        // t = c - w0 + k
        let base = c - omega0;
        let k_lo = (image.lo - pad - base).ceil() as i64;
        let k_hi = (image.hi + pad - base).floor() as i64;
        for k in k_lo..=k_hi {
            cuts.push(base + k as f64);
        }
    }
    cuts.sort_by(|a, b| a.partial_cmp(b).unwrap());
    cuts
}

/// Push one branch through the next map, splitting at critical preimages and
/// (optionally) trimming `eps0`-neighbourhoods of the critical set first.
fn push_branch(
    family: &MapFamily,
    noise: &[f64],
    branch: &MonotoneBranch,
    omega0: f64,
    epsilon0: Option<f64>,
    _prune_is_intermediate: bool,
) -> Result<Vec<MonotoneBranch>, BranchError> {
    // pieces of the current image that survive trimming
    let mut pieces: Vec<Lifted> = Vec::new();
    match epsilon0 {
        None => {
            let cuts = critical_cuts(family, omega0, &branch.image, 0.0);
            let mut lo = branch.image.lo;
            for c in cuts {
                if c > lo && c < branch.image.hi {
                    if c - lo > 0.0 {
                        pieces.push(Lifted::new(lo, c));
                    }
                    lo = c;
                }
            }
            if branch.image.hi - lo > 0.0 {
                pieces.push(Lifted::new(lo, branch.image.hi));
            }
        }
        Some(eps) => {
            // remove closed eps-balls around every lifted critical point; the
            // survivors contain no critical point, so no further split needed
            let cuts = critical_cuts(family, omega0, &branch.image, eps);
            let mut lo = branch.image.lo;
            for c in cuts {
                let (bl, bh) = (c - eps, c + eps);
                if bh <= lo {
                    continue;
                }
                if bl > lo {
                    pieces.push(Lifted::new(lo, bl.min(branch.image.hi)));
                }
                lo = lo.max(bh);
                if lo >= branch.image.hi {
                    break;
                }
            }
            if lo < branch.image.hi {
                pieces.push(Lifted::new(lo, branch.image.hi));
            }
        }
    }

    let mut out = Vec::with_capacity(pieces.len());
    for piece in pieces {
        if piece.len() <= 0.0 {
            continue;
        }
        // pull the piece endpoints back into the original domain
        let (d_lo, d_hi) = if branch.depth == 0 {
            (piece.lo, piece.hi)
        } else {
            let inc = branch.orientation > 0;
            let a = bisect_preimage(
                family,
                noise,
                branch.depth,
                branch.domain.lo,
                branch.domain.hi,
                if inc { piece.lo } else { piece.hi },
                inc,
            );
            let b = bisect_preimage(
                family,
                noise,
                branch.depth,
                branch.domain.lo,
                branch.domain.hi,
                if inc { piece.hi } else { piece.lo },
                inc,
            );
            (a.min(b), a.max(b))
        };
        // next-map images of the piece endpoints
        let ia = family.lift(omega0, piece.lo);
        let ib = family.lift(omega0, piece.hi);
        let step_sign = if ib >= ia { 1i8 } else { -1 };
        // derivative sample at a few interior points of the new piece
        let mut min_d = f64::INFINITY;
        for s in 0..5 {
            let t = piece.lo + piece.len() * (s as f64 + 0.5) / 5.0;
            min_d = min_d.min((family.alpha * family.xi_prime(t + omega0)).abs());
        }
        // distance of the step image to the shifted critical set: only the
        // intermediate steps (depth >= 1) are constrained by the event
        let crit_dist = if branch.depth == 0 {
            f64::INFINITY
        } else {
            family
                .critical_positions()
                .iter()
                .map(|&c| {
                    let base = c - omega0;
                    let k = ((piece.lo + piece.hi) * 0.5 - base).round();
                    let cc = base + k;
                    if cc >= piece.lo && cc <= piece.hi {
                        0.0
                    } else {
                        (piece.lo - cc).abs().min((piece.hi - cc).abs())
                    }
                })
                .fold(f64::INFINITY, f64::min)
        };
        out.push(MonotoneBranch {
            domain: Lifted::new(d_lo, d_hi),
            image: Lifted::new(ia.min(ib), ia.max(ib)),
            orientation: branch.orientation * step_sign,
            depth: branch.depth + 1,
            min_abs_deriv: if branch.min_abs_deriv.is_finite() {
                branch.min_abs_deriv.min(min_d)
            } else {
                min_d
            },
            min_crit_dist: branch.min_crit_dist.min(crit_dist),
        });
    }
    Ok(out)
}

/// Push a whole generation of branches one step forward.
///
/// `epsilon0 = Some(e)` discards the parts of each image within `e` of the
/// next shifted critical set before applying the map (used for intermediate
/// event steps); with pruning disabled the branch domains tile the original
/// interval exactly.
pub fn push_forward(
    family: &MapFamily,
    noise: &[f64],
    branches: &[MonotoneBranch],
    step_index: usize,
    epsilon0: Option<f64>,
    cap: usize,
) -> Result<Vec<MonotoneBranch>, BranchError> {
    let w = noise[step_index];
    let mut out = Vec::new();
    for b in branches {
        debug_assert_eq!(b.depth, step_index);
        out.extend(push_branch(family, noise, b, w, epsilon0, true)?);
        if out.len() > cap {
            return Err(BranchError::BranchExplosion {
                depth: step_index + 1,
                count: out.len(),
            });
        }
    }
    Ok(out)
}

/// Parameters of the expansion event.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct EventParams {
    pub big_l: usize,
    pub delta0: f64,
    pub delta1: f64,
    pub epsilon0: f64,
    pub x0: f64,
    pub branch_cap: usize,
}

impl EventParams {
    /// L from the display `(4 delta0 / alpha^{c/2})^{L+1} <= delta1 / 2`.
    pub fn derive_big_l(delta0: f64, delta1: f64, alpha: f64, c: f64) -> usize {
        let ratio = 4.0 * delta0 / alpha.powf(c / 2.0);
        if ratio >= 1.0 {
            return 64; // degenerate configuration; search horizon capped
        }
        let mut l = 0usize;
        while ratio.powi(l as i32 + 1) > delta1 / 2.0 && l < 64 {
            l += 1;
        }
        l
    }
}

/// Witness of the expansion event.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct EventWitness {
    pub hit: bool,
    /// Event depth, in (0, L] when hit.
    pub ell: usize,
    /// Subinterval of the searched interval (lift coordinates of its circle).
    pub j: Lifted,
    /// Integer translate of the target the witness image landed on.
    pub translate: f64,
    /// Orientation of the witness branch.
    pub orientation: i8,
}

impl EventWitness {
    fn miss() -> EventWitness {
        EventWitness {
            hit: false,
            ell: 0,
            j: Lifted::new(0.0, 0.0),
            translate: 0.0,
            orientation: 1,
        }
    }
}

/// Decide the expansion event on `interval`, searching depths `1..=L`.
///
/// On success returns the smallest depth and, at that depth, the leftmost
/// pullback `J` with `f^l(J) = B_{2 delta0}(x0)` (endpoint-to-endpoint on a
/// lifted copy of the target).
pub fn event_e(
    family: &MapFamily,
    noise: &[f64],
    interval: Lifted,
    params: &EventParams,
) -> Result<EventWitness, BranchError> {
    if params.big_l == 0 {
        return Ok(EventWitness::miss());
    }
    assert!(noise.len() >= params.big_l, "noise prefix shorter than L");
    let target_len = 4.0 * params.delta0;
    let mut branches = decompose(family, noise[0], interval)?;
    for ell in 1..=params.big_l {
        // scan branches for a full lifted copy of B_{2 delta0}(x0)
        let mut best: Option<(f64, &MonotoneBranch, f64)> = None;
        for b in &branches {
            if b.image.len() < target_len {
                continue;
            }
            // smallest k with [x0 - 2 delta0 + k, x0 + 2 delta0 + k] inside
            let k = (b.image.lo - (params.x0 - 2.0 * params.delta0)).ceil();
            if params.x0 - 2.0 * params.delta0 + k + target_len <= b.image.hi {
                // leftmost J: for +1 branches the pullback of target.lo + k,
                // for -1 branches the pullback of the highest fitting copy
                let (tk, j_left_img) = if b.orientation > 0 {
                    (k, params.x0 - 2.0 * params.delta0 + k)
                } else {
                    let k_hi = (b.image.hi - (params.x0 + 2.0 * params.delta0)).floor();
                    (k_hi, params.x0 + 2.0 * params.delta0 + k_hi)
                };
                let j_left = bisect_preimage(
                    family,
                    noise,
                    ell,
                    b.domain.lo,
                    b.domain.hi,
                    j_left_img,
                    b.orientation > 0,
                );
                match best {
                    Some((cur, _, _)) if cur <= j_left => {}
                    _ => best = Some((j_left, b, tk)),
                }
            }
        }
        if let Some((j_left, branch, k)) = best {
            let t_lo = params.x0 - 2.0 * params.delta0 + k;
            let t_hi = params.x0 + 2.0 * params.delta0 + k;
            let inc = branch.orientation > 0;
            let j_right = bisect_preimage(
                family,
                noise,
                ell,
                branch.domain.lo,
                branch.domain.hi,
                if inc { t_hi } else { t_lo },
                inc,
            );
            return Ok(EventWitness {
                hit: true,
                ell,
                j: Lifted::new(j_left.min(j_right), j_left.max(j_right)),
                translate: k,
                orientation: branch.orientation,
            });
        }
        if ell == params.big_l {
            break;
        }
        branches = push_forward(
            family,
            noise,
            &branches,
            ell,
            Some(params.epsilon0),
            params.branch_cap,
        )?;
        if branches.is_empty() {
            break;
        }
    }
    Ok(EventWitness::miss())
}

/// Preimage of `target` under the branch composition, by monotone bisection
/// on both endpoints.
pub fn invert_on_branch(
    family: &MapFamily,
    noise: &[f64],
    branch: &MonotoneBranch,
    target: Lifted,
) -> Result<Lifted, BranchError> {
    if !branch.image.contains(&target) {
        return Err(BranchError::TargetNotCovered);
    }
    let inc = branch.orientation > 0;
    let a = bisect_preimage(
        family,
        noise,
        branch.depth,
        branch.domain.lo,
        branch.domain.hi,
        if inc { target.lo } else { target.hi },
        inc,
    );
    let b = bisect_preimage(
        family,
        noise,
        branch.depth,
        branch.domain.lo,
        branch.domain.hi,
        if inc { target.hi } else { target.lo },
        inc,
    );
    Ok(Lifted::new(a.min(b), a.max(b)))
}

/// Re-verify a hit witness by dense sampling of `J`.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct WitnessReport {
    pub valid: bool,
    pub max_target_err: f64,
    pub min_intermediate_dist: f64,
}

pub fn validate_witness(
    family: &MapFamily,
    noise: &[f64],
    witness: &EventWitness,
    params: &EventParams,
    samples: usize,
) -> WitnessReport {
    assert!(witness.hit);
    let t_lo = params.x0 - 2.0 * params.delta0 + witness.translate;
    let t_hi = params.x0 + 2.0 * params.delta0 + witness.translate;
    // endpoint match of the image with the target copy
    let e1 = compose_lift(family, noise, witness.ell, witness.j.lo);
    let e2 = compose_lift(family, noise, witness.ell, witness.j.hi);
    let max_target_err = (e1.min(e2) - t_lo).abs().max((e1.max(e2) - t_hi).abs());
    // sampled interior: images inside the target, intermediate steps away
    // from the moving critical set
    let mut min_dist = f64::INFINITY;
    let mut inside = true;
    for s in 0..samples {
        let t = witness.j.lo + witness.j.len() * (s as f64 + 0.5) / samples as f64;
        let mut y = t;
        for (i, &w) in noise.iter().enumerate().take(witness.ell) {
            if i >= 1 {
                for &c in family.critical_positions() {
                    min_dist = min_dist.min(crate::map::circle_dist(
                        crate::map::wrap(y),
                        crate::map::wrap(c - w),
                    ));
                }
            }
            y = family.lift(w, y);
        }
        if y < t_lo - 1e-9 || y > t_hi + 1e-9 {
            inside = false;
        }
    }
    let dist_ok = witness.ell <= 1 || min_dist > params.epsilon0 * (1.0 - 1e-9);
    WitnessReport {
        valid: inside && max_target_err <= 1e-8 && dist_ok,
        max_target_err,
        min_intermediate_dist: min_dist,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::map::{MapFamily, NoiseModel};
    use crate::noise::NoisePath;

    #[test]
    fn decompose_full_circle_sine() {
        let fam = MapFamily::sine(400.0, 0.3);
        let branches = decompose(&fam, 0.0, Lifted::new(0.0, 1.0)).unwrap();
        // two critical points: pieces (0.25, 0.75) and (0.75, 1.25)
        assert_eq!(branches.len(), 2);
        assert!((branches[0].domain.lo - 0.25).abs() < 1e-12);
        assert!((branches[0].domain.hi - 0.75).abs() < 1e-12);
        assert!((branches[1].domain.hi - 1.25).abs() < 1e-12);
        let total: f64 = branches.iter().map(|b| b.domain.len()).sum();
        assert!((total - 1.0).abs() < 1e-12);
    }

    #[test]
    fn decompose_monotone_piece() {
        let fam = MapFamily::sine(400.0, 0.3);
        let branches = decompose(&fam, 0.0, Lifted::new(0.3, 0.7)).unwrap();
        assert_eq!(branches.len(), 1);
        assert_eq!(branches[0].orientation, -1); // xi' < 0 on (0.25, 0.75)
        let empty = decompose(&fam, 0.0, Lifted::new(0.3, 0.3));
        assert_eq!(empty.unwrap_err(), BranchError::EmptyInterval);
    }

    #[test]
    fn doubling_single_branch_growth() {
        let fam = MapFamily::test_linear(2.0, 0.0);
        let noise = vec![0.0; 4];
        let mut branches = decompose(&fam, 0.0, Lifted::new(0.2, 0.3)).unwrap();
        assert_eq!(branches.len(), 1);
        assert!((branches[0].image.len() - 0.2).abs() < 1e-12);
        for step in 1..3 {
            branches = push_forward(&fam, &noise, &branches, step, None, 1 << 20).unwrap();
        }
        assert_eq!(branches.len(), 1);
        // 2^3 * 0.1 = 0.8
        assert!((branches[0].image.len() - 0.8).abs() < 1e-10);
    }

    #[test]
    fn partition_of_unity_no_pruning() {
        let fam = MapFamily::sine(400.0, 0.3);
        let noise_path = NoisePath::new(NoiseModel::new(0.05), 3, 0, 0, 8);
        let noise = noise_path.slice(0, 8);
        let interval = Lifted::new(0.1, 0.14);
        let mut branches = decompose(&fam, noise[0], interval).unwrap();
        for step in 1..3 {
            branches = push_forward(&fam, &noise, &branches, step, None, 1 << 22).unwrap();
        }
        let total: f64 = branches.iter().map(|b| b.domain.len()).sum();
        assert!(
            (total - interval.len()).abs() < 1e-9,
            "domains must tile the interval: {total} vs {}",
            interval.len()
        );
    }

    #[test]
    fn pruning_with_huge_epsilon_empties() {
        let fam = MapFamily::sine(400.0, 0.3);
        let noise = vec![0.01, -0.02, 0.0];
        let branches = decompose(&fam, noise[0], Lifted::new(0.0, 1.0)).unwrap();
        let pushed = push_forward(&fam, &noise, &branches, 1, Some(10.0), 1 << 20).unwrap();
        assert!(pushed.is_empty());
    }

    #[test]
    fn monotonicity_certificate() {
        let fam = MapFamily::sine(400.0, 0.3);
        let noise_path = NoisePath::new(NoiseModel::new(0.05), 9, 0, 0, 4);
        let noise = noise_path.slice(0, 4);
        let mut branches = decompose(&fam, noise[0], Lifted::new(0.4, 0.44)).unwrap();
        branches = push_forward(&fam, &noise, &branches, 1, None, 1 << 22).unwrap();
        for b in branches.iter().take(10) {
            let mut prev = compose_lift(&fam, &noise, b.depth, b.domain.lo);
            let n = 200;
            for s in 1..=n {
                let t = b.domain.lo + b.domain.len() * s as f64 / n as f64;
                let v = compose_lift(&fam, &noise, b.depth, t);
                if b.orientation > 0 {
                    assert!(v >= prev - 1e-12, "not increasing on branch");
                } else {
                    assert!(v <= prev + 1e-12, "not decreasing on branch");
                }
                prev = v;
            }
        }
    }

    #[test]
    fn event_l_zero_never_hits() {
        let fam = MapFamily::sine(400.0, 0.3);
        let params = EventParams {
            big_l: 0,
            delta0: 0.15,
            delta1: 0.015,
            epsilon0: 0.04,
            x0: 0.0,
            branch_cap: 1 << 20,
        };
        let w = event_e(&fam, &[], Lifted::new(0.0, 0.5), &params).unwrap();
        assert!(!w.hit);
    }

    #[test]
    fn event_full_circle_hits_at_depth_one() {
        let fam = MapFamily::sine(400.0, 0.3);
        let d0 = crate::map::delta0(&fam).value;
        let params = EventParams {
            big_l: 2,
            delta0: d0,
            delta1: d0 / 10.0,
            epsilon0: d0 / 4.0,
            x0: 0.0,
            branch_cap: 1 << 20,
        };
        for seed in 0..20u64 {
            let path = NoisePath::new(NoiseModel::new(0.05), seed, 0, 0, 4);
            let noise = path.slice(0, 4);
            let w = event_e(&fam, &noise, Lifted::new(0.0, 1.0), &params).unwrap();
            assert!(w.hit, "full circle must hit (seed {seed})");
            assert_eq!(w.ell, 1);
            let rep = validate_witness(&fam, &noise, &w, &params, 1000);
            assert!(
                rep.valid,
                "witness must re-validate: err {} dist {}",
                rep.max_target_err, rep.min_intermediate_dist
            );
        }
    }

    #[test]
    fn event_witness_deterministic_tiebreak() {
        let fam = MapFamily::sine(400.0, 0.3);
        let d0 = crate::map::delta0(&fam).value;
        let params = EventParams {
            big_l: 2,
            delta0: d0,
            delta1: d0 / 10.0,
            epsilon0: d0 / 4.0,
            x0: 0.0,
            branch_cap: 1 << 20,
        };
        let path = NoisePath::new(NoiseModel::new(0.05), 5, 0, 0, 4);
        let noise = path.slice(0, 4);
        let w1 = event_e(&fam, &noise, Lifted::new(0.0, 1.0), &params).unwrap();
        let w2 = event_e(&fam, &noise, Lifted::new(0.0, 1.0), &params).unwrap();
        assert_eq!(w1.j, w2.j);
        assert_eq!(w1.ell, w2.ell);
    }

    #[test]
    fn invert_on_branch_doubling() {
        let fam = MapFamily::test_linear(2.0, 0.0);
        let branches = decompose(&fam, 0.0, Lifted::new(0.0, 0.5)).unwrap();
        let b = &branches[0];
        let j = invert_on_branch(&fam, &[0.0], b, Lifted::new(0.2, 0.4)).unwrap();
        assert!((j.lo - 0.1).abs() < 1e-12 && (j.hi - 0.2).abs() < 1e-12);
        // full image -> full domain
        let full = invert_on_branch(&fam, &[0.0], b, b.image).unwrap();
        assert!((full.lo - b.domain.lo).abs() < 1e-12);
        assert!((full.hi - b.domain.hi).abs() < 1e-12);
        // outside
        assert_eq!(
            invert_on_branch(&fam, &[0.0], b, Lifted::new(0.9, 1.2)).unwrap_err(),
            BranchError::TargetNotCovered
        );
    }

    #[test]
    fn invert_depth_three_round_trip() {
        let fam = MapFamily::sine(400.0, 0.3);
        let path = NoisePath::new(NoiseModel::new(0.05), 21, 0, 0, 4);
        let noise = path.slice(0, 4);
        let mut branches = decompose(&fam, noise[0], Lifted::new(0.05, 0.07)).unwrap();
        for step in 1..3 {
            branches = push_forward(&fam, &noise, &branches, step, None, 1 << 22).unwrap();
        }
        // pick a branch of moderate derivative and invert a small target
        let b = branches
            .iter()
            .filter(|b| b.image.len() > 0.2)
            .min_by(|a, b| a.min_abs_deriv.partial_cmp(&b.min_abs_deriv).unwrap())
            .unwrap();
        let mid = 0.5 * (b.image.lo + b.image.hi);
        let target = Lifted::new(mid - 0.05, mid + 0.05);
        let j = invert_on_branch(&fam, &noise, b, target).unwrap();
        let back_lo = compose_lift(&fam, &noise, 3, j.lo);
        let back_hi = compose_lift(&fam, &noise, 3, j.hi);
        let err = (back_lo.min(back_hi) - target.lo)
            .abs()
            .max((back_lo.max(back_hi) - target.hi).abs());
        assert!(err <= 1e-8, "round-trip error {err}");
    }

    #[test]
    fn doubling_covering_growth() {
        // maximal branch image length after n steps is exactly 2^n |I| until
        // it exceeds 2
        let fam = MapFamily::test_linear(2.0, 0.0);
        let noise = vec![0.0; 8];
        let interval = Lifted::new(0.0, 0.05);
        let mut branches = decompose(&fam, 0.0, interval).unwrap();
        for step in 1..8 {
            branches = push_forward(&fam, &noise, &branches, step, None, 1 << 20).unwrap();
            let max_len = branches
                .iter()
                .map(|b| b.image.len())
                .fold(0.0f64, f64::max);
            let expect = 2f64.powi(step as i32 + 1) * 0.05;
            if expect <= 2.0 {
                assert!((max_len - expect).abs() < 1e-9, "step {step}");
            }
        }
    }
}
