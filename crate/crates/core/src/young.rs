//! Young times: L-sparse hyperbolic times at which the expansion event holds
//! for the ball `B_{delta1}` around the orbit point.
//!
//! `i` is a Young time for `(w, x)` when `i` belongs to the greedy L-sparse
//! subsequence of hyperbolic times and `theta^i w` realises the event on
//! `B_{delta1}(f^i_w(x))`.  The density of these times is what feeds the
//! return-time tail, so the record keeps the whole density curve, not just
//! the final count.

use crate::branch::{event_e, EventParams, EventWitness, Lifted};
use crate::map::{MapFamily, NoiseModel};
use crate::noise::{draw_uniform, NoisePath, Purpose};
use crate::orbit::{iterate, Orbit, OrbitError};
use crate::times::{hyperbolic_times, sparse_times, HyperbolicParams, TimeKind, TimeSet};
use rayon::prelude::*;
use serde::Serialize;
use std::collections::BTreeMap;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum YoungError {
    #[error("path future window must cover orbit length + L")]
    WindowTooShort,
    #[error(transparent)]
    Orbit(#[from] OrbitError),
    #[error(transparent)]
    Branch(#[from] crate::branch::BranchError),
}

/// Young times of one orbit with their witnesses and density curve.
#[derive(Debug, Clone, Serialize)]
pub struct YoungRecord {
    pub young: TimeSet,
    pub sparse: TimeSet,
    pub per_time_witness: BTreeMap<usize, EventWitness>,
    /// `(n, #Y_n / n)` for every n up to the orbit length.
    pub density_curve: Vec<(usize, f64)>,
}

/// Detect the Young times of `orbit` along `path`.
pub fn young_times(
    family: &MapFamily,
    orbit: &Orbit,
    path: &NoisePath,
    hp: &HyperbolicParams,
    ep: &EventParams,
) -> Result<YoungRecord, YoungError> {
    if !path.covers(0, (orbit.n + ep.big_l) as i64) {
        return Err(YoungError::WindowTooShort);
    }
    young_times_values(
        family,
        orbit,
        &path.slice(0, (orbit.n + ep.big_l) as i64),
        hp,
        ep,
    )
}

/// [`young_times`] driven by materialised noise values for `0..n+L`.
pub fn young_times_values(
    family: &MapFamily,
    orbit: &Orbit,
    values: &[f64],
    hp: &HyperbolicParams,
    ep: &EventParams,
) -> Result<YoungRecord, YoungError> {
    if values.len() < orbit.n + ep.big_l {
        return Err(YoungError::WindowTooShort);
    }
    let hyp = hyperbolic_times(orbit, hp);
    let sparse = sparse_times(&hyp, hp.big_l);
    let mut young = Vec::new();
    let mut witnesses = BTreeMap::new();
    for &i in &sparse.indices {
        let noise = &values[i..i + ep.big_l];
        let xi = orbit.x[i];
        let ball = Lifted::new(xi - ep.delta1, xi + ep.delta1);
        let w = event_e(family, noise, ball, ep)?;
        if w.hit {
            young.push(i);
            witnesses.insert(i, w);
        }
    }
    let mut density_curve = Vec::with_capacity(orbit.n);
    let mut count = 0usize;
    let mut it = young.iter().peekable();
    for n in 1..=orbit.n {
        while let Some(&&t) = it.peek() {
            if t <= n {
                count += 1;
                it.next();
            } else {
                break;
            }
        }
        density_curve.push((n, count as f64 / n as f64));
    }
    Ok(YoungRecord {
        young: TimeSet::new(young, TimeKind::Young),
        sparse,
        per_time_witness: witnesses,
        density_curve,
    })
}

/// Whether `n` is a Young time of `(w, x)`.
pub fn h_n_membership(
    family: &MapFamily,
    path: &NoisePath,
    x: f64,
    n: usize,
    hp: &HyperbolicParams,
    ep: &EventParams,
) -> Result<bool, YoungError> {
    if ep.big_l == 0 {
        return Ok(false);
    }
    let orbit = iterate(family, path, x, n, hp.r)?;
    let rec = young_times(family, &orbit, path, hp, ep)?;
    Ok(rec.young.contains(n))
}

#[derive(Debug, Clone, Serialize)]
pub struct Theta1Estimate {
    /// 10th percentile of final densities across the ensemble.
    pub theta1_hat: f64,
    /// Median density vs n.
    pub curve: Vec<(usize, f64)>,
    pub final_densities: Vec<f64>,
}

/// Ensemble estimate of the Young-time density from Lebesgue-random initial
/// points.
pub fn density_theta1(
    family: &MapFamily,
    noise: NoiseModel,
    hp: &HyperbolicParams,
    ep: &EventParams,
    n: usize,
    ensemble: usize,
    seed: u64,
) -> Result<Theta1Estimate, YoungError> {
    assert!(ensemble >= 2);
    let records: Vec<YoungRecord> = (0..ensemble as u64)
        .into_par_iter()
        .map(|p| {
            let path = NoisePath::new(noise, seed, p, 0, n + ep.big_l + 1);
            let x0 = draw_uniform(seed, Purpose::Init, p, 0);
            let orbit = iterate(family, &path, x0, n, hp.r)?;
            young_times(family, &orbit, &path, hp, ep)
        })
        .collect::<Result<_, YoungError>>()?;
    let mut finals: Vec<f64> = records
        .iter()
        .map(|r| r.density_curve.last().map(|&(_, d)| d).unwrap_or(0.0))
        .collect();
    let final_densities = finals.clone();
    finals.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let q_idx = ((ensemble - 1) as f64 * 0.1).floor() as usize;
    let theta1_hat = finals[q_idx];
    // median curve
    let mut curve = Vec::with_capacity(n);
    let mut scratch = vec![0.0; ensemble];
    for ni in 0..n {
        for (j, r) in records.iter().enumerate() {
            scratch[j] = r.density_curve[ni].1;
        }
        scratch.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let med = if ensemble % 2 == 1 {
            scratch[ensemble / 2]
        } else {
            0.5 * (scratch[ensemble / 2 - 1] + scratch[ensemble / 2])
        };
        curve.push((ni + 1, med));
    }
    Ok(Theta1Estimate {
        theta1_hat,
        curve,
        final_densities,
    })
}

/// `h_{theta1}` statistic: the first n after which the density curve stays
/// at or above `theta1` for every observed i >= n.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum HStat {
    Finite(usize),
    /// The condition fails up to the horizon.
    Saturated,
}

pub fn h_stat(record: &YoungRecord, theta1: f64) -> HStat {
    assert!(theta1 > 0.0);
    let mut h = 1usize;
    for &(n, d) in &record.density_curve {
        if d < theta1 {
            h = n + 1;
        }
    }
    if h > record.density_curve.len() {
        HStat::Saturated
    } else {
        HStat::Finite(h)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::map::delta0;

    fn sine_setup() -> (MapFamily, NoiseModel, HyperbolicParams, EventParams) {
        let fam = MapFamily::sine(400.0, 0.3);
        let noise = NoiseModel::new(0.05);
        let d0 = delta0(&fam).value;
        let d1 = d0 / 10.0;
        let hp = HyperbolicParams::new(0.75, 0.001, 0.25, 2);
        let ep = EventParams {
            big_l: EventParams::derive_big_l(d0, d1, 400.0, 0.5),
            delta0: d0,
            delta1: d1,
            epsilon0: d0 / 4.0,
            x0: 0.0,
            branch_cap: 1 << 20,
        };
        (fam, noise, hp, ep)
    }

    #[test]
    fn derived_l_at_reference() {
        // (4 d0 / alpha^{c/2})^{L+1} <= d1/2 first holds at L = 2
        let fam = MapFamily::sine(400.0, 0.3);
        let d0 = delta0(&fam).value;
        assert_eq!(EventParams::derive_big_l(d0, d0 / 10.0, 400.0, 0.5), 2);
    }

    #[test]
    fn l_zero_gives_empty_young_set() {
        let (fam, noise, hp, mut ep) = sine_setup();
        ep.big_l = 0;
        let path = NoisePath::new(noise, 1, 0, 0, 200);
        let orbit = iterate(&fam, &path, 0.4, 100, hp.r).unwrap();
        let rec = young_times(&fam, &orbit, &path, &hp, &ep).unwrap();
        assert!(rec.young.is_empty());
    }

    #[test]
    fn young_subset_of_sparse_subset_of_hyperbolic() {
        let (fam, noise, hp, ep) = sine_setup();
        for seed in 0..8u64 {
            let path = NoisePath::new(noise, seed, 0, 0, 600);
            let x0 = draw_uniform(seed, Purpose::Init, 0, 0);
            let orbit = iterate(&fam, &path, x0, 500, hp.r).unwrap();
            let rec = young_times(&fam, &orbit, &path, &hp, &ep).unwrap();
            let hyp = hyperbolic_times(&orbit, &hp);
            for i in &rec.young.indices {
                assert!(rec.sparse.contains(*i));
            }
            for i in &rec.sparse.indices {
                assert!(hyp.contains(*i));
            }
        }
    }

    #[test]
    fn reference_run_has_young_times_and_witnesses_validate() {
        let (fam, noise, hp, ep) = sine_setup();
        let path = NoisePath::new(noise, 1, 0, 0, 1100);
        let orbit = iterate(&fam, &path, 0.37, 1000, hp.r).unwrap();
        let rec = young_times(&fam, &orbit, &path, &hp, &ep).unwrap();
        assert!(!rec.young.is_empty(), "reference run must have Young times");
        for (&i, w) in &rec.per_time_witness {
            let noise_slice = path.slice(i as i64, (i + ep.big_l) as i64);
            let rep = crate::branch::validate_witness(&fam, &noise_slice, w, &ep, 256);
            assert!(rep.valid, "witness at {i} failed: {rep:?}");
        }
    }

    #[test]
    fn shift_covariance() {
        // i is Young for (w, x) iff the 0-relabelled event holds at
        // (theta^i w, x_i), given i is sparse-hyperbolic
        let (fam, noise, hp, ep) = sine_setup();
        let path = NoisePath::new(noise, 3, 0, 0, 600);
        let orbit = iterate(&fam, &path, 0.81, 500, hp.r).unwrap();
        let rec = young_times(&fam, &orbit, &path, &hp, &ep).unwrap();
        for &i in rec.sparse.indices.iter().take(20) {
            let shifted = path.shift(i as i64);
            let noise_slice = shifted.slice(0, ep.big_l as i64);
            let ball = Lifted::new(orbit.x[i] - ep.delta1, orbit.x[i] + ep.delta1);
            let w = event_e(&fam, &noise_slice, ball, &ep).unwrap();
            assert_eq!(w.hit, rec.young.contains(i), "time {i}");
        }
    }

    #[test]
    fn forced_event_density_approaches_half() {
        // slope-4 linear map, delta1 = 0.2, delta0 = 0.1, L = 1: the lifted
        // image of any B_{delta1} ball has length 1.6 >= 1 + 4*delta0, so the
        // event is true for every interval and every path; all times are
        // hyperbolic, so the Young density is the greedy L-sparse density
        // 1/(L+1) = 1/2
        let fam = MapFamily::test_linear(4.0, 0.0);
        let noise = NoiseModel::new(1e-9);
        let hp = HyperbolicParams::new(0.5, 0.05, 0.25, 1);
        let ep = EventParams {
            big_l: 1,
            delta0: 0.1,
            delta1: 0.2,
            epsilon0: 0.01,
            x0: 0.0,
            branch_cap: 1 << 20,
        };
        let path = NoisePath::new(noise, 1, 0, 0, 600);
        let orbit = iterate(&fam, &path, 0.123, 500, hp.r).unwrap();
        let rec = young_times(&fam, &orbit, &path, &hp, &ep).unwrap();
        let final_density = rec.density_curve.last().unwrap().1;
        assert!(
            (final_density - 0.5).abs() < 0.01,
            "density {final_density}"
        );
        // greedy sparsity oracle on the full index set: {1, 3, 5, ...}
        let expect: Vec<usize> = (0..250).map(|k| 1 + 2 * k).collect();
        assert_eq!(rec.young.indices, expect);
    }

    #[test]
    fn h_stat_cases() {
        let mk = |curve: Vec<(usize, f64)>| YoungRecord {
            young: TimeSet::new(vec![], TimeKind::Young),
            sparse: TimeSet::new(vec![], TimeKind::Sparse),
            per_time_witness: BTreeMap::new(),
            density_curve: curve,
        };
        let rec = mk(vec![(1, 0.5), (2, 0.5), (3, 0.6)]);
        assert_eq!(h_stat(&rec, 0.4), HStat::Finite(1));
        let rec = mk(vec![(1, 0.1), (2, 0.5), (3, 0.6)]);
        assert_eq!(h_stat(&rec, 0.4), HStat::Finite(2));
        let rec = mk(vec![(1, 0.1), (2, 0.2), (3, 0.3)]);
        assert_eq!(h_stat(&rec, 0.4), HStat::Saturated);
    }

    #[test]
    fn membership_matches_record() {
        let (fam, noise, hp, ep) = sine_setup();
        let path = NoisePath::new(noise, 7, 0, 0, 400);
        let orbit = iterate(&fam, &path, 0.52, 300, hp.r).unwrap();
        let rec = young_times(&fam, &orbit, &path, &hp, &ep).unwrap();
        let some_young = rec.young.indices.first().copied();
        if let Some(i) = some_young {
            assert!(h_n_membership(&fam, &path, 0.52, i, &hp, &ep).unwrap());
        }
        // a non-hyperbolic time is never young
        let hyp = hyperbolic_times(&orbit, &hp);
        if let Some(nh) = (1..=300).find(|i| !hyp.contains(*i)) {
            assert!(!h_n_membership(&fam, &path, 0.52, nh, &hp, &ep).unwrap());
        }
        // L = 0: always false
        let mut ep0 = ep;
        ep0.big_l = 0;
        assert!(!h_n_membership(&fam, &path, 0.52, 5, &hp, &ep0).unwrap());
    }

    #[test]
    fn ensemble_density_estimate() {
        let (fam, noise, hp, ep) = sine_setup();
        let est = density_theta1(&fam, noise, &hp, &ep, 400, 16, 1).unwrap();
        assert!(est.theta1_hat >= 0.0);
        assert_eq!(est.curve.len(), 400);
        assert_eq!(est.final_densities.len(), 16);
    }

    #[test]
    fn h_stat_finite_at_half_theta1() {
        // with theta1 = theta1_hat / 2, h is finite in >= 95% of paths
        let (fam, noise, hp, ep) = sine_setup();
        let est = density_theta1(&fam, noise, &hp, &ep, 2000, 20, 1).unwrap();
        let theta1 = est.theta1_hat / 2.0;
        assert!(theta1 > 0.0);
        let finite = (0..20u64)
            .filter(|&p| {
                let path = NoisePath::new(noise, 1, p, 0, 2000 + ep.big_l + 1);
                let x0 = draw_uniform(1, Purpose::Init, p, 0);
                let orbit = iterate(&fam, &path, x0, 2000, hp.r).unwrap();
                let rec = young_times(&fam, &orbit, &path, &hp, &ep).unwrap();
                matches!(h_stat(&rec, theta1), HStat::Finite(_))
            })
            .count();
        assert!(finite >= 19, "h finite in only {finite}/20 paths");
    }

    #[test]
    fn borel_cantelli_proxy() {
        // fraction of fresh initial points with final density > theta1_hat
        // is >= 0.9 minus 3-sigma binomial slack
        let (fam, noise, hp, ep) = sine_setup();
        let est = density_theta1(&fam, noise, &hp, &ep, 2000, 32, 1).unwrap();
        let fresh = density_theta1(&fam, noise, &hp, &ep, 2000, 32, 999).unwrap();
        let above = fresh
            .final_densities
            .iter()
            .filter(|&&d| d > est.theta1_hat)
            .count();
        let slack = 3.0 * (0.9f64 * 0.1 / 32.0).sqrt();
        assert!(
            above as f64 / 32.0 >= 0.9 - slack,
            "only {above}/32 fresh paths above theta1_hat {}",
            est.theta1_hat
        );
    }
}
