//! Property tests for the structural invariants.

use lab_core::branch::{decompose, push_forward, Lifted};
use lab_core::map::{circle_dist, dist_r_to_critical, wrap, MapFamily};
use lab_core::orbit::Orbit;
use lab_core::times::{
    hyperbolic_times, pliss_times, sparse_times, HyperbolicParams, TimeKind, TimeSet,
};
use proptest::prelude::*;

proptest! {
    #[test]
    fn wrap_is_idempotent_and_in_range(x in -50.0f64..50.0) {
        let w = wrap(x);
        prop_assert!((0.0..1.0).contains(&w));
        prop_assert_eq!(wrap(w), w);
    }

    #[test]
    fn circle_dist_symmetric_bounded(x in 0.0f64..1.0, y in 0.0f64..1.0) {
        let d = circle_dist(x, y);
        prop_assert!(d >= 0.0 && d <= 0.5 + 1e-15);
        prop_assert!((circle_dist(y, x) - d).abs() < 1e-15);
    }

    #[test]
    fn dist_r_capped_and_positive_off_critical(
        x in 0.0f64..1.0,
        w0 in -0.05f64..0.05,
        r in 0.01f64..0.4,
    ) {
        let crit = [0.25, 0.75];
        let d = dist_r_to_critical(x, &crit, w0, r);
        prop_assert!(d <= 1.0);
        let true_d = crit
            .iter()
            .map(|&c| circle_dist(x, c - w0))
            .fold(f64::INFINITY, f64::min);
        if true_d > r {
            prop_assert_eq!(d, 1.0);
        } else {
            prop_assert!((d - true_d).abs() < 1e-15);
        }
        if true_d > 0.0 {
            prop_assert!(d > 0.0);
        }
    }

    #[test]
    fn pliss_matches_brute(seq in prop::collection::vec(-1.0f64..1.0, 1..120), c1 in -0.5f64..0.4) {
        let fast = pliss_times(&seq, c1, c1 + 0.1, 1.0);
        let brute = lab_core::oracles::pliss_times_brute(&seq, c1);
        prop_assert_eq!(fast.times.indices, brute);
    }

    #[test]
    fn sparse_is_least_greedy_selection(
        indices in prop::collection::btree_set(1usize..300, 0..60),
        big_l in 0usize..6,
    ) {
        let t = TimeSet::new(indices.iter().cloned().collect(), TimeKind::Hyperbolic);
        let s = sparse_times(&t, big_l);
        // subset with gaps > L
        for w in s.indices.windows(2) {
            prop_assert!(w[1] - w[0] > big_l);
        }
        for i in &s.indices {
            prop_assert!(t.contains(*i));
        }
        // greedy minimality: each selected time is the smallest admissible
        let mut last: Option<usize> = None;
        for &i in &s.indices {
            let least = t
                .indices
                .iter()
                .find(|&&v| last.map(|l| v > l + big_l).unwrap_or(true))
                .copied();
            prop_assert_eq!(least, Some(i));
            last = Some(i);
        }
        // maximality: nothing beyond the last selected could extend it
        if let Some(l) = last {
            prop_assert!(t.indices.iter().all(|&v| v <= l + big_l || v <= l));
        }
    }

    #[test]
    fn hyperbolic_matches_brute_on_synthetic(
        logd in prop::collection::vec(-1.5f64..3.0, 1..80),
        dist_seed in 0u64..1000,
    ) {
        let n = logd.len();
        let mut distr = vec![1.0f64; n + 1];
        for (i, d) in distr.iter_mut().enumerate().skip(1) {
            let u = lab_core::noise::draw_uniform(
                dist_seed,
                lab_core::noise::Purpose::Diag,
                0,
                i as i64,
            );
            if u < 0.3 {
                *d = 0.001 + 0.049 * u;
            }
        }
        let orbit = Orbit {
            x: vec![0.0; n + 1],
            logd,
            distr,
            r: 0.05,
            flagged: vec![],
            n,
        };
        let p = HyperbolicParams::new(0.75, 0.05, 0.25, 0);
        let fast = hyperbolic_times(&orbit, &p);
        let brute = lab_core::oracles::hyperbolic_times_brute(&orbit, &p);
        prop_assert_eq!(fast.indices, brute.indices);
    }

    #[test]
    fn branch_domains_tile_without_pruning(
        lo in 0.0f64..1.0,
        len in 0.02f64..0.2,
        seed in 0u64..200,
    ) {
        let fam = MapFamily::sine(400.0, 0.3);
        let noise: Vec<f64> = (0..3)
            .map(|i| {
                0.05 * (2.0 * lab_core::noise::draw_uniform(
                    seed,
                    lab_core::noise::Purpose::Diag,
                    7,
                    i,
                ) - 1.0)
            })
            .collect();
        let interval = Lifted::new(lo, lo + len);
        let mut branches = decompose(&fam, noise[0], interval).unwrap();
        for step in 1..3 {
            branches = push_forward(&fam, &noise, &branches, step, None, 1 << 22).unwrap();
        }
        let total: f64 = branches.iter().map(|b| b.domain.len()).sum();
        prop_assert!(
            (total - len).abs() < 1e-9,
            "domains total {} vs {}",
            total,
            len
        );
    }

    #[test]
    fn ulam_rows_stochastic_under_noise(
        w0 in -0.05f64..0.05,
        bins in 8usize..48,
    ) {
        let fam = MapFamily::sine(200.0, 0.3);
        let op = lab_core::measure::ulam_matrix(
            &fam,
            w0,
            bins,
            lab_core::measure::UlamMode::BranchExact,
        );
        prop_assert!(op.max_row_sum_error() < 1e-12);
        let v = lab_core::measure::DensityVector::uniform(bins);
        let pushed = op.apply(&v);
        prop_assert!((pushed.total() - 1.0).abs() < 1e-12);
        prop_assert!(pushed.masses.iter().all(|&m| m >= 0.0));
    }

    #[test]
    fn dd_sincos_identity(x in -20.0f64..20.0) {
        let (s, c) = lab_core::dd::sincos(lab_core::dd::Dd::from_f64(x));
        let one = s.mul(s).add(c.mul(c)).to_f64();
        prop_assert!((one - 1.0).abs() < 1e-29);
        prop_assert!((s.to_f64() - x.sin()).abs() < 1e-14);
    }
}
