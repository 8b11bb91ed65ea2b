//! Subcommand implementations: deterministic ensemble orchestration and
//! file emission.

use crate::config::Resolved;
use crate::fitting::fit_exponential_tail;
use crate::io::{out_path, write_csv, write_json, ResultTable};
use anyhow::Result;
use lab_core::branch::{event_e, validate_witness, Lifted};
use lab_core::measure::{
    correlation_curve, decay_fit, pullback_density, stationary_density, CorrelationLab, Direction,
    Estimator, Observable,
};
use lab_core::noise::{draw_uniform, NoisePath, Purpose};
use lab_core::orbit::{iterate, lyapunov_estimate, large_dev_probe};
use lab_core::times::{hyperbolic_times, sparse_times, time_density};
use lab_core::tower::{build_partition, measure_c1, tail_survival, verify_tower, TowerPartition};
use lab_core::young::{density_theta1, young_times};
use rayon::prelude::*;
use serde::Serialize;

pub struct CommonArgs {
    pub out_dir: Option<String>,
    pub n: Option<usize>,
    pub ensemble: Option<usize>,
    pub bins: Option<usize>,
    pub n_back: Option<usize>,
    pub mc: Option<usize>,
    pub horizon: Option<usize>,
}

/// `lab simulate`: one orbit dump, n+1 position rows.
pub fn simulate(resolved: &Resolved, args: &CommonArgs) -> Result<i32> {
    let n = args.n.unwrap_or(1000);
    let family = resolved.family();
    let path = NoisePath::new(resolved.noise(), resolved.config.seed, 0, 0, n + 1);
    let x0 = draw_uniform(resolved.config.seed, Purpose::Init, 0, 0);
    let orbit = iterate(&family, &path, x0, n, resolved.derived.r)?;
    let mut table = ResultTable::new(&["i", "x", "omega", "logd", "distr"]);
    for i in 0..=n {
        table.push(vec![
            i as f64,
            orbit.x[i],
            path.value(i as i64),
            if i < n { orbit.logd[i] } else { f64::NAN },
            orbit.distr[i],
        ]);
    }
    write_csv(
        &out_path(resolved, args.out_dir.as_deref(), "simulate.csv"),
        resolved,
        &table,
    )?;
    Ok(0)
}

/// `lab lyapunov`: ensemble Lyapunov estimate.
pub fn lyapunov(resolved: &Resolved, args: &CommonArgs) -> Result<i32> {
    let n = args.n.unwrap_or(10_000);
    let ensemble = args.ensemble.unwrap_or(resolved.config.ensemble.count);
    let family = resolved.family();
    let est = lyapunov_estimate(
        &family,
        resolved.noise(),
        n,
        ensemble,
        resolved.ensemble_seed(),
    )?;
    write_json(
        &out_path(resolved, args.out_dir.as_deref(), "lyapunov.json"),
        resolved,
        &est,
    )?;
    Ok(0)
}

/// `lab hyp`: per-path hyperbolic/sparse counts.
pub fn hyp(resolved: &Resolved, args: &CommonArgs) -> Result<i32> {
    let n = args.n.unwrap_or(5000);
    let ensemble = args.ensemble.unwrap_or(resolved.config.ensemble.count);
    let family = resolved.family();
    let noise = resolved.noise();
    let hp = resolved.hyperbolic_params();
    let seed = resolved.ensemble_seed();
    let rows: Vec<Vec<f64>> = (0..ensemble as u64)
        .into_par_iter()
        .map(|p| {
            let path = NoisePath::new(noise, seed, p, 0, n + 1);
            let x0 = draw_uniform(seed, Purpose::Init, p, 0);
            let orbit = iterate(&family, &path, x0, n, hp.r).expect("orbit");
            let h = hyperbolic_times(&orbit, &hp);
            let s = sparse_times(&h, hp.big_l);
            vec![
                p as f64,
                n as f64,
                h.len() as f64,
                s.len() as f64,
                time_density(&h, n),
            ]
        })
        .collect();
    let mut table = ResultTable::new(&["path_seed", "n", "count_hyp", "count_sparse", "density"]);
    for r in rows {
        table.push(r);
    }
    write_csv(
        &out_path(resolved, args.out_dir.as_deref(), "hyp.csv"),
        resolved,
        &table,
    )?;
    Ok(0)
}

#[derive(Serialize)]
struct YoungSummary {
    theta1_hat: f64,
    median_final_density: f64,
}

/// `lab young`: ensemble Young-time densities.
pub fn young(resolved: &Resolved, args: &CommonArgs) -> Result<i32> {
    let n = args.n.unwrap_or(5000);
    let ensemble = args.ensemble.unwrap_or(resolved.config.ensemble.count);
    let family = resolved.family();
    let est = density_theta1(
        &family,
        resolved.noise(),
        &resolved.hyperbolic_params(),
        &resolved.event_params(),
        n,
        ensemble,
        resolved.ensemble_seed(),
    )?;
    let mut table = ResultTable::new(&["seed", "n", "young_count", "density"]);
    for (p, d) in est.final_densities.iter().enumerate() {
        table.push(vec![
            p as f64,
            n as f64,
            (d * n as f64).round(),
            *d,
        ]);
    }
    write_csv(
        &out_path(resolved, args.out_dir.as_deref(), "young.csv"),
        resolved,
        &table,
    )?;
    write_json(
        &out_path(resolved, args.out_dir.as_deref(), "young.json"),
        resolved,
        &YoungSummary {
            theta1_hat: est.theta1_hat,
            median_final_density: est.curve.last().map(|&(_, d)| d).unwrap_or(0.0),
        },
    )?;
    Ok(0)
}

#[derive(Serialize)]
struct EventSummary {
    trials: usize,
    hits: usize,
    hit_rate: f64,
    mean_ell: f64,
    invalid_witnesses: usize,
    witnesses_sample: Vec<WitnessRow>,
}

#[derive(Serialize)]
struct WitnessRow {
    trial: u64,
    ell: usize,
    j_lo: f64,
    j_hi: f64,
}

/// `lab event`: empirical hit rate of the expansion event on an interval.
pub fn event(resolved: &Resolved, args: &CommonArgs, interval: (f64, f64), trials: usize) -> Result<i32> {
    let family = resolved.family();
    let ep = resolved.event_params();
    let noise = resolved.noise();
    let seed = resolved.ensemble_seed();
    let results: Vec<(u64, Option<(usize, f64, f64, bool)>)> = (0..trials as u64)
        .into_par_iter()
        .map(|t| {
            let path = NoisePath::new(noise, seed, t, 0, ep.big_l + 1);
            let vals = path.slice(0, ep.big_l as i64);
            let w = event_e(&family, &vals, Lifted::new(interval.0, interval.1), &ep)
                .expect("event");
            if w.hit {
                let rep = validate_witness(&family, &vals, &w, &ep, 1000);
                (t, Some((w.ell, w.j.lo, w.j.hi, rep.valid)))
            } else {
                (t, None)
            }
        })
        .collect();
    let hits: Vec<_> = results.iter().filter_map(|(t, h)| h.map(|h| (*t, h))).collect();
    let invalid = hits.iter().filter(|(_, h)| !h.3).count();
    let mean_ell = if hits.is_empty() {
        0.0
    } else {
        hits.iter().map(|(_, h)| h.0 as f64).sum::<f64>() / hits.len() as f64
    };
    let summary = EventSummary {
        trials,
        hits: hits.len(),
        hit_rate: hits.len() as f64 / trials.max(1) as f64,
        mean_ell,
        invalid_witnesses: invalid,
        witnesses_sample: hits
            .iter()
            .take(16)
            .map(|(t, h)| WitnessRow {
                trial: *t,
                ell: h.0,
                j_lo: h.1,
                j_hi: h.2,
            })
            .collect(),
    };
    write_json(
        &out_path(resolved, args.out_dir.as_deref(), "event.json"),
        resolved,
        &summary,
    )?;
    Ok(0)
}

#[derive(Serialize)]
struct ElementRow {
    n: usize,
    ell: usize,
    left: f64,
    right: f64,
    r: usize,
}

#[derive(Serialize)]
struct TowerPath {
    path: u64,
    c1: f64,
    n0: usize,
    n1: usize,
    beta: f64,
    elements: Vec<ElementRow>,
    covered_mass: f64,
    survival: Vec<f64>,
}

#[derive(Serialize)]
struct TowerOutput {
    paths: Vec<TowerPath>,
    median_survival: Vec<f64>,
    tail_fit_gamma: Option<f64>,
    tail_fit_r2: Option<f64>,
}

pub fn build_ensemble_towers(
    resolved: &Resolved,
    horizon: usize,
    ensemble: usize,
) -> Result<(Vec<TowerPartition>, f64)> {
    let family = resolved.family();
    let noise = resolved.noise();
    let hp = resolved.hyperbolic_params();
    let ep = resolved.event_params();
    let mut params = resolved.tower_params();
    params.horizon = horizon;
    let c1 = resolved.config.tower.c1.unwrap_or_else(|| {
        measure_c1(
            &family,
            noise,
            &ep,
            resolved.ensemble_seed(),
            resolved.config.tower.c1_samples,
        )
    });
    let seed = resolved.ensemble_seed();
    let parts: Vec<TowerPartition> = (0..ensemble as u64)
        .into_par_iter()
        .map(|p| {
            let path = NoisePath::new(noise, seed, p, 0, horizon + ep.big_l + 2);
            build_partition(&family, &path, &hp, &ep, &params, c1)
        })
        .collect::<Result<_, _>>()?;
    Ok((parts, c1))
}

/// `lab tower`: ensemble partitions, survival table, per-path elements.
pub fn tower(resolved: &Resolved, args: &CommonArgs) -> Result<i32> {
    let horizon = args.horizon.unwrap_or(resolved.config.tower.horizon);
    let ensemble = args.ensemble.unwrap_or(resolved.config.ensemble.count);
    let (parts, c1) = build_ensemble_towers(resolved, horizon, ensemble)?;
    let (per_path, median) = tail_survival(&parts);
    let fit = {
        let pts: Vec<(f64, f64)> = median
            .iter()
            .enumerate()
            .map(|(n, s)| (n as f64, *s))
            .collect();
        fit_exponential_tail(&pts, 1e-2).ok()
    };
    let out = TowerOutput {
        paths: parts
            .iter()
            .enumerate()
            .map(|(p, part)| TowerPath {
                path: p as u64,
                c1,
                n0: part.consts.n0,
                n1: part.consts.n1,
                beta: part.consts.beta,
                elements: part
                    .elements
                    .iter()
                    .map(|e| ElementRow {
                        n: e.n,
                        ell: e.ell,
                        left: e.lo.to_f64(),
                        right: e.hi.to_f64(),
                        r: e.r,
                    })
                    .collect(),
                covered_mass: part.covered_mass,
                survival: per_path[p].clone(),
            })
            .collect(),
        median_survival: median.clone(),
        tail_fit_gamma: fit.map(|f| f.gamma),
        tail_fit_r2: fit.map(|f| f.r2),
    };
    write_json(
        &out_path(resolved, args.out_dir.as_deref(), "tower.json"),
        resolved,
        &out,
    )?;
    let mut cols: Vec<String> = vec!["n".into()];
    cols.extend((0..parts.len()).map(|p| format!("s_path{p}")));
    cols.push("median".into());
    let mut table = ResultTable::new(&cols.iter().map(|s| s.as_str()).collect::<Vec<_>>());
    for n in 0..median.len() {
        let mut row = vec![n as f64];
        row.extend(per_path.iter().map(|c| c[n]));
        row.push(median[n]);
        table.push(row);
    }
    write_csv(
        &out_path(resolved, args.out_dir.as_deref(), "tower_survival.csv"),
        resolved,
        &table,
    )?;
    Ok(0)
}

/// `lab density`: pullback density as CSV.
pub fn density(resolved: &Resolved, args: &CommonArgs) -> Result<i32> {
    let bins = args.bins.unwrap_or(resolved.config.measure.bins);
    let n_back = args.n_back.unwrap_or(resolved.config.measure.n_back);
    let family = resolved.family();
    let path = NoisePath::new(resolved.noise(), resolved.config.seed, 0, n_back, 1);
    let mut lab = CorrelationLab::new(&family, &path, bins);
    let h = pullback_density(&mut lab, n_back)?;
    let mut table = ResultTable::new(&["bin", "center", "mass"]);
    for (i, m) in h.masses.iter().enumerate() {
        table.push(vec![i as f64, (i as f64 + 0.5) / bins as f64, *m]);
    }
    write_csv(
        &out_path(resolved, args.out_dir.as_deref(), "density.csv"),
        resolved,
        &table,
    )?;
    Ok(0)
}

#[derive(Serialize)]
struct CorrSummary {
    gamma_hat: Option<f64>,
    c_omega_hat: Option<f64>,
    r2: Option<f64>,
    points_used: Option<usize>,
    direction: Direction,
    estimator: Estimator,
}

#[allow(clippy::too_many_arguments)]
pub fn corr(
    resolved: &Resolved,
    args: &CommonArgs,
    obs: &str,
    n_max: usize,
    direction: Direction,
    estimator: Estimator,
) -> Result<i32> {
    let bins = args.bins.unwrap_or(resolved.config.measure.bins);
    let n_back = args.n_back.unwrap_or(resolved.config.measure.n_back);
    let mc = args.mc.unwrap_or(resolved.config.measure.mc);
    let family = resolved.family();
    let (phi, psi) = match obs {
        "cos" => (Observable::cos(bins), Observable::cos(bins)),
        "one" => (Observable::one(bins), Observable::cos(bins)),
        other => anyhow::bail!("unknown observable `{other}` (cos | one)"),
    };
    let path = NoisePath::new(
        resolved.noise(),
        resolved.config.seed,
        0,
        n_back + n_max,
        n_max + 1,
    );
    let curve = correlation_curve(
        &family, &path, &phi, &psi, 0, n_max, direction, bins, mc, estimator, n_back,
    )?;
    let mut table = ResultTable::new(&["n", "c_n", "mc_sigma"]);
    for p in &curve {
        table.push(vec![p.n as f64, p.c_n, p.sigma]);
    }
    write_csv(
        &out_path(resolved, args.out_dir.as_deref(), "corr.csv"),
        resolved,
        &table,
    )?;
    // fit above the noise floor: 3 sigma for MC, f64 floor for the operator
    let floor = curve
        .iter()
        .map(|p| 3.0 * p.sigma)
        .fold(1e-14f64, f64::max);
    let pts: Vec<(f64, f64)> = curve
        .iter()
        .filter(|p| p.n >= 1)
        .map(|p| (p.n as f64, p.c_n))
        .collect();
    let fit = decay_fit(&pts, floor).ok();
    write_json(
        &out_path(resolved, args.out_dir.as_deref(), "corr.json"),
        resolved,
        &CorrSummary {
            gamma_hat: fit.map(|f| f.gamma_hat),
            c_omega_hat: fit.map(|f| f.c_hat),
            r2: fit.map(|f| f.r2),
            points_used: fit.map(|f| f.points_used),
            direction,
            estimator,
        },
    )?;
    Ok(0)
}

/// `lab ldp`: Appendix-style large-deviation probe.
pub fn ldp(resolved: &Resolved, args: &CommonArgs) -> Result<i32> {
    let family = resolved.family();
    let block = &resolved.config.ldp;
    let big_r = block
        .big_r
        .unwrap_or_else(|| resolved.config.alpha.powf(resolved.config.c / 2.0));
    let probe = large_dev_probe(
        &family,
        resolved.noise(),
        big_r,
        block.h,
        block.ell,
        block.grid,
        block.beta2,
    );
    write_json(
        &out_path(resolved, args.out_dir.as_deref(), "ldp.json"),
        resolved,
        &probe,
    )?;
    Ok(0)
}

#[derive(Serialize)]
struct VerifyReport {
    paths: usize,
    total_elements: usize,
    disjoint_violations: usize,
    exclusion_violations: usize,
    markov_violations: usize,
    monotone_violations: usize,
    contraction_violations: usize,
    stopping_time_failures: usize,
    r1_failures: usize,
    invalid_witnesses: usize,
    c0_estimate_max: f64,
    violations_total: usize,
}

/// `lab verify`: structural battery; exit 2 on any violation.
pub fn verify(resolved: &Resolved, args: &CommonArgs) -> Result<i32> {
    let horizon = args.horizon.unwrap_or(resolved.config.tower.horizon);
    let ensemble = args.ensemble.unwrap_or(resolved.config.ensemble.count);
    let family = resolved.family();
    let noise = resolved.noise();
    let hp = resolved.hyperbolic_params();
    let ep = resolved.event_params();
    let mut params = resolved.tower_params();
    params.horizon = horizon;
    let (parts, c1) = build_ensemble_towers(resolved, horizon, ensemble)?;
    let seed = resolved.ensemble_seed();
    let reports: Vec<_> = parts
        .par_iter()
        .enumerate()
        .map(|(p, part)| {
            let path = NoisePath::new(noise, seed, p as u64, 0, horizon + ep.big_l + 2);
            verify_tower(&family, &path, part, &hp, &ep, &params, 4)
        })
        .collect::<Result<_, _>>()?;
    let _ = c1;
    // witness validation sample on top of the tower battery
    let invalid_witnesses: usize = (0..64u64)
        .into_par_iter()
        .map(|t| {
            let path = NoisePath::new(noise, seed ^ 0xE1, t, 0, ep.big_l + 1);
            let vals = path.slice(0, ep.big_l as i64);
            let c = draw_uniform(seed ^ 0xE1, Purpose::Diag, t, 0);
            match event_e(&family, &vals, Lifted::new(c - ep.delta1, c + ep.delta1), &ep) {
                Ok(w) if w.hit => {
                    let rep = validate_witness(&family, &vals, &w, &ep, 500);
                    usize::from(!rep.valid)
                }
                _ => 0,
            }
        })
        .sum();
    let report = VerifyReport {
        paths: reports.len(),
        total_elements: reports.iter().map(|r| r.elements).sum(),
        disjoint_violations: reports.iter().map(|r| r.disjoint_violations).sum(),
        exclusion_violations: reports.iter().map(|r| r.exclusion_violations).sum(),
        markov_violations: reports.iter().map(|r| r.markov_violations).sum(),
        monotone_violations: reports.iter().map(|r| r.monotone_violations).sum(),
        contraction_violations: reports.iter().map(|r| r.contraction_violations).sum(),
        stopping_time_failures: reports.iter().filter(|r| !r.stopping_time_ok).count(),
        r1_failures: reports.iter().filter(|r| !r.r1_ok).count(),
        invalid_witnesses,
        c0_estimate_max: reports.iter().map(|r| r.c0_estimate).fold(0.0, f64::max),
        violations_total: 0,
    };
    let total = report.disjoint_violations
        + report.exclusion_violations
        + report.markov_violations
        + report.monotone_violations
        + report.contraction_violations
        + report.stopping_time_failures
        + report.r1_failures
        + report.invalid_witnesses;
    let report = VerifyReport {
        violations_total: total,
        ..report
    };
    write_json(
        &out_path(resolved, args.out_dir.as_deref(), "verify.json"),
        resolved,
        &report,
    )?;
    Ok(if total == 0 { 0 } else { 2 })
}

/// Wrapper used by young.rs consumers in tests.
pub fn young_record_for_path(
    resolved: &Resolved,
    path_id: u64,
    n: usize,
) -> Result<lab_core::young::YoungRecord> {
    let family = resolved.family();
    let hp = resolved.hyperbolic_params();
    let ep = resolved.event_params();
    let path = NoisePath::new(
        resolved.noise(),
        resolved.ensemble_seed(),
        path_id,
        0,
        n + ep.big_l + 1,
    );
    let x0 = draw_uniform(resolved.ensemble_seed(), Purpose::Init, path_id, 0);
    let orbit = iterate(&family, &path, x0, n, hp.r)?;
    Ok(young_times(&family, &orbit, &path, &hp, &ep)?)
}

/// Annealed stationary density + residual, for the verify battery.
pub fn stationary(resolved: &Resolved, bins: usize) -> Result<(Vec<f64>, f64)> {
    let family = resolved.family();
    let (v, res) = stationary_density(
        &family,
        resolved.noise(),
        bins,
        resolved.config.measure.noise_nodes,
    )?;
    Ok((v.masses, res))
}
