use lab_core::*;
use std::time::Instant;

fn main() {
    let fam = map::MapFamily::sine(400.0, 0.3);
    let noise = map::NoiseModel::new(0.05);

    // criterion 9 pilot: pullback Cauchy decades at N=1024
    let path = noise::NoisePath::new(noise, 1, 0, 120, 1);
    let mut lab = measure::CorrelationLab::new(&fam, &path, 1024);
    let t0 = Instant::now();
    let hs: Vec<measure::DensityVector> = (0..=5)
        .map(|k| measure::pullback_density(&mut lab, 10 * k).unwrap())
        .collect();
    for k in 0..5 {
        println!("d({}) = ||h_{} - h_{}||_1 = {:.6e}", 10 * k, 10 * (k + 1), 10 * k, hs[k + 1].l1_distance(&hs[k]));
    }
    println!("pullback pilot took {:?}", t0.elapsed());
    let min_mass = hs[5].min_mass();
    println!("min bin mass at n_back=50: {:.3e}", min_mass);

    // criterion 5 pilot: young density stabilization, ensemble 64 n=5000
    let d0 = map::delta0(&fam).value;
    let big_l = branch::EventParams::derive_big_l(d0, d0 / 10.0, 400.0, 0.5);
    let hp = times::HyperbolicParams::new(0.75, 0.001, 0.25, big_l);
    let ep = branch::EventParams { big_l, delta0: d0, delta1: d0 / 10.0, epsilon0: d0 / 4.0, x0: 0.0, branch_cap: 1 << 20 };
    let t0 = Instant::now();
    let est = young::density_theta1(&fam, noise, &hp, &ep, 5000, 64, 1).unwrap();
    let pos = est.final_densities.iter().filter(|&&d| d > 0.0).count();
    let med_5000 = est.curve[4999].1;
    let med_2500 = est.curve[2499].1;
    println!("young: positive {}/64, median(5000)={:.4}, median(2500)={:.4}, ratio={:.4}, theta1_hat={:.4} ({:?})",
        pos, med_5000, med_2500, med_5000 / med_2500, est.theta1_hat, t0.elapsed());

    // criterion 6/7 pilot: 32-path towers at horizon 400
    let params = tower::TowerParams { horizon: 400, grid_exp: 14, ..Default::default() };
    let c1 = tower::measure_c1(&fam, noise, &ep, 1, 64);
    let t0 = Instant::now();
    use rayon::prelude::*;
    let parts: Vec<tower::TowerPartition> = (0..32u64).into_par_iter().map(|p| {
        let path = noise::NoisePath::new(noise, 1, p, 0, 400 + big_l as usize + 2);
        tower::build_partition(&fam, &path, &hp, &ep, &params, c1).unwrap()
    }).collect();
    println!("32 towers built in {:?}", t0.elapsed());
    let mut covs: Vec<f64> = parts.iter().map(|p| p.covered_mass / (p.delta_hi - p.delta_lo)).collect();
    covs.sort_by(|a, b| a.partial_cmp(b).unwrap());
    println!("covered fraction: min={:.6e} q25={:.6e} median={:.6e} max={:.6e}", covs[0], covs[8], covs[16], covs[31]);
    let (_, median) = tower::tail_survival(&parts);
    let pts: Vec<(f64, f64)> = median.iter().enumerate().map(|(n, s)| (n as f64, *s)).collect();
    let above: Vec<(f64,f64)> = pts.iter().filter(|&&(_, s)| s > 1e-2).cloned().collect();
    let (slope, _, r2) = oracles::log_linear_fit(&above);
    println!("median survival fit: slope={:.3e} r2={:.4}", slope, r2);
    let t0 = Instant::now();
    let path0 = noise::NoisePath::new(noise, 1, 0, 0, 400 + big_l as usize + 2);
    let rep = tower::verify_tower(&fam, &path0, &parts[0], &hp, &ep, &params, 4).unwrap();
    println!("verify path0 in {:?}: {:?}", t0.elapsed(), rep);
}
