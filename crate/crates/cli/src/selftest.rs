//! Quick cross-checks of the library against the naive oracles.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use wsn_alloc::bounds::{self, Allocation};
use wsn_alloc::ellipsoid::{self, SolveOptions};
use wsn_alloc::model::{ModelParams, NetworkModel};
use wsn_alloc::poweralloc::{kkt_power, objective, WaterfillInput};
use wsn_alloc_oracles::dense::Problem;
use wsn_alloc_oracles::search::projected_gradient_power;
use wsn_alloc_oracles::Dense;

fn random_model(rng: &mut ChaCha8Rng, q: usize, k: usize) -> NetworkModel {
    let b: Vec<Vec<f64>> = (0..q).map(|_| (0..q).map(|_| rng.random_range(-1.0..1.0)).collect()).collect();
    let prior: Vec<Vec<f64>> = (0..q)
        .map(|i| {
            (0..q)
                .map(|j| (0..q).map(|l| b[i][l] * b[j][l]).sum::<f64>() + if i == j { 0.5 } else { 0.0 })
                .collect()
        })
        .collect();
    NetworkModel::new(ModelParams {
        prior_cov: prior,
        sensor_gains: (0..k).map(|_| (0..q).map(|_| rng.random_range(-1.5..1.5)).collect()).collect(),
        obs_noise_var: (0..k).map(|_| rng.random_range(0.2..2.0)).collect(),
        channel_gain: (0..k).map(|_| rng.random_range(0.3..2.0)).collect(),
        channel_noise_var: (0..k).map(|_| rng.random_range(0.5..2.0)).collect(),
        tau: None,
        p_tot: 10.0,
        b_tot: 12,
    })
    .expect("valid random model")
}

fn oracle_problem(m: &NetworkModel) -> Problem {
    let q = m.dim();
    Problem {
        prior: Dense::from_rows(&(0..q).map(|i| (0..q).map(|j| m.prior_cov()[(i, j)]).collect()).collect::<Vec<_>>()),
        sensors: (0..m.sensors()).map(|k| m.gains().column(k).iter().copied().collect()).collect(),
        obs_noise: m.obs_noise_var().iter().copied().collect(),
        cnr: (0..m.sensors()).map(|k| m.channel_gain()[k].powi(2) / (2.0 * m.channel_noise_var()[k])).collect(),
        tau: m.tau().iter().copied().collect(),
    }
}

fn report(name: &str, ok: bool, detail: String) -> bool {
    println!("{} {name}: {detail}", if ok { "PASS" } else { "FAIL" });
    ok
}

fn bounds_vs_oracle(rng: &mut ChaCha8Rng) -> bool {
    let mut worst = 0.0f64;
    for _ in 0..30 {
        let (q, k) = (rng.random_range(1..4), rng.random_range(1..6));
        let m = random_model(rng, q, k);
        let s = m.derive_stats().expect("stats");
        let o = oracle_problem(&m);
        let rates: Vec<f64> = (0..k).map(|_| rng.random_range(0.5..8.0)).collect();
        let powers: Vec<f64> = (0..k).map(|_| rng.random_range(0.0..4.0)).collect();
        let a = Allocation::new(rates.clone(), powers.clone());
        let r = bounds::evaluate(&s, &a).expect("evaluate");
        for (x, y) in [(r.d_a, o.d_a(&rates, &powers)), (r.d_b, o.d_b(&rates, &powers)), (r.d0, o.d0())] {
            worst = worst.max((x - y).abs() / y.abs().max(1e-12));
        }
    }
    report("bounds vs dense oracle", worst < 1e-9, format!("max relative deviation {worst:.2e}"))
}

fn kkt_vs_oracle(rng: &mut ChaCha8Rng) -> bool {
    let mut worst = 0.0f64;
    for _ in 0..20 {
        let k = rng.random_range(2..6);
        let w: Vec<f64> = (0..k).map(|_| rng.random_range(0.1..10.0)).collect();
        let g: Vec<f64> = (0..k).map(|_| rng.random_range(0.1..3.0)).collect();
        let l: Vec<f64> = (0..k).map(|_| rng.random_range(1.0..8.0)).collect();
        let p = rng.random_range(0.1..50.0);
        let s = kkt_power(&WaterfillInput { weights: &w, cnr: &g, rates: &l, p_tot: p }).expect("kkt");
        let ours = objective(&w, &g, &l, &s.powers);
        let (_, theirs) = projected_gradient_power(&w, &g, &l, p, 20_000);
        worst = worst.max((ours - theirs) / theirs);
    }
    report("kkt vs projected gradient", worst < 1e-6, format!("max relative gap {worst:.2e}"))
}

fn ellipsoid_quadratic() -> bool {
    let t = [0.7, 1.9, 1.1, 0.4];
    let f = |x: &[f64]| Ok(x.iter().zip(t).map(|(a, b)| (a - b).powi(2)).sum());
    let g = |x: &[f64]| Ok(x.iter().zip(t).map(|(a, b)| 2.0 * (a - b)).collect());
    let sol = ellipsoid::solve(f, g, 6.0, 4, &SolveOptions::default()).expect("solve");
    let err = sol.rates.iter().zip(t).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    report("ellipsoid on a quadratic", err < 1e-3, format!("max coordinate error {err:.2e}"))
}

pub fn run(seed: u64) -> bool {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let results = [bounds_vs_oracle(&mut rng), kkt_vs_oracle(&mut rng), ellipsoid_quadratic()];
    results.iter().all(|x| *x)
}
