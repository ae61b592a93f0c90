#![allow(dead_code)]

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use wsn_alloc::model::{ModelParams, NetworkModel};
use wsn_alloc_oracles::dense::Problem;
use wsn_alloc_oracles::Dense;

/// Random SPD prior `BBᵀ + 0.3I` with gains, noises and channels drawn from
/// moderate ranges.
pub fn random_model(rng: &mut ChaCha8Rng, q: usize, k: usize, p_tot: f64, b_tot: u32) -> NetworkModel {
    let b: Vec<Vec<f64>> = (0..q).map(|_| (0..q).map(|_| rng.random_range(-1.0..1.0)).collect()).collect();
    let prior = (0..q)
        .map(|i| {
            (0..q)
                .map(|j| (0..q).map(|l| b[i][l] * b[j][l]).sum::<f64>() + if i == j { 0.3 } else { 0.0 })
                .collect()
        })
        .collect();
    NetworkModel::new(ModelParams {
        prior_cov: prior,
        sensor_gains: (0..k).map(|_| (0..q).map(|_| rng.random_range(-1.5..1.5)).collect()).collect(),
        obs_noise_var: (0..k).map(|_| rng.random_range(0.1..2.0)).collect(),
        channel_gain: (0..k).map(|_| rng.random_range(0.3..2.0)).collect(),
        channel_noise_var: (0..k).map(|_| rng.random_range(0.3..2.0)).collect(),
        tau: None,
        p_tot,
        b_tot,
    })
    .expect("random model is valid")
}

/// The same model in the oracle's plain-matrix form.
pub fn oracle(m: &NetworkModel) -> Problem {
    let q = m.dim();
    let rows: Vec<Vec<f64>> = (0..q).map(|i| (0..q).map(|j| m.prior_cov()[(i, j)]).collect()).collect();
    Problem {
        prior: Dense::from_rows(&rows),
        sensors: (0..m.sensors()).map(|k| m.gains().column(k).iter().copied().collect()).collect(),
        obs_noise: m.obs_noise_var().iter().copied().collect(),
        cnr: (0..m.sensors()).map(|k| m.channel_gain()[k].powi(2) / (2.0 * m.channel_noise_var()[k])).collect(),
        tau: m.tau().iter().copied().collect(),
    }
}

/// Powers splitting `p_tot` at random over the sensors.
pub fn random_powers(rng: &mut ChaCha8Rng, k: usize, p_tot: f64) -> Vec<f64> {
    let w: Vec<f64> = (0..k).map(|_| -rng.random::<f64>().max(1e-12).ln()).collect();
    let s: f64 = w.iter().sum();
    w.iter().map(|x| p_tot * x / s).collect()
}

pub fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1e-300)
}

pub fn verdict(ok: bool) -> &'static str {
    if ok {
        "PASS"
    } else {
        "FAIL"
    }
}

/// As [`random_powers`], leaving zero-rate sensors without power.
pub fn random_powers_for(rng: &mut ChaCha8Rng, rates: &[f64], p_tot: f64) -> Vec<f64> {
    let mut p = random_powers(rng, rates.len(), 1.0);
    for (x, r) in p.iter_mut().zip(rates) {
        if *r == 0.0 {
            *x = 0.0;
        }
    }
    let s: f64 = p.iter().sum();
    p.iter().map(|x| p_tot * x / s).collect()
}
