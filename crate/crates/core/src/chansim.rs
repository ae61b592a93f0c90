//! Monte Carlo simulation of the full sensing/quantization/BPSK/fusion chain.
//!
//! Trials are processed in fixed-size chunks. Chunk `c` draws from
//! `ChaCha8Rng` seeded with the user seed on stream `c`, and chunk partial
//! sums are merged in chunk order, so the report does not depend on how many
//! worker threads run.

use std::fmt;
use std::str::FromStr;

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use statrs::function::erf::erfc;

use crate::bounds::{fusion_matrix, u_k, Allocation};
use crate::model::NetworkModel;
use crate::quantizer::{encode_bits, Quantizer};
use crate::{Error, Result};

const CHUNK: u64 = 2048;
const Z95: f64 = 1.96;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash)]
pub enum ChannelMode {
    /// Flip each bit independently with probability `p_e`.
    #[default]
    Bitflip,
    /// Antipodal symbols through additive Gaussian noise, sign detection.
    Waveform,
}

impl ChannelMode {
    pub fn name(self) -> &'static str {
        match self {
            ChannelMode::Bitflip => "bitflip",
            ChannelMode::Waveform => "waveform",
        }
    }
}

impl fmt::Display for ChannelMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ChannelMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "bitflip" => Ok(ChannelMode::Bitflip),
            "waveform" => Ok(ChannelMode::Waveform),
            _ => Err(Error::invalid("channel_mode", format!("unknown channel mode `{s}`"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SimConfig {
    pub trials: u64,
    pub seed: u64,
    pub channel_mode: ChannelMode,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self { trials: 100_000, seed: 0, channel_mode: ChannelMode::Bitflip }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SimReport {
    pub mse: f64,
    pub half_width: f64,
    /// Empirical `E{(m̂_k − m_k)²}` per sensor.
    pub level_err_moments: Vec<f64>,
    pub level_err_half_widths: Vec<f64>,
    pub trials: u64,
    pub seed: u64,
    pub channel_mode: ChannelMode,
}

/// Coherent BPSK hard-decision error probability `Q(√(2γP/L))`.
pub fn bit_error_prob(cnr: f64, power: f64, rate: f64) -> f64 {
    0.5 * erfc((cnr * power / rate).sqrt())
}

struct Link {
    quantizer: Quantizer,
    p_err: f64,
    /// Received amplitude `|h|·√(P/L)` and noise deviation `σ_w` (waveform mode).
    amplitude: f64,
    noise_sd: f64,
}

#[derive(Clone, Default)]
struct Partial {
    se: f64,
    se2: f64,
    lv: Vec<f64>,
    lv2: Vec<f64>,
}

impl Partial {
    fn new(k: usize) -> Self {
        Self { se: 0.0, se2: 0.0, lv: vec![0.0; k], lv2: vec![0.0; k] }
    }

    fn merge(&mut self, other: &Partial) {
        self.se += other.se;
        self.se2 += other.se2;
        for k in 0..self.lv.len() {
            self.lv[k] += other.lv[k];
            self.lv2[k] += other.lv2[k];
        }
    }
}

fn check_rates(alloc: &Allocation, model: &NetworkModel) -> Result<()> {
    if alloc.rates.len() != model.sensors() || alloc.powers.len() != model.sensors() {
        return Err(Error::invalid("allocation", format!("expected {} sensors", model.sensors())));
    }
    for (k, &r) in alloc.rates.iter().enumerate() {
        if r.fract() != 0.0 || !(0.0..=52.0).contains(&r) {
            return Err(Error::invalid(
                format!("allocation.rates[{k}]"),
                format!("simulation needs an integer rate in 0..=52, got {r}"),
            ));
        }
        if !(alloc.powers[k] >= 0.0 && alloc.powers[k].is_finite()) {
            return Err(Error::invalid(format!("allocation.powers[{k}]"), "must be non-negative"));
        }
    }
    Ok(())
}

/// End-to-end Monte Carlo estimate of the fusion-center MSE.
pub fn simulate(model: &NetworkModel, alloc: &Allocation, cfg: &SimConfig) -> Result<SimReport> {
    check_rates(alloc, model)?;
    if cfg.trials == 0 {
        return Err(Error::invalid("trials", "must be at least 1"));
    }
    let stats = model.derive_stats()?;
    let k = model.sensors();
    let q = model.dim();
    let g = fusion_matrix(&stats, &alloc.rates)?;
    let chol = model.prior_cov().clone().cholesky().ok_or(Error::DegenerateCovariance)?.l();
    let noise_sd: Vec<f64> = model.obs_noise_var().iter().map(|v| v.sqrt()).collect();
    let links: Vec<Option<Link>> = (0..k)
        .map(|i| {
            let rate = alloc.rates[i];
            if rate == 0.0 {
                return Ok(None);
            }
            Ok(Some(Link {
                quantizer: Quantizer::new(rate as u32, stats.tau[i])?,
                p_err: bit_error_prob(stats.cnr[i], alloc.powers[i], rate),
                amplitude: model.channel_gain()[i].abs() * (alloc.powers[i] / rate).sqrt(),
                noise_sd: model.channel_noise_var()[i].sqrt(),
            }))
        })
        .collect::<Result<_>>()?;
    let gains = model.gains();

    let chunks = cfg.trials.div_ceil(CHUNK);
    let partials: Vec<Partial> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
            rng.set_stream(c);
            let n = CHUNK.min(cfg.trials - c * CHUNK);
            let mut acc = Partial::new(k);
            let mut m_hat = DVector::zeros(k);
            for _ in 0..n {
                let z = DVector::from_fn(q, |_, _| rng.sample::<f64, _>(StandardNormal));
                let theta = &chol * z;
                for i in 0..k {
                    let Some(link) = &links[i] else {
                        m_hat[i] = 0.0;
                        continue;
                    };
                    let x = gains.column(i).dot(&theta) + noise_sd[i] * rng.sample::<f64, _>(StandardNormal);
                    let index = link.quantizer.quantize(x).expect("finite sample");
                    let level = link.quantizer.level(index);
                    let mut bits = encode_bits(index, link.quantizer.bits()).expect("valid index");
                    transmit(&mut bits, link, cfg.channel_mode, &mut rng);
                    let received = link.quantizer.level_from_bits(&bits);
                    let e2 = (received - level).powi(2);
                    acc.lv[i] += e2;
                    acc.lv2[i] += e2 * e2;
                    m_hat[i] = received;
                }
                let err = (&g * &m_hat - theta).norm_squared();
                acc.se += err;
                acc.se2 += err * err;
            }
            acc
        })
        .collect();
    let mut total = Partial::new(k);
    for p in &partials {
        total.merge(p);
    }

    let n = cfg.trials as f64;
    let (mse, half_width) = mean_and_half_width(total.se, total.se2, n);
    let (level_err_moments, level_err_half_widths) =
        (0..k).map(|i| mean_and_half_width(total.lv[i], total.lv2[i], n)).unzip();
    Ok(SimReport {
        mse,
        half_width,
        level_err_moments,
        level_err_half_widths,
        trials: cfg.trials,
        seed: cfg.seed,
        channel_mode: cfg.channel_mode,
    })
}

fn transmit(bits: &mut [bool], link: &Link, mode: ChannelMode, rng: &mut ChaCha8Rng) {
    match mode {
        ChannelMode::Bitflip => {
            for b in bits.iter_mut() {
                if rng.random::<f64>() < link.p_err {
                    *b = !*b;
                }
            }
        }
        ChannelMode::Waveform => {
            for b in bits.iter_mut() {
                let s = if *b { 1.0 } else { -1.0 };
                let noise: f64 = StandardNormal.sample(rng);
                let r = link.amplitude * s + link.noise_sd * noise;
                *b = r > 0.0;
            }
        }
    }
}

fn mean_and_half_width(sum: f64, sum_sq: f64, n: f64) -> (f64, f64) {
    let mean = sum / n;
    if n < 2.0 {
        return (mean, 0.0);
    }
    let var = ((sum_sq - n * mean * mean) / (n - 1.0)).max(0.0);
    (mean, Z95 * (var / n).sqrt())
}

#[derive(Clone, Debug, PartialEq)]
pub struct LevelCheck {
    pub sensor: usize,
    pub empirical: f64,
    pub half_width: f64,
    pub bound: f64,
    pub pass: bool,
}

/// Compares each sensor's empirical level-error moment with `u_k`.
pub fn level_error_moment_check(model: &NetworkModel, alloc: &Allocation, cfg: &SimConfig) -> Result<Vec<LevelCheck>> {
    let report = simulate(model, alloc, cfg)?;
    let stats = model.derive_stats()?;
    Ok((0..model.sensors())
        .map(|k| {
            let bound = u_k(stats.tau[k], alloc.rates[k], stats.cnr[k], alloc.powers[k]);
            let empirical = report.level_err_moments[k];
            let half_width = report.level_err_half_widths[k];
            LevelCheck { sensor: k, empirical, half_width, bound, pass: empirical <= bound + 3.0 * half_width }
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bounds::evaluate;
    use crate::model::{reference_k3, ModelParams};
    use approx::assert_relative_eq;

    fn cfg(trials: u64, seed: u64) -> SimConfig {
        SimConfig { trials, seed, channel_mode: ChannelMode::Bitflip }
    }

    #[test]
    fn error_probability_values() {
        assert_eq!(bit_error_prob(1.0, 0.0, 3.0), 0.5);
        assert_relative_eq!(bit_error_prob(1.0, 1.0, 2.0), 0.158_655_253_931_457, epsilon = 1e-10);
        for i in 0..200 {
            let x = i as f64 * 0.05;
            assert!(bit_error_prob(1.0, x, 1.0) <= (-x).exp());
        }
    }

    #[test]
    fn same_seed_same_report() {
        let m = reference_k3(30.0, 12);
        let a = Allocation::new(vec![5.0, 4.0, 3.0], vec![12.0, 10.0, 8.0]);
        let r1 = simulate(&m, &a, &cfg(5000, 9)).unwrap();
        let r2 = simulate(&m, &a, &cfg(5000, 9)).unwrap();
        assert_eq!(r1, r2);
        let r3 = simulate(&m, &a, &cfg(5000, 10)).unwrap();
        assert_ne!(r1.mse, r3.mse);
    }

    #[test]
    fn worker_count_does_not_matter() {
        let m = reference_k3(30.0, 12);
        let a = Allocation::new(vec![5.0, 4.0, 3.0], vec![12.0, 10.0, 8.0]);
        let run = |threads| {
            rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .unwrap()
                .install(|| simulate(&m, &a, &cfg(9000, 3)).unwrap())
        };
        assert_eq!(run(1), run(4));
    }

    #[test]
    fn error_free_channel_matches_d1() {
        let m = reference_k3(1e6, 30);
        let a = Allocation::new(vec![10.0; 3], vec![1e6 / 3.0; 3]);
        let r = simulate(&m, &a, &cfg(40_000, 1)).unwrap();
        assert!(r.level_err_moments.iter().all(|v| *v == 0.0));
        let d1 = evaluate(&m.derive_stats().unwrap(), &a).unwrap().d1;
        assert!((r.mse - d1).abs() <= 3.0 * r.half_width, "mse={} d1={} hw={}", r.mse, d1, r.half_width);
    }

    #[test]
    fn zero_power_is_bounded() {
        let m = reference_k3(0.0001, 30);
        let a = Allocation::new(vec![10.0; 3], vec![0.0; 3]);
        let r = simulate(&m, &a, &cfg(4000, 2)).unwrap();
        let tr = m.derive_stats().unwrap().trace_prior;
        assert!(r.mse.is_finite() && r.mse <= 4.0 * tr);
    }

    #[test]
    fn one_bit_moment_matches_enumeration() {
        let m = NetworkModel::new(ModelParams {
            prior_cov: vec![vec![1.0]],
            sensor_gains: vec![vec![1.0]],
            obs_noise_var: vec![1.0],
            channel_gain: vec![1.0],
            channel_noise_var: vec![1.0],
            tau: Some(vec![2.0]),
            p_tot: 1.0,
            b_tot: 1,
        })
        .unwrap();
        let a = Allocation::new(vec![1.0], vec![1.0]);
        let pe = bit_error_prob(0.5, 1.0, 1.0);
        let exact = pe * 16.0;
        let checks = level_error_moment_check(&m, &a, &cfg(100_000, 4)).unwrap();
        assert!(checks[0].pass);
        assert!(exact <= checks[0].bound);
        assert!((checks[0].empirical - exact).abs() <= 3.0 * checks[0].half_width);
    }

    #[test]
    fn modes_agree() {
        let m = reference_k3(4.0, 9);
        let a = Allocation::new(vec![4.0, 3.0, 2.0], vec![2.0, 1.0, 1.0]);
        let b = simulate(&m, &a, &cfg(60_000, 5)).unwrap();
        let w = simulate(&m, &a, &SimConfig { channel_mode: ChannelMode::Waveform, ..cfg(60_000, 6) }).unwrap();
        let tol = 3.0 * (b.half_width.powi(2) + w.half_width.powi(2)).sqrt();
        assert!((b.mse - w.mse).abs() <= tol, "{} vs {} tol {}", b.mse, w.mse, tol);
    }

    #[test]
    fn rejects_fractional_rates() {
        let m = reference_k3(4.0, 9);
        let a = Allocation::new(vec![4.5, 3.0, 1.0], vec![2.0, 1.0, 1.0]);
        let e = simulate(&m, &a, &cfg(10, 5)).unwrap_err();
        assert!(e.is_validation());
        assert!(e.to_string().starts_with("allocation.rates[0]"));
    }

    #[test]
    fn mode_names() {
        assert_eq!("waveform".parse::<ChannelMode>().unwrap(), ChannelMode::Waveform);
        assert!("qam".parse::<ChannelMode>().is_err());
    }
}
