//! Config files, parameter sweeps and CSV output.
//!
//! Configs are TOML with three sections:
//!
//! ```toml
//! [model]
//! prior_cov = [[1.0, 0.7071067811865476], [0.7071067811865476, 2.0]]
//! gains = [[1.0, 1.0], [0.6, 0.6], [0.4, 0.4]]   # one row a_k per sensor
//! obs_noise_var = [1.0, 1.0, 1.0]
//! channel_gain = [1.0, 1.0, 1.0]                # |h_k|
//! channel_noise_var = [1.0, 1.0, 1.0]
//! # tau = [...]                                 # default: 4σ of x_k
//! p_tot_db = 20.0                               # dB relative to 1 W
//! b_tot = 30
//!
//! [allocator]                                   # optional
//! algorithm = "a-coupled"
//! j_max = 50
//! # eta, eps, i_max
//!
//! [sweep]                                       # optional
//! axis = "p_tot_db"                             # or "b_tot"
//! values = [0.0, 5.0, 10.0]
//! # fixed = 30                                 # the other budget, default from [model]
//! algorithms = ["a-coupled", "b-decoupled"]
//! trials = 100000
//! seed = 1
//! channel_mode = "bitflip"
//! timing = false
//! ```
//!
//! CSV columns, one row per (axis value, algorithm) in that order:
//! `axis, axis_value, algorithm, status, rates, powers_db, d1, d2, d_a, d_b,
//! two_d_a, mse, half_width, d0, b_opt, outer_iterations, wall_ms`.
//! `rates` and `powers_db` hold one entry per sensor joined by `;`. `d1`/`d2`
//! are `D_1, D_2^upb` for the a variants and the baseline, `D_1^upb,
//! D_2^uupb` for the b variants. Reals are written with 9 significant
//! digits. `wall_ms` stays empty unless timing is enabled.

use std::io::Write;
use std::path::Path;
use std::time::Instant;

use rayon::prelude::*;
use serde::Deserialize;

use crate::allocators::{allocate, Algorithm, AllocationResult, AllocatorConfig};
use crate::chansim::{simulate, ChannelMode, SimConfig, SimReport};
use crate::ellipsoid::SolveOptions;
use crate::model::{ModelParams, NetworkModel};
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SweepAxis {
    PTotDb,
    BTot,
}

impl SweepAxis {
    pub fn name(self) -> &'static str {
        match self {
            SweepAxis::PTotDb => "p_tot_db",
            SweepAxis::BTot => "b_tot",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepSpec {
    pub axis: SweepAxis,
    pub values: Vec<f64>,
    /// Value of the other axis: `b_tot` when sweeping power, `p_tot_db` otherwise.
    pub fixed: f64,
    pub algorithms: Vec<Algorithm>,
    pub trials: u64,
    pub seed: u64,
    pub channel_mode: ChannelMode,
    pub timing: bool,
}

impl SweepSpec {
    pub fn validate(&self) -> Result<()> {
        if self.values.is_empty() {
            return Err(Error::invalid("sweep.values", "must not be empty"));
        }
        if self.values.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(Error::invalid("sweep.values", "must be strictly increasing"));
        }
        if self.axis == SweepAxis::BTot && self.values.iter().any(|v| v.fract() != 0.0 || *v < 1.0) {
            return Err(Error::invalid("sweep.values", "bit budgets must be positive integers"));
        }
        if self.algorithms.is_empty() {
            return Err(Error::invalid("sweep.algorithms", "must not be empty"));
        }
        Ok(())
    }
}

/// A fully validated config file.
#[derive(Clone, Debug)]
pub struct Experiment {
    pub model: NetworkModel,
    pub allocator: AllocatorConfig,
    pub sweep: Option<SweepSpec>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    model: Option<RawModel>,
    #[serde(default)]
    allocator: RawAllocator,
    sweep: Option<RawSweep>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawModel {
    prior_cov: Option<Vec<Vec<f64>>>,
    gains: Option<Vec<Vec<f64>>>,
    obs_noise_var: Option<Vec<f64>>,
    channel_gain: Option<Vec<f64>>,
    channel_noise_var: Option<Vec<f64>>,
    tau: Option<Vec<f64>>,
    p_tot_db: Option<f64>,
    b_tot: Option<u32>,
}

#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct RawAllocator {
    algorithm: Option<String>,
    eta: Option<f64>,
    j_max: Option<usize>,
    eps: Option<f64>,
    i_max: Option<usize>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSweep {
    axis: Option<String>,
    values: Option<Vec<f64>>,
    fixed: Option<f64>,
    algorithms: Option<Vec<String>>,
    trials: Option<u64>,
    seed: Option<u64>,
    channel_mode: Option<String>,
    timing: Option<bool>,
}

fn need<T>(v: Option<T>, field: &str) -> Result<T> {
    v.ok_or_else(|| Error::invalid(field, "missing"))
}

/// `10^{dB/10}` watts.
pub fn db_to_watts(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

pub fn watts_to_db(w: f64) -> f64 {
    10.0 * w.log10()
}

pub fn load_config(path: impl AsRef<Path>) -> Result<Experiment> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path)
        .map_err(|source| Error::Io { path: path.display().to_string(), source })?;
    parse_config(&text)
}

pub fn parse_config(text: &str) -> Result<Experiment> {
    let raw: RawConfig = toml::from_str(text).map_err(|e| Error::invalid("config", e.message().to_string()))?;
    let m = need(raw.model, "model")?;
    let p_db = need(m.p_tot_db, "model.p_tot_db")?;
    if !p_db.is_finite() {
        return Err(Error::invalid("model.p_tot_db", "must be finite"));
    }
    let b_tot = need(m.b_tot, "model.b_tot")?;
    let model = NetworkModel::new(ModelParams {
        prior_cov: need(m.prior_cov, "model.prior_cov")?,
        sensor_gains: need(m.gains, "model.gains")?,
        obs_noise_var: need(m.obs_noise_var, "model.obs_noise_var")?,
        channel_gain: need(m.channel_gain, "model.channel_gain")?,
        channel_noise_var: need(m.channel_noise_var, "model.channel_noise_var")?,
        tau: m.tau,
        p_tot: db_to_watts(p_db),
        b_tot,
    })?;

    let a = raw.allocator;
    let defaults = AllocatorConfig::default();
    let allocator = AllocatorConfig {
        algorithm: match a.algorithm {
            Some(s) => s.parse().map_err(|_| Error::invalid("allocator.algorithm", format!("unknown `{s}`")))?,
            None => defaults.algorithm,
        },
        eta: a.eta,
        j_max: a.j_max.unwrap_or(defaults.j_max),
        ellipsoid: SolveOptions {
            eps: a.eps.unwrap_or(defaults.ellipsoid.eps),
            i_max: a.i_max,
            ..defaults.ellipsoid
        },
    };
    allocator.validate()?;

    let sweep = raw.sweep.map(|s| parse_sweep(s, p_db, b_tot)).transpose()?;
    Ok(Experiment { model, allocator, sweep })
}

fn parse_sweep(s: RawSweep, p_db: f64, b_tot: u32) -> Result<SweepSpec> {
    let axis = match s.axis.as_deref().unwrap_or("p_tot_db") {
        "p_tot_db" => SweepAxis::PTotDb,
        "b_tot" => SweepAxis::BTot,
        other => return Err(Error::invalid("sweep.axis", format!("unknown axis `{other}`"))),
    };
    let algorithms = match s.algorithms {
        Some(names) => names
            .iter()
            .enumerate()
            .map(|(i, n)| n.parse().map_err(|_| Error::invalid(format!("sweep.algorithms[{i}]"), format!("unknown `{n}`"))))
            .collect::<Result<Vec<_>>>()?,
        None => Algorithm::ALL[..4].to_vec(),
    };
    let channel_mode = match s.channel_mode {
        Some(m) => m.parse().map_err(|_| Error::invalid("sweep.channel_mode", format!("unknown `{m}`")))?,
        None => ChannelMode::Bitflip,
    };
    let spec = SweepSpec {
        axis,
        values: need(s.values, "sweep.values")?,
        fixed: s.fixed.unwrap_or(match axis {
            SweepAxis::PTotDb => f64::from(b_tot),
            SweepAxis::BTot => p_db,
        }),
        algorithms,
        trials: s.trials.unwrap_or(100_000),
        seed: s.seed.unwrap_or(0),
        channel_mode,
        timing: s.timing.unwrap_or(false),
    };
    spec.validate()?;
    Ok(spec)
}

/// One (axis value, algorithm) result.
#[derive(Clone, Debug, PartialEq)]
pub struct SweepRow {
    pub axis: SweepAxis,
    pub axis_value: f64,
    pub algorithm: Algorithm,
    pub outcome: std::result::Result<(AllocationResult, Option<SimReport>), String>,
    pub wall_ms: Option<f64>,
}

/// Model with the sweep point's budgets applied.
pub fn point_model(base: &NetworkModel, spec: &SweepSpec, value: f64) -> Result<NetworkModel> {
    let (p_db, b) = match spec.axis {
        SweepAxis::PTotDb => (value, spec.fixed),
        SweepAxis::BTot => (spec.fixed, value),
    };
    if b.fract() != 0.0 || b < 1.0 {
        return Err(Error::invalid("sweep.fixed", "bit budget must be a positive integer"));
    }
    base.with_budgets(db_to_watts(p_db), b as u32)
}

fn run_point(base: &NetworkModel, cfg: &AllocatorConfig, spec: &SweepSpec, value: f64, alg: Algorithm) -> SweepRow {
    let start = Instant::now();
    let outcome = (|| {
        let model = point_model(base, spec, value)?;
        let result = allocate(&model, &AllocatorConfig { algorithm: alg, ..cfg.clone() })?;
        let sim = if spec.trials > 0 {
            let sc = SimConfig { trials: spec.trials, seed: spec.seed, channel_mode: spec.channel_mode };
            Some(simulate(&model, &result.allocation, &sc)?)
        } else {
            None
        };
        Ok::<_, Error>((result, sim))
    })()
    .map_err(|e| e.to_string());
    let wall_ms = spec.timing.then(|| start.elapsed().as_secs_f64() * 1e3);
    SweepRow { axis: spec.axis, axis_value: value, algorithm: alg, outcome, wall_ms }
}

/// Runs every (value, algorithm) pair concurrently. Rows come back in
/// (value, algorithm) order; a failing point yields a failed row.
pub fn run_sweep(base: &NetworkModel, cfg: &AllocatorConfig, spec: &SweepSpec) -> Result<Vec<SweepRow>> {
    spec.validate()?;
    let jobs: Vec<(f64, Algorithm)> =
        spec.values.iter().flat_map(|&v| spec.algorithms.iter().map(move |&a| (v, a))).collect();
    Ok(jobs.into_par_iter().map(|(v, a)| run_point(base, cfg, spec, v, a)).collect())
}

pub const CSV_HEADER: [&str; 17] = [
    "axis",
    "axis_value",
    "algorithm",
    "status",
    "rates",
    "powers_db",
    "d1",
    "d2",
    "d_a",
    "d_b",
    "two_d_a",
    "mse",
    "half_width",
    "d0",
    "b_opt",
    "outer_iterations",
    "wall_ms",
];

/// Nine significant digits.
pub fn fmt_real(x: f64) -> String {
    format!("{x:.8e}")
}

fn joined(v: &[f64], f: impl Fn(f64) -> String) -> String {
    v.iter().map(|&x| f(x)).collect::<Vec<_>>().join(";")
}

fn row_record(row: &SweepRow) -> Vec<String> {
    let mut rec = vec![row.axis.name().to_string(), fmt_real(row.axis_value), row.algorithm.name().to_string()];
    let wall = row.wall_ms.map(fmt_real).unwrap_or_default();
    match &row.outcome {
        Err(msg) => {
            rec.push(format!("failed: {msg}"));
            rec.extend(std::iter::repeat_n(String::new(), 12));
        }
        Ok((res, sim)) => {
            let r = &res.report;
            let (d1, d2) = match res.algorithm {
                Algorithm::BCoupled | Algorithm::BDecoupled => (r.d1_upb, r.d2_uupb),
                _ => (r.d1, r.d2_upb),
            };
            rec.push("ok".to_string());
            rec.push(joined(&res.allocation.rates, |x| format!("{}", x as u64)));
            rec.push(joined(&res.allocation.powers, |p| fmt_real(watts_to_db(p))));
            for v in [d1, d2, r.d_a, r.d_b, 2.0 * r.d_a] {
                rec.push(fmt_real(v));
            }
            match sim {
                Some(s) => {
                    rec.push(fmt_real(s.mse));
                    rec.push(fmt_real(s.half_width));
                }
                None => rec.extend([String::new(), String::new()]),
            }
            rec.push(fmt_real(r.d0));
            rec.push(res.continuous.b_opt.map(|b| b.to_string()).unwrap_or_default());
            rec.push(res.continuous.outer_iterations.to_string());
        }
    }
    rec.push(wall);
    rec
}

pub fn write_csv<W: Write>(rows: &[SweepRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(CSV_HEADER)?;
    for row in rows {
        w.write_record(row_record(row))?;
    }
    w.flush().map_err(|source| Error::Io { path: "<csv>".into(), source })?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::reference_k3;

    const REFERENCE: &str = include_str!("../../../configs/reference_k3.cfg");

    #[test]
    fn bundled_config_is_the_reference_model() {
        let e = parse_config(REFERENCE).unwrap();
        let r = reference_k3(e.model.p_tot(), e.model.b_tot());
        assert_eq!(e.model.prior_cov(), r.prior_cov());
        assert_eq!(e.model.gains(), r.gains());
        assert_eq!(e.model.obs_noise_var(), r.obs_noise_var());
        assert_eq!(e.model.channel_gain(), r.channel_gain());
        assert_eq!(e.model.channel_noise_var(), r.channel_noise_var());
        assert_eq!(e.model.tau(), r.tau());
        assert!(e.sweep.is_some());
    }

    #[test]
    fn db_conversion() {
        assert_eq!(db_to_watts(0.0), 1.0);
        assert!((db_to_watts(30.0) - 1000.0).abs() < 1e-9);
        assert!((watts_to_db(100.0) - 20.0).abs() < 1e-12);
    }

    #[test]
    fn field_paths_in_errors() {
        let bad = REFERENCE.replace("obs_noise_var = [1.0, 1.0, 1.0]", "obs_noise_var = [1.0, -1.0, 1.0]");
        let e = parse_config(&bad).unwrap_err();
        assert!(e.is_validation());
        assert!(e.to_string().starts_with("model.obs_noise_var[1]"), "{e}");
        let missing = REFERENCE.replace("b_tot = 30", "");
        assert_eq!(parse_config(&missing).unwrap_err().to_string(), "model.b_tot: missing");
        let mismatch = REFERENCE.replace("channel_gain = [1.0, 1.0, 1.0]", "channel_gain = [1.0, 1.0]");
        assert!(parse_config(&mismatch).unwrap_err().to_string().starts_with("model.channel_gain"));
        let not_spd = REFERENCE.replace("[0.7071067811865476, 2.0]", "[0.7071067811865476, -2.0]");
        assert!(parse_config(&not_spd).unwrap_err().to_string().starts_with("model.prior_cov"));
    }

    #[test]
    fn sweep_validation() {
        let bad = REFERENCE.replace("values = [", "values = [50.0, ");
        assert!(parse_config(&bad).unwrap_err().to_string().starts_with("sweep.values"));
    }

    #[test]
    fn csv_is_deterministic_and_ordered() {
        let e = parse_config(REFERENCE).unwrap();
        let spec = SweepSpec {
            axis: SweepAxis::PTotDb,
            values: vec![10.0, 20.0],
            fixed: 6.0,
            algorithms: vec![Algorithm::BDecoupled, Algorithm::Uniform],
            trials: 2000,
            seed: 5,
            channel_mode: ChannelMode::Bitflip,
            timing: false,
        };
        let render = || {
            let rows = run_sweep(&e.model, &e.allocator, &spec).unwrap();
            let mut buf = Vec::new();
            write_csv(&rows, &mut buf).unwrap();
            String::from_utf8(buf).unwrap()
        };
        let a = render();
        assert_eq!(a, render());
        let lines: Vec<&str> = a.lines().collect();
        assert_eq!(lines.len(), 5);
        assert!(lines[1].starts_with("p_tot_db,1.00000000e1,b-decoupled,ok,"));
        assert!(lines[2].starts_with("p_tot_db,1.00000000e1,uniform,ok,2;2;2,"));
        assert!(lines[4].starts_with("p_tot_db,2.00000000e1,uniform,"));
        assert!(lines[1].ends_with(','));
    }

    #[test]
    fn failed_point_does_not_abort() {
        let e = parse_config(REFERENCE).unwrap();
        let spec = SweepSpec {
            axis: SweepAxis::BTot,
            values: vec![3.0],
            fixed: f64::NAN,
            algorithms: vec![Algorithm::Uniform],
            trials: 0,
            seed: 0,
            channel_mode: ChannelMode::Bitflip,
            timing: false,
        };
        let rows = run_sweep(&e.model, &e.allocator, &spec).unwrap();
        assert!(rows[0].outcome.is_err());
        let mut buf = Vec::new();
        write_csv(&rows, &mut buf).unwrap();
        assert!(String::from_utf8(buf).unwrap().lines().nth(1).unwrap().contains("failed:"));
    }
}
