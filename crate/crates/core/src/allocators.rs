//! End-to-end allocation algorithms.
//!
//! *Coupled* variants alternate a closed-form power step with an ellipsoid
//! rate step until the bound stops improving. *Decoupled* variants fix rates
//! in closed form for each candidate bit budget `b`, pick powers, and keep
//! the budget `B^opt` just before the bound starts rising. The `a` variants
//! minimize `D_a`; the `b` variants minimize the inversion-free `D_b`.
//! Continuous rates are then migrated to integers by [`discretize`].

use std::fmt;
use std::str::FromStr;

use crate::bounds::{self, active_set, Allocation, BoundReport};
use crate::ellipsoid::{self, SolveOptions};
use crate::model::{DerivedStats, NetworkModel};
use crate::poweralloc::{kkt_power, WaterfillInput};
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Algorithm {
    ACoupled,
    BCoupled,
    ADecoupled,
    BDecoupled,
    Uniform,
}

impl Algorithm {
    pub const ALL: [Algorithm; 5] = [
        Algorithm::ACoupled,
        Algorithm::BCoupled,
        Algorithm::ADecoupled,
        Algorithm::BDecoupled,
        Algorithm::Uniform,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Algorithm::ACoupled => "a-coupled",
            Algorithm::BCoupled => "b-coupled",
            Algorithm::ADecoupled => "a-decoupled",
            Algorithm::BDecoupled => "b-decoupled",
            Algorithm::Uniform => "uniform",
        }
    }

    fn bound(self) -> Bound {
        match self {
            Algorithm::BCoupled | Algorithm::BDecoupled => Bound::B,
            _ => Bound::A,
        }
    }

    fn is_coupled(self) -> bool {
        matches!(self, Algorithm::ACoupled | Algorithm::BCoupled)
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let norm = s.trim().to_ascii_lowercase().replace('_', "-");
        Algorithm::ALL
            .into_iter()
            .find(|a| a.name() == norm)
            .ok_or_else(|| Error::invalid("algorithm", format!("unknown algorithm `{s}`")))
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
enum Bound {
    A,
    B,
}

impl Bound {
    fn value(self, stats: &DerivedStats, alloc: &Allocation) -> Result<f64> {
        match self {
            Bound::A => bounds::d_a(stats, alloc),
            Bound::B => Ok(bounds::d_b(stats, alloc)),
        }
    }

    fn rate_gradient(self, stats: &DerivedStats, alloc: &Allocation) -> Result<Vec<f64>> {
        match self {
            Bound::A => bounds::grad_da_active(stats, alloc),
            Bound::B => Ok(bounds::grad_db_active(stats, alloc)),
        }
    }

    fn power_weights(self, stats: &DerivedStats, rates: &[f64]) -> Result<Vec<f64>> {
        match self {
            Bound::A => bounds::alpha(stats, rates),
            Bound::B => Ok(stats.tau.iter().map(|t| t * t).collect()),
        }
    }

    /// `(D_1, D_2^upb)` or `(D_1^upb, D_2^uupb)`.
    fn components(self, stats: &DerivedStats, alloc: &Allocation) -> Result<(f64, f64)> {
        match self {
            Bound::A => Ok((bounds::d1(stats, &alloc.rates)?, bounds::d2_upb(stats, alloc)?)),
            Bound::B => Ok((bounds::d1_upb(stats, &alloc.rates), bounds::d2_uupb(stats, alloc))),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct AllocatorConfig {
    pub algorithm: Algorithm,
    /// Outer-loop improvement threshold; `None` means `1e-6·tr(C_θ)`.
    pub eta: Option<f64>,
    pub j_max: usize,
    pub ellipsoid: SolveOptions,
}

impl Default for AllocatorConfig {
    fn default() -> Self {
        Self { algorithm: Algorithm::ACoupled, eta: None, j_max: 50, ellipsoid: SolveOptions::default() }
    }
}

impl AllocatorConfig {
    pub fn with_algorithm(algorithm: Algorithm) -> Self {
        Self { algorithm, ..Self::default() }
    }

    pub fn validate(&self) -> Result<()> {
        if let Some(eta) = self.eta {
            if !(eta > 0.0 && eta.is_finite()) {
                return Err(Error::invalid("allocator.eta", "must be positive"));
            }
        }
        if self.j_max == 0 {
            return Err(Error::invalid("allocator.j_max", "must be at least 1"));
        }
        if !(self.ellipsoid.eps > 0.0) {
            return Err(Error::invalid("allocator.eps", "must be positive"));
        }
        if self.ellipsoid.i_max == Some(0) {
            return Err(Error::invalid("allocator.i_max", "must be at least 1"));
        }
        Ok(())
    }

    fn eta_for(&self, stats: &DerivedStats) -> f64 {
        self.eta.unwrap_or(1e-6 * stats.trace_prior)
    }
}

/// One point of the decoupled bit-budget search.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TracePoint {
    pub b: u32,
    /// `D_1` (a variants) or `D_1^upb` (b variants).
    pub d1: f64,
    /// `D_2^upb` (a variants) or `D_2^uupb` (b variants).
    pub d2: f64,
    pub bound: f64,
}

/// Continuous solution and its search history.
#[derive(Clone, Debug, PartialEq)]
pub struct Continuous {
    pub allocation: Allocation,
    /// Bound value after each accepted outer iteration (coupled only).
    pub history: Vec<f64>,
    pub outer_iterations: usize,
    /// Stopped by `J_max` rather than by the improvement test.
    pub capped: bool,
    pub b_opt: Option<u32>,
    pub trace: Vec<TracePoint>,
}

/// Integer allocation plus everything that led to it.
#[derive(Clone, Debug, PartialEq)]
pub struct AllocationResult {
    pub algorithm: Algorithm,
    pub allocation: Allocation,
    pub report: BoundReport,
    pub continuous: Continuous,
}

fn optimal_powers(stats: &DerivedStats, bound: Bound, rates: &[f64], p_tot: f64) -> Result<Vec<f64>> {
    let weights = bound.power_weights(stats, rates)?;
    let cnr: Vec<f64> = stats.cnr.iter().copied().collect();
    match kkt_power(&WaterfillInput { weights: &weights, cnr: &cnr, rates, p_tot }) {
        Ok(sol) => Ok(sol.powers),
        Err(Error::NoActiveSensor) => Ok(vec![0.0; rates.len()]),
        Err(e) => Err(e),
    }
}

fn compose(fixed: &[Option<f64>], free: &[usize], sub: &[f64]) -> Vec<f64> {
    let mut rates: Vec<f64> = fixed.iter().map(|f| f.unwrap_or(0.0)).collect();
    for (i, &k) in free.iter().enumerate() {
        rates[k] = sub[i];
    }
    rates
}

/// Alternating power/rate minimization over the sensors not in `fixed`,
/// with `budget` bits shared among them.
fn coupled_loop(
    stats: &DerivedStats,
    cfg: &AllocatorConfig,
    bound: Bound,
    p_tot: f64,
    budget: f64,
    fixed: &[Option<f64>],
) -> Result<Continuous> {
    let free: Vec<usize> = (0..fixed.len()).filter(|&k| fixed[k].is_none()).collect();
    let mut out = Continuous {
        allocation: Allocation::new(vec![], vec![]),
        history: Vec::new(),
        outer_iterations: 0,
        capped: false,
        b_opt: None,
        trace: Vec::new(),
    };
    let mut rates = compose(fixed, &free, &vec![budget / 2.0; free.len()]);
    if free.is_empty() || budget < cfg.ellipsoid.l_min * free.len() as f64 {
        rates = compose(fixed, &free, &vec![0.0; free.len()]);
        let powers = optimal_powers(stats, bound, &rates, p_tot)?;
        out.allocation = Allocation::new(rates, powers);
        return Ok(out);
    }

    let eta = cfg.eta_for(stats);
    let mut prev: Option<f64> = None;
    for j in 0..cfg.j_max {
        let powers = optimal_powers(stats, bound, &rates, p_tot)?;
        let objective = |sub: &[f64]| bound.value(stats, &Allocation::new(compose(fixed, &free, sub), powers.clone()));
        let gradient = |sub: &[f64]| {
            let g = bound.rate_gradient(stats, &Allocation::new(compose(fixed, &free, sub), powers.clone()))?;
            Ok(free.iter().map(|&k| g[k]).collect())
        };
        let sol = ellipsoid::solve(objective, gradient, budget, free.len(), &cfg.ellipsoid)?;
        let candidate = compose(fixed, &free, &sol.rates);
        let value = bound.value(stats, &Allocation::new(candidate.clone(), powers))?;
        out.outer_iterations = j + 1;
        match prev {
            Some(p) if value > p => break,
            Some(p) if p - value < eta => {
                rates = candidate;
                out.history.push(value);
                break;
            }
            _ => {}
        }
        rates = candidate;
        out.history.push(value);
        prev = Some(value);
        if j + 1 == cfg.j_max {
            out.capped = true;
        }
    }
    let powers = optimal_powers(stats, bound, &rates, p_tot)?;
    out.allocation = Allocation::new(rates, powers);
    Ok(out)
}

/// Closed-form rates for a budget of `b` bits:
/// `L_k = b/K' + ½log₂(δ_kτ_k² / (Π_j δ_jτ_j²)^{1/K'})` over the surviving set,
/// re-solved without any sensor whose rate would go negative.
pub fn decoupled_rates(stats: &DerivedStats, b: f64) -> Vec<f64> {
    let all: Vec<usize> = (0..stats.sensors()).collect();
    decoupled_rates_over(stats, b, &all)
}

fn decoupled_rates_over(stats: &DerivedStats, b: f64, candidates: &[usize]) -> Vec<f64> {
    let mut rates = vec![0.0; stats.sensors()];
    let logw: Vec<(usize, f64)> = candidates
        .iter()
        .filter(|&&k| stats.delta_weights[k] > 0.0)
        .map(|&k| (k, (stats.delta_weights[k] * stats.tau[k].powi(2)).log2()))
        .collect();
    let mut set = logw;
    while !set.is_empty() {
        let mean = set.iter().map(|(_, l)| l).sum::<f64>() / set.len() as f64;
        let level = b / set.len() as f64;
        let next: Vec<(usize, f64)> = set.iter().copied().filter(|(_, l)| level + 0.5 * (l - mean) >= 0.0).collect();
        if next.len() == set.len() {
            for (k, l) in set {
                rates[k] = level + 0.5 * (l - mean);
            }
            break;
        }
        set = next;
    }
    rates
}

fn decoupled_search(stats: &DerivedStats, bound: Bound, p_tot: f64, b_tot: u32) -> Result<Continuous> {
    let mut trace = Vec::with_capacity(b_tot as usize);
    let mut allocs = Vec::with_capacity(b_tot as usize);
    for b in 1..=b_tot {
        let rates = decoupled_rates(stats, f64::from(b));
        let powers = optimal_powers(stats, bound, &rates, p_tot)?;
        let alloc = Allocation::new(rates, powers);
        let (d1, d2) = bound.components(stats, &alloc)?;
        trace.push(TracePoint { b, d1, d2, bound: d1 + d2 });
        allocs.push(alloc);
    }
    // lowest b attaining the minimum; on a unimodal trace this is the point just
    // before the first increase
    let idx = (0..trace.len()).fold(0, |best, i| if trace[i].bound < trace[best].bound { i } else { best });
    Ok(Continuous {
        allocation: allocs.swap_remove(idx),
        history: Vec::new(),
        outer_iterations: 0,
        capped: false,
        b_opt: Some(trace[idx].b),
        trace,
    })
}

/// Continuous solution of the configured algorithm, without a bound report.
pub fn continuous(model: &NetworkModel, cfg: &AllocatorConfig) -> Result<Continuous> {
    cfg.validate()?;
    let stats = model.derive_stats()?;
    continuous_with(&stats, cfg, model.p_tot(), model.b_tot())
}

fn continuous_with(stats: &DerivedStats, cfg: &AllocatorConfig, p_tot: f64, b_tot: u32) -> Result<Continuous> {
    let bound = cfg.algorithm.bound();
    match cfg.algorithm {
        Algorithm::ACoupled | Algorithm::BCoupled => {
            coupled_loop(stats, cfg, bound, p_tot, f64::from(b_tot), &vec![None; stats.sensors()])
        }
        Algorithm::ADecoupled | Algorithm::BDecoupled => decoupled_search(stats, bound, p_tot, b_tot),
        Algorithm::Uniform => {
            let a = uniform_split(stats.sensors(), p_tot, b_tot);
            Ok(Continuous {
                allocation: a,
                history: Vec::new(),
                outer_iterations: 0,
                capped: false,
                b_opt: None,
                trace: Vec::new(),
            })
        }
    }
}

fn run(model: &NetworkModel, cfg: &AllocatorConfig, algorithm: Algorithm) -> Result<(Continuous, BoundReport)> {
    let cfg = AllocatorConfig { algorithm, ..cfg.clone() };
    let c = continuous(model, &cfg)?;
    let report = bounds::evaluate(&model.derive_stats()?, &c.allocation)?;
    Ok((c, report))
}

pub fn run_a_coupled(model: &NetworkModel, cfg: &AllocatorConfig) -> Result<(Continuous, BoundReport)> {
    run(model, cfg, Algorithm::ACoupled)
}

pub fn run_b_coupled(model: &NetworkModel, cfg: &AllocatorConfig) -> Result<(Continuous, BoundReport)> {
    run(model, cfg, Algorithm::BCoupled)
}

pub fn run_a_decoupled(model: &NetworkModel, cfg: &AllocatorConfig) -> Result<(Continuous, BoundReport)> {
    run(model, cfg, Algorithm::ADecoupled)
}

pub fn run_b_decoupled(model: &NetworkModel, cfg: &AllocatorConfig) -> Result<(Continuous, BoundReport)> {
    run(model, cfg, Algorithm::BDecoupled)
}

/// Integer rates from a continuous solution, spending at most `b_tot` bits.
pub fn discretize(model: &NetworkModel, cfg: &AllocatorConfig, cont: &Allocation) -> Result<Allocation> {
    discretize_within(model, cfg, cont, model.b_tot())
}

/// Slack below this many bits counts as a tight budget.
const TIGHT: f64 = 1e-3;

/// [`discretize`] with an explicit bit budget (the decoupled `B^opt`).
pub fn discretize_within(
    model: &NetworkModel,
    cfg: &AllocatorConfig,
    cont: &Allocation,
    budget: u32,
) -> Result<Allocation> {
    discretize_stats(&model.derive_stats()?, cfg, model.p_tot(), cont, budget)
}

fn discretize_stats(
    stats: &DerivedStats,
    cfg: &AllocatorConfig,
    p_tot: f64,
    cont: &Allocation,
    budget: u32,
) -> Result<Allocation> {
    let bound = cfg.algorithm.bound();
    let budget = f64::from(budget);
    if cont.is_integral() && cont.total_rate() <= budget {
        return Ok(cont.clone());
    }
    let k = stats.sensors();
    let snap = |x: f64| if (x - x.round()).abs() < 1e-9 { x.round() } else { x };
    let mut lc: Vec<f64> = cont.rates.iter().map(|&x| snap(x)).collect();
    let mut fixed: Vec<Option<f64>> = vec![None; k];

    loop {
        let free: Vec<usize> = (0..k).filter(|&i| fixed[i].is_none()).collect();
        if free.is_empty() {
            break;
        }
        let used: f64 = fixed.iter().flatten().sum();
        let planned = used + free.iter().map(|&i| lc[i]).sum::<f64>();
        let by_rate = |a: &usize, b: &usize| lc[*a].total_cmp(&lc[*b]).then(b.cmp(a));
        let (pick, value) = if planned < budget - TIGHT {
            let pick = *free.iter().min_by(|a, b| lc[**a].total_cmp(&lc[**b])).expect("free");
            let (lo, hi) = (lc[pick].floor(), lc[pick].ceil());
            let mut best = (lo, f64::INFINITY);
            for cand in [lo, hi] {
                if cand > lo && used + cand > budget {
                    continue;
                }
                let mut rates = compose(&fixed, &[], &[]);
                for &i in &free {
                    rates[i] = lc[i];
                }
                rates[pick] = cand;
                let powers = optimal_powers(stats, bound, &rates, p_tot)?;
                let v = bound.value(stats, &Allocation::new(rates, powers))?;
                if v < best.1 {
                    best = (cand, v);
                }
            }
            (pick, best.0)
        } else {
            let pick = *free.iter().max_by(|a, b| by_rate(a, b)).expect("free");
            (pick, lc[pick].ceil().min(budget - used).max(0.0))
        };
        fixed[pick] = Some(value);

        let remaining: Vec<usize> = free.into_iter().filter(|&i| i != pick).collect();
        if remaining.is_empty() {
            continue;
        }
        let left = budget - used - value;
        let refreshed = if cfg.algorithm.is_coupled() {
            coupled_loop(stats, cfg, bound, p_tot, left, &fixed)?.allocation.rates
        } else {
            decoupled_rates_over(stats, left, &remaining)
        };
        for &i in &remaining {
            lc[i] = snap(refreshed[i]);
        }
    }
    let rates: Vec<f64> = fixed.into_iter().map(|f| f.expect("all fixed")).collect();
    let powers = optimal_powers(stats, bound, &rates, p_tot)?;
    Ok(Allocation::new(rates, powers))
}

fn uniform_split(k: usize, p_tot: f64, b_tot: u32) -> Allocation {
    let base = b_tot / k as u32;
    let extra = (b_tot % k as u32) as usize;
    let rates: Vec<f64> = (0..k).map(|i| f64::from(base + u32::from(i < extra))).collect();
    let active = active_set(&rates).len().max(1);
    let powers = rates.iter().map(|&r| if r > 0.0 { p_tot / active as f64 } else { 0.0 }).collect();
    Allocation::new(rates, powers)
}

/// `L_k = ⌊B/K⌋` plus one extra bit for the lowest indices, equal power.
/// Sensors left without bits get no power.
pub fn uniform_baseline(model: &NetworkModel) -> Allocation {
    uniform_split(model.sensors(), model.p_tot(), model.b_tot())
}

/// Runs the configured algorithm through to an integer allocation.
pub fn allocate(model: &NetworkModel, cfg: &AllocatorConfig) -> Result<AllocationResult> {
    cfg.validate()?;
    let stats = model.derive_stats()?;
    let cont = continuous_with(&stats, cfg, model.p_tot(), model.b_tot())?;
    let allocation = match cfg.algorithm {
        Algorithm::Uniform => cont.allocation.clone(),
        _ => discretize_stats(&stats, cfg, model.p_tot(), &cont.allocation, cont.b_opt.unwrap_or(model.b_tot()))?,
    };
    let report = bounds::evaluate(&stats, &allocation)?;
    Ok(AllocationResult { algorithm: cfg.algorithm, allocation, report, continuous: cont })
}
