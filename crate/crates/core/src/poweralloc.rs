//! Closed-form power allocation.
//!
//! Minimizes `Σ_k w_k L_k exp(−γ_k P_k / L_k)` subject to `Σ_k P_k = P_tot`,
//! `P_k ≥ 0`. The stationarity condition gives
//! `P_k = (L_k/γ_k)·[ln(γ_k w_k) − ln λ*]⁺`; the multiplier is fixed by the
//! budget over the active set. With `w_k = α_k` this is the `D_2^upb`
//! subproblem; with `w_k = τ_k²` it is the `D_2^uupb` one.

use crate::{Error, Result};

#[derive(Clone, Debug)]
pub struct WaterfillInput<'a> {
    pub weights: &'a [f64],
    pub cnr: &'a [f64],
    pub rates: &'a [f64],
    pub p_tot: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct PowerSolution {
    pub powers: Vec<f64>,
    /// `ln λ*` over the final active set.
    pub log_multiplier: f64,
    /// Sensors that receive no power, ascending.
    pub inactive: Vec<usize>,
}

/// The objective minimized by [`kkt_power`].
pub fn objective(weights: &[f64], cnr: &[f64], rates: &[f64], powers: &[f64]) -> f64 {
    (0..rates.len())
        .filter(|&k| rates[k] > 0.0)
        .map(|k| weights[k] * rates[k] * (-cnr[k] * powers[k] / rates[k]).exp())
        .sum()
}

fn check_input(input: &WaterfillInput) -> Result<()> {
    let k = input.rates.len();
    if input.weights.len() != k || input.cnr.len() != k {
        return Err(Error::invalid("powers", "weights, cnr and rates differ in length"));
    }
    if !(input.p_tot >= 0.0 && input.p_tot.is_finite()) {
        return Err(Error::invalid("p_tot", format!("must be non-negative, got {}", input.p_tot)));
    }
    Ok(())
}

/// KKT power allocation with a sort-and-drop active-set search.
pub fn kkt_power(input: &WaterfillInput) -> Result<PowerSolution> {
    check_input(input)?;
    let k = input.rates.len();
    let mut active: Vec<(usize, f64)> = (0..k)
        .filter(|&i| input.rates[i] > 0.0 && input.weights[i] > 0.0 && input.cnr[i] > 0.0)
        .map(|i| (i, (input.cnr[i] * input.weights[i]).ln()))
        .collect();
    if active.is_empty() {
        return Err(Error::NoActiveSensor);
    }
    // descending by ln(γw), ascending index on ties, so pops remove the weakest
    active.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));

    loop {
        let (mut slope, mut acc) = (0.0, 0.0);
        for &(i, lw) in &active {
            let c = input.rates[i] / input.cnr[i];
            slope += c;
            acc += c * lw;
        }
        let log_mult = (acc - input.p_tot) / slope;
        let weakest = active.last().expect("non-empty").1;
        if weakest >= log_mult || active.len() == 1 {
            let mut powers = vec![0.0; k];
            for &(i, lw) in &active {
                powers[i] = (input.rates[i] / input.cnr[i] * (lw - log_mult)).max(0.0);
            }
            let inactive = (0..k).filter(|&i| powers[i] == 0.0).collect();
            return Ok(PowerSolution { powers, log_multiplier: log_mult, inactive });
        }
        active.pop();
    }
}

/// Large-budget allocation `P_k = L_k P_tot / (γ_k Σ_{j active} L_j/γ_j)`.
pub fn asymptotic_power(rates: &[f64], cnr: &[f64], p_tot: f64, active: &[usize]) -> Result<Vec<f64>> {
    let active: Vec<usize> = active.iter().copied().filter(|&k| rates[k] > 0.0).collect();
    if active.is_empty() {
        return Err(Error::NoActiveSensor);
    }
    let denom: f64 = active.iter().map(|&k| rates[k] / cnr[k]).sum();
    let mut powers = vec![0.0; rates.len()];
    for &k in &active {
        powers[k] = rates[k] * p_tot / (cnr[k] * denom);
    }
    Ok(powers)
}

/// `∂P_k/∂γ_k` of the closed form with `λ*` held fixed:
/// `(L_k/γ_k²)(1 − ln(γ_k w_k) + ln λ*)`. Positive (water-filling) when
/// `γ_k w_k < e·λ*`, negative (inverse water-filling) above it.
pub fn cnr_sensitivity(rate: f64, cnr: f64, weight: f64, log_multiplier: f64) -> f64 {
    rate / (cnr * cnr) * (1.0 - (cnr * weight).ln() + log_multiplier)
}
