//! MSE bound evaluation.
//!
//! With quantization-noise covariance `Q = diag(σ²_ε)` and the fusion matrix
//! `G = C_xθᵀ(C_x + Q)⁻¹`:
//!
//! - `D_1 = tr(C_θ) − tr(C_xθᵀ(C_x + Q)⁻¹C_xθ)`
//! - `D_2^upb = Σ_k u_k ‖g_k‖²`, `u_k = (4τ_k²L_k/3)·exp(−γ_kP_k/L_k)`
//! - `D_1^upb = tr(C_θ) − (tr C_xθᵀC_xθ)² / tr(C_xθᵀ(C_x + Q)C_xθ)`
//! - `D_2^uupb = λ̃ Σ_k u_k`, `λ̃ = λ_max(C_xθC_xθᵀ)/(λ_min(C_x) + min_k σ²_ε)²`
//! - `D_a = D_1 + D_2^upb ≤ D_b = D_1^upb + D_2^uupb`
//!
//! Sensors with zero rate transmit nothing and are removed from every matrix
//! before evaluation. The `D_b` path never performs a linear solve.

use nalgebra::DMatrix;

use crate::linalg::{select_rows, select_square, spd_solve, sym_eigenvalues};
use crate::model::{DerivedStats, NetworkModel};
use crate::quantizer::{noise_var, noise_var_slope};
use crate::{Error, Result};

/// Per-sensor rates (bits, possibly fractional) and transmit powers (W).
#[derive(Clone, Debug, PartialEq)]
pub struct Allocation {
    pub rates: Vec<f64>,
    pub powers: Vec<f64>,
}

impl Allocation {
    pub fn new(rates: Vec<f64>, powers: Vec<f64>) -> Self {
        debug_assert_eq!(rates.len(), powers.len());
        Self { rates, powers }
    }

    pub fn sensors(&self) -> usize {
        self.rates.len()
    }

    pub fn active(&self) -> Vec<usize> {
        active_set(&self.rates)
    }

    pub fn total_rate(&self) -> f64 {
        self.rates.iter().sum()
    }

    pub fn total_power(&self) -> f64 {
        self.powers.iter().sum()
    }

    pub fn is_integral(&self) -> bool {
        self.rates.iter().all(|r| r.fract() == 0.0)
    }

    /// Budget, sign, and silent-sensor checks against `model`.
    pub fn validate(&self, model: &NetworkModel) -> Result<()> {
        let k = model.sensors();
        if self.rates.len() != k || self.powers.len() != k {
            return Err(Error::invalid("allocation", format!("expected {k} sensors")));
        }
        for i in 0..k {
            if !(self.rates[i] >= 0.0 && self.rates[i].is_finite()) {
                return Err(Error::invalid(format!("allocation.rates[{i}]"), "must be non-negative"));
            }
            if !(self.powers[i] >= 0.0 && self.powers[i].is_finite()) {
                return Err(Error::invalid(format!("allocation.powers[{i}]"), "must be non-negative"));
            }
            if self.powers[i] > 0.0 && self.rates[i] == 0.0 {
                return Err(Error::invalid(
                    format!("allocation.powers[{i}]"),
                    "power assigned to a silent sensor",
                ));
            }
        }
        if self.total_rate() > f64::from(model.b_tot()) + 1e-9 {
            return Err(Error::invalid("allocation.rates", "exceeds the bandwidth budget"));
        }
        if self.total_power() > model.p_tot() * (1.0 + 1e-9) + 1e-300 {
            return Err(Error::invalid("allocation.powers", "exceeds the power budget"));
        }
        Ok(())
    }
}

/// Every bound component for one allocation.
#[derive(Clone, Debug, PartialEq)]
pub struct BoundReport {
    pub d1: f64,
    pub d2_upb: f64,
    pub d1_upb: f64,
    pub d2_uupb: f64,
    pub d_a: f64,
    pub d_b: f64,
    pub d0: f64,
    /// q×K; zero columns for silent sensors.
    pub g_matrix: DMatrix<f64>,
    /// `σ²_ε` per sensor; reported as 0 for silent sensors.
    pub q_matrix_diag: Vec<f64>,
    /// `u_k` per sensor.
    pub m_prime_diag: Vec<f64>,
    /// `α_k = (4τ_k²/3)‖g_k‖²`.
    pub alpha: Vec<f64>,
    pub lambda_tilde: f64,
}

pub(crate) fn active_set(rates: &[f64]) -> Vec<usize> {
    (0..rates.len()).filter(|&k| rates[k] > 0.0).collect()
}

/// Upper bound on `E{(m̂_k − m_k)²}` for BPSK with hard decisions.
pub fn u_k(tau: f64, rate: f64, cnr: f64, power: f64) -> f64 {
    if rate <= 0.0 {
        return 0.0;
    }
    4.0 * tau * tau * rate / 3.0 * (-cnr * power / rate).exp()
}

/// `∂u_k/∂L_k = (4τ²/3)·exp(−γP/L)·(1 + γP/L)`.
fn u_rate_slope(tau: f64, rate: f64, cnr: f64, power: f64) -> f64 {
    let x = cnr * power / rate;
    4.0 * tau * tau / 3.0 * (-x).exp() * (1.0 + x)
}

fn u_vec(stats: &DerivedStats, alloc: &Allocation) -> Vec<f64> {
    (0..stats.sensors())
        .map(|k| u_k(stats.tau[k], alloc.rates[k], stats.cnr[k], alloc.powers[k]))
        .collect()
}

/// Solution of `(C_x + Q)X = C_xθ` over the active sensors.
struct Fused {
    idx: Vec<usize>,
    /// |S|×q, equals `G_Sᵀ`.
    x: DMatrix<f64>,
    cross_s: DMatrix<f64>,
}

impl Fused {
    fn new(stats: &DerivedStats, rates: &[f64]) -> Result<Option<Self>> {
        let idx = active_set(rates);
        if idx.is_empty() {
            return Ok(None);
        }
        let mut f = select_square(&stats.cxx, &idx);
        for (i, &k) in idx.iter().enumerate() {
            f[(i, i)] += noise_var(rates[k], stats.tau[k]);
        }
        let cross_s = select_rows(&stats.cxtheta, &idx);
        let x = spd_solve(&f, &cross_s)?;
        Ok(Some(Self { idx, x, cross_s }))
    }

    fn explained(&self) -> f64 {
        (self.cross_s.transpose() * &self.x).trace()
    }

    fn full_g(&self, q: usize, k: usize) -> DMatrix<f64> {
        let mut g = DMatrix::zeros(q, k);
        for (i, &s) in self.idx.iter().enumerate() {
            g.set_column(s, &self.x.row(i).transpose());
        }
        g
    }
}

/// `G = C_xθᵀ(C_x + Q)⁻¹` by linear solve, zero columns for silent sensors.
pub fn fusion_matrix(stats: &DerivedStats, rates: &[f64]) -> Result<DMatrix<f64>> {
    Ok(match Fused::new(stats, rates)? {
        Some(fz) => fz.full_g(stats.dim(), stats.sensors()),
        None => DMatrix::zeros(stats.dim(), stats.sensors()),
    })
}

pub fn d1(stats: &DerivedStats, rates: &[f64]) -> Result<f64> {
    Ok(match Fused::new(stats, rates)? {
        Some(fz) => stats.trace_prior - fz.explained(),
        None => stats.trace_prior,
    })
}

/// Power-allocation weights `α_k = (4τ_k²/3)‖g_k‖²`.
pub fn alpha(stats: &DerivedStats, rates: &[f64]) -> Result<Vec<f64>> {
    let g = fusion_matrix(stats, rates)?;
    Ok((0..stats.sensors())
        .map(|k| 4.0 * stats.tau[k].powi(2) / 3.0 * g.column(k).norm_squared())
        .collect())
}

pub fn d2_upb(stats: &DerivedStats, alloc: &Allocation) -> Result<f64> {
    let g = fusion_matrix(stats, &alloc.rates)?;
    let u = u_vec(stats, alloc);
    Ok((0..stats.sensors()).map(|k| u[k] * g.column(k).norm_squared()).sum())
}

pub fn d_a(stats: &DerivedStats, alloc: &Allocation) -> Result<f64> {
    let Some(fz) = Fused::new(stats, &alloc.rates)? else {
        return Ok(stats.trace_prior);
    };
    let u = u_vec(stats, alloc);
    let d2: f64 = fz
        .idx
        .iter()
        .enumerate()
        .map(|(i, &k)| u[k] * fz.x.row(i).norm_squared())
        .sum();
    Ok(stats.trace_prior - fz.explained() + d2)
}

/// `Σ_k δ_k σ²_{ε_k}` over active sensors.
pub fn weighted_quant_noise(stats: &DerivedStats, rates: &[f64]) -> f64 {
    active_set(rates)
        .into_iter()
        .map(|k| stats.delta_weights[k] * noise_var(rates[k], stats.tau[k]))
        .sum()
}

/// `(tr C_xθᵀC_xθ, tr C_xθᵀ C_x C_xθ)` over the active sensors, by direct products.
fn d1_upb_terms(stats: &DerivedStats, idx: &[usize]) -> (f64, f64) {
    let num: f64 = idx.iter().map(|&k| stats.delta_weights[k]).sum();
    let mut quad = 0.0;
    for &i in idx {
        for &j in idx {
            quad += stats.cxx[(i, j)] * stats.cxtheta.row(i).dot(&stats.cxtheta.row(j));
        }
    }
    (num, quad)
}

/// Inversion-free bound on `D_1`.
pub fn d1_upb(stats: &DerivedStats, rates: &[f64]) -> f64 {
    let idx = active_set(rates);
    let (num, quad) = d1_upb_terms(stats, &idx);
    if num == 0.0 {
        return stats.trace_prior;
    }
    stats.trace_prior - num * num / (quad + weighted_quant_noise(stats, rates))
}

/// `(λ_max(C_xθC_xθᵀ), λ_min(C_x))` restricted to the active sensors.
fn spectral_terms(stats: &DerivedStats, idx: &[usize]) -> (f64, f64) {
    if idx.len() == stats.sensors() {
        return (stats.lambda_max_cross, stats.lambda_min_cxx);
    }
    let cross = select_rows(&stats.cxtheta, idx);
    let lmax = sym_eigenvalues(&(&cross * cross.transpose())).last().copied().unwrap_or(0.0);
    let lmin = sym_eigenvalues(&select_square(&stats.cxx, idx))[0];
    (lmax.max(0.0), lmin)
}

/// Index of the smallest `σ²_ε` among active sensors, lowest index on ties.
fn argmin_noise(stats: &DerivedStats, rates: &[f64], idx: &[usize]) -> Option<(usize, f64)> {
    let mut best: Option<(usize, f64)> = None;
    for &k in idx {
        let s = noise_var(rates[k], stats.tau[k]);
        if best.is_none_or(|(_, b)| s < b) {
            best = Some((k, s));
        }
    }
    best
}

pub fn lambda_tilde(stats: &DerivedStats, rates: &[f64]) -> f64 {
    let idx = active_set(rates);
    let Some((_, smin)) = argmin_noise(stats, rates, &idx) else {
        return 0.0;
    };
    let (lmax, lmin) = spectral_terms(stats, &idx);
    lmax / (lmin + smin).powi(2)
}

pub fn d2_uupb(stats: &DerivedStats, alloc: &Allocation) -> f64 {
    lambda_tilde(stats, &alloc.rates) * u_vec(stats, alloc).iter().sum::<f64>()
}

pub fn d_b(stats: &DerivedStats, alloc: &Allocation) -> f64 {
    d1_upb(stats, &alloc.rates) + d2_uupb(stats, alloc)
}

/// Evaluate every bound component.
pub fn evaluate(stats: &DerivedStats, alloc: &Allocation) -> Result<BoundReport> {
    let k = stats.sensors();
    let g = fusion_matrix(stats, &alloc.rates)?;
    let d1 = d1(stats, &alloc.rates)?;
    let u = u_vec(stats, alloc);
    let col_norms: Vec<f64> = (0..k).map(|i| g.column(i).norm_squared()).collect();
    let d2_upb: f64 = u.iter().zip(&col_norms).map(|(a, b)| a * b).sum();
    let d1_upb = d1_upb(stats, &alloc.rates);
    let lambda_tilde = lambda_tilde(stats, &alloc.rates);
    let d2_uupb = lambda_tilde * u.iter().sum::<f64>();
    let q_matrix_diag = (0..k)
        .map(|i| if alloc.rates[i] > 0.0 { noise_var(alloc.rates[i], stats.tau[i]) } else { 0.0 })
        .collect();
    let alpha = (0..k).map(|i| 4.0 * stats.tau[i].powi(2) / 3.0 * col_norms[i]).collect();
    Ok(BoundReport {
        d1,
        d2_upb,
        d1_upb,
        d2_uupb,
        d_a: d1 + d2_upb,
        d_b: d1_upb + d2_uupb,
        d0: stats.d0,
        g_matrix: g,
        q_matrix_diag,
        m_prime_diag: u,
        alpha,
        lambda_tilde,
    })
}

fn require_interior(rates: &[f64]) -> Result<()> {
    match rates.iter().position(|r| !(*r > 0.0)) {
        Some(k) => Err(Error::GradientAtBoundary(k)),
        None => Ok(()),
    }
}

/// Analytic `∂D_a/∂L_k`:
/// `q'_k‖g_k‖² − 2q'_k[(C_x+Q)⁻¹M′GᵀG]_kk + u'_k‖g_k‖²`.
pub fn grad_da_rates(stats: &DerivedStats, alloc: &Allocation) -> Result<Vec<f64>> {
    require_interior(&alloc.rates)?;
    grad_da_active(stats, alloc)
}

/// As [`grad_da_rates`] over the active sensors; silent sensors get 0.
pub(crate) fn grad_da_active(stats: &DerivedStats, alloc: &Allocation) -> Result<Vec<f64>> {
    let idx = active_set(&alloc.rates);
    let mut out = vec![0.0; stats.sensors()];
    if idx.is_empty() {
        return Ok(out);
    }
    let n = idx.len();
    let mut f = select_square(&stats.cxx, &idx);
    for (i, &k) in idx.iter().enumerate() {
        f[(i, i)] += noise_var(alloc.rates[k], stats.tau[k]);
    }
    // X = (C_x+Q)⁻¹C_xθ = Gᵀ
    let x = spd_solve(&f, &select_rows(&stats.cxtheta, &idx))?;
    let gram = &x * x.transpose();
    let u: Vec<f64> = idx
        .iter()
        .map(|&k| u_k(stats.tau[k], alloc.rates[k], stats.cnr[k], alloc.powers[k]))
        .collect();
    let weighted = DMatrix::from_fn(n, n, |i, j| u[i] * gram[(i, j)]);
    let h = spd_solve(&f, &weighted)?;
    for (i, &k) in idx.iter().enumerate() {
        let (l, p, tau) = (alloc.rates[k], alloc.powers[k], stats.tau[k]);
        let dq = noise_var_slope(l, tau);
        let du = u_rate_slope(tau, l, stats.cnr[k], p);
        out[k] = dq * gram[(i, i)] - 2.0 * dq * h[(i, i)] + du * gram[(i, i)];
    }
    Ok(out)
}

/// Analytic `∂D_b/∂L_k`. The `min σ²_ε` term is charged to the lowest-index
/// minimizer only, which yields a valid subgradient at ties.
pub fn grad_db_rates(stats: &DerivedStats, alloc: &Allocation) -> Result<Vec<f64>> {
    require_interior(&alloc.rates)?;
    Ok(grad_db_active(stats, alloc))
}

pub(crate) fn grad_db_active(stats: &DerivedStats, alloc: &Allocation) -> Vec<f64> {
    let idx = active_set(&alloc.rates);
    let mut out = vec![0.0; stats.sensors()];
    let Some((amin, smin)) = argmin_noise(stats, &alloc.rates, &idx) else {
        return out;
    };
    let (num, quad) = d1_upb_terms(stats, &idx);
    let den = quad + weighted_quant_noise(stats, &alloc.rates);
    let u_sum: f64 = u_vec(stats, alloc).iter().sum();
    let (lmax, lmin) = spectral_terms(stats, &idx);
    let lt = lmax / (lmin + smin).powi(2);
    for &k in &idx {
        let (l, p, tau) = (alloc.rates[k], alloc.powers[k], stats.tau[k]);
        let dq = noise_var_slope(l, tau);
        let d1 = num * num * stats.delta_weights[k] * dq / (den * den);
        let mut d2 = lt * u_rate_slope(tau, l, stats.cnr[k], p);
        if k == amin {
            d2 -= lt * 2.0 * dq * u_sum / (lmin + smin);
        }
        out[k] = d1 + d2;
    }
    out
}

/// `∂D_2^upb/∂P_k = −α_kγ_k exp(−γ_kP_k/L_k)` (zero for silent sensors).
pub fn d2_upb_power_gradient(stats: &DerivedStats, alloc: &Allocation) -> Result<Vec<f64>> {
    let a = alpha(stats, &alloc.rates)?;
    Ok(power_terms(stats, alloc, &a, |w, g, e, _| -w * g * e))
}

/// Diagonal of the power Hessian of `D_2^upb`: `α_kγ_k²/L_k · exp(−γ_kP_k/L_k)`.
/// Off-diagonal entries are identically zero.
pub fn d2_upb_power_curvature(stats: &DerivedStats, alloc: &Allocation) -> Result<Vec<f64>> {
    let a = alpha(stats, &alloc.rates)?;
    Ok(power_terms(stats, alloc, &a, |w, g, e, l| w * g * g / l * e))
}

/// `∂D_2^uupb/∂P_k = −λ̃(4τ_k²γ_k/3) exp(−γ_kP_k/L_k)`.
pub fn d2_uupb_power_gradient(stats: &DerivedStats, alloc: &Allocation) -> Vec<f64> {
    let w = uupb_weights(stats, alloc);
    power_terms(stats, alloc, &w, |w, g, e, _| -w * g * e)
}

/// Diagonal of the power Hessian of `D_2^uupb`.
pub fn d2_uupb_power_curvature(stats: &DerivedStats, alloc: &Allocation) -> Vec<f64> {
    let w = uupb_weights(stats, alloc);
    power_terms(stats, alloc, &w, |w, g, e, l| w * g * g / l * e)
}

fn uupb_weights(stats: &DerivedStats, alloc: &Allocation) -> Vec<f64> {
    let lt = lambda_tilde(stats, &alloc.rates);
    (0..stats.sensors()).map(|k| lt * 4.0 * stats.tau[k].powi(2) / 3.0).collect()
}

fn power_terms(
    stats: &DerivedStats,
    alloc: &Allocation,
    weights: &[f64],
    term: impl Fn(f64, f64, f64, f64) -> f64,
) -> Vec<f64> {
    (0..stats.sensors())
        .map(|k| {
            let l = alloc.rates[k];
            if l <= 0.0 {
                return 0.0;
            }
            let g = stats.cnr[k];
            term(weights[k], g, (-g * alloc.powers[k] / l).exp(), l)
        })
        .collect()
}
