//! Central-cut ellipsoid method over the rate simplex
//! `{L : Σ L_k ≤ B, L_k ≥ ℓ_min}`.
//!
//! The ellipsoid is `{z : (z − c)ᵀ S⁻¹ (z − c) ≤ 1}`. Infeasible centers get a
//! feasibility cut (`−e_j` for a rate below `ℓ_min`, all-ones for a blown
//! rate sum); feasible centers get the objective gradient.

use nalgebra::{DMatrix, DVector};

use crate::{Error, Result};

/// Rates below this count as violating non-negativity; gradients diverge at 0.
pub const L_MIN: f64 = 1e-3;

#[derive(Clone, Debug, PartialEq)]
pub struct EllipsoidState {
    pub center: DVector<f64>,
    pub shape: DMatrix<f64>,
    pub iter: usize,
    pub best_feasible: Option<(DVector<f64>, f64)>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CutKind {
    Objective,
    RateSum,
    Nonnegative(usize),
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SolveOptions {
    pub eps: f64,
    /// `None` means `200·K`.
    pub i_max: Option<usize>,
    pub l_min: f64,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self { eps: 1e-6, i_max: None, l_min: L_MIN }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Solution {
    pub rates: Vec<f64>,
    pub objective: f64,
    pub iterations: usize,
    /// False when no center was ever feasible and `rates` is a projection.
    pub feasible_found: bool,
}

/// Ball of radius `(B/2)√K` around `(B/2)·1`, which passes through the
/// origin and every axis vertex of the simplex.
pub fn init(b_tot: f64, k: usize) -> Result<EllipsoidState> {
    if k < 2 {
        return Err(Error::OneDimensional);
    }
    let r2 = b_tot * b_tot * k as f64 / 4.0;
    Ok(EllipsoidState {
        center: DVector::from_element(k, b_tot / 2.0),
        shape: DMatrix::identity(k, k) * r2,
        iter: 0,
        best_feasible: None,
    })
}

fn violation(center: &DVector<f64>, b_tot: f64, l_min: f64) -> Option<CutKind> {
    if let Some(j) = center.iter().position(|&l| l < l_min) {
        return Some(CutKind::Nonnegative(j));
    }
    if center.sum() > b_tot {
        return Some(CutKind::RateSum);
    }
    None
}

/// Chooses the cut at the current center.
pub fn select_cut<G>(state: &EllipsoidState, mut grad: G, b_tot: f64, l_min: f64) -> Result<(DVector<f64>, CutKind)>
where
    G: FnMut(&[f64]) -> Result<Vec<f64>>,
{
    let k = state.center.len();
    Ok(match violation(&state.center, b_tot, l_min) {
        Some(CutKind::Nonnegative(j)) => {
            let mut g = DVector::zeros(k);
            g[j] = -1.0;
            (g, CutKind::Nonnegative(j))
        }
        Some(kind) => (DVector::from_element(k, 1.0), kind),
        None => (DVector::from_vec(grad(state.center.as_slice())?), CutKind::Objective),
    })
}

/// Minimum-volume ellipsoid containing the half of `state` where `gᵀ(z − c) ≤ 0`.
pub fn step(state: &EllipsoidState, grad: &DVector<f64>) -> Result<EllipsoidState> {
    let k = state.center.len() as f64;
    let sg = &state.shape * grad;
    let norm2 = grad.dot(&sg);
    if !(norm2 > 1e-300) {
        return Err(Error::DegenerateCut);
    }
    let dir = sg / norm2.sqrt();
    let center = &state.center - &dir / (k + 1.0);
    let mut shape = (&state.shape - &dir * dir.transpose() * (2.0 / (k + 1.0))) * (k * k / (k * k - 1.0));
    shape = (&shape + shape.transpose()) * 0.5;
    Ok(EllipsoidState { center, shape, iter: state.iter + 1, best_feasible: state.best_feasible.clone() })
}

/// Minimizes `objective` over the simplex and returns the best feasible center.
pub fn solve<F, G>(mut objective: F, mut grad: G, b_tot: f64, k: usize, opts: &SolveOptions) -> Result<Solution>
where
    F: FnMut(&[f64]) -> Result<f64>,
    G: FnMut(&[f64]) -> Result<Vec<f64>>,
{
    if k == 1 {
        return golden_section(objective, opts.l_min, b_tot, opts.eps);
    }
    let i_max = opts.i_max.unwrap_or(200 * k);
    let mut state = init(b_tot, k)?;
    while state.iter < i_max {
        let (g, kind) = select_cut(&state, &mut grad, b_tot, opts.l_min)?;
        if kind == CutKind::Objective {
            let value = objective(state.center.as_slice())?;
            if state.best_feasible.as_ref().is_none_or(|(_, best)| value < *best) {
                state.best_feasible = Some((state.center.clone(), value));
            }
            if g.dot(&(&state.shape * &g)).sqrt() < opts.eps {
                break;
            }
        }
        state = match step(&state, &g) {
            Ok(s) => s,
            Err(Error::DegenerateCut) if kind == CutKind::Objective => break,
            Err(e) => return Err(e),
        };
    }
    let iterations = state.iter;
    Ok(match state.best_feasible {
        Some((c, value)) => {
            let rates = clamp_feasible(c.as_slice(), b_tot);
            Solution { rates, objective: value, iterations, feasible_found: true }
        }
        None => {
            let rates = project_simplex(state.center.as_slice(), b_tot, opts.l_min);
            let value = objective(&rates)?;
            Solution { rates, objective: value, iterations, feasible_found: false }
        }
    })
}

fn clamp_feasible(rates: &[f64], b_tot: f64) -> Vec<f64> {
    let mut r: Vec<f64> = rates.iter().map(|x| x.max(0.0)).collect();
    let s: f64 = r.iter().sum();
    if s > b_tot {
        r.iter_mut().for_each(|x| *x *= b_tot / s);
    }
    r
}

/// Euclidean projection onto `{z : z ≥ lo, Σz ≤ total}`.
pub fn project_simplex(v: &[f64], total: f64, lo: f64) -> Vec<f64> {
    let clipped: Vec<f64> = v.iter().map(|x| x.max(lo)).collect();
    if clipped.iter().sum::<f64>() <= total {
        return clipped;
    }
    // shift to z − lo on the simplex of size total − K·lo
    let k = v.len();
    let cap = (total - lo * k as f64).max(0.0);
    let mut u: Vec<f64> = v.iter().map(|x| x - lo).collect();
    u.sort_by(|a, b| b.total_cmp(a));
    let (mut acc, mut theta) = (0.0, 0.0);
    for (i, ui) in u.iter().enumerate() {
        acc += ui;
        let t = (acc - cap) / (i + 1) as f64;
        if ui - t > 0.0 {
            theta = t;
        }
    }
    v.iter().map(|x| (x - lo - theta).max(0.0) + lo).collect()
}

/// Golden-section search on `[lo, hi]` for the single-sensor case.
pub fn golden_section<F>(mut objective: F, lo: f64, hi: f64, tol: f64) -> Result<Solution>
where
    F: FnMut(&[f64]) -> Result<f64>,
{
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let (mut a, mut b) = (lo, hi.max(lo));
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let mut fc = objective(&[c])?;
    let mut fd = objective(&[d])?;
    let mut iterations = 0;
    while b - a > tol.max(1e-12) && iterations < 200 {
        if fc <= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = objective(&[c])?;
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = objective(&[d])?;
        }
        iterations += 1;
    }
    // the endpoints are checked too: the optimum often sits on the budget
    let mut best = (c, fc);
    for x in [d, lo, hi] {
        let f = objective(&[x])?;
        if f < best.1 {
            best = (x, f);
        }
    }
    Ok(Solution { rates: vec![best.0], objective: best.1, iterations, feasible_found: true })
}
