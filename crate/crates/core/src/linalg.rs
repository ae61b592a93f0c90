//! Small dense linear-algebra helpers shared by the bound evaluators.
//!
//! Every SPD solve goes through [`spd_solve`], which bumps a per-thread
//! counter. The inversion-free allocators are checked against that counter.

use std::cell::Cell;

use nalgebra::{DMatrix, DVector};

use crate::{Error, Result};

thread_local! {
    static SOLVES: Cell<u64> = const { Cell::new(0) };
}

/// Number of SPD solves performed on the current thread so far.
pub fn solve_count() -> u64 {
    SOLVES.with(Cell::get)
}

/// Solves `a x = b` for symmetric positive-definite `a` via Cholesky.
pub fn spd_solve(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    SOLVES.with(|c| c.set(c.get() + 1));
    let chol = a.clone().cholesky().ok_or(Error::DegenerateCovariance)?;
    Ok(chol.solve(b))
}

/// Ascending eigenvalues of a symmetric matrix.
pub fn sym_eigenvalues(a: &DMatrix<f64>) -> Vec<f64> {
    if a.nrows() == 0 {
        return Vec::new();
    }
    let mut ev: Vec<f64> = a.clone().symmetric_eigenvalues().iter().copied().collect();
    ev.sort_by(f64::total_cmp);
    ev
}

pub fn select_rows(m: &DMatrix<f64>, idx: &[usize]) -> DMatrix<f64> {
    DMatrix::from_fn(idx.len(), m.ncols(), |i, j| m[(idx[i], j)])
}

pub fn select_square(m: &DMatrix<f64>, idx: &[usize]) -> DMatrix<f64> {
    DMatrix::from_fn(idx.len(), idx.len(), |i, j| m[(idx[i], idx[j])])
}

pub fn select_vec(v: &DVector<f64>, idx: &[usize]) -> DVector<f64> {
    DVector::from_fn(idx.len(), |i, _| v[idx[i]])
}

/// Largest asymmetry `|a_ij − a_ji|` relative to the largest entry.
pub fn relative_asymmetry(a: &DMatrix<f64>) -> f64 {
    let scale = a.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(f64::MIN_POSITIVE);
    let mut worst = 0.0f64;
    for i in 0..a.nrows() {
        for j in 0..i {
            worst = worst.max((a[(i, j)] - a[(j, i)]).abs());
        }
    }
    worst / scale
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn solve_bumps_counter() {
        let before = solve_count();
        let a = DMatrix::from_row_slice(2, 2, &[2.0, 0.5, 0.5, 1.0]);
        let x = spd_solve(&a, &DMatrix::identity(2, 2)).unwrap();
        assert!(((&a * x) - DMatrix::identity(2, 2)).norm() < 1e-12);
        assert_eq!(solve_count(), before + 1);
    }

    #[test]
    fn indefinite_is_rejected() {
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]);
        assert!(matches!(spd_solve(&a, &DMatrix::identity(2, 2)), Err(Error::DegenerateCovariance)));
    }
}
