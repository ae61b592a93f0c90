//! Row-major dense matrices with textbook algorithms and the bound formulas
//! spelled out with explicit inverses.

use std::ops::{Add, Index, IndexMut, Mul, Sub};

#[derive(Clone, Debug, PartialEq)]
pub struct Dense {
    pub rows: usize,
    pub cols: usize,
    data: Vec<f64>,
}

impl Dense {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![0.0; rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Self {
        let r = rows.len();
        let c = rows.first().map_or(0, Vec::len);
        let mut m = Self::zeros(r, c);
        for (i, row) in rows.iter().enumerate() {
            assert_eq!(row.len(), c, "ragged rows");
            for (j, v) in row.iter().enumerate() {
                m[(i, j)] = *v;
            }
        }
        m
    }

    pub fn diag(values: &[f64]) -> Self {
        let mut m = Self::zeros(values.len(), values.len());
        for (i, v) in values.iter().enumerate() {
            m[(i, i)] = *v;
        }
        m
    }

    pub fn transpose(&self) -> Self {
        let mut t = Self::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t[(j, i)] = self[(i, j)];
            }
        }
        t
    }

    pub fn trace(&self) -> f64 {
        (0..self.rows.min(self.cols)).map(|i| self[(i, i)]).sum()
    }

    pub fn scale(&self, s: f64) -> Self {
        let mut m = self.clone();
        m.data.iter_mut().for_each(|v| *v *= s);
        m
    }

    /// Gauss-Jordan elimination with partial pivoting.
    pub fn inverse(&self) -> Option<Self> {
        assert_eq!(self.rows, self.cols);
        let n = self.rows;
        let mut a = self.clone();
        let mut inv = Self::identity(n);
        for c in 0..n {
            let p = (c..n)
                .max_by(|&x, &y| a[(x, c)].abs().total_cmp(&a[(y, c)].abs()))
                .unwrap();
            if a[(p, c)].abs() < 1e-300 {
                return None;
            }
            for j in 0..n {
                a.data.swap(c * n + j, p * n + j);
                inv.data.swap(c * n + j, p * n + j);
            }
            let pivot = a[(c, c)];
            for j in 0..n {
                a[(c, j)] /= pivot;
                inv[(c, j)] /= pivot;
            }
            for r in 0..n {
                if r != c {
                    let f = a[(r, c)];
                    if f != 0.0 {
                        for j in 0..n {
                            a[(r, j)] -= f * a[(c, j)];
                            inv[(r, j)] -= f * inv[(c, j)];
                        }
                    }
                }
            }
        }
        Some(inv)
    }

    /// Determinant by Gaussian elimination.
    pub fn det(&self) -> f64 {
        assert_eq!(self.rows, self.cols);
        let n = self.rows;
        let mut a = self.clone();
        let mut det = 1.0;
        for c in 0..n {
            let p = (c..n)
                .max_by(|&x, &y| a[(x, c)].abs().total_cmp(&a[(y, c)].abs()))
                .unwrap();
            if a[(p, c)] == 0.0 {
                return 0.0;
            }
            if p != c {
                for j in 0..n {
                    a.data.swap(c * n + j, p * n + j);
                }
                det = -det;
            }
            det *= a[(c, c)];
            for r in c + 1..n {
                let f = a[(r, c)] / a[(c, c)];
                for j in c..n {
                    a[(r, j)] -= f * a[(c, j)];
                }
            }
        }
        det
    }

    /// Eigenvalues of a symmetric matrix by cyclic Jacobi rotations, ascending.
    pub fn symmetric_eigenvalues(&self) -> Vec<f64> {
        assert_eq!(self.rows, self.cols);
        let n = self.rows;
        let mut a = self.clone();
        for _sweep in 0..100 {
            let off: f64 = (0..n)
                .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
                .map(|(i, j)| a[(i, j)] * a[(i, j)])
                .sum();
            if off < 1e-30 {
                break;
            }
            for p in 0..n {
                for q in p + 1..n {
                    if a[(p, q)].abs() < 1e-300 {
                        continue;
                    }
                    let theta = (a[(q, q)] - a[(p, p)]) / (2.0 * a[(p, q)]);
                    let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                    let t = if theta == 0.0 { 1.0 } else { t };
                    let c = 1.0 / (t * t + 1.0).sqrt();
                    let s = t * c;
                    for k in 0..n {
                        let akp = a[(k, p)];
                        let akq = a[(k, q)];
                        a[(k, p)] = c * akp - s * akq;
                        a[(k, q)] = s * akp + c * akq;
                    }
                    for k in 0..n {
                        let apk = a[(p, k)];
                        let aqk = a[(q, k)];
                        a[(p, k)] = c * apk - s * aqk;
                        a[(q, k)] = s * apk + c * aqk;
                    }
                }
            }
        }
        let mut ev: Vec<f64> = (0..n).map(|i| a[(i, i)]).collect();
        ev.sort_by(f64::total_cmp);
        ev
    }

    pub fn select(&self, rows: &[usize], cols: &[usize]) -> Self {
        let mut m = Self::zeros(rows.len(), cols.len());
        for (i, &r) in rows.iter().enumerate() {
            for (j, &c) in cols.iter().enumerate() {
                m[(i, j)] = self[(r, c)];
            }
        }
        m
    }
}

impl Index<(usize, usize)> for Dense {
    type Output = f64;
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.data[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for Dense {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.data[i * self.cols + j]
    }
}

impl Mul for &Dense {
    type Output = Dense;
    fn mul(self, rhs: &Dense) -> Dense {
        assert_eq!(self.cols, rhs.rows);
        let mut m = Dense::zeros(self.rows, rhs.cols);
        for i in 0..self.rows {
            for j in 0..rhs.cols {
                m[(i, j)] = (0..self.cols).map(|k| self[(i, k)] * rhs[(k, j)]).sum();
            }
        }
        m
    }
}

impl Add for &Dense {
    type Output = Dense;
    fn add(self, rhs: &Dense) -> Dense {
        assert_eq!((self.rows, self.cols), (rhs.rows, rhs.cols));
        let mut m = self.clone();
        m.data.iter_mut().zip(&rhs.data).for_each(|(a, b)| *a += b);
        m
    }
}

impl Sub for &Dense {
    type Output = Dense;
    fn sub(self, rhs: &Dense) -> Dense {
        self + &rhs.scale(-1.0)
    }
}

/// The estimation problem written out with explicit inverses.
///
/// `sensors[k]` is the observation-gain vector of sensor k; the rate,
/// power, and threshold arguments are per-sensor. Sensors with zero rate are
/// dropped from every matrix.
#[derive(Clone, Debug)]
pub struct Problem {
    pub prior: Dense,
    pub sensors: Vec<Vec<f64>>,
    pub obs_noise: Vec<f64>,
    pub cnr: Vec<f64>,
    pub tau: Vec<f64>,
}

impl Problem {
    pub fn k(&self) -> usize {
        self.sensors.len()
    }

    fn gain_matrix(&self, idx: &[usize]) -> Dense {
        let q = self.prior.rows;
        let mut a = Dense::zeros(q, idx.len());
        for (c, &k) in idx.iter().enumerate() {
            for i in 0..q {
                a[(i, c)] = self.sensors[k][i];
            }
        }
        a
    }

    /// (C_x, C_xθ) restricted to `idx`.
    pub fn covariances(&self, idx: &[usize]) -> (Dense, Dense) {
        let a = self.gain_matrix(idx);
        let at = a.transpose();
        let cxt = &at * &self.prior;
        let noise: Vec<f64> = idx.iter().map(|&k| self.obs_noise[k]).collect();
        let cx = &(&cxt * &a) + &Dense::diag(&noise);
        (cx, cxt)
    }

    pub fn d0(&self) -> f64 {
        let all: Vec<usize> = (0..self.k()).collect();
        let (cx, cxt) = self.covariances(&all);
        let inv = cx.inverse().expect("singular C_x");
        self.prior.trace() - (&(&cxt.transpose() * &inv) * &cxt).trace()
    }

    pub fn quant_var(&self, k: usize, rate: f64) -> f64 {
        let m = rate.exp2() - 1.0;
        self.tau[k] * self.tau[k] / (3.0 * m * m)
    }

    fn active(rates: &[f64]) -> Vec<usize> {
        (0..rates.len()).filter(|&k| rates[k] > 0.0).collect()
    }

    fn loaded(&self, idx: &[usize], rates: &[f64]) -> (Dense, Dense) {
        let (cx, cxt) = self.covariances(idx);
        let q: Vec<f64> = idx.iter().map(|&k| self.quant_var(k, rates[k])).collect();
        (&cx + &Dense::diag(&q), cxt)
    }

    /// Full q×K fusion matrix; zero columns for silent sensors.
    pub fn fusion(&self, rates: &[f64]) -> Dense {
        let idx = Self::active(rates);
        let q = self.prior.rows;
        let mut g = Dense::zeros(q, self.k());
        if idx.is_empty() {
            return g;
        }
        let (f, cxt) = self.loaded(&idx, rates);
        let gs = &cxt.transpose() * &f.inverse().expect("singular");
        for (c, &k) in idx.iter().enumerate() {
            for i in 0..q {
                g[(i, k)] = gs[(i, c)];
            }
        }
        g
    }

    pub fn d1(&self, rates: &[f64]) -> f64 {
        let idx = Self::active(rates);
        if idx.is_empty() {
            return self.prior.trace();
        }
        let (f, cxt) = self.loaded(&idx, rates);
        let inv = f.inverse().expect("singular");
        self.prior.trace() - (&(&cxt.transpose() * &inv) * &cxt).trace()
    }

    pub fn u(&self, k: usize, rate: f64, power: f64) -> f64 {
        if rate <= 0.0 {
            return 0.0;
        }
        4.0 * self.tau[k] * self.tau[k] * rate / 3.0 * (-self.cnr[k] * power / rate).exp()
    }

    /// tr(G M' Gᵀ) with M' = diag(u) formed explicitly.
    pub fn d2_upb(&self, rates: &[f64], powers: &[f64]) -> f64 {
        let g = self.fusion(rates);
        let u: Vec<f64> = (0..self.k()).map(|k| self.u(k, rates[k], powers[k])).collect();
        (&(&g * &Dense::diag(&u)) * &g.transpose()).trace()
    }

    pub fn d1_upb(&self, rates: &[f64]) -> f64 {
        let idx = Self::active(rates);
        if idx.is_empty() {
            return self.prior.trace();
        }
        let (f, cxt) = self.loaded(&idx, rates);
        let num = (&cxt.transpose() * &cxt).trace();
        if num == 0.0 {
            return self.prior.trace();
        }
        let den = (&(&cxt.transpose() * &f) * &cxt).trace();
        self.prior.trace() - num * num / den
    }

    pub fn lambda_tilde(&self, rates: &[f64]) -> f64 {
        let idx = Self::active(rates);
        if idx.is_empty() {
            return 0.0;
        }
        let (cx, cxt) = self.covariances(&idx);
        let lmax = *(&cxt * &cxt.transpose()).symmetric_eigenvalues().last().unwrap();
        let lmin = cx.symmetric_eigenvalues()[0];
        let smin = idx
            .iter()
            .map(|&k| self.quant_var(k, rates[k]))
            .fold(f64::INFINITY, f64::min);
        lmax / (lmin + smin).powi(2)
    }

    pub fn d2_uupb(&self, rates: &[f64], powers: &[f64]) -> f64 {
        let total: f64 = (0..self.k()).map(|k| self.u(k, rates[k], powers[k])).sum();
        self.lambda_tilde(rates) * total
    }

    pub fn d_a(&self, rates: &[f64], powers: &[f64]) -> f64 {
        self.d1(rates) + self.d2_upb(rates, powers)
    }

    pub fn d_b(&self, rates: &[f64], powers: &[f64]) -> f64 {
        self.d1_upb(rates) + self.d2_uupb(rates, powers)
    }

    /// 4σ clipping thresholds computed straight from the prior.
    pub fn four_sigma_tau(prior: &Dense, sensors: &[Vec<f64>], obs_noise: &[f64]) -> Vec<f64> {
        sensors
            .iter()
            .zip(obs_noise)
            .map(|(a, n)| {
                let mut v = *n;
                for i in 0..a.len() {
                    for j in 0..a.len() {
                        v += a[i] * prior[(i, j)] * a[j];
                    }
                }
                4.0 * v.sqrt()
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn inverse_round_trip() {
        let m = Dense::from_rows(&[vec![4.0, 1.0, 0.5], vec![1.0, 3.0, 0.2], vec![0.5, 0.2, 2.0]]);
        let p = &m * &m.inverse().unwrap();
        for i in 0..3 {
            for j in 0..3 {
                let e = if i == j { 1.0 } else { 0.0 };
                assert!((p[(i, j)] - e).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn jacobi_matches_closed_form_2x2() {
        let m = Dense::from_rows(&[vec![2.0, 1.0], vec![1.0, 2.0]]);
        let ev = m.symmetric_eigenvalues();
        assert!((ev[0] - 1.0).abs() < 1e-12 && (ev[1] - 3.0).abs() < 1e-12);
    }

    #[test]
    fn det_of_diag() {
        assert!((Dense::diag(&[2.0, 3.0, 0.5]).det() - 3.0).abs() < 1e-12);
    }
}
