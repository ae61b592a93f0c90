//! Network parameters and the second-order statistics derived from them.

use nalgebra::{DMatrix, DVector};

use crate::linalg::{relative_asymmetry, spd_solve, sym_eigenvalues};
use crate::{Error, Result};

/// Raw model parameters before validation.
///
/// `sensor_gains[k]` is the observation-gain vector `a_k` (length q). When
/// `tau` is `None` the 4σ rule of [`default_tau`] is applied.
#[derive(Clone, Debug, PartialEq)]
pub struct ModelParams {
    pub prior_cov: Vec<Vec<f64>>,
    pub sensor_gains: Vec<Vec<f64>>,
    pub obs_noise_var: Vec<f64>,
    pub channel_gain: Vec<f64>,
    pub channel_noise_var: Vec<f64>,
    pub tau: Option<Vec<f64>>,
    pub p_tot: f64,
    pub b_tot: u32,
}

/// Validated network model. Immutable once built.
#[derive(Clone, Debug, PartialEq)]
pub struct NetworkModel {
    prior_cov: DMatrix<f64>,
    /// q×K, column k is `a_k`.
    gains: DMatrix<f64>,
    obs_noise_var: DVector<f64>,
    /// Channel gain magnitudes `|h_k|`.
    channel_gain: DVector<f64>,
    channel_noise_var: DVector<f64>,
    tau: DVector<f64>,
    p_tot: f64,
    b_tot: u32,
}

/// Second-order statistics shared by every bound evaluation.
#[derive(Clone, Debug, PartialEq)]
pub struct DerivedStats {
    /// `C_x = AᵀC_θA + C_n`, K×K.
    pub cxx: DMatrix<f64>,
    /// `C_xθ = AᵀC_θ`, K×q.
    pub cxtheta: DMatrix<f64>,
    /// `γ_k = |h_k|² / (2σ²_w)`.
    pub cnr: DVector<f64>,
    pub tau: DVector<f64>,
    pub lambda_min_cxx: f64,
    /// Largest eigenvalue of `C_xθ C_xθᵀ`.
    pub lambda_max_cross: f64,
    /// `δ_k`: squared norm of row k of `C_xθ`.
    pub delta_weights: DVector<f64>,
    pub trace_prior: f64,
    /// Clairvoyant floor `tr(C_θ) − tr(C_xθᵀ C_x⁻¹ C_xθ)`.
    pub d0: f64,
}

impl DerivedStats {
    pub fn sensors(&self) -> usize {
        self.cxx.nrows()
    }

    pub fn dim(&self) -> usize {
        self.cxtheta.ncols()
    }
}

/// Clipping thresholds four standard deviations out: `τ_k = 4·sqrt(a_kᵀC_θa_k + σ²_{n_k})`.
pub fn default_tau(prior_cov: &DMatrix<f64>, gains: &DMatrix<f64>, obs_noise_var: &DVector<f64>) -> DVector<f64> {
    DVector::from_fn(gains.ncols(), |k, _| {
        let a = gains.column(k);
        let var = (a.transpose() * prior_cov * a)[(0, 0)] + obs_noise_var[k];
        4.0 * var.sqrt()
    })
}

fn positive_entries(field: &str, v: &[f64], k: usize) -> Result<()> {
    if v.len() != k {
        return Err(Error::invalid(field, format!("expected {k} entries, got {}", v.len())));
    }
    for (i, x) in v.iter().enumerate() {
        if !(x.is_finite() && *x > 0.0) {
            return Err(Error::invalid(format!("{field}[{i}]"), format!("must be positive and finite, got {x}")));
        }
    }
    Ok(())
}

impl NetworkModel {
    pub fn new(params: ModelParams) -> Result<Self> {
        let q = params.prior_cov.len();
        if q == 0 {
            return Err(Error::invalid("model.prior_cov", "must be a non-empty square matrix"));
        }
        for (i, row) in params.prior_cov.iter().enumerate() {
            if row.len() != q {
                return Err(Error::invalid(
                    format!("model.prior_cov[{i}]"),
                    format!("expected {q} columns, got {}", row.len()),
                ));
            }
            if row.iter().any(|v| !v.is_finite()) {
                return Err(Error::invalid(format!("model.prior_cov[{i}]"), "non-finite entry"));
            }
        }
        let prior_cov = DMatrix::from_fn(q, q, |i, j| params.prior_cov[i][j]);
        if relative_asymmetry(&prior_cov) > 1e-12 {
            return Err(Error::invalid("model.prior_cov", "not symmetric"));
        }
        if sym_eigenvalues(&prior_cov)[0] <= 0.0 {
            return Err(Error::invalid("model.prior_cov", "not positive definite"));
        }

        let k = params.sensor_gains.len();
        if k == 0 {
            return Err(Error::invalid("model.gains", "at least one sensor is required"));
        }
        for (i, a) in params.sensor_gains.iter().enumerate() {
            if a.len() != q {
                return Err(Error::invalid(
                    format!("model.gains[{i}]"),
                    format!("expected length {q} (dimension of the prior), got {}", a.len()),
                ));
            }
            if a.iter().any(|v| !v.is_finite()) {
                return Err(Error::invalid(format!("model.gains[{i}]"), "non-finite entry"));
            }
        }
        let gains = DMatrix::from_fn(q, k, |i, j| params.sensor_gains[j][i]);

        positive_entries("model.obs_noise_var", &params.obs_noise_var, k)?;
        positive_entries("model.channel_gain", &params.channel_gain, k)?;
        positive_entries("model.channel_noise_var", &params.channel_noise_var, k)?;
        let obs_noise_var = DVector::from_vec(params.obs_noise_var);

        let tau = match params.tau {
            Some(t) => {
                positive_entries("model.tau", &t, k)?;
                DVector::from_vec(t)
            }
            None => default_tau(&prior_cov, &gains, &obs_noise_var),
        };
        if !(params.p_tot.is_finite() && params.p_tot >= 0.0) {
            return Err(Error::invalid("model.p_tot", format!("must be non-negative, got {}", params.p_tot)));
        }
        if params.b_tot == 0 {
            return Err(Error::invalid("model.b_tot", "must be at least one bit"));
        }

        Ok(Self {
            prior_cov,
            gains,
            obs_noise_var,
            channel_gain: DVector::from_vec(params.channel_gain),
            channel_noise_var: DVector::from_vec(params.channel_noise_var),
            tau,
            p_tot: params.p_tot,
            b_tot: params.b_tot,
        })
    }

    /// Same network under different budgets.
    pub fn with_budgets(&self, p_tot: f64, b_tot: u32) -> Result<Self> {
        if !(p_tot.is_finite() && p_tot >= 0.0) {
            return Err(Error::invalid("p_tot", format!("must be non-negative, got {p_tot}")));
        }
        if b_tot == 0 {
            return Err(Error::invalid("b_tot", "must be at least one bit"));
        }
        Ok(Self { p_tot, b_tot, ..self.clone() })
    }

    pub fn dim(&self) -> usize {
        self.prior_cov.nrows()
    }

    pub fn sensors(&self) -> usize {
        self.gains.ncols()
    }

    pub fn prior_cov(&self) -> &DMatrix<f64> {
        &self.prior_cov
    }

    pub fn gains(&self) -> &DMatrix<f64> {
        &self.gains
    }

    pub fn obs_noise_var(&self) -> &DVector<f64> {
        &self.obs_noise_var
    }

    pub fn channel_gain(&self) -> &DVector<f64> {
        &self.channel_gain
    }

    pub fn channel_noise_var(&self) -> &DVector<f64> {
        &self.channel_noise_var
    }

    pub fn tau(&self) -> &DVector<f64> {
        &self.tau
    }

    pub fn p_tot(&self) -> f64 {
        self.p_tot
    }

    pub fn b_tot(&self) -> u32 {
        self.b_tot
    }

    /// Observation covariance `C_x`, cross-covariance `C_xθ`, and everything
    /// else the bounds need.
    pub fn derive_stats(&self) -> Result<DerivedStats> {
        let at = self.gains.transpose();
        let cxtheta = &at * &self.prior_cov;
        let mut cxx = &cxtheta * &self.gains;
        for k in 0..self.sensors() {
            cxx[(k, k)] += self.obs_noise_var[k];
        }
        // re-symmetrize against rounding in the triple product
        let cxx = (&cxx + cxx.transpose()) * 0.5;

        let lambda_min_cxx = sym_eigenvalues(&cxx)[0];
        if lambda_min_cxx <= 0.0 {
            return Err(Error::DegenerateCovariance);
        }
        let cross = &cxtheta * cxtheta.transpose();
        let lambda_max_cross = sym_eigenvalues(&cross).last().copied().unwrap_or(0.0).max(0.0);
        let delta_weights = DVector::from_fn(self.sensors(), |k, _| cxtheta.row(k).norm_squared());

        let trace_prior = self.prior_cov.trace();
        let explained = (cxtheta.transpose() * spd_solve(&cxx, &cxtheta)?).trace();
        let d0 = (trace_prior - explained).clamp(0.0, trace_prior);

        let cnr = DVector::from_fn(self.sensors(), |k, _| {
            self.channel_gain[k].powi(2) / (2.0 * self.channel_noise_var[k])
        });

        Ok(DerivedStats {
            cxx,
            cxtheta,
            cnr,
            tau: self.tau.clone(),
            lambda_min_cxx,
            lambda_max_cross,
            delta_weights,
            trace_prior,
            d0,
        })
    }
}

/// The K=3 evaluation network: `C_θ = [[1, √2/2], [√2/2, 2]]`, gains
/// (1,1), (0.6,0.6), (0.4,0.4), unit noise variances and channel gains.
pub fn reference_k3(p_tot: f64, b_tot: u32) -> NetworkModel {
    let s = std::f64::consts::SQRT_2 / 2.0;
    NetworkModel::new(ModelParams {
        prior_cov: vec![vec![1.0, s], vec![s, 2.0]],
        sensor_gains: vec![vec![1.0, 1.0], vec![0.6, 0.6], vec![0.4, 0.4]],
        obs_noise_var: vec![1.0; 3],
        channel_gain: vec![1.0; 3],
        channel_noise_var: vec![1.0; 3],
        tau: None,
        p_tot,
        b_tot,
    })
    .expect("reference model is valid")
}
