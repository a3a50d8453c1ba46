//! Per-subband TIN rates, per-user sum rates and the fairness (minimum) rate.

use std::f64::consts::LN_2;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::channel::ChannelSet;
use crate::error::{Error, Result};
use crate::linalg::{logdet, logdet_cholesky, project_to_budget, CMatrix, HermitianPsd};

/// Slack allowed on the total trace budget.
pub const BUDGET_TOL: f64 = 1e-9;

/// Transmit covariances `P_ki`, stored at `k * n_subbands + i`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CovarianceSet {
    n_users: usize,
    n_subbands: usize,
    dim: usize,
    mats: Vec<HermitianPsd>,
}

impl CovarianceSet {
    pub fn new(n_users: usize, n_subbands: usize, mats: Vec<HermitianPsd>) -> Result<Self> {
        if n_users == 0 || n_subbands == 0 {
            return Err(Error::argument("covariance set needs at least one user and subband"));
        }
        if mats.len() != n_users * n_subbands {
            return Err(Error::argument(format!(
                "expected {} covariance matrices, got {}",
                n_users * n_subbands,
                mats.len()
            )));
        }
        let dim = mats[0].dim();
        if mats.iter().any(|m| m.dim() != dim) {
            return Err(Error::argument("covariance matrices differ in dimension"));
        }
        Ok(Self {
            n_users,
            n_subbands,
            dim,
            mats,
        })
    }

    pub fn zeros(n_users: usize, n_subbands: usize, dim: usize) -> Self {
        Self {
            n_users,
            n_subbands,
            dim,
            mats: vec![HermitianPsd::zeros(dim); n_users * n_subbands],
        }
    }

    /// Equal power on every user, subband and antenna.
    pub fn uniform(n_users: usize, n_subbands: usize, dim: usize, power_budget: f64) -> Self {
        let per_antenna = power_budget / (n_users * n_subbands * dim) as f64;
        Self {
            n_users,
            n_subbands,
            dim,
            mats: vec![HermitianPsd::scaled_identity(dim, per_antenna); n_users * n_subbands],
        }
    }

    /// Projects arbitrary Hermitian matrices onto the feasible set.
    pub fn projected(n_users: usize, n_subbands: usize, mats: &[CMatrix], power_budget: f64) -> Result<Self> {
        Self::new(n_users, n_subbands, project_to_budget(mats, power_budget)?)
    }

    pub fn n_users(&self) -> usize {
        self.n_users
    }

    pub fn n_subbands(&self) -> usize {
        self.n_subbands
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn get(&self, k: usize, i: usize) -> &HermitianPsd {
        &self.mats[k * self.n_subbands + i]
    }

    pub fn matrices(&self) -> &[HermitianPsd] {
        &self.mats
    }

    pub(crate) fn raw(&self) -> Vec<CMatrix> {
        self.mats.iter().map(|m| m.matrix().clone()).collect()
    }

    pub fn total_power(&self) -> f64 {
        self.mats.iter().map(HermitianPsd::trace).sum()
    }

    /// Power spent on each subband, summed over users.
    pub fn subband_powers(&self) -> Vec<f64> {
        (0..self.n_subbands)
            .map(|i| (0..self.n_users).map(|k| self.get(k, i).trace()).sum())
            .collect()
    }

    /// Checks the budget and re-checks PSD-ness of every block.
    pub fn check_feasible(&self, power_budget: f64) -> Result<()> {
        for (idx, m) in self.mats.iter().enumerate() {
            HermitianPsd::new(m.matrix().clone()).map_err(|e| {
                Error::argument(format!("covariance {idx} is not Hermitian PSD: {e}"))
            })?;
        }
        let total = self.total_power();
        if total > power_budget + BUDGET_TOL {
            return Err(Error::argument(format!(
                "total power {total} exceeds budget {power_budget}"
            )));
        }
        Ok(())
    }

    pub(crate) fn check_shape(&self, channels: &ChannelSet) -> Result<()> {
        if self.n_users != channels.n_users || self.n_subbands != channels.n_subbands || self.dim != channels.n_bs {
            return Err(Error::argument(format!(
                "covariances are {}x{} of dim {}, channels expect {}x{} of dim {}",
                self.n_users, self.n_subbands, self.dim, channels.n_users, channels.n_subbands, channels.n_bs
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateReport {
    /// Bits/s/Hz per user (rows) and subband (columns).
    pub per_subband: Vec<Vec<f64>>,
    pub per_user: Vec<f64>,
    pub min_rate: f64,
}

impl RateReport {
    pub fn from_per_subband(per_subband: Vec<Vec<f64>>) -> Self {
        let per_user: Vec<f64> = per_subband.iter().map(|row| row.iter().sum()).collect();
        let min_rate = per_user.iter().copied().fold(f64::INFINITY, f64::min);
        Self {
            per_subband,
            per_user,
            min_rate,
        }
    }
}

/// `sigma^2 I + sum_{j != k} H P_j H^H` for one subband.
pub(crate) fn interference_matrix(h: &CMatrix, covs: &[&CMatrix], k: usize, noise_power: f64) -> CMatrix {
    let mut d = CMatrix::zeros(h.rows(), h.rows());
    d.add_identity(noise_power);
    for (j, p) in covs.iter().enumerate() {
        if j != k {
            d += &h.congruence(p);
        }
    }
    d
}

/// Natural-log determinant of a matrix known to be Hermitian positive definite.
pub(crate) fn ln_det_pd(a: &CMatrix) -> f64 {
    logdet_cholesky(a).unwrap_or_else(|| logdet(&a.hermitian_part()).expect("positive definite by construction"))
}

/// Rate pieces `(log2|D+S|, log2|D|)` for one link.
pub(crate) fn rate_split(h: &CMatrix, covs: &[&CMatrix], k: usize, noise_power: f64) -> (f64, f64) {
    let d = interference_matrix(h, covs, k, noise_power);
    let mut total = h.congruence(covs[k]);
    total += &d;
    (ln_det_pd(&total) / LN_2, ln_det_pd(&d) / LN_2)
}

/// All `r_ki` given precomputed effective channels.
pub(crate) fn rates_from_channels(h: &[CMatrix], covs: &[CMatrix], n_users: usize, n_subbands: usize, noise_power: f64) -> Vec<Vec<f64>> {
    let mut out = vec![vec![0.0; n_subbands]; n_users];
    for i in 0..n_subbands {
        let sub: Vec<&CMatrix> = (0..n_users).map(|j| &covs[j * n_subbands + i]).collect();
        for (k, row) in out.iter_mut().enumerate() {
            let (r1, r2) = rate_split(&h[k * n_subbands + i], &sub, k, noise_power);
            row[i] = (r1 - r2).max(0.0);
        }
    }
    out
}

fn subband_covs(covs: &CovarianceSet, i: usize) -> Vec<&CMatrix> {
    (0..covs.n_users()).map(|j| covs.get(j, i).matrix()).collect()
}

fn check_indices(k: usize, i: usize, channels: &ChannelSet) -> Result<()> {
    if k >= channels.n_users || i >= channels.n_subbands {
        return Err(Error::argument(format!(
            "index (k={k}, i={i}) outside {} users x {} subbands",
            channels.n_users, channels.n_subbands
        )));
    }
    Ok(())
}

/// Noise-plus-interference covariance `D_ki`.
pub fn interference_cov(k: usize, i: usize, covs: &CovarianceSet, channels: &ChannelSet, theta: &[Complex64]) -> Result<HermitianPsd> {
    check_indices(k, i, channels)?;
    covs.check_shape(channels)?;
    let h = channels.effective_channel(theta, k, i)?;
    let d = interference_matrix(&h, &subband_covs(covs, i), k, channels.noise_power);
    Ok(HermitianPsd::from_trusted(d.hermitian_part()))
}

/// TIN rate of user `k` on subband `i`, in bits/s/Hz.
pub fn rate_ki(k: usize, i: usize, covs: &CovarianceSet, channels: &ChannelSet, theta: &[Complex64]) -> Result<f64> {
    check_indices(k, i, channels)?;
    covs.check_shape(channels)?;
    let h = channels.effective_channel(theta, k, i)?;
    let (r1, r2) = rate_split(&h, &subband_covs(covs, i), k, channels.noise_power);
    Ok((r1 - r2).max(0.0))
}

pub fn rate_report(covs: &CovarianceSet, channels: &ChannelSet, theta: &[Complex64]) -> Result<RateReport> {
    covs.check_shape(channels)?;
    let h = channels.effective_channels(theta)?;
    Ok(RateReport::from_per_subband(rates_from_channels(
        &h,
        &covs.raw(),
        covs.n_users(),
        covs.n_subbands(),
        channels.noise_power,
    )))
}

pub fn min_rate(covs: &CovarianceSet, channels: &ChannelSet, theta: &[Complex64]) -> Result<f64> {
    Ok(rate_report(covs, channels, theta)?.min_rate)
}
