//! Frequency-domain channel synthesis and the RIS-assisted effective channel
//! `H_ki(theta) = G_ki diag(theta) G_i + F_ki`.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::config::ScenarioConfig;
use crate::error::{Error, Result};
use crate::linalg::CMatrix;

/// Tolerance on `| |theta_m| - 1 |`.
pub const UNIT_MODULUS_TOL: f64 = 1e-9;

/// RIS reflection coefficients, one per element, on the unit circle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseVector(Vec<Complex64>);

impl PhaseVector {
    pub fn new(theta: Vec<Complex64>) -> Result<Self> {
        if theta.is_empty() {
            return Err(Error::argument("phase vector must have at least one element"));
        }
        if let Some((m, z)) = theta
            .iter()
            .enumerate()
            .find(|(_, z)| !((z.norm() - 1.0).abs() <= UNIT_MODULUS_TOL))
        {
            return Err(Error::argument(format!(
                "phase element {m} has modulus {} (must be 1)",
                z.norm()
            )));
        }
        Ok(Self(theta))
    }

    pub fn from_angles(angles: &[f64]) -> Self {
        Self(angles.iter().map(|&a| Complex64::from_polar(1.0, a)).collect())
    }

    pub fn ones(n: usize) -> Self {
        Self(vec![Complex64::new(1.0, 0.0); n])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[Complex64] {
        &self.0
    }

    pub fn angles(&self) -> Vec<f64> {
        self.0.iter().map(|z| z.arg()).collect()
    }
}

/// One channel realization for every user and subband.
///
/// Per-user matrices are stored at index `k * n_subbands + i`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelSet {
    pub n_bs: usize,
    pub n_u: usize,
    pub n_users: usize,
    pub n_ris: usize,
    pub n_subbands: usize,
    pub noise_power: f64,
    /// RIS <- BS, `n_ris x n_bs`, one per subband.
    pub ris_bs: Vec<CMatrix>,
    /// user <- RIS, `n_u x n_ris`.
    pub user_ris: Vec<CMatrix>,
    /// user <- BS direct link, `n_u x n_bs`.
    pub direct: Vec<CMatrix>,
}

fn complex_gaussian<R: Rng + ?Sized>(rng: &mut R) -> Complex64 {
    let re: f64 = StandardNormal.sample(rng);
    let im: f64 = StandardNormal.sample(rng);
    Complex64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

fn rician_entry<R: Rng + ?Sized>(rng: &mut R, k_factor: f64, gain: f64) -> Complex64 {
    let los_phase: f64 = rng.random_range(0.0..2.0 * PI);
    let los = Complex64::from_polar((k_factor / (k_factor + 1.0)).sqrt(), los_phase);
    let nlos = complex_gaussian(rng) * (1.0 / (k_factor + 1.0)).sqrt();
    (los + nlos) * gain.sqrt()
}

fn rician_matrix<R: Rng + ?Sized>(rng: &mut R, rows: usize, cols: usize, k_factor: f64, gain: f64) -> CMatrix {
    CMatrix::from_fn(rows, cols, |_, _| rician_entry(rng, k_factor, gain))
}

fn rayleigh_matrix<R: Rng + ?Sized>(rng: &mut R, rows: usize, cols: usize, gain: f64) -> CMatrix {
    let amp = gain.sqrt();
    CMatrix::from_fn(rows, cols, |_, _| complex_gaussian(rng) * amp)
}

/// Draws an independent channel realization for every subband.
///
/// RIS-side links are Rician with a random-phase LoS component, direct links
/// are Rayleigh. Draw order is fixed, so a seeded stream reproduces the set.
pub fn sample_channels<R: Rng + ?Sized>(cfg: &ScenarioConfig, rng: &mut R) -> Result<ChannelSet> {
    cfg.validate()?;
    let k_factor = 10f64.powf(cfg.rician_factor_db / 10.0);
    let (n_users, n_sub) = (cfg.n_users, cfg.n_subbands);

    let ris_bs = (0..n_sub)
        .map(|_| rician_matrix(rng, cfg.n_ris, cfg.n_bs, k_factor, cfg.link_gain_ris_bs))
        .collect();
    let mut user_ris = Vec::with_capacity(n_users * n_sub);
    let mut direct = Vec::with_capacity(n_users * n_sub);
    for _k in 0..n_users {
        for _i in 0..n_sub {
            user_ris.push(rician_matrix(rng, cfg.n_u, cfg.n_ris, k_factor, cfg.link_gain_ris_user));
            direct.push(rayleigh_matrix(rng, cfg.n_u, cfg.n_bs, cfg.link_gain_direct));
        }
    }

    Ok(ChannelSet {
        n_bs: cfg.n_bs,
        n_u: cfg.n_u,
        n_users,
        n_ris: cfg.n_ris,
        n_subbands: n_sub,
        noise_power: cfg.noise_power,
        ris_bs,
        user_ris,
        direct,
    })
}

/// Uniform random phases on the unit circle.
pub fn random_phases<R: Rng + ?Sized>(n_ris: usize, rng: &mut R) -> PhaseVector {
    assert!(n_ris >= 1, "n_ris must be at least 1");
    PhaseVector(
        (0..n_ris)
            .map(|_| Complex64::from_polar(1.0, rng.random_range(0.0..2.0 * PI)))
            .collect(),
    )
}

/// `G_ki diag(theta) G_i + F_ki`. `theta` may lie off the unit circle.
pub fn assemble_channel(theta: &[Complex64], user_ris: &CMatrix, ris_bs: &CMatrix, direct: &CMatrix) -> Result<CMatrix> {
    let n_ris = theta.len();
    if user_ris.cols() != n_ris || ris_bs.rows() != n_ris {
        return Err(Error::argument(format!(
            "RIS dimension mismatch: theta has {n_ris} elements, G_ki is {}x{}, G_i is {}x{}",
            user_ris.rows(),
            user_ris.cols(),
            ris_bs.rows(),
            ris_bs.cols()
        )));
    }
    if direct.shape() != (user_ris.rows(), ris_bs.cols()) {
        return Err(Error::argument(format!(
            "direct link is {}x{}, expected {}x{}",
            direct.rows(),
            direct.cols(),
            user_ris.rows(),
            ris_bs.cols()
        )));
    }
    let scaled = CMatrix::from_fn(user_ris.rows(), n_ris, |r, m| user_ris[(r, m)] * theta[m]);
    let mut h = scaled.matmul(ris_bs);
    h += direct;
    Ok(h)
}

impl ChannelSet {
    #[inline]
    pub fn index(&self, k: usize, i: usize) -> usize {
        debug_assert!(k < self.n_users && i < self.n_subbands);
        k * self.n_subbands + i
    }

    pub fn effective_channel(&self, theta: &[Complex64], k: usize, i: usize) -> Result<CMatrix> {
        let idx = self.index(k, i);
        assemble_channel(theta, &self.user_ris[idx], &self.ris_bs[i], &self.direct[idx])
    }

    /// Effective channels for all `(k, i)`, indexed like the per-user matrices.
    pub fn effective_channels(&self, theta: &[Complex64]) -> Result<Vec<CMatrix>> {
        (0..self.n_users)
            .flat_map(|k| (0..self.n_subbands).map(move |i| (k, i)))
            .map(|(k, i)| self.effective_channel(theta, k, i))
            .collect()
    }

    /// Copy with every RIS-side link zeroed; only the direct links remain.
    pub fn without_ris(&self) -> Self {
        let mut out = self.clone();
        for m in out.ris_bs.iter_mut().chain(out.user_ris.iter_mut()) {
            *m = CMatrix::zeros(m.rows(), m.cols());
        }
        out
    }

    pub fn validate(&self) -> Result<()> {
        let per_user = self.n_users * self.n_subbands;
        if self.ris_bs.len() != self.n_subbands || self.user_ris.len() != per_user || self.direct.len() != per_user {
            return Err(Error::argument("channel set has the wrong number of matrices"));
        }
        if !(self.noise_power > 0.0) {
            return Err(Error::argument("noise power must be positive"));
        }
        let shapes_ok = self.ris_bs.iter().all(|m| m.shape() == (self.n_ris, self.n_bs))
            && self.user_ris.iter().all(|m| m.shape() == (self.n_u, self.n_ris))
            && self.direct.iter().all(|m| m.shape() == (self.n_u, self.n_bs));
        if !shapes_ok {
            return Err(Error::argument("channel matrix dimensions are inconsistent"));
        }
        let finite = self
            .ris_bs
            .iter()
            .chain(&self.user_ris)
            .chain(&self.direct)
            .all(CMatrix::is_finite);
        if !finite {
            return Err(Error::argument("channel set contains non-finite entries"));
        }
        Ok(())
    }
}
