//! Concave minorizers of the user rates used by the MM steps.
//!
//! * [`CovSurrogateExpansion`] linearizes the interference log-determinant
//!   around a covariance point; the result is concave in the covariances.
//! * [`PhaseSurrogateExpansion`] builds a concave quadratic lower bound in the
//!   RIS coefficients around a phase point with the covariances held fixed.
//! * [`ccp_phase_constraint`] is the linearized `|theta_m|^2 >= 1` constraint.
//!
//! Both expansions are tight at their expansion point.

use std::f64::consts::LN_2;

use num_complex::Complex64;

use crate::channel::ChannelSet;
use crate::error::{Error, Result};
use crate::linalg::{inverse_hpd, psd_sqrt, CMatrix};
use crate::rate::{interference_matrix, ln_det_pd, CovarianceSet};

/// Expansion data for the covariance-step surrogate.
#[derive(Debug, Clone)]
pub struct CovSurrogateExpansion {
    n_users: usize,
    n_subbands: usize,
    noise_power: f64,
    /// Effective channels at the fixed phases, index `k * n_subbands + i`.
    channels: Vec<CMatrix>,
    /// `log2|D_ki|` at the expansion point.
    interference_logdet: Vec<f64>,
    /// `H^H D^{-1} H / ln 2` at the expansion point.
    gradients: Vec<CMatrix>,
    expansion: Vec<CMatrix>,
}

impl CovSurrogateExpansion {
    pub fn new(channels: &ChannelSet, theta: &[Complex64], covs_prev: &CovarianceSet) -> Result<Self> {
        covs_prev.check_shape(channels)?;
        let h = channels.effective_channels(theta)?;
        Ok(Self::from_effective(
            h,
            &covs_prev.raw(),
            channels.n_users,
            channels.n_subbands,
            channels.noise_power,
        ))
    }

    pub(crate) fn from_effective(channels: Vec<CMatrix>, covs_prev: &[CMatrix], n_users: usize, n_subbands: usize, noise_power: f64) -> Self {
        let mut interference_logdet = Vec::with_capacity(channels.len());
        let mut gradients = Vec::with_capacity(channels.len());
        for k in 0..n_users {
            for i in 0..n_subbands {
                let h = &channels[k * n_subbands + i];
                let sub: Vec<&CMatrix> = (0..n_users).map(|j| &covs_prev[j * n_subbands + i]).collect();
                let d = interference_matrix(h, &sub, k, noise_power);
                interference_logdet.push(ln_det_pd(&d) / LN_2);
                let d_inv = inverse_hpd(&d).expect("interference covariance is positive definite");
                gradients.push(h.adjoint_matmul(&d_inv.matmul(h)).hermitian_part().scale(1.0 / LN_2));
            }
        }
        Self {
            n_users,
            n_subbands,
            noise_power,
            channels,
            interference_logdet,
            gradients,
            expansion: covs_prev.to_vec(),
        }
    }

    pub fn n_users(&self) -> usize {
        self.n_users
    }

    pub(crate) fn channels(&self) -> &[CMatrix] {
        &self.channels
    }

    pub(crate) fn noise_power(&self) -> f64 {
        self.noise_power
    }

    fn check(&self, covs: &CovarianceSet) -> Result<()> {
        if covs.n_users() != self.n_users || covs.n_subbands() != self.n_subbands || covs.dim() != self.expansion[0].rows() {
            return Err(Error::argument("covariance set does not match the surrogate expansion"));
        }
        Ok(())
    }

    /// Surrogate rates for every user.
    pub(crate) fn values(&self, covs: &[CMatrix]) -> Vec<f64> {
        let ns = self.n_subbands;
        let mut out = vec![0.0; self.n_users];
        for i in 0..ns {
            for (k, acc) in out.iter_mut().enumerate() {
                let idx = k * ns + i;
                let total = self.total_received(idx, i, covs);
                let mut v = ln_det_pd(&total) / LN_2 - self.interference_logdet[idx];
                for j in (0..self.n_users).filter(|&j| j != k) {
                    let delta = &covs[j * ns + i] - &self.expansion[j * ns + i];
                    v -= self.gradients[idx].inner(&delta);
                }
                *acc += v;
            }
        }
        out
    }

    fn total_received(&self, idx: usize, i: usize, covs: &[CMatrix]) -> CMatrix {
        let h = &self.channels[idx];
        let mut total = CMatrix::zeros(h.rows(), h.rows());
        total.add_identity(self.noise_power);
        for j in 0..self.n_users {
            total += &h.congruence(&covs[j * self.n_subbands + i]);
        }
        total
    }

    /// Gradient of `sum_k weights[k] * tilde_r_k` with respect to every `P_ji`.
    pub(crate) fn weighted_gradient(&self, covs: &[CMatrix], weights: &[f64]) -> Vec<CMatrix> {
        let ns = self.n_subbands;
        let dim = self.expansion[0].rows();
        let mut grad = vec![CMatrix::zeros(dim, dim); covs.len()];
        for i in 0..ns {
            for (k, &w) in weights.iter().enumerate() {
                if w == 0.0 {
                    continue;
                }
                let idx = k * ns + i;
                let h = &self.channels[idx];
                let total = self.total_received(idx, i, covs);
                let t_inv = inverse_hpd(&total).expect("received covariance is positive definite");
                let own = h.adjoint_matmul(&t_inv.matmul(h)).hermitian_part();
                for j in 0..self.n_users {
                    grad[j * ns + i].axpy(w / LN_2, &own);
                    if j != k {
                        grad[j * ns + i].axpy(-w, &self.gradients[idx]);
                    }
                }
            }
        }
        grad
    }
}

/// Covariance-step lower bound of user `k`'s rate (bits).
pub fn tilde_rate_k(covs: &CovarianceSet, exp: &CovSurrogateExpansion, k: usize) -> Result<f64> {
    exp.check(covs)?;
    if k >= exp.n_users {
        return Err(Error::argument(format!("user {k} out of range")));
    }
    Ok(exp.values(&covs.raw())[k])
}

/// Gradient of [`tilde_rate_k`] with respect to every covariance block.
pub fn tilde_rate_gradient(covs: &CovarianceSet, exp: &CovSurrogateExpansion, k: usize) -> Result<Vec<CMatrix>> {
    exp.check(covs)?;
    if k >= exp.n_users {
        return Err(Error::argument(format!("user {k} out of range")));
    }
    let mut weights = vec![0.0; exp.n_users];
    weights[k] = 1.0;
    Ok(exp.weighted_gradient(&covs.raw(), &weights))
}

/// Concave quadratic `(c + 2 Re(l^T theta) - theta^H M theta) / ln 2` in bits.
#[derive(Debug, Clone)]
pub struct PhaseQuadratic {
    pub constant: f64,
    pub linear: Vec<Complex64>,
    /// Hermitian PSD curvature matrix.
    pub curvature: CMatrix,
}

impl PhaseQuadratic {
    pub fn value(&self, theta: &[Complex64]) -> f64 {
        let n = theta.len();
        let lin: Complex64 = self.linear.iter().zip(theta).map(|(l, t)| l * t).sum();
        let mut quad = 0.0;
        for r in 0..n {
            let row: Complex64 = (0..n).map(|c| self.curvature[(r, c)] * theta[c]).sum();
            quad += (theta[r].conj() * row).re;
        }
        (self.constant + 2.0 * lin.re - quad) / LN_2
    }

    /// Real gradient packed as complex numbers: `d/dRe + i d/dIm`.
    pub fn gradient(&self, theta: &[Complex64]) -> Vec<Complex64> {
        let n = theta.len();
        (0..n)
            .map(|r| {
                let row: Complex64 = (0..n).map(|c| self.curvature[(r, c)] * theta[c]).sum();
                (self.linear[r].conj() - row) * (2.0 / LN_2)
            })
            .collect()
    }
}

#[derive(Debug, Clone)]
struct PhaseTerms {
    rate_prev: f64,
    /// `Tr(S D^{-1})` at the expansion point.
    trace_sd: f64,
    /// `D^{-1} - (S + D)^{-1}`.
    weight: CMatrix,
    /// `V^H D^{-1}` at the expansion point.
    v_bar_dinv: CMatrix,
}

/// Expansion data for the phase-step surrogate.
#[derive(Debug, Clone)]
pub struct PhaseSurrogateExpansion {
    channels: ChannelSet,
    covs: Vec<CMatrix>,
    sqrt_covs: Vec<CMatrix>,
    theta_prev: Vec<Complex64>,
    terms: Vec<PhaseTerms>,
    quadratics: Vec<PhaseQuadratic>,
}

impl PhaseSurrogateExpansion {
    pub fn new(channels: &ChannelSet, covs: &CovarianceSet, theta_prev: &[Complex64]) -> Result<Self> {
        covs.check_shape(channels)?;
        let (n_users, ns) = (channels.n_users, channels.n_subbands);
        let raw = covs.raw();
        let sqrt_covs = raw.iter().map(psd_sqrt).collect::<Result<Vec<_>>>()?;
        let h = channels.effective_channels(theta_prev)?;

        let mut terms = Vec::with_capacity(n_users * ns);
        for k in 0..n_users {
            for i in 0..ns {
                let idx = k * ns + i;
                let sub: Vec<&CMatrix> = (0..n_users).map(|j| &raw[j * ns + i]).collect();
                let d = interference_matrix(&h[idx], &sub, k, channels.noise_power);
                let v_bar = h[idx].matmul(&sqrt_covs[idx]);
                let s = v_bar.matmul_adjoint(&v_bar);
                let total = &s + &d;
                let d_inv = inverse_hpd(&d)?;
                let total_inv = inverse_hpd(&total)?;
                let rate_prev = (ln_det_pd(&total) - ln_det_pd(&d)) / LN_2;
                terms.push(PhaseTerms {
                    rate_prev,
                    trace_sd: s.trace_of_product(&d_inv).re,
                    weight: (&d_inv - &total_inv).hermitian_part(),
                    v_bar_dinv: v_bar.adjoint_matmul(&d_inv),
                });
            }
        }

        let mut exp = Self {
            channels: channels.clone(),
            covs: raw,
            sqrt_covs,
            theta_prev: theta_prev.to_vec(),
            terms,
            quadratics: Vec::new(),
        };
        exp.quadratics = (0..n_users).map(|k| exp.build_quadratic(k)).collect();
        Ok(exp)
    }

    pub fn theta_prev(&self) -> &[Complex64] {
        &self.theta_prev
    }

    pub fn n_users(&self) -> usize {
        self.channels.n_users
    }

    pub fn quadratic(&self, k: usize) -> &PhaseQuadratic {
        &self.quadratics[k]
    }

    pub fn quadratics(&self) -> &[PhaseQuadratic] {
        &self.quadratics
    }

    /// Collects constant, linear and curvature coefficients of user `k`'s
    /// surrogate by expanding `H(theta) = F + sum_m theta_m g_m b_m^T`.
    fn build_quadratic(&self, k: usize) -> PhaseQuadratic {
        let ch = &self.channels;
        let (n_users, ns, n_ris) = (ch.n_users, ch.n_subbands, ch.n_ris);
        let mut constant = 0.0;
        let mut linear = vec![Complex64::new(0.0, 0.0); n_ris];
        let mut curvature = CMatrix::zeros(n_ris, n_ris);

        for i in 0..ns {
            let idx = k * ns + i;
            let t = &self.terms[idx];
            let g_user = &ch.user_ris[idx];
            let g_bs = &ch.ris_bs[i];
            let f = &ch.direct[idx];

            let mut q = CMatrix::zeros(ch.n_bs, ch.n_bs);
            for j in 0..n_users {
                q += &self.covs[j * ns + i];
            }

            // -Tr(A (sigma^2 I + H Q H^H))
            let fq = f.matmul(&q);
            let a_f = t.weight.matmul(f);
            constant += t.rate_prev * LN_2 - t.trace_sd - ch.noise_power * t.weight.trace().re - fq.matmul_adjoint(f).trace_of_product(&t.weight).re;
            let cross = g_bs.matmul(&q).matmul(&a_f.adjoint()).matmul(g_user); // G_i Q F^H A G_ki
            let c_mat = g_user.adjoint_matmul(&t.weight.matmul(g_user));
            let r_mat = g_bs.congruence(&q);
            for n in 0..n_ris {
                for m in 0..n_ris {
                    curvature[(n, m)] += c_mat[(n, m)] * r_mat[(m, n)];
                }
                linear[n] -= cross[(n, n)];
            }

            // +2 Re Tr(V_bar^H D^{-1} H P^{1/2})
            let root = &self.sqrt_covs[idx];
            let w_f = t.v_bar_dinv.matmul(f).matmul(root);
            constant += 2.0 * w_f.trace().re;
            let lin_v = g_bs.matmul(root).matmul(&t.v_bar_dinv).matmul(g_user);
            for n in 0..n_ris {
                linear[n] += lin_v[(n, n)];
            }
        }
        PhaseQuadratic {
            constant,
            linear,
            curvature: curvature.hermitian_part(),
        }
    }

    /// Surrogate evaluated directly from the assembled channel.
    fn direct_value(&self, theta: &[Complex64], k: usize) -> Result<f64> {
        let ch = &self.channels;
        let ns = ch.n_subbands;
        let mut acc = 0.0;
        for i in 0..ns {
            let idx = k * ns + i;
            let t = &self.terms[idx];
            let h = ch.effective_channel(theta, k, i)?;
            let v = h.matmul(&self.sqrt_covs[idx]);
            let sub: Vec<&CMatrix> = (0..ch.n_users).map(|j| &self.covs[j * ns + i]).collect();
            let mut total = interference_matrix(&h, &sub, k, ch.noise_power);
            total += &v.matmul_adjoint(&v);
            let bracket = t.trace_sd + t.weight.trace_of_product(&total).re - 2.0 * t.v_bar_dinv.trace_of_product(&v).re;
            acc += t.rate_prev - bracket / LN_2;
        }
        Ok(acc)
    }
}

/// Phase-step lower bound of user `k`'s rate (bits), evaluated through the
/// effective channel at `theta` (which need not be unit modulus).
pub fn hat_rate_k(theta: &[Complex64], exp: &PhaseSurrogateExpansion, k: usize) -> Result<f64> {
    if theta.len() != exp.channels.n_ris {
        return Err(Error::argument(format!(
            "theta has {} elements, expansion expects {}",
            theta.len(),
            exp.channels.n_ris
        )));
    }
    if k >= exp.n_users() {
        return Err(Error::argument(format!("user {k} out of range")));
    }
    exp.direct_value(theta, k)
}

/// Slack of the linearized unit-modulus constraint
/// `2 Re(conj(prev) theta) - |prev|^2 >= 1 - eps`; feasible iff `>= 0`.
pub fn ccp_phase_constraint(theta: Complex64, theta_prev: Complex64, epsilon: f64) -> f64 {
    2.0 * (theta_prev.conj() * theta).re - theta_prev.norm_sqr() - (1.0 - epsilon)
}
