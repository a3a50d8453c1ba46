#![allow(dead_code)]

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use risbc::{CMatrix, ChannelSet, CovarianceSet, ScenarioConfig};

pub fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn gaussian_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> CMatrix {
    CMatrix::from_fn(rows, cols, |_, _| {
        let re: f64 = StandardNormal.sample(rng);
        let im: f64 = StandardNormal.sample(rng);
        c(re, im)
    })
}

pub fn random_psd(rng: &mut ChaCha8Rng, n: usize) -> CMatrix {
    let b = gaussian_matrix(rng, n, n);
    b.matmul_adjoint(&b)
}

pub fn random_hermitian(rng: &mut ChaCha8Rng, n: usize) -> CMatrix {
    let b = gaussian_matrix(rng, n, n);
    (&b + &b.adjoint()).scale(0.5)
}

pub fn random_complex_vec(rng: &mut ChaCha8Rng, n: usize, radius: f64) -> Vec<Complex64> {
    (0..n)
        .map(|_| Complex64::from_polar(radius * rng.random::<f64>().sqrt(), rng.random_range(0.0..std::f64::consts::TAU)))
        .collect()
}

/// Random feasible covariances using a random fraction of the budget.
pub fn random_covs(rng: &mut ChaCha8Rng, n_users: usize, n_subbands: usize, dim: usize, budget: f64) -> CovarianceSet {
    risbc::validate::random_feasible_covs(rng, n_users, n_subbands, dim, budget)
}

pub fn scenario(n_users: usize, dim: usize, n_subbands: usize, n_ris: usize) -> ScenarioConfig {
    ScenarioConfig {
        n_users,
        n_bs: dim,
        n_u: dim,
        n_subbands,
        n_ris,
        link_gain_direct: 0.3,
        ..Default::default()
    }
}

/// Single-antenna, single-user channel set with scalar links per subband.
pub fn siso_channels(direct: &[Complex64], user_ris: &[Complex64], ris_bs: &[Complex64], noise_power: f64) -> ChannelSet {
    let n = direct.len();
    ChannelSet {
        n_bs: 1,
        n_u: 1,
        n_users: 1,
        n_ris: 1,
        n_subbands: n,
        noise_power,
        ris_bs: ris_bs.iter().map(|&z| CMatrix::scalar(z)).collect(),
        user_ris: user_ris.iter().map(|&z| CMatrix::scalar(z)).collect(),
        direct: direct.iter().map(|&z| CMatrix::scalar(z)).collect(),
    }
}

/// Water-filling over parallel channels with gains `g_i` and unit noise,
/// found by bisection on the water level.
pub fn water_filling(gains: &[f64], noise: f64, budget: f64) -> Vec<f64> {
    let alloc = |level: f64| -> Vec<f64> { gains.iter().map(|&g| (level - noise / g).max(0.0)).collect() };
    let (mut lo, mut hi) = (0.0, budget + gains.iter().map(|&g| noise / g).fold(0.0, f64::max));
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if alloc(mid).iter().sum::<f64>() > budget {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    alloc(0.5 * (lo + hi))
}
