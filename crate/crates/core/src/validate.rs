//! Self-checks run by `risbc validate`: randomized property probes of the
//! numeric kernels, both surrogates and the alternating solver.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::Serialize;

use crate::channel::{random_phases, sample_channels};
use crate::config::{ScenarioConfig, SolverConfig};
use crate::error::Result;
use crate::linalg::{eigh, logdet, project_to_budget, CMatrix};
use crate::rate::{rate_report, CovarianceSet};
use crate::solver::{optimize, Init};
use crate::surrogate::{hat_rate_k, tilde_rate_k, CovSurrogateExpansion, PhaseSurrogateExpansion};

#[derive(Debug, Clone, Serialize)]
pub struct CheckOutcome {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

fn gaussian_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> CMatrix {
    CMatrix::from_fn(rows, cols, |_, _| {
        let re: f64 = StandardNormal.sample(rng);
        let im: f64 = StandardNormal.sample(rng);
        Complex64::new(re, im)
    })
}

/// Random feasible covariances with a random fraction of the budget in use.
pub fn random_feasible_covs(rng: &mut ChaCha8Rng, n_users: usize, n_subbands: usize, dim: usize, budget: f64) -> CovarianceSet {
    let mats: Vec<CMatrix> = (0..n_users * n_subbands)
        .map(|_| {
            let b = gaussian_matrix(rng, dim, dim);
            b.matmul_adjoint(&b)
        })
        .collect();
    let total: f64 = mats.iter().map(|m| m.trace().re).sum();
    let target = budget * rng.random_range(0.05..1.0);
    let scaled: Vec<CMatrix> = mats.iter().map(|m| m.scale(target / total)).collect();
    CovarianceSet::projected(n_users, n_subbands, &scaled, budget).expect("budget is non-negative")
}

fn check_projection(rng: &mut ChaCha8Rng) -> CheckOutcome {
    let mut worst_idem: f64 = 0.0;
    let mut worst_budget: f64 = f64::NEG_INFINITY;
    for _ in 0..100 {
        let mats: Vec<CMatrix> = (0..4)
            .map(|_| {
                let b = gaussian_matrix(rng, 3, 3);
                (&b + &b.adjoint()).scale(0.5)
            })
            .collect();
        let budget = rng.random_range(0.0..5.0);
        let once = project_to_budget(&mats, budget).expect("valid budget");
        let once_raw: Vec<CMatrix> = once.iter().map(|m| m.matrix().clone()).collect();
        let twice = project_to_budget(&once_raw, budget).expect("valid budget");
        for (a, b) in once.iter().zip(&twice) {
            worst_idem = worst_idem.max((a.matrix() - b.matrix()).max_abs());
        }
        let total: f64 = once.iter().map(|m| m.trace()).sum();
        worst_budget = worst_budget.max(total - budget);
    }
    CheckOutcome {
        name: "projection idempotent and feasible",
        passed: worst_idem <= 1e-12 && worst_budget <= 1e-9,
        detail: format!("max idempotence gap {worst_idem:.2e}, max budget excess {worst_budget:.2e}"),
    }
}

fn check_logdet(rng: &mut ChaCha8Rng) -> CheckOutcome {
    let mut worst: f64 = 0.0;
    for n in 1..=8 {
        let b = gaussian_matrix(rng, n, n);
        let mut a = b.matmul_adjoint(&b);
        a.add_identity(1.0);
        let ld = logdet(&a).expect("positive definite");
        let by_eig: f64 = eigh(&a).expect("hermitian").values.iter().map(|v| v.ln()).sum();
        worst = worst.max((ld - by_eig).abs() / by_eig.abs().max(1.0));
    }
    CheckOutcome {
        name: "logdet matches eigenvalue sum",
        passed: worst <= 1e-9,
        detail: format!("max relative error {worst:.2e}"),
    }
}

fn small_scenario(n_users: usize) -> ScenarioConfig {
    ScenarioConfig {
        n_users,
        n_subbands: 2,
        n_ris: 4,
        link_gain_direct: 0.2,
        ..Default::default()
    }
}

fn check_surrogates(rng: &mut ChaCha8Rng) -> Result<Vec<CheckOutcome>> {
    let mut tight_gap: f64 = 0.0;
    let mut cov_violation: f64 = f64::NEG_INFINITY;
    let mut phase_violation: f64 = f64::NEG_INFINITY;
    for draw in 0..40 {
        let cfg = small_scenario(2 + draw % 2);
        let ch = sample_channels(&cfg, rng)?;
        let theta = random_phases(cfg.n_ris, rng);
        let base = random_feasible_covs(rng, cfg.n_users, 2, 2, cfg.power_budget);
        let cov_exp = CovSurrogateExpansion::new(&ch, theta.as_slice(), &base)?;
        let phase_exp = PhaseSurrogateExpansion::new(&ch, &base, theta.as_slice())?;
        let here = rate_report(&base, &ch, theta.as_slice())?;
        let other = random_feasible_covs(rng, cfg.n_users, 2, 2, cfg.power_budget);
        let there = rate_report(&other, &ch, theta.as_slice())?;
        let probe = random_phases(cfg.n_ris, rng);
        let probe_rates = rate_report(&base, &ch, probe.as_slice())?;
        for k in 0..cfg.n_users {
            tight_gap = tight_gap
                .max((tilde_rate_k(&base, &cov_exp, k)? - here.per_user[k]).abs())
                .max((hat_rate_k(theta.as_slice(), &phase_exp, k)? - here.per_user[k]).abs());
            cov_violation = cov_violation.max(tilde_rate_k(&other, &cov_exp, k)? - there.per_user[k]);
            phase_violation = phase_violation.max(hat_rate_k(probe.as_slice(), &phase_exp, k)? - probe_rates.per_user[k]);
        }
    }
    Ok(vec![
        CheckOutcome {
            name: "surrogates tight at expansion point",
            passed: tight_gap <= 1e-9,
            detail: format!("max gap {tight_gap:.2e}"),
        },
        CheckOutcome {
            name: "covariance surrogate is a lower bound",
            passed: cov_violation <= 1e-9,
            detail: format!("max violation {cov_violation:.2e}"),
        },
        CheckOutcome {
            name: "phase surrogate is a lower bound",
            passed: phase_violation <= 1e-9,
            detail: format!("max violation {phase_violation:.2e}"),
        },
    ])
}

fn check_monotone(rng: &mut ChaCha8Rng) -> Result<CheckOutcome> {
    let mut worst_drop: f64 = 0.0;
    for _ in 0..5 {
        let cfg = ScenarioConfig {
            n_ris: 8,
            n_subbands: 2,
            solver: SolverConfig {
                max_outer_iters: 10,
                ..Default::default()
            },
            ..Default::default()
        };
        let ch = sample_channels(&cfg, rng)?;
        let sol = optimize(&ch, &cfg, Init::default())?;
        for w in sol.trace.accepted_min_rates().windows(2) {
            worst_drop = worst_drop.max(w[0] - w[1]);
        }
    }
    Ok(CheckOutcome {
        name: "accepted min-rate is non-decreasing",
        passed: worst_drop <= 1e-9,
        detail: format!("largest drop {worst_drop:.2e}"),
    })
}

/// Runs all self-checks with a fixed seed.
pub fn run_all(seed: u64) -> Result<Vec<CheckOutcome>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = vec![check_projection(&mut rng), check_logdet(&mut rng)];
    out.extend(check_surrogates(&mut rng)?);
    out.push(check_monotone(&mut rng)?);
    Ok(out)
}
