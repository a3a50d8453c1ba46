//! Acceptance suite: prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.

mod common;

use std::f64::consts::PI;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use common::*;
use num_complex::Complex64;
use rand_chacha::ChaCha8Rng;
use risbc::linalg::HermitianPsd;
use risbc::sim::{run_experiment, simulate, AggregateRow, ExperimentSpec, RisOptInit, Scheme, SweepVariable};
use risbc::surrogate::{hat_rate_k, tilde_rate_gradient, tilde_rate_k, CovSurrogateExpansion, PhaseSurrogateExpansion};
use risbc::{optimize, random_phases, rate_report, sample_channels, CMatrix, CovarianceSet, Init, PhaseVector, ScenarioConfig, SolverConfig};

struct Outcome {
    passed: bool,
    detail: String,
}

fn outcome(passed: bool, detail: String) -> Outcome {
    Outcome { passed, detail }
}

fn converged_solver() -> SolverConfig {
    SolverConfig {
        max_outer_iters: 500,
        outer_tol: 1e-10,
        inner_max_iters: 5000,
        inner_tol: 1e-12,
        ..Default::default()
    }
}

// ---------------------------------------------------------------- criterion 1

fn interior_covs(rng: &mut ChaCha8Rng, n_users: usize, n_sub: usize, dim: usize) -> CovarianceSet {
    let mats = (0..n_users * n_sub)
        .map(|_| {
            let mut m = random_psd(rng, dim).scale(0.2);
            m.add_identity(0.05);
            HermitianPsd::new(m).unwrap()
        })
        .collect();
    CovarianceSet::new(n_users, n_sub, mats).unwrap()
}

fn perturbed(covs: &CovarianceSet, block: usize, dir: &CMatrix, h: f64) -> CovarianceSet {
    let mats = covs
        .matrices()
        .iter()
        .enumerate()
        .map(|(b, m)| {
            let mut x = m.matrix().clone();
            if b == block {
                x.axpy(h, dir);
            }
            HermitianPsd::new(x).unwrap()
        })
        .collect();
    CovarianceSet::new(covs.n_users(), covs.n_subbands(), mats).unwrap()
}

fn hermitian_basis(dim: usize) -> Vec<CMatrix> {
    let mut out = Vec::new();
    for r in 0..dim {
        for c in r..dim {
            let mut e = CMatrix::zeros(dim, dim);
            if r == c {
                e[(r, r)] = Complex64::new(1.0, 0.0);
                out.push(e);
            } else {
                e[(r, c)] = Complex64::new(1.0, 0.0);
                e[(c, r)] = Complex64::new(1.0, 0.0);
                out.push(e.clone());
                e[(r, c)] = Complex64::i();
                e[(c, r)] = -Complex64::i();
                out.push(e);
            }
        }
    }
    out
}

fn mix_covs(a: &CovarianceSet, b: &CovarianceSet, alpha: f64) -> CovarianceSet {
    let mats = a
        .matrices()
        .iter()
        .zip(b.matrices())
        .map(|(x, y)| HermitianPsd::new(&x.matrix().scale(alpha) + &y.matrix().scale(1.0 - alpha)).unwrap())
        .collect();
    CovarianceSet::new(a.n_users(), a.n_subbands(), mats).unwrap()
}

fn surrogate_suite() -> Outcome {
    let start = Instant::now();
    let mut rng = rng(101);
    let (mut tight, mut cov_violation, mut phase_violation, mut concavity, mut grad_err) = (0.0f64, f64::NEG_INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY, 0.0f64);
    let mut draws = 0;
    let h = 1e-6;
    for dim in 1..=4 {
        for n_users in 1..=3 {
            for n_sub in 1..=2 {
                let cfg = scenario(n_users, dim, n_sub, 4);
                for _ in 0..20 {
                    draws += 1;
                    let ch = sample_channels(&cfg, &mut rng).unwrap();
                    let theta = random_phases(cfg.n_ris, &mut rng);
                    let base = random_covs(&mut rng, n_users, n_sub, dim, 1.0);
                    let cov_exp = CovSurrogateExpansion::new(&ch, theta.as_slice(), &base).unwrap();
                    let phase_exp = PhaseSurrogateExpansion::new(&ch, &base, theta.as_slice()).unwrap();
                    let here = rate_report(&base, &ch, theta.as_slice()).unwrap();

                    let other = random_covs(&mut rng, n_users, n_sub, dim, 1.0);
                    let there = rate_report(&other, &ch, theta.as_slice()).unwrap();
                    let probe = random_phases(cfg.n_ris, &mut rng);
                    let probe_rates = rate_report(&base, &ch, probe.as_slice()).unwrap();
                    let third = random_covs(&mut rng, n_users, n_sub, dim, 1.0);
                    let za = random_complex_vec(&mut rng, cfg.n_ris, 1.0);
                    let zb = random_complex_vec(&mut rng, cfg.n_ris, 1.0);

                    for k in 0..n_users {
                        tight = tight
                            .max((tilde_rate_k(&base, &cov_exp, k).unwrap() - here.per_user[k]).abs())
                            .max((hat_rate_k(theta.as_slice(), &phase_exp, k).unwrap() - here.per_user[k]).abs());
                        cov_violation = cov_violation.max(tilde_rate_k(&other, &cov_exp, k).unwrap() - there.per_user[k]);
                        phase_violation = phase_violation.max(hat_rate_k(probe.as_slice(), &phase_exp, k).unwrap() - probe_rates.per_user[k]);
                        for alpha in [0.25, 0.5, 0.75] {
                            let chord = alpha * tilde_rate_k(&other, &cov_exp, k).unwrap() + (1.0 - alpha) * tilde_rate_k(&third, &cov_exp, k).unwrap();
                            concavity = concavity.max(chord - tilde_rate_k(&mix_covs(&other, &third, alpha), &cov_exp, k).unwrap());
                            let zm: Vec<Complex64> = za.iter().zip(&zb).map(|(x, y)| x * alpha + y * (1.0 - alpha)).collect();
                            let chord = alpha * hat_rate_k(&za, &phase_exp, k).unwrap() + (1.0 - alpha) * hat_rate_k(&zb, &phase_exp, k).unwrap();
                            concavity = concavity.max(chord - hat_rate_k(&zm, &phase_exp, k).unwrap());
                        }
                    }
                }

                // finite differences at an interior point of the covariance cone
                let ch = sample_channels(&cfg, &mut rng).unwrap();
                let theta = random_phases(cfg.n_ris, &mut rng);
                let base = interior_covs(&mut rng, n_users, n_sub, dim);
                let exp = CovSurrogateExpansion::new(&ch, theta.as_slice(), &base).unwrap();
                let at = interior_covs(&mut rng, n_users, n_sub, dim);
                let phase_exp = PhaseSurrogateExpansion::new(&ch, &base, theta.as_slice()).unwrap();
                let z = random_complex_vec(&mut rng, cfg.n_ris, 1.0);
                for k in 0..n_users {
                    let grad = tilde_rate_gradient(&at, &exp, k).unwrap();
                    let (mut diff, mut norm) = (0.0, 0.0);
                    for (block, g) in grad.iter().enumerate() {
                        for e in hermitian_basis(dim) {
                            let up = tilde_rate_k(&perturbed(&at, block, &e, h), &exp, k).unwrap();
                            let down = tilde_rate_k(&perturbed(&at, block, &e, -h), &exp, k).unwrap();
                            let an = g.inner(&e);
                            diff += ((up - down) / (2.0 * h) - an).powi(2);
                            norm += an * an;
                        }
                    }
                    grad_err = grad_err.max(diff.sqrt() / norm.sqrt());

                    let pg = phase_exp.quadratic(k).gradient(&z);
                    let (mut diff, mut norm) = (0.0, 0.0);
                    for m in 0..z.len() {
                        for (dir, an) in [(Complex64::new(1.0, 0.0), pg[m].re), (Complex64::i(), pg[m].im)] {
                            let (mut up, mut down) = (z.clone(), z.clone());
                            up[m] += dir * h;
                            down[m] -= dir * h;
                            let fd = (hat_rate_k(&up, &phase_exp, k).unwrap() - hat_rate_k(&down, &phase_exp, k).unwrap()) / (2.0 * h);
                            diff += (fd - an).powi(2);
                            norm += an * an;
                        }
                    }
                    grad_err = grad_err.max(diff.sqrt() / norm.sqrt());
                }
            }
        }
    }
    let elapsed = start.elapsed();
    let passed = tight <= 1e-9 && cov_violation <= 1e-9 && phase_violation <= 1e-9 && concavity <= 1e-9 && grad_err <= 1e-5 && elapsed < Duration::from_secs(30);
    outcome(
        passed,
        format!(
            "{draws} draws: tightness {tight:.1e}, bound violation {:.1e}/{:.1e}, concavity gap {concavity:.1e}, gradient rel. error {grad_err:.1e}, {:.1}s",
            cov_violation,
            phase_violation,
            elapsed.as_secs_f64()
        ),
    )
}

// ---------------------------------------------------------------- criterion 2

fn water_filling_oracle() -> Outcome {
    let gains = [1.0f64, 0.5, 0.25, 0.125];
    let direct: Vec<Complex64> = gains.iter().map(|g| Complex64::new(g.sqrt(), 0.0)).collect();
    let zeros = vec![Complex64::new(0.0, 0.0); 4];
    let ch = siso_channels(&direct, &zeros, &zeros, 1.0);
    let cfg = ScenarioConfig {
        n_bs: 1,
        n_u: 1,
        n_users: 1,
        n_ris: 1,
        n_subbands: 4,
        power_budget: 2.0,
        noise_power: 1.0,
        solver: converged_solver(),
        ..Default::default()
    };
    let sol = optimize(&ch, &cfg, Init::default()).unwrap();
    let powers = sol.covs.subband_powers();
    let oracle = water_filling(&gains, 1.0, 2.0);
    let power_err = powers.iter().zip(&oracle).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    let optimum: f64 = gains.iter().zip(&oracle).map(|(g, p)| (1.0 + g * p).log2()).sum();
    let rate_err = (sol.min_rate() - optimum).abs();
    outcome(
        power_err <= 1e-3 && rate_err <= 1e-4,
        format!("powers {powers:.4?} vs {oracle:.4?} (max err {power_err:.1e}), rate err {rate_err:.1e} bits"),
    )
}

// ---------------------------------------------------------------- criterion 3

fn phase_alignment_oracle() -> Outcome {
    let (f, g_user, g_bs, power, noise) = (Complex64::new(1.0, 0.0), Complex64::new(1.0, 0.0), Complex64::new(1.0, 0.0), 1.0, 1.0);
    let ch = siso_channels(&[f], &[g_user], &[g_bs], noise);
    let cfg = ScenarioConfig {
        n_bs: 1,
        n_u: 1,
        n_users: 1,
        n_ris: 1,
        n_subbands: 1,
        power_budget: power,
        noise_power: noise,
        solver: converged_solver(),
        ..Default::default()
    };
    let init = Init {
        covs: None,
        phases: Some(PhaseVector::from_angles(&[2.5])),
    };
    let sol = optimize(&ch, &cfg, init).unwrap();
    let rate_at = |t: f64| (1.0 + (f + g_user * g_bs * Complex64::from_polar(1.0, t)).norm_sqr() * power / noise).log2();
    let best = (0..10_000)
        .map(|n| 2.0 * PI * n as f64 / 10_000.0)
        .max_by(|a, b| rate_at(*a).total_cmp(&rate_at(*b)))
        .unwrap();
    let angle = sol.phases.angles()[0];
    let phase_err = (Complex64::from_polar(1.0, angle) / Complex64::from_polar(1.0, best)).arg().abs();
    let target = (1.0 + (f.norm() + (g_user * g_bs).norm()).powi(2) * power / noise).log2();
    let rel = (sol.min_rate() - target).abs() / target;
    outcome(
        rel <= 0.01 && phase_err <= 0.05,
        format!("rate {:.6} vs {target:.6} (rel {rel:.1e}), phase error {phase_err:.1e} rad", sol.min_rate()),
    )
}

// ---------------------------------------------------------------- criterion 4

fn monotonicity() -> Outcome {
    let start = Instant::now();
    let mut worst_drop = f64::NEG_INFINITY;
    let mut iterations = 0;
    for seed in 0..100 {
        let cfg = ScenarioConfig {
            n_users: 2,
            n_bs: 2,
            n_u: 2,
            n_subbands: 2,
            n_ris: 8,
            seed,
            ..Default::default()
        };
        let ch = sample_channels(&cfg, &mut rng(7000 + seed)).unwrap();
        let init = Init {
            covs: None,
            phases: Some(random_phases(8, &mut rng(9000 + seed))),
        };
        let sol = optimize(&ch, &cfg, init).unwrap();
        let mut seq = vec![sol.trace.initial_min_rate];
        for it in &sol.trace.iterations {
            seq.push(it.min_rate_after_covariance);
            seq.extend(it.min_rate_after_phase);
        }
        iterations += sol.trace.iterations.len();
        worst_drop = worst_drop.max(seq.windows(2).map(|w| w[0] - w[1]).fold(f64::NEG_INFINITY, f64::max));
    }
    let elapsed = start.elapsed();
    outcome(
        worst_drop <= 1e-9 && elapsed < Duration::from_secs(300),
        format!("100 instances, {iterations} outer iterations, largest drop {worst_drop:.1e}, {:.1}s", elapsed.as_secs_f64()),
    )
}

// ---------------------------------------------------------------- criteria 5-7

fn sweep(variable: SweepVariable, values: Vec<f64>, base: ScenarioConfig) -> Vec<AggregateRow> {
    let spec = ExperimentSpec {
        base,
        sweep_variable: variable,
        sweep_values: values,
        n_trials: 20,
        schemes: Scheme::ALL.to_vec(),
        output: "unused.csv".into(),
        aggregate_output: None,
        record_walltime: false,
        ris_opt_init: RisOptInit::RisRand,
    };
    simulate(&spec).unwrap().aggregates
}

fn row(rows: &[AggregateRow], scheme: Scheme, value: f64) -> &AggregateRow {
    rows.iter().find(|r| r.scheme == scheme && r.sweep_value == value).unwrap()
}

fn fig1_base() -> ScenarioConfig {
    ScenarioConfig {
        n_users: 2,
        n_bs: 2,
        n_u: 2,
        n_subbands: 4,
        n_ris: 16,
        noise_power: 1.0,
        seed: 2024,
        ..Default::default()
    }
}

fn power_trend(rows: &[AggregateRow]) -> Outcome {
    let mut passed = true;
    let mut parts = Vec::new();
    for p in [1.0, 4.0, 16.0] {
        let (none, rand, opt) = (row(rows, Scheme::NoRis, p), row(rows, Scheme::RisRand, p), row(rows, Scheme::RisOpt, p));
        let gain = opt.rel_gain_vs_risrand_pct.unwrap_or(f64::NAN);
        passed &= opt.mean_min_rate > rand.mean_min_rate && rand.mean_min_rate > none.mean_min_rate && gain > 0.0;
        parts.push(format!(
            "P={p}: {:.3} > {:.3} > {:.3} (+{gain:.1}%)",
            opt.mean_min_rate, rand.mean_min_rate, none.mean_min_rate
        ));
    }
    outcome(passed, parts.join("; "))
}

fn subband_trend() -> Outcome {
    let rows = sweep(SweepVariable::NSubbands, vec![2.0, 8.0], fig1_base());
    let gain = |n: f64| row(&rows, Scheme::RisOpt, n).rel_gain_vs_risrand_pct.unwrap_or(f64::NAN);
    let (g2, g8) = (gain(2.0), gain(8.0));
    outcome(g2 > g8, format!("gain over ris_rand: N_i=2 {g2:.1}%, N_i=8 {g8:.1}%"))
}

fn snr_trend(rows: &[AggregateRow]) -> Outcome {
    let gain = |p: f64| row(rows, Scheme::RisOpt, p).rel_gain_vs_noris_pct.unwrap_or(f64::NAN);
    let (g1, g16) = (gain(1.0), gain(16.0));
    outcome(g1 > g16, format!("gain over no_ris: P=1 {g1:.1}%, P=16 {g16:.1}%"))
}

// ---------------------------------------------------------------- criterion 8

fn determinism() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let spec = ExperimentSpec {
        base: ScenarioConfig {
            n_subbands: 2,
            n_ris: 8,
            seed: 77,
            ..Default::default()
        },
        sweep_variable: SweepVariable::PowerBudget,
        sweep_values: vec![1.0, 4.0],
        n_trials: 4,
        schemes: Scheme::ALL.to_vec(),
        output: dir.path().join("detail.csv"),
        aggregate_output: None,
        record_walltime: false,
        ris_opt_init: RisOptInit::RisRand,
    };
    run_experiment(&spec).unwrap();
    let first = std::fs::read(&spec.output).unwrap();
    run_experiment(&spec).unwrap();
    let second = std::fs::read(&spec.output).unwrap();
    outcome(first == second, format!("{} bytes, identical: {}", first.len(), first == second))
}

fn main() -> ExitCode {
    let mut failures = 0;
    let mut report = |id: u32, name: &str, o: Outcome| {
        println!("[{}] C{id} {name}: {}", if o.passed { "PASS" } else { "FAIL" }, o.detail);
        failures += usize::from(!o.passed);
    };
    report(1, "surrogate correctness", surrogate_suite());
    report(2, "water-filling oracle", water_filling_oracle());
    report(3, "phase-alignment oracle", phase_alignment_oracle());
    report(4, "monotone min-rate", monotonicity());
    let power_rows = sweep(SweepVariable::PowerBudget, vec![1.0, 4.0, 16.0], fig1_base());
    report(5, "scheme ordering across P", power_trend(&power_rows));
    report(6, "gain over ris_rand shrinks with N_i", subband_trend());
    report(7, "gain over no_ris shrinks with P", snr_trend(&power_rows));
    report(8, "byte-identical reruns", determinism());
    if failures == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
