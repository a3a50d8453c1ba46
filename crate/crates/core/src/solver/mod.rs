//! The alternating MM solver: a covariance step, a phase step, and the outer
//! loop that alternates them while keeping the accepted min-rate monotone.

mod inner;

use std::f64::consts::LN_2;
use std::time::{Duration, Instant};

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub use inner::softmin;
use inner::{maximize_softmin, MaxMinProblem};

use crate::channel::{random_phases, ChannelSet, PhaseVector};
use crate::config::{PhaseInit, ScenarioConfig, SolverConfig};
use crate::error::{Error, Result};
use crate::linalg::{project_to_budget, spectral_norm_psd, CMatrix, HermitianPsd};
use crate::rate::{rate_report, rates_from_channels, CovarianceSet, RateReport};
use crate::surrogate::{ccp_phase_constraint, CovSurrogateExpansion, PhaseSurrogateExpansion};

struct CovarianceProblem<'a> {
    exp: &'a CovSurrogateExpansion,
    dim: usize,
    count: usize,
    power_budget: f64,
}

impl CovarianceProblem<'_> {
    fn unflatten(&self, x: &[Complex64]) -> Vec<CMatrix> {
        let block = self.dim * self.dim;
        (0..self.count)
            .map(|b| CMatrix::new(self.dim, self.dim, x[b * block..(b + 1) * block].to_vec()).expect("finite iterate"))
            .collect()
    }
}

fn flatten(mats: &[CMatrix]) -> Vec<Complex64> {
    mats.iter().flat_map(|m| m.as_slice().iter().copied()).collect()
}

impl MaxMinProblem for CovarianceProblem<'_> {
    fn user_values(&self, x: &[Complex64]) -> Vec<f64> {
        self.exp.values(&self.unflatten(x))
    }

    fn weighted_gradient(&self, x: &[Complex64], weights: &[f64]) -> Vec<Complex64> {
        flatten(&self.exp.weighted_gradient(&self.unflatten(x), weights))
    }

    fn project(&self, y: Vec<Complex64>) -> Vec<Complex64> {
        let mats: Vec<CMatrix> = self.unflatten(&y).iter().map(CMatrix::hermitian_part).collect();
        let projected = project_to_budget(&mats, self.power_budget).expect("budget validated by caller");
        projected.iter().flat_map(|m| m.matrix().as_slice().iter().copied()).collect()
    }

    /// Curvature of `log|sigma^2 I + H P H^H|` is bounded by `||H^H H||^2 / sigma^4`.
    fn lipschitz_hint(&self) -> f64 {
        let sigma2 = self.exp.noise_power();
        let worst = self
            .exp
            .channels()
            .iter()
            .map(|h| spectral_norm_psd(&h.adjoint_matmul(h)))
            .fold(0.0, f64::max);
        (worst / sigma2).powi(2) / LN_2
    }
}

/// Euclidean projection onto `{|z| <= 1} ∩ {2 Re(conj(prev) z) - |prev|^2 >= 1 - eps}`.
pub fn project_ccp_element(z: Complex64, prev: Complex64, epsilon: f64) -> Complex64 {
    if z.norm_sqr() <= 1.0 && ccp_phase_constraint(z, prev, epsilon) >= 0.0 {
        return z;
    }
    let prev_mag = prev.norm();
    if prev_mag == 0.0 {
        return if z.norm() > 1.0 { z / z.norm() } else { z };
    }
    let u = prev / prev_mag;
    // rotated frame: region is |w| <= 1 and Re w >= c
    let c = (1.0 - epsilon + prev.norm_sqr()) / (2.0 * prev_mag);
    let w = u.conj() * z;
    if c > 1.0 {
        return u;
    }
    let feasible = |p: Complex64| p.norm_sqr() <= 1.0 + 1e-15 && p.re >= c - 1e-15;
    let mut candidates = Vec::with_capacity(4);
    if w.norm() > 1.0 {
        candidates.push(w / w.norm());
    }
    candidates.push(Complex64::new(c.max(w.re), w.im));
    if c >= -1.0 {
        let h = (1.0 - c * c).max(0.0).sqrt();
        candidates.push(Complex64::new(c, h));
        candidates.push(Complex64::new(c, -h));
    }
    let best = candidates
        .into_iter()
        .filter(|&p| feasible(p))
        .min_by(|a, b| (a - w).norm_sqr().total_cmp(&(b - w).norm_sqr()))
        .unwrap_or(Complex64::new(1.0, 0.0));
    u * best
}

struct PhaseProblem<'a> {
    exp: &'a PhaseSurrogateExpansion,
    epsilon: f64,
}

impl MaxMinProblem for PhaseProblem<'_> {
    fn user_values(&self, x: &[Complex64]) -> Vec<f64> {
        self.exp.quadratics().iter().map(|q| q.value(x)).collect()
    }

    fn weighted_gradient(&self, x: &[Complex64], weights: &[f64]) -> Vec<Complex64> {
        let mut g = vec![Complex64::new(0.0, 0.0); x.len()];
        for (q, &w) in self.exp.quadratics().iter().zip(weights) {
            if w == 0.0 {
                continue;
            }
            for (acc, gi) in g.iter_mut().zip(q.gradient(x)) {
                *acc += gi * w;
            }
        }
        g
    }

    fn project(&self, y: Vec<Complex64>) -> Vec<Complex64> {
        y.into_iter()
            .zip(self.exp.theta_prev())
            .map(|(z, &prev)| project_ccp_element(z, prev, self.epsilon))
            .collect()
    }

    fn lipschitz_hint(&self) -> f64 {
        self.exp
            .quadratics()
            .iter()
            .map(|q| 2.0 * spectral_norm_psd(&q.curvature) / LN_2)
            .fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone)]
pub struct CovarianceStepOutcome {
    pub covs: CovarianceSet,
    pub min_rate: f64,
    /// False when the safeguard kept the previous covariances.
    pub improved: bool,
    pub inner_iterations: usize,
}

/// One MM covariance update with the phases held fixed.
///
/// The returned covariances never have a lower true min-rate than `covs_prev`.
pub fn covariance_step_detailed(channels: &ChannelSet, theta: &[Complex64], covs_prev: &CovarianceSet, power_budget: f64, cfg: &SolverConfig) -> Result<CovarianceStepOutcome> {
    if !(power_budget >= 0.0) {
        return Err(Error::argument(format!("power budget must be >= 0, got {power_budget}")));
    }
    covs_prev.check_shape(channels)?;
    covs_prev.check_feasible(power_budget)?;

    let exp = CovSurrogateExpansion::new(channels, theta, covs_prev)?;
    let (n_users, ns, dim) = (channels.n_users, channels.n_subbands, channels.n_bs);
    let prev_raw = covs_prev.raw();
    let prev_min = rates_from_channels(exp.channels(), &prev_raw, n_users, ns, channels.noise_power)
        .iter()
        .map(|row| row.iter().sum::<f64>())
        .fold(f64::INFINITY, f64::min);

    let problem = CovarianceProblem {
        exp: &exp,
        dim,
        count: n_users * ns,
        power_budget,
    };
    let out = maximize_softmin(&problem, flatten(&prev_raw), cfg);
    let mats: Vec<HermitianPsd> = problem
        .unflatten(&out.x)
        .into_iter()
        .map(|m| HermitianPsd::from_trusted(m.hermitian_part()))
        .collect();
    let candidate = CovarianceSet::new(n_users, ns, mats)?;
    let cand_min = rates_from_channels(exp.channels(), &candidate.raw(), n_users, ns, channels.noise_power)
        .iter()
        .map(|row| row.iter().sum::<f64>())
        .fold(f64::INFINITY, f64::min);

    if cand_min >= prev_min {
        Ok(CovarianceStepOutcome {
            covs: candidate,
            min_rate: cand_min,
            improved: true,
            inner_iterations: out.iterations,
        })
    } else {
        Ok(CovarianceStepOutcome {
            covs: covs_prev.clone(),
            min_rate: prev_min,
            improved: false,
            inner_iterations: out.iterations,
        })
    }
}

pub fn covariance_step(channels: &ChannelSet, theta: &[Complex64], covs_prev: &CovarianceSet, power_budget: f64, cfg: &SolverConfig) -> Result<CovarianceSet> {
    covariance_step_detailed(channels, theta, covs_prev, power_budget, cfg).map(|o| o.covs)
}

#[derive(Debug, Clone)]
pub struct PhaseStepOutcome {
    pub theta: PhaseVector,
    /// Whether the normalized candidate replaced `theta_prev`.
    pub accepted: bool,
    pub min_rate: f64,
    pub candidate_min_rate: f64,
    pub inner_iterations: usize,
}

/// One MM/CCP phase update with the covariances held fixed, followed by
/// normalization onto the unit circle and the keep-if-not-worse rule.
pub fn phase_step(channels: &ChannelSet, covs: &CovarianceSet, theta_prev: &PhaseVector, epsilon: f64, cfg: &SolverConfig) -> Result<PhaseStepOutcome> {
    if !(epsilon > 0.0) {
        return Err(Error::argument(format!("ccp epsilon must be positive, got {epsilon}")));
    }
    if theta_prev.len() != channels.n_ris {
        return Err(Error::argument(format!(
            "theta has {} elements, channels have {} RIS elements",
            theta_prev.len(),
            channels.n_ris
        )));
    }
    let prev = theta_prev.as_slice();
    let exp = PhaseSurrogateExpansion::new(channels, covs, prev)?;
    let problem = PhaseProblem { exp: &exp, epsilon };
    let out = maximize_softmin(&problem, prev.to_vec(), cfg);

    let normalized: Vec<Complex64> = out
        .x
        .iter()
        .zip(prev)
        .map(|(z, &p)| if z.norm() > 1e-12 { z / z.norm() } else { p })
        .collect();
    let candidate = PhaseVector::new(normalized)?;
    let prev_min = rate_report(covs, channels, prev)?.min_rate;
    let cand_min = rate_report(covs, channels, candidate.as_slice())?.min_rate;

    let accepted = cand_min >= prev_min;
    Ok(PhaseStepOutcome {
        theta: if accepted { candidate } else { theta_prev.clone() },
        accepted,
        min_rate: if accepted { cand_min } else { prev_min },
        candidate_min_rate: cand_min,
        inner_iterations: out.iterations,
    })
}

/// Relative loss below which a rejected phase candidate counts as a tie.
const TIE_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    Tolerance,
    MaxIters,
}

#[derive(Debug, Clone, Serialize)]
pub struct IterationRecord {
    pub min_rate_after_covariance: f64,
    /// `None` when the phases are frozen.
    pub min_rate_after_phase: Option<f64>,
    pub phase_accepted: Option<bool>,
    pub ccp_epsilon: f64,
    pub inner_iterations: usize,
    #[serde(with = "duration_secs")]
    pub wall_time: Duration,
}

impl IterationRecord {
    /// Min-rate of the iterate carried into the next iteration.
    pub fn accepted_min_rate(&self) -> f64 {
        self.min_rate_after_phase.unwrap_or(self.min_rate_after_covariance)
    }
}

mod duration_secs {
    use std::time::Duration;

    use serde::Serializer;

    pub fn serialize<S: Serializer>(d: &Duration, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_f64(d.as_secs_f64())
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SolverTrace {
    pub initial_min_rate: f64,
    pub iterations: Vec<IterationRecord>,
    pub termination: Termination,
}

impl SolverTrace {
    /// Initial min-rate followed by the accepted min-rate after every iteration.
    pub fn accepted_min_rates(&self) -> Vec<f64> {
        std::iter::once(self.initial_min_rate)
            .chain(self.iterations.iter().map(IterationRecord::accepted_min_rate))
            .collect()
    }

    pub fn final_min_rate(&self) -> f64 {
        self.iterations
            .last()
            .map_or(self.initial_min_rate, IterationRecord::accepted_min_rate)
    }

    /// Equality ignoring wall-clock times.
    pub fn same_path(&self, other: &SolverTrace) -> bool {
        self.initial_min_rate == other.initial_min_rate
            && self.termination == other.termination
            && self.iterations.len() == other.iterations.len()
            && self.iterations.iter().zip(&other.iterations).all(|(a, b)| {
                a.min_rate_after_covariance == b.min_rate_after_covariance
                    && a.min_rate_after_phase == b.min_rate_after_phase
                    && a.phase_accepted == b.phase_accepted
                    && a.ccp_epsilon == b.ccp_epsilon
                    && a.inner_iterations == b.inner_iterations
            })
    }
}

/// Starting point for [`optimize`]; missing parts use the configured defaults.
#[derive(Debug, Clone, Default)]
pub struct Init {
    pub covs: Option<CovarianceSet>,
    pub phases: Option<PhaseVector>,
}

#[derive(Debug, Clone)]
pub struct Solution {
    pub covs: CovarianceSet,
    pub phases: PhaseVector,
    pub report: RateReport,
    pub trace: SolverTrace,
}

impl Solution {
    pub fn min_rate(&self) -> f64 {
        self.report.min_rate
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Mode {
    Joint,
    CovariancesOnly,
}

/// Default starting point: equal power on scaled identities, phases per `init_phases`.
pub fn default_init(channels: &ChannelSet, cfg: &ScenarioConfig) -> (CovarianceSet, PhaseVector) {
    let covs = CovarianceSet::uniform(channels.n_users, channels.n_subbands, channels.n_bs, cfg.power_budget);
    let phases = match cfg.solver.init_phases {
        PhaseInit::Ones => PhaseVector::ones(channels.n_ris),
        PhaseInit::Random => random_phases(channels.n_ris, &mut ChaCha8Rng::seed_from_u64(cfg.solver.init_seed)),
    };
    (covs, phases)
}

/// Alternating covariance/phase optimization of the minimum user rate.
///
/// When a phase candidate loses to the previous phases by more than rounding,
/// the CCP relaxation is multiplied by `ccp_epsilon_decay` (down to
/// `ccp_epsilon_min`) and the loop continues without a tolerance check.
pub fn optimize(channels: &ChannelSet, cfg: &ScenarioConfig, init: Init) -> Result<Solution> {
    run(channels, cfg, init, Mode::Joint)
}

/// Covariance-only optimization with the phases frozen at their initial value.
pub fn optimize_covariances(channels: &ChannelSet, cfg: &ScenarioConfig, init: Init) -> Result<Solution> {
    run(channels, cfg, init, Mode::CovariancesOnly)
}

fn run(channels: &ChannelSet, cfg: &ScenarioConfig, init: Init, mode: Mode) -> Result<Solution> {
    cfg.validate()?;
    channels.validate()?;
    let solver = &cfg.solver;
    let (default_covs, default_phases) = default_init(channels, cfg);
    let mut covs = init.covs.unwrap_or(default_covs);
    let mut theta = init.phases.unwrap_or(default_phases);
    covs.check_shape(channels)?;
    covs.check_feasible(cfg.power_budget)?;
    if theta.len() != channels.n_ris {
        return Err(Error::argument("initial phase vector has the wrong length"));
    }

    let initial_min_rate = rate_report(&covs, channels, theta.as_slice())?.min_rate;
    let mut current = initial_min_rate;
    let mut epsilon = cfg.ccp_epsilon;
    let mut iterations = Vec::new();
    let mut termination = Termination::MaxIters;

    for _ in 0..solver.max_outer_iters {
        let start = Instant::now();
        let cov = covariance_step_detailed(channels, theta.as_slice(), &covs, cfg.power_budget, solver)?;
        covs = cov.covs;
        let mut record = IterationRecord {
            min_rate_after_covariance: cov.min_rate,
            min_rate_after_phase: None,
            phase_accepted: None,
            ccp_epsilon: epsilon,
            inner_iterations: cov.inner_iterations,
            wall_time: Duration::ZERO,
        };
        let mut shrink_epsilon = false;
        if mode == Mode::Joint {
            let ph = phase_step(channels, &covs, &theta, epsilon, solver)?;
            theta = ph.theta;
            record.min_rate_after_phase = Some(ph.min_rate);
            record.phase_accepted = Some(ph.accepted);
            record.inner_iterations += ph.inner_iterations;
            // a candidate that only loses by rounding means the phases have converged
            let loss = ph.min_rate - ph.candidate_min_rate;
            shrink_epsilon = !ph.accepted && loss > TIE_TOL * (1.0 + ph.min_rate.abs()) && epsilon > solver.ccp_epsilon_min;
        }
        record.wall_time = start.elapsed();
        let next = record.accepted_min_rate();
        let improvement = next - current;
        current = next;
        iterations.push(record);

        if shrink_epsilon {
            epsilon = (epsilon * solver.ccp_epsilon_decay).max(solver.ccp_epsilon_min);
            continue;
        }
        if improvement < solver.outer_tol {
            termination = Termination::Tolerance;
            break;
        }
    }

    let report = rate_report(&covs, channels, theta.as_slice())?;
    Ok(Solution {
        covs,
        phases: theta,
        report,
        trace: SolverTrace {
            initial_min_rate,
            iterations,
            termination,
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::sample_channels;
    use std::f64::consts::PI;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn ccp_projection_matches_grid_search() {
        let prev = Complex64::from_polar(1.0, 0.4);
        let eps = 0.3;
        let grid: Vec<Complex64> = (0..=400)
            .flat_map(|a| (0..=400).map(move |b| c(-1.0 + a as f64 / 200.0, -1.0 + b as f64 / 200.0)))
            .filter(|p| p.norm_sqr() <= 1.0 && ccp_phase_constraint(*p, prev, eps) >= 0.0)
            .collect();
        for z in [c(2.0, 0.0), c(-1.0, 0.5), c(0.0, 1.5), c(0.9, 0.5), c(0.3, -0.9), c(0.95, 0.2)] {
            let p = project_ccp_element(z, prev, eps);
            assert!(p.norm() <= 1.0 + 1e-12);
            assert!(ccp_phase_constraint(p, prev, eps) >= -1e-12);
            let best = grid.iter().map(|g| (g - z).norm()).fold(f64::INFINITY, f64::min);
            assert!((p - z).norm() <= best + 1e-9, "z={z} p={p}");
            assert!((p - z).norm() >= best - 2.0 / 200.0);
        }
    }

    #[test]
    fn feasible_points_are_fixed_by_projection() {
        let prev = Complex64::from_polar(1.0, -1.0);
        assert_eq!(project_ccp_element(prev, prev, 0.05), prev);
        let inside = prev * 0.99;
        assert_eq!(project_ccp_element(inside, prev, 0.05), inside);
    }

    #[test]
    fn zero_budget_gives_zero_covariances() {
        let cfg = ScenarioConfig {
            n_ris: 4,
            n_subbands: 2,
            ..Default::default()
        };
        let ch = sample_channels(&cfg, &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
        let zeros = CovarianceSet::zeros(2, 2, 2);
        let out = covariance_step(&ch, PhaseVector::ones(4).as_slice(), &zeros, 0.0, &cfg.solver).unwrap();
        assert_eq!(out.total_power(), 0.0);
        assert_eq!(rate_report(&out, &ch, PhaseVector::ones(4).as_slice()).unwrap().min_rate, 0.0);
    }

    #[test]
    fn infeasible_start_is_rejected() {
        let cfg = ScenarioConfig {
            n_ris: 4,
            n_subbands: 2,
            ..Default::default()
        };
        let ch = sample_channels(&cfg, &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
        let too_much = CovarianceSet::uniform(2, 2, 2, 10.0);
        assert!(matches!(
            covariance_step(&ch, PhaseVector::ones(4).as_slice(), &too_much, 1.0, &cfg.solver),
            Err(Error::Argument(_))
        ));
    }

    #[test]
    fn disconnected_ris_keeps_previous_phases() {
        let cfg = ScenarioConfig {
            n_ris: 4,
            n_subbands: 2,
            ..Default::default()
        };
        let ch = sample_channels(&cfg, &mut ChaCha8Rng::seed_from_u64(3)).unwrap().without_ris();
        let covs = CovarianceSet::uniform(2, 2, 2, 1.0);
        let prev = PhaseVector::from_angles(&[0.1, 2.0, -1.0, PI]);
        let out = phase_step(&ch, &covs, &prev, 0.05, &cfg.solver).unwrap();
        assert_eq!(out.theta, prev);
    }

    #[test]
    fn zero_outer_iterations_returns_init() {
        let cfg = ScenarioConfig {
            n_ris: 4,
            n_subbands: 2,
            solver: SolverConfig {
                max_outer_iters: 0,
                ..Default::default()
            },
            ..Default::default()
        };
        let ch = sample_channels(&cfg, &mut ChaCha8Rng::seed_from_u64(4)).unwrap();
        let sol = optimize(&ch, &cfg, Init::default()).unwrap();
        let (covs, phases) = default_init(&ch, &cfg);
        assert_eq!(sol.covs, covs);
        assert_eq!(sol.phases, phases);
        assert!(sol.trace.iterations.is_empty());
        assert_eq!(sol.trace.termination, Termination::MaxIters);
        assert_eq!(sol.min_rate(), sol.trace.initial_min_rate);
    }
}
