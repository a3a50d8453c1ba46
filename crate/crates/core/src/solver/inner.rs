//! Projected-gradient ascent on a softmin-smoothed max-min objective.

use num_complex::Complex64;

use crate::config::SolverConfig;

/// A max-min subproblem over a convex set with a cheap Euclidean projection.
/// Points are flat complex vectors; the inner product is `Re sum conj(a) b`.
pub(crate) trait MaxMinProblem {
    fn user_values(&self, x: &[Complex64]) -> Vec<f64>;
    /// `sum_k weights[k] * grad f_k(x)`.
    fn weighted_gradient(&self, x: &[Complex64], weights: &[f64]) -> Vec<Complex64>;
    fn project(&self, y: Vec<Complex64>) -> Vec<Complex64>;
    /// Initial curvature estimate for the step size `1 / L`.
    fn lipschitz_hint(&self) -> f64;
}

/// `-mu ln sum exp(-v_k / mu)` and its weights (a softmax of `-v / mu`).
///
/// Satisfies `softmin <= min(v) <= softmin + mu ln K`.
pub fn softmin(values: &[f64], mu: f64) -> (f64, Vec<f64>) {
    if values.len() == 1 {
        return (values[0], vec![1.0]);
    }
    let min = values.iter().copied().fold(f64::INFINITY, f64::min);
    let exps: Vec<f64> = values.iter().map(|&v| (-(v - min) / mu).exp()).collect();
    let total: f64 = exps.iter().sum();
    let weights = exps.iter().map(|e| e / total).collect();
    (min - mu * total.ln(), weights)
}

#[derive(Debug, Clone)]
pub(crate) struct InnerOutcome {
    pub x: Vec<Complex64>,
    pub iterations: usize,
}

fn inner(a: &[Complex64], b: &[Complex64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x.re * y.re + x.im * y.im).sum()
}

fn norm_sq(a: &[Complex64]) -> f64 {
    a.iter().map(|z| z.norm_sqr()).sum()
}

const MAX_BACKTRACKS: usize = 60;

/// Accelerated projected-gradient ascent on `softmin_mu` of the user values,
/// with `mu` halved after each converged pass down to `smoothing_mu_min`.
///
/// A pass converges when the gradient mapping is below `inner_tol` or an
/// accepted step gains less than `inner_tol` relative to the objective.
///
/// Momentum is reset whenever a step would lower the objective. The iterate
/// with the largest hard minimum seen (including `x0`) is returned, so the
/// result is never worse than the start in the unsmoothed objective.
pub(crate) fn maximize_softmin<P: MaxMinProblem>(problem: &P, x0: Vec<Complex64>, cfg: &SolverConfig) -> InnerOutcome {
    let mut x = x0;
    let mut lipschitz = problem.lipschitz_hint().max(1e-12);
    let floor = lipschitz * 1e-6;
    let mut mu = cfg.smoothing_mu;
    let mut iterations = 0;
    let start_values = problem.user_values(&x);
    let single_user = start_values.len() == 1;
    let mut best = (hard_min(&start_values), x.clone());

    'anneal: loop {
        let (mut value, _) = softmin(&problem.user_values(&x), mu);
        // extrapolated point and its smoothed value/weights
        let mut z = x.clone();
        let (mut z_value, mut z_weights) = softmin(&problem.user_values(&z), mu);
        let mut t = 1.0f64;
        let mut converged = false;
        while iterations < cfg.inner_max_iters {
            iterations += 1;
            let grad = problem.weighted_gradient(&z, &z_weights);
            let mut accepted = None;
            for _ in 0..MAX_BACKTRACKS {
                let trial: Vec<Complex64> = z.iter().zip(&grad).map(|(zi, gi)| zi + gi / lipschitz).collect();
                let y = problem.project(trial);
                let d: Vec<Complex64> = y.iter().zip(&z).map(|(a, b)| a - b).collect();
                let dist_sq = norm_sq(&d);
                if dist_sq == 0.0 {
                    accepted = Some((y, z_value, dist_sq));
                    break;
                }
                let trial_values = problem.user_values(&y);
                let (trial_value, _) = softmin(&trial_values, mu);
                let model = z_value + inner(&grad, &d) - 0.5 * lipschitz * dist_sq;
                if trial_value >= model - 1e-14 * (1.0 + z_value.abs()) {
                    let m = hard_min(&trial_values);
                    if m > best.0 {
                        best = (m, y.clone());
                    }
                    accepted = Some((y, trial_value, dist_sq));
                    break;
                }
                lipschitz *= 2.0;
            }
            let Some((y, y_value, dist_sq)) = accepted else {
                // no ascent possible at representable step sizes
                converged = true;
                break;
            };
            let mapping_norm = lipschitz * dist_sq.sqrt();
            lipschitz = (lipschitz * 0.5).max(floor);

            if y_value < value {
                // restart from x without momentum
                t = 1.0;
                z = x.clone();
                (z_value, z_weights) = softmin(&problem.user_values(&z), mu);
                continue;
            }
            let t_next = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
            let beta = (t - 1.0) / t_next;
            t = t_next;
            let step_back: Vec<Complex64> = y.iter().zip(&x).map(|(a, b)| a + (a - b) * beta).collect();
            x = y;
            let gain = y_value - value;
            value = y_value;
            // stationary, or the objective has stalled relative to its size
            if mapping_norm <= cfg.inner_tol || gain <= cfg.inner_tol * (1.0 + value.abs()) {
                converged = true;
                break;
            }
            z = if beta > 0.0 { problem.project(step_back) } else { x.clone() };
            (z_value, z_weights) = softmin(&problem.user_values(&z), mu);
        }
        if single_user || !converged || iterations >= cfg.inner_max_iters {
            break 'anneal;
        }
        mu *= 0.5;
        if mu < cfg.smoothing_mu_min {
            break 'anneal;
        }
    }
    InnerOutcome { x: best.1, iterations }
}

fn hard_min(values: &[f64]) -> f64 {
    values.iter().copied().fold(f64::INFINITY, f64::min)
}
