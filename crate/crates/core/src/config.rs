//! Scenario and solver parameters, loadable from JSON.
//!
//! Unknown fields are rejected; omitted fields take the defaults below.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// How the phases are initialized when no explicit starting point is given.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PhaseInit {
    Ones,
    Random,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    pub max_outer_iters: usize,
    /// Stop when one outer iteration improves the min-rate by less than this (bits).
    pub outer_tol: f64,
    /// Projected-gradient iteration budget for one surrogate subproblem.
    pub inner_max_iters: usize,
    /// Inner convergence threshold: gradient-mapping norm, and relative
    /// objective gain per step.
    pub inner_tol: f64,
    /// Initial softmin temperature (bits).
    pub smoothing_mu: f64,
    /// Annealing stops once the temperature drops below this.
    pub smoothing_mu_min: f64,
    /// Floor for the CCP relaxation parameter.
    pub ccp_epsilon_min: f64,
    /// Multiplier applied to the CCP relaxation after a rejected phase update.
    pub ccp_epsilon_decay: f64,
    pub init_phases: PhaseInit,
    pub init_seed: u64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            max_outer_iters: 50,
            outer_tol: 1e-4,
            inner_max_iters: 500,
            inner_tol: 1e-6,
            smoothing_mu: 0.01,
            smoothing_mu_min: 1e-4,
            ccp_epsilon_min: 1e-4,
            ccp_epsilon_decay: 0.5,
            init_phases: PhaseInit::Ones,
            init_seed: 0,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("outer_tol", self.outer_tol),
            ("inner_tol", self.inner_tol),
            ("smoothing_mu", self.smoothing_mu),
            ("smoothing_mu_min", self.smoothing_mu_min),
            ("ccp_epsilon_min", self.ccp_epsilon_min),
            ("ccp_epsilon_decay", self.ccp_epsilon_decay),
        ];
        for (name, v) in positive {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::config(format!("solver.{name} must be positive, got {v}")));
            }
        }
        if self.ccp_epsilon_decay >= 1.0 {
            return Err(Error::config("solver.ccp_epsilon_decay must be below 1"));
        }
        if self.inner_max_iters == 0 {
            return Err(Error::config("solver.inner_max_iters must be at least 1"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    pub n_bs: usize,
    pub n_u: usize,
    pub n_users: usize,
    pub n_ris: usize,
    pub n_subbands: usize,
    /// Total transmit power budget (W) shared by all users and subbands.
    pub power_budget: f64,
    pub noise_power: f64,
    /// Rician K-factor of the BS-RIS and RIS-user links, in dB.
    pub rician_factor_db: f64,
    pub link_gain_ris_bs: f64,
    pub link_gain_ris_user: f64,
    pub link_gain_direct: f64,
    pub seed: u64,
    /// Initial CCP relaxation of the unit-modulus constraint.
    pub ccp_epsilon: f64,
    pub solver: SolverConfig,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            n_bs: 2,
            n_u: 2,
            n_users: 2,
            n_ris: 16,
            n_subbands: 4,
            power_budget: 1.0,
            noise_power: 1.0,
            rician_factor_db: 10.0,
            link_gain_ris_bs: 1.0,
            link_gain_ris_user: 1.0,
            link_gain_direct: 0.01,
            seed: 0,
            ccp_epsilon: 0.05,
            solver: SolverConfig::default(),
        }
    }
}

impl ScenarioConfig {
    pub fn validate(&self) -> Result<()> {
        let dims = [
            ("n_bs", self.n_bs),
            ("n_u", self.n_u),
            ("n_users", self.n_users),
            ("n_ris", self.n_ris),
            ("n_subbands", self.n_subbands),
        ];
        for (name, v) in dims {
            if v == 0 {
                return Err(Error::config(format!("{name} must be at least 1")));
            }
        }
        if !(self.power_budget > 0.0) || !self.power_budget.is_finite() {
            return Err(Error::config(format!("power_budget must be positive, got {}", self.power_budget)));
        }
        if !(self.noise_power > 0.0) || !self.noise_power.is_finite() {
            return Err(Error::config(format!("noise_power must be positive, got {}", self.noise_power)));
        }
        if !self.rician_factor_db.is_finite() {
            return Err(Error::config("rician_factor_db must be finite"));
        }
        for (name, g) in [
            ("link_gain_ris_bs", self.link_gain_ris_bs),
            ("link_gain_ris_user", self.link_gain_ris_user),
            ("link_gain_direct", self.link_gain_direct),
        ] {
            if !(g >= 0.0) || !g.is_finite() {
                return Err(Error::config(format!("{name} must be >= 0, got {g}")));
            }
        }
        if !(self.ccp_epsilon > 0.0) || !self.ccp_epsilon.is_finite() {
            return Err(Error::config(format!("ccp_epsilon must be positive, got {}", self.ccp_epsilon)));
        }
        self.solver.validate()
    }

    pub fn from_json_str(s: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(s).map_err(|e| Error::config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_json_file(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_json_str(&text)
    }

    /// Same scenario with the RIS-side links switched off.
    pub fn without_ris(&self) -> Self {
        Self {
            link_gain_ris_bs: 0.0,
            link_gain_ris_user: 0.0,
            ..self.clone()
        }
    }
}
