//! Max-min fair transmit covariance and RIS phase optimization for MIMO OFDM
//! broadcast channels assisted by a reconfigurable intelligent surface.
//!
//! The crate is layered bottom-up:
//!
//! * [`linalg`]: small dense complex kernels (eigendecomposition, logdet,
//!   PSD square root, trace-budget projection).
//! * [`channel`]: channel synthesis and the effective RIS channel.
//! * [`rate`]: TIN rates and the fairness rate.
//! * [`surrogate`]: concave minorizers for the two alternating steps.
//! * [`solver`]: the inner first-order solver and the alternating loop.
//! * [`sim`]: Monte Carlo experiments and CSV output.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod channel;
pub mod config;
pub mod error;
pub mod linalg;
pub mod rate;
pub mod sim;
pub mod solver;
pub mod surrogate;
pub mod validate;

pub use channel::{assemble_channel, random_phases, sample_channels, ChannelSet, PhaseVector};
pub use config::{PhaseInit, ScenarioConfig, SolverConfig};
pub use error::{Error, Result};
pub use linalg::{CMatrix, HermitianPsd};
pub use rate::{rate_report, CovarianceSet, RateReport};
pub use solver::{optimize, optimize_covariances, Init, Solution, SolverTrace};
