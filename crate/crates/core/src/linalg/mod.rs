//! Small dense complex linear algebra: Hermitian eigendecomposition,
//! Cholesky-based log-determinants and inverses, PSD square roots and the
//! joint PSD/trace-budget projection.
//!
//! Everything here targets matrices of dimension up to a few dozen; no
//! blocking or BLAS is involved.

mod decomp;
mod matrix;
mod projection;

use serde::Serialize;

pub use decomp::{
    cholesky, eigh, inverse_hpd, logdet, logdet_cholesky, psd_sqrt, spectral_norm_psd,
    HermitianEigen, PSD_TOL,
};
pub use matrix::CMatrix;
pub use projection::{project_capped_simplex, project_to_budget};

use crate::error::{Error, Result};

/// A Hermitian positive-semidefinite matrix (within [`PSD_TOL`]).
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(transparent)]
pub struct HermitianPsd(CMatrix);

impl HermitianPsd {
    pub fn new(m: CMatrix) -> Result<Self> {
        decomp::check_hermitian(&m)?;
        let eig = eigh(&m)?;
        let scale = 1.0 + eig.largest().abs();
        if eig.smallest() < -PSD_TOL * scale {
            return Err(Error::Domain {
                message: "matrix is not positive semidefinite".into(),
                smallest_eigenvalue: eig.smallest(),
            });
        }
        Ok(Self(m.hermitian_part()))
    }

    /// Wraps a matrix that is PSD by construction (projection output, Gram matrices).
    pub(crate) fn from_trusted(m: CMatrix) -> Self {
        debug_assert!(m.is_square());
        Self(m)
    }

    pub fn zeros(dim: usize) -> Self {
        Self(CMatrix::zeros(dim, dim))
    }

    pub fn scaled_identity(dim: usize, s: f64) -> Self {
        Self(CMatrix::from_real_diag(&vec![s.max(0.0); dim]))
    }

    pub fn dim(&self) -> usize {
        self.0.rows()
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.0
    }

    pub fn into_matrix(self) -> CMatrix {
        self.0
    }

    pub fn trace(&self) -> f64 {
        self.0.trace().re
    }

    pub fn sqrt(&self) -> CMatrix {
        psd_sqrt(&self.0).expect("validated PSD matrix has a square root")
    }
}

impl AsRef<CMatrix> for HermitianPsd {
    fn as_ref(&self) -> &CMatrix {
        &self.0
    }
}
