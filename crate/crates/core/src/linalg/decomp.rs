use num_complex::Complex64;

use super::CMatrix;
use crate::error::{Error, Result};

/// Relative tolerance used to classify Hermitian and PSD inputs.
pub const PSD_TOL: f64 = 1e-10;

const JACOBI_MAX_SWEEPS: usize = 64;

/// Eigendecomposition `A = V diag(values) V^H` of a Hermitian matrix.
#[derive(Debug, Clone)]
pub struct HermitianEigen {
    /// Eigenvalues in ascending order.
    pub values: Vec<f64>,
    /// Unitary matrix whose columns are the matching eigenvectors.
    pub vectors: CMatrix,
}

impl HermitianEigen {
    pub fn reconstruct_with(&self, values: &[f64]) -> CMatrix {
        let n = self.values.len();
        let v = &self.vectors;
        let mut out = CMatrix::zeros(n, n);
        for (j, &lam) in values.iter().enumerate() {
            if lam == 0.0 {
                continue;
            }
            for r in 0..n {
                let vr = v[(r, j)] * lam;
                for c in 0..n {
                    out[(r, c)] += vr * v[(c, j)].conj();
                }
            }
        }
        out
    }

    pub fn smallest(&self) -> f64 {
        self.values.first().copied().unwrap_or(0.0)
    }

    pub fn largest(&self) -> f64 {
        self.values.last().copied().unwrap_or(0.0)
    }
}

pub(crate) fn check_hermitian(a: &CMatrix) -> Result<()> {
    if !a.is_square() {
        return Err(Error::argument(format!(
            "expected a square matrix, got {}x{}",
            a.rows(),
            a.cols()
        )));
    }
    let dev = a.hermitian_deviation();
    if dev > PSD_TOL * (1.0 + a.max_abs()) {
        return Err(Error::argument(format!("matrix is not Hermitian (deviation {dev:e})")));
    }
    Ok(())
}

/// Cyclic complex Jacobi eigensolver for Hermitian matrices.
///
/// The input is symmetrized first, so tiny asymmetries from round-off are harmless.
pub fn eigh(a: &CMatrix) -> Result<HermitianEigen> {
    check_hermitian(a)?;
    let n = a.rows();
    let mut m = a.hermitian_part();
    let mut v = CMatrix::identity(n);

    let total = m.frobenius_norm();
    if n > 1 && total > 0.0 {
        for _ in 0..JACOBI_MAX_SWEEPS {
            let off: f64 = (0..n)
                .flat_map(|r| (0..n).filter(move |&c| c != r).map(move |c| (r, c)))
                .map(|(r, c)| m[(r, c)].norm_sqr())
                .sum::<f64>()
                .sqrt();
            if off <= 1e-15 * total {
                break;
            }
            for p in 0..n - 1 {
                for q in p + 1..n {
                    rotate(&mut m, &mut v, p, q);
                }
            }
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    let diag: Vec<f64> = (0..n).map(|d| m[(d, d)].re).collect();
    order.sort_by(|&x, &y| diag[x].total_cmp(&diag[y]));
    let values = order.iter().map(|&j| diag[j]).collect();
    let vectors = CMatrix::from_fn(n, n, |r, c| v[(r, order[c])]);
    Ok(HermitianEigen { values, vectors })
}

/// One Jacobi rotation annihilating `m[(p, q)]`: a diagonal phase makes the
/// pivot real, then a real Givens rotation zeroes it.
fn rotate(m: &mut CMatrix, v: &mut CMatrix, p: usize, q: usize) {
    let apq = m[(p, q)];
    let mag = apq.norm();
    if mag == 0.0 {
        return;
    }
    let app = m[(p, p)].re;
    let aqq = m[(q, q)].re;
    if mag <= 1e-300 || mag < 1e-18 * (app.abs() + aqq.abs()) {
        m[(p, q)] = Complex64::new(0.0, 0.0);
        m[(q, p)] = Complex64::new(0.0, 0.0);
        return;
    }
    let phase = (apq / mag).conj();
    let tau = (aqq - app) / (2.0 * mag);
    let t = if tau >= 0.0 {
        1.0 / (tau + (1.0 + tau * tau).sqrt())
    } else {
        -1.0 / (-tau + (1.0 + tau * tau).sqrt())
    };
    let c = 1.0 / (1.0 + t * t).sqrt();
    let s = t * c;
    let n = m.rows();

    // W = [[c, s], [-s*phase, c*phase]] acting on columns p, q.
    let w_pp = Complex64::new(c, 0.0);
    let w_qp = -phase * s;
    let w_pq = Complex64::new(s, 0.0);
    let w_qq = phase * c;

    for r in 0..n {
        let mp = m[(r, p)];
        let mq = m[(r, q)];
        m[(r, p)] = mp * w_pp + mq * w_qp;
        m[(r, q)] = mp * w_pq + mq * w_qq;
        let vp = v[(r, p)];
        let vq = v[(r, q)];
        v[(r, p)] = vp * w_pp + vq * w_qp;
        v[(r, q)] = vp * w_pq + vq * w_qq;
    }
    for col in 0..n {
        let mp = m[(p, col)];
        let mq = m[(q, col)];
        m[(p, col)] = w_pp.conj() * mp + w_qp.conj() * mq;
        m[(q, col)] = w_pq.conj() * mp + w_qq.conj() * mq;
    }
    m[(p, q)] = Complex64::new(0.0, 0.0);
    m[(q, p)] = Complex64::new(0.0, 0.0);
    m[(p, p)].im = 0.0;
    m[(q, q)].im = 0.0;
}

/// Lower-triangular Cholesky factor `L` with `A = L L^H`, or `None` when a
/// pivot is not strictly positive.
pub fn cholesky(a: &CMatrix) -> Option<CMatrix> {
    debug_assert!(a.is_square());
    let n = a.rows();
    let mut l = CMatrix::zeros(n, n);
    for j in 0..n {
        let mut d = a[(j, j)].re;
        for k in 0..j {
            d -= l[(j, k)].norm_sqr();
        }
        if !(d > 0.0) {
            return None;
        }
        let ljj = d.sqrt();
        l[(j, j)] = Complex64::new(ljj, 0.0);
        for i in j + 1..n {
            let mut s = a[(i, j)];
            for k in 0..j {
                s -= l[(i, k)] * l[(j, k)].conj();
            }
            l[(i, j)] = s / ljj;
        }
    }
    Some(l)
}

/// Natural-log determinant through Cholesky; `None` if not positive definite.
pub fn logdet_cholesky(a: &CMatrix) -> Option<f64> {
    let l = cholesky(a)?;
    Some((0..l.rows()).map(|d| 2.0 * l[(d, d)].re.ln()).sum())
}

/// Natural-log determinant of a Hermitian positive-definite matrix.
pub fn logdet(a: &CMatrix) -> Result<f64> {
    check_hermitian(a)?;
    if let Some(v) = logdet_cholesky(&a.hermitian_part()) {
        return Ok(v);
    }
    let eig = eigh(a)?;
    let smallest = eig.smallest();
    if smallest > 0.0 {
        // Cholesky can fail on extremely ill-conditioned but PD inputs.
        return Ok(eig.values.iter().map(|v| v.ln()).sum());
    }
    Err(Error::Domain {
        message: "logdet requires a positive-definite matrix".into(),
        smallest_eigenvalue: smallest,
    })
}

/// Inverse of a Hermitian positive-definite matrix via its Cholesky factor.
pub fn inverse_hpd(a: &CMatrix) -> Result<CMatrix> {
    let l = cholesky(a).ok_or_else(|| {
        let smallest = eigh(a).map(|e| e.smallest()).unwrap_or(f64::NAN);
        Error::Domain {
            message: "inverse requires a positive-definite matrix".into(),
            smallest_eigenvalue: smallest,
        }
    })?;
    let n = l.rows();
    // Solve L Y = I, then A^{-1} = Y^H Y.
    let mut y = CMatrix::zeros(n, n);
    for col in 0..n {
        for i in 0..n {
            let mut s = if i == col {
                Complex64::new(1.0, 0.0)
            } else {
                Complex64::new(0.0, 0.0)
            };
            for k in 0..i {
                s -= l[(i, k)] * y[(k, col)];
            }
            y[(i, col)] = s / l[(i, i)].re;
        }
    }
    Ok(y.adjoint_matmul(&y))
}

/// Hermitian PSD square root; small negative eigenvalues are clamped to zero.
pub fn psd_sqrt(a: &CMatrix) -> Result<CMatrix> {
    let eig = eigh(a)?;
    let scale = 1.0 + eig.largest().abs();
    if eig.smallest() < -PSD_TOL * scale {
        return Err(Error::Domain {
            message: "square root requires a positive-semidefinite matrix".into(),
            smallest_eigenvalue: eig.smallest(),
        });
    }
    let roots: Vec<f64> = eig.values.iter().map(|&v| v.max(0.0).sqrt()).collect();
    Ok(eig.reconstruct_with(&roots))
}

/// Largest eigenvalue of a Hermitian PSD matrix by power iteration.
pub fn spectral_norm_psd(a: &CMatrix) -> f64 {
    debug_assert!(a.is_square());
    let n = a.rows();
    let mut x: Vec<Complex64> = (0..n)
        .map(|j| Complex64::new(1.0 + 0.1 * j as f64, 0.05 * j as f64))
        .collect();
    let mut estimate = 0.0;
    for _ in 0..200 {
        let y: Vec<Complex64> = (0..n)
            .map(|r| (0..n).map(|c| a[(r, c)] * x[c]).sum())
            .collect();
        let norm = y.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if norm == 0.0 {
            return 0.0;
        }
        let xn = x.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        let next = norm / xn;
        x = y.into_iter().map(|z| z / norm).collect();
        if (next - estimate).abs() <= 1e-10 * next {
            estimate = next;
            break;
        }
        estimate = next;
    }
    estimate
}
