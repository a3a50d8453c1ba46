use super::decomp::eigh;
use super::{CMatrix, HermitianPsd};
use crate::error::{Error, Result};

/// Euclidean projection of a real vector onto `{x >= 0, sum(x) <= budget}`.
pub fn project_capped_simplex(values: &[f64], budget: f64) -> Vec<f64> {
    let clamped: Vec<f64> = values.iter().map(|&v| v.max(0.0)).collect();
    let total: f64 = clamped.iter().sum();
    if total <= budget {
        return clamped;
    }
    // Active budget: shift by the water level tau so that sum (v - tau)_+ = budget.
    let mut sorted: Vec<f64> = values.iter().copied().filter(|&v| v > 0.0).collect();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let mut cumulative = 0.0;
    let mut tau = sorted[0] - budget;
    for (idx, &v) in sorted.iter().enumerate() {
        cumulative += v;
        let candidate = (cumulative - budget) / (idx + 1) as f64;
        if v - candidate > 0.0 {
            tau = candidate;
        } else {
            break;
        }
    }
    values.iter().map(|&v| (v - tau).max(0.0)).collect()
}

/// Frobenius-norm projection of a list of Hermitian matrices onto
/// `{X_j PSD, sum_j Tr(X_j) <= budget}`.
///
/// The eigenvalues of all inputs are stacked and projected jointly onto the
/// capped simplex; eigenvectors are kept.
pub fn project_to_budget(mats: &[CMatrix], budget: f64) -> Result<Vec<HermitianPsd>> {
    if !(budget >= 0.0) || !budget.is_finite() {
        return Err(Error::argument(format!("power budget must be finite and >= 0, got {budget}")));
    }
    let eigs = mats.iter().map(eigh).collect::<Result<Vec<_>>>()?;
    let stacked: Vec<f64> = eigs.iter().flat_map(|e| e.values.iter().copied()).collect();
    let projected = project_capped_simplex(&stacked, budget);

    let mut offset = 0;
    let mut out = Vec::with_capacity(mats.len());
    for e in &eigs {
        let n = e.values.len();
        let vals = &projected[offset..offset + n];
        offset += n;
        let m = e.reconstruct_with(vals).hermitian_part();
        out.push(HermitianPsd::from_trusted(m));
    }
    Ok(out)
}
