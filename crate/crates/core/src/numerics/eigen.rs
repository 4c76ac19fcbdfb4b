use faer::{Mat, Side};

use super::matrix::{scale_of, ComplexMatrix, C64};
use crate::error::{Error, Result};

/// Eigendecomposition of a Hermitian matrix.
///
/// `values` are in descending order and column `k` of `vectors` belongs to `values[k]`.
#[derive(Clone, Debug)]
pub struct HermEigen {
    pub values: Vec<f64>,
    pub vectors: ComplexMatrix,
}

impl HermEigen {
    /// `Σ f(λ_k) v_k v_k†`.
    pub fn recompose(&self, f: impl Fn(f64) -> f64) -> ComplexMatrix {
        let n = self.vectors.rows();
        let mut out = ComplexMatrix::zeros(n, n);
        for (k, &lambda) in self.values.iter().enumerate() {
            let w = f(lambda);
            if w == 0.0 {
                continue;
            }
            let v = self.vectors.col(k);
            for i in 0..n {
                let vi = v[i] * w;
                for j in 0..n {
                    out[(i, j)] += vi * v[j].conj();
                }
            }
        }
        out
    }
}

fn to_faer(m: &ComplexMatrix) -> Mat<C64> {
    // symmetrised so that rounding noise in the strict upper triangle is irrelevant
    Mat::from_fn(m.rows(), m.cols(), |i, j| (m[(i, j)] + m[(j, i)].conj()) * 0.5)
}

/// Hermiticity tolerance accepted by the eigensolver, relative to `max(1, ‖a‖_F)`.
pub const HERMITIAN_TOL: f64 = 1e-8;

fn check_hermitian(m: &ComplexMatrix) -> Result<()> {
    if !m.is_square() {
        return Err(Error::DimensionMismatch(format!("{}x{} matrix is not square", m.rows(), m.cols())));
    }
    if !m.is_finite() {
        return Err(Error::InvalidInput("matrix has non-finite entries".into()));
    }
    let defect = m.hermitian_defect();
    if defect > HERMITIAN_TOL * scale_of(m.frobenius_norm()) {
        return Err(Error::NotHermitian { residual: defect });
    }
    Ok(())
}

/// Eigendecomposition of a Hermitian matrix, eigenvalues descending.
///
/// Fails with [`Error::NotHermitian`] when `‖m - m†‖_F` exceeds [`HERMITIAN_TOL`]`·max(1, ‖m‖_F)`.
pub fn herm_eigen(m: &ComplexMatrix) -> Result<HermEigen> {
    check_hermitian(m)?;
    let n = m.rows();
    if n == 0 {
        return Ok(HermEigen { values: vec![], vectors: ComplexMatrix::zeros(0, 0) });
    }
    let evd = to_faer(m)
        .self_adjoint_eigen(Side::Lower)
        .map_err(|e| Error::Numerical(format!("eigensolver failed: {e:?}")))?;
    let s = evd.S();
    let u = evd.U();
    let values: Vec<f64> = (0..n).rev().map(|k| s[k].re).collect();
    let vectors = ComplexMatrix::from_fn(n, n, |i, k| u[(i, n - 1 - k)]);
    Ok(HermEigen { values, vectors })
}

/// Eigenvalues of a Hermitian matrix, descending.
pub fn herm_eigenvalues(m: &ComplexMatrix) -> Result<Vec<f64>> {
    check_hermitian(m)?;
    if m.rows() == 0 {
        return Ok(vec![]);
    }
    let mut values = to_faer(m)
        .self_adjoint_eigenvalues(Side::Lower)
        .map_err(|e| Error::Numerical(format!("eigensolver failed: {e:?}")))?;
    values.reverse();
    Ok(values)
}

/// Smallest eigenvalue of a Hermitian matrix (0 for the empty matrix).
pub fn min_eigenvalue(m: &ComplexMatrix) -> Result<f64> {
    Ok(herm_eigenvalues(m)?.last().copied().unwrap_or(0.0))
}

/// PSD square root.
///
/// Eigenvalues in `[-tol·scale, 0)` are clipped to zero; anything lower is [`Error::NotPsd`].
pub fn psd_sqrt(m: &ComplexMatrix, tol: f64) -> Result<ComplexMatrix> {
    let eig = herm_eigen(m)?;
    let floor = -tol * scale_of(m.frobenius_norm());
    if let Some(&min) = eig.values.last() {
        if min < floor {
            return Err(Error::NotPsd { min_eigenvalue: min });
        }
    }
    Ok(eig.recompose(|l| l.max(0.0).sqrt()))
}

/// Nearest PSD matrix in Frobenius norm (negative eigenvalues set to zero).
pub fn psd_project(m: &ComplexMatrix) -> Result<ComplexMatrix> {
    let eig = herm_eigen(&m.hermitian_part())?;
    Ok(eig.recompose(|l| l.max(0.0)))
}

/// Moore–Penrose pseudo-inverse of a Hermitian matrix, dropping eigenvalues below `cutoff`.
pub fn herm_pinv(m: &ComplexMatrix, cutoff: f64) -> Result<ComplexMatrix> {
    let eig = herm_eigen(m)?;
    Ok(eig.recompose(|l| if l.abs() > cutoff { 1.0 / l } else { 0.0 }))
}
