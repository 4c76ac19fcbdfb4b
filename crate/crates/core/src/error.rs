use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("matrix is not Hermitian (‖A - A†‖_F = {residual:.3e})")]
    NotHermitian { residual: f64 },
    #[error("matrix is not positive semidefinite (minimum eigenvalue {min_eigenvalue:.3e})")]
    NotPsd { min_eigenvalue: f64 },
    #[error("matrix is not unitary (defect {residual:.3e})")]
    NotUnitary { residual: f64 },
    #[error("operator entries do not commute (max commutator norm {norm:.3e})")]
    Commutation { norm: f64 },
    #[error("matrix is not doubly stochastic: {0}")]
    NotDoublyStochastic(String),
    #[error("precondition failed: {0}")]
    Precondition(String),
    #[error("unsupported size: {0}")]
    UnsupportedSize(String),
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
}
