//! Dense complex linear algebra with a fixed lexicographic index convention.
//!
//! A composite index `(i_1, ..., i_k)` over dims `(d_1, ..., d_k)` is linearised with `i_1`
//! outermost. Tolerances are relative: a residual passes when it is at most
//! `tol·max(1, ‖input‖_F)`.

mod eigen;
mod matrix;
pub mod random;
mod report;
mod subspace;

pub use eigen::{herm_eigen, herm_eigenvalues, herm_pinv, min_eigenvalue, psd_project, psd_sqrt, HermEigen, HERMITIAN_TOL};
pub use matrix::{
    kron_vec, partial_trace, scale_of, slot_permutation_map, tensor_product, vec_inner, vec_norm, ComplexMatrix, C64,
    ONE, ZERO,
};
pub use report::{CheckItem, CheckReport};
pub use subspace::{subspace_from_spanning, subspace_relate, Subspace, SubspaceRelation};

/// Default relative tolerance.
pub const DEFAULT_TOL: f64 = 1e-9;
