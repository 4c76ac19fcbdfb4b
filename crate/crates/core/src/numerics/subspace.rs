use super::matrix::{vec_inner, vec_norm, ComplexMatrix, C64, ZERO};
use crate::error::{Error, Result};

/// Subspace of `C^ambient` held as an orthonormal basis.
#[derive(Clone, Debug, PartialEq)]
pub struct Subspace {
    ambient: usize,
    basis: Vec<Vec<C64>>,
}

impl Subspace {
    pub fn zero(ambient: usize) -> Self {
        Self { ambient, basis: vec![] }
    }

    pub fn full(ambient: usize) -> Self {
        let basis = (0..ambient)
            .map(|k| {
                let mut e = vec![ZERO; ambient];
                e[k] = C64::new(1.0, 0.0);
                e
            })
            .collect();
        Self { ambient, basis }
    }

    /// Span of `vectors`, which are orthonormalised first.
    pub fn span(ambient: usize, vectors: &[Vec<C64>]) -> Result<Self> {
        subspace_from_spanning(ambient, vectors, 1e-10)
    }

    /// Keeps `vectors` verbatim when they are orthonormal to `1e-12`, otherwise orthonormalises
    /// their span.
    pub fn from_basis(ambient: usize, vectors: Vec<Vec<C64>>) -> Result<Self> {
        if vectors.iter().any(|v| v.len() != ambient) {
            return Err(Error::DimensionMismatch(format!("basis vectors must lie in C^{ambient}")));
        }
        let orthonormal = vectors.iter().enumerate().all(|(i, a)| {
            vectors.iter().enumerate().all(|(j, b)| {
                let target = if i == j { 1.0 } else { 0.0 };
                (vec_inner(a, b) - C64::new(target, 0.0)).norm() <= 1e-12
            })
        });
        if orthonormal && vectors.len() <= ambient {
            Ok(Self { ambient, basis: vectors })
        } else {
            Self::span(ambient, &vectors)
        }
    }

    pub fn ambient(&self) -> usize {
        self.ambient
    }

    pub fn dim(&self) -> usize {
        self.basis.len()
    }

    pub fn basis(&self) -> &[Vec<C64>] {
        &self.basis
    }

    /// Orthogonal projection `P = Σ b b†`.
    pub fn projector(&self) -> ComplexMatrix {
        let mut p = ComplexMatrix::zeros(self.ambient, self.ambient);
        for b in &self.basis {
            for i in 0..self.ambient {
                if b[i] == ZERO {
                    continue;
                }
                for j in 0..self.ambient {
                    p[(i, j)] += b[i] * b[j].conj();
                }
            }
        }
        p
    }

    pub fn project(&self, v: &[C64]) -> Vec<C64> {
        let mut out = vec![ZERO; self.ambient];
        for b in &self.basis {
            let c = vec_inner(b, v);
            for (o, x) in out.iter_mut().zip(b) {
                *o += c * x;
            }
        }
        out
    }

    /// Norm of the component of `v` orthogonal to the subspace.
    pub fn distance_to(&self, v: &[C64]) -> f64 {
        let p = self.project(v);
        v.iter().zip(&p).map(|(a, b)| (a - b).norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn orthogonal_complement(&self) -> Self {
        let leftovers: Vec<Vec<C64>> = Self::full(self.ambient)
            .basis
            .iter()
            .map(|e| {
                let p = self.project(e);
                e.iter().zip(&p).map(|(a, b)| a - b).collect()
            })
            .collect();
        let mut c = subspace_from_spanning(self.ambient, &leftovers, 1e-8).expect("ambient dimensions agree");
        c.basis.truncate(self.ambient - self.dim());
        c
    }

    /// Image under a linear map given as a matrix.
    pub fn image(&self, m: &ComplexMatrix) -> Result<Self> {
        if m.cols() != self.ambient {
            return Err(Error::DimensionMismatch(format!(
                "map with {} columns applied to a subspace of C^{}",
                m.cols(),
                self.ambient
            )));
        }
        let vectors: Vec<Vec<C64>> = self.basis.iter().map(|b| m.apply(b)).collect();
        subspace_from_spanning(m.rows(), &vectors, 1e-10)
    }

    /// Tensor product with another subspace (left factor outermost).
    pub fn tensor(&self, other: &Self) -> Self {
        let mut basis = Vec::with_capacity(self.dim() * other.dim());
        for a in &self.basis {
            for b in &other.basis {
                basis.push(super::matrix::kron_vec(a, b));
            }
        }
        Self { ambient: self.ambient * other.ambient, basis }
    }
}

/// Orthonormal basis of the span of `vectors` by Gram–Schmidt with largest-residual pivoting.
///
/// A candidate whose residual norm falls below `rank_tol·max(1, largest input norm)` is dropped.
pub fn subspace_from_spanning(ambient: usize, vectors: &[Vec<C64>], rank_tol: f64) -> Result<Subspace> {
    if let Some(bad) = vectors.iter().find(|v| v.len() != ambient) {
        return Err(Error::DimensionMismatch(format!(
            "vector of length {} in C^{ambient}",
            bad.len()
        )));
    }
    let scale = vectors.iter().map(|v| vec_norm(v)).fold(1.0, f64::max);
    let cutoff = rank_tol * scale;
    let mut residuals: Vec<Vec<C64>> = vectors.to_vec();
    let mut basis: Vec<Vec<C64>> = Vec::new();
    loop {
        if basis.len() == ambient {
            break;
        }
        let Some((k, norm)) = residuals
            .iter()
            .enumerate()
            .map(|(k, r)| (k, vec_norm(r)))
            .max_by(|a, b| a.1.total_cmp(&b.1))
        else {
            break;
        };
        if norm <= cutoff {
            break;
        }
        let mut q = residuals.swap_remove(k);
        // second pass keeps the basis orthonormal to working precision
        for _ in 0..2 {
            for b in &basis {
                let c = vec_inner(b, &q);
                for (x, y) in q.iter_mut().zip(b) {
                    *x -= c * y;
                }
            }
        }
        let qn = vec_norm(&q);
        if qn <= cutoff {
            continue;
        }
        for x in q.iter_mut() {
            *x /= qn;
        }
        for r in residuals.iter_mut() {
            let c = vec_inner(&q, r);
            for (x, y) in r.iter_mut().zip(&q) {
                *x -= c * y;
            }
        }
        basis.push(q);
    }
    Ok(Subspace { ambient, basis })
}

/// Residuals comparing two subspaces of the same space.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SubspaceRelation {
    /// `‖P_U - P_V‖_F`
    pub equal: f64,
    /// `‖(I - P_V) P_U‖_F`
    pub u_in_v: f64,
    /// `‖(I - P_U) P_V‖_F`
    pub v_in_u: f64,
}

pub fn subspace_relate(u: &Subspace, v: &Subspace) -> Result<SubspaceRelation> {
    if u.ambient != v.ambient {
        return Err(Error::DimensionMismatch(format!(
            "subspaces of C^{} and C^{}",
            u.ambient, v.ambient
        )));
    }
    let leak = |a: &Subspace, b: &Subspace| -> f64 {
        a.basis.iter().map(|x| b.distance_to(x).powi(2)).sum::<f64>().sqrt()
    };
    // ‖P_U - P_V‖² splits into the two leaks, which avoids cancelling dimensions against overlaps
    let (u_in_v, v_in_u) = (leak(u, v), leak(v, u));
    Ok(SubspaceRelation { equal: u_in_v.hypot(v_in_u), u_in_v, v_in_u })
}
