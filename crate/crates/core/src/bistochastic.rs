//! Bistochastic operator matrices, bi-isometries and bi-unitaries.
//!
//! A bistochastic matrix over `X = A = {0..n}` with block dimension `d` is stored as one
//! `(n·n·d)²` matrix whose block `E_{x,x',a,a'}` sits at row `(x, a, ·)` and column `(x', a', ·)`.
//! Bi-isometry blocks are indexed `V_{a,x}` with `a` outermost.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::numerics::random::{haar_unitary, seeded};
use crate::numerics::{herm_eigen, min_eigenvalue, psd_sqrt, scale_of, CheckReport, ComplexMatrix, C64, HERMITIAN_TOL};

#[derive(Clone, Debug, PartialEq)]
pub struct BistochasticMatrix {
    n: usize,
    d: usize,
    m: ComplexMatrix,
}

impl BistochasticMatrix {
    /// Wraps a candidate matrix; only the shape is validated.
    pub fn new(n: usize, d: usize, m: ComplexMatrix) -> Result<Self> {
        let size = n * n * d;
        if n == 0 || d == 0 || m.shape() != (size, size) {
            return Err(Error::DimensionMismatch(format!(
                "bistochastic matrix with n={n}, d={d} must be {size}x{size}, got {}x{}",
                m.rows(),
                m.cols()
            )));
        }
        if !m.is_finite() {
            return Err(Error::InvalidInput("non-finite entries".into()));
        }
        Ok(Self { n, d, m })
    }

    /// Assembles the matrix from a block function `(x, x', a, a') -> E_{x,x',a,a'}`.
    pub fn from_blocks(n: usize, d: usize, mut block: impl FnMut(usize, usize, usize, usize) -> ComplexMatrix) -> Self {
        let mut m = ComplexMatrix::zeros(n * n * d, n * n * d);
        for x in 0..n {
            for a in 0..n {
                for xp in 0..n {
                    for ap in 0..n {
                        let b = block(x, xp, a, ap);
                        m.set_block((x * n + a) * d, (xp * n + ap) * d, &b);
                    }
                }
            }
        }
        Self { n, d, m }
    }

    /// `E_{x,x',a,a'} = δ_{a,σ(x)} δ_{a',σ(x')}` with scalar blocks.
    pub fn from_permutation(sigma: &[usize]) -> Self {
        let n = sigma.len();
        Self::from_blocks(n, 1, |x, xp, a, ap| {
            let v = if a == sigma[x] && ap == sigma[xp] { 1.0 } else { 0.0 };
            ComplexMatrix::from_real(1, 1, &[v]).expect("1x1")
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.m
    }

    pub fn block(&self, x: usize, xp: usize, a: usize, ap: usize) -> ComplexMatrix {
        let (n, d) = (self.n, self.d);
        self.m.block((x * n + a) * d, (xp * n + ap) * d, d, d)
    }

    /// The matrix with blocks `Ẽ_{a,a',x,x'} = E_{x,x',a,a'}`.
    pub fn reindexed(&self) -> ComplexMatrix {
        self.m.permute_slots(&[self.n, self.n, self.d], &[1, 0, 2]).expect("shape validated at construction")
    }
}

/// Items `hermitian`, `psd`, `trA`, `trX`.
pub fn check_bistochastic(e: &BistochasticMatrix, tol: f64) -> CheckReport {
    let (n, d) = (e.n, e.d);
    let thr = tol * scale_of(e.m.frobenius_norm());
    let mut report = CheckReport::new();
    let herm = e.m.hermitian_defect();
    report.push("hermitian", herm, thr);
    let psd = if herm <= HERMITIAN_TOL * scale_of(e.m.frobenius_norm()) {
        min_eigenvalue(&e.m).map(|l| (-l).max(0.0)).unwrap_or(f64::INFINITY)
    } else {
        f64::INFINITY
    };
    report.push("psd", psd, thr);
    let id = ComplexMatrix::identity(d);
    let zero = ComplexMatrix::zeros(d, d);
    let mut tr_a: f64 = 0.0;
    for x in 0..n {
        for xp in 0..n {
            let mut s = ComplexMatrix::zeros(d, d);
            for a in 0..n {
                s += &e.block(x, xp, a, a);
            }
            tr_a = tr_a.max(s.distance(if x == xp { &id } else { &zero }));
        }
    }
    report.push("trA", tr_a, thr);
    let mut tr_x: f64 = 0.0;
    for a in 0..n {
        for ap in 0..n {
            let mut s = ComplexMatrix::zeros(d, d);
            for x in 0..n {
                s += &e.block(x, x, a, ap);
            }
            tr_x = tr_x.max(s.distance(if a == ap { &id } else { &zero }));
        }
    }
    report.push("trX", tr_x, thr);
    report
}

/// Blocks `V_{a,x}: C^{d_h} → C^{d_k}`.
#[derive(Clone, Debug, PartialEq)]
pub struct BiIsometry {
    n: usize,
    d_h: usize,
    d_k: usize,
    blocks: Vec<ComplexMatrix>,
}

impl BiIsometry {
    /// `blocks[a·n + x]` is `V_{a,x}`; shapes are validated, isometry conditions are not.
    pub fn new(n: usize, d_h: usize, d_k: usize, blocks: Vec<ComplexMatrix>) -> Result<Self> {
        if n == 0 || d_h == 0 || d_k == 0 || blocks.len() != n * n {
            return Err(Error::DimensionMismatch(format!("expected {} blocks, got {}", n * n, blocks.len())));
        }
        if blocks.iter().any(|b| b.shape() != (d_k, d_h)) {
            return Err(Error::DimensionMismatch(format!("every block must be {d_k}x{d_h}")));
        }
        Ok(Self { n, d_h, d_k, blocks })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn d_h(&self) -> usize {
        self.d_h
    }

    pub fn d_k(&self) -> usize {
        self.d_k
    }

    pub fn block(&self, a: usize, x: usize) -> &ComplexMatrix {
        &self.blocks[a * self.n + x]
    }

    pub fn blocks(&self) -> &[ComplexMatrix] {
        &self.blocks
    }

    /// Block matrix with `V_{a,x}` at block row `a`, block column `x`.
    pub fn full(&self) -> ComplexMatrix {
        let grid: Vec<Vec<ComplexMatrix>> =
            (0..self.n).map(|a| (0..self.n).map(|x| self.block(a, x).clone()).collect()).collect();
        ComplexMatrix::from_blocks(&grid).expect("uniform blocks")
    }

    /// Block transpose, `V_{a,x}` moved to block position `(x, a)`.
    pub fn block_transpose(&self) -> ComplexMatrix {
        let grid: Vec<Vec<ComplexMatrix>> =
            (0..self.n).map(|x| (0..self.n).map(|a| self.block(a, x).clone()).collect()).collect();
        ComplexMatrix::from_blocks(&grid).expect("uniform blocks")
    }
}

/// Items `isometry` (`Σ_a V_{a,x}†V_{a,x'} = δ I`) and `transpose_isometry` (`Σ_x V_{a,x}†V_{a',x} = δ I`).
pub fn check_biisometry(v: &BiIsometry, tol: f64) -> CheckReport {
    let n = v.n;
    let thr = tol * scale_of(v.full().frobenius_norm());
    let id = ComplexMatrix::identity(v.d_h);
    let zero = ComplexMatrix::zeros(v.d_h, v.d_h);
    let mut iso: f64 = 0.0;
    let mut iso_t: f64 = 0.0;
    for i in 0..n {
        for j in 0..n {
            let target = if i == j { &id } else { &zero };
            let mut s = ComplexMatrix::zeros(v.d_h, v.d_h);
            let mut t = ComplexMatrix::zeros(v.d_h, v.d_h);
            for k in 0..n {
                s += &v.block(k, i).adjoint().matmul(v.block(k, j));
                t += &v.block(i, k).adjoint().matmul(v.block(j, k));
            }
            iso = iso.max(s.distance(target));
            iso_t = iso_t.max(t.distance(target));
        }
    }
    let mut report = CheckReport::new();
    report.push("isometry", iso, thr);
    report.push("transpose_isometry", iso_t, thr);
    report
}

/// Square blocks `u_{a,x} ∈ M_d` such that `U` and its block transpose are unitary.
#[derive(Clone, Debug, PartialEq)]
pub struct BiUnitary {
    inner: BiIsometry,
}

impl BiUnitary {
    /// `blocks[a·n + x]` is `u_{a,x}`; shapes are validated, unitarity is not.
    pub fn new(n: usize, d: usize, blocks: Vec<ComplexMatrix>) -> Result<Self> {
        Ok(Self { inner: BiIsometry::new(n, d, d, blocks)? })
    }

    /// Reads the blocks off an `(n·d)²` block matrix.
    pub fn from_full(n: usize, d: usize, full: &ComplexMatrix) -> Result<Self> {
        if full.shape() != (n * d, n * d) {
            return Err(Error::DimensionMismatch(format!("expected a {0}x{0} matrix", n * d)));
        }
        let blocks = (0..n * n).map(|k| full.block((k / n) * d, (k % n) * d, d, d)).collect();
        Self::new(n, d, blocks)
    }

    /// Scalar bi-unitary of a permutation, `u_{a,x} = δ_{a,σ(x)}`.
    pub fn from_permutation(sigma: &[usize]) -> Self {
        let n = sigma.len();
        let blocks = (0..n * n)
            .map(|k| {
                let (a, x) = (k / n, k % n);
                ComplexMatrix::from_real(1, 1, &[if a == sigma[x] { 1.0 } else { 0.0 }]).expect("1x1")
            })
            .collect();
        Self::new(n, 1, blocks).expect("shapes are consistent")
    }

    pub fn n(&self) -> usize {
        self.inner.n
    }

    pub fn d(&self) -> usize {
        self.inner.d_h
    }

    pub fn block(&self, a: usize, x: usize) -> &ComplexMatrix {
        self.inner.block(a, x)
    }

    pub fn blocks(&self) -> &[ComplexMatrix] {
        self.inner.blocks()
    }

    pub fn full(&self) -> ComplexMatrix {
        self.inner.full()
    }

    pub fn block_transpose(&self) -> ComplexMatrix {
        self.inner.block_transpose()
    }

    pub fn as_biisometry(&self) -> &BiIsometry {
        &self.inner
    }

    pub fn into_biisometry(self) -> BiIsometry {
        self.inner
    }
}

/// Items `u_adj_u`, `u_u_adj`, `ut_adj_ut`, `ut_ut_adj`.
pub fn check_biunitary(u: &BiUnitary, tol: f64) -> CheckReport {
    let full = u.full();
    let ut = u.block_transpose();
    let id = ComplexMatrix::identity(full.rows());
    let thr = tol * scale_of(full.frobenius_norm());
    let mut report = CheckReport::new();
    report.push("u_adj_u", full.adjoint().matmul(&full).distance(&id), thr);
    report.push("u_u_adj", full.matmul(&full.adjoint()).distance(&id), thr);
    report.push("ut_adj_ut", ut.adjoint().matmul(&ut).distance(&id), thr);
    report.push("ut_ut_adj", ut.matmul(&ut.adjoint()).distance(&id), thr);
    report
}

/// `E_{x,x',a,a'} = V_{a,x}† V_{a',x'}`.
pub fn from_biisometry(v: &BiIsometry, tol: f64) -> Result<BistochasticMatrix> {
    let report = check_biisometry(v, tol);
    if !report.overall_pass() {
        return Err(Error::Precondition(format!(
            "not a bi-isometry (residuals {:.3e}, {:.3e})",
            report.residual("isometry"),
            report.residual("transpose_isometry")
        )));
    }
    Ok(BistochasticMatrix::from_blocks(v.n, v.d_h, |x, xp, a, ap| v.block(a, x).adjoint().matmul(v.block(ap, xp))))
}

/// Gram-matrix factorisation `E_{x,x',a,a'} = V_{a,x}† V_{a',x'}`.
///
/// The Gram matrix `G_{(a,x),(a',x')} = E_{x,x',a,a'}` is PSD; with `W = √G` the block column
/// `(a, x)` of `W` is `V_{a,x}`, so `d_k = n²d`. With `truncate` the rows of `W` are replaced by
/// `√λ_k q_k†` for the eigenvalues above `1e-10·scale`, giving `d_k` equal to the numerical rank.
pub fn factorize(e: &BistochasticMatrix, tol: f64, truncate: bool) -> Result<BiIsometry> {
    let report = check_bistochastic(e, tol);
    if !report.overall_pass() {
        let worst = report.items.iter().filter(|i| !i.pass).map(|i| i.name.as_str()).collect::<Vec<_>>().join(", ");
        return Err(Error::Precondition(format!("not a bistochastic operator matrix (failing: {worst})")));
    }
    let (n, d) = (e.n, e.d);
    let gram = e.reindexed();
    let w = if truncate {
        let eig = herm_eigen(&gram)?;
        let cutoff = 1e-10 * scale_of(gram.frobenius_norm());
        let kept: Vec<usize> = (0..eig.values.len()).filter(|&k| eig.values[k] > cutoff).collect();
        let size = gram.rows();
        ComplexMatrix::from_fn(kept.len().max(1), size, |r, c| match kept.get(r) {
            Some(&k) => eig.vectors[(c, k)].conj() * eig.values[k].sqrt(),
            None => C64::new(0.0, 0.0),
        })
    } else {
        psd_sqrt(&gram, tol)?
    };
    let d_k = w.rows();
    let blocks = (0..n * n).map(|k| w.block(0, k * d, d_k, d)).collect();
    BiIsometry::new(n, d, d_k, blocks)
}

/// Random bi-unitary from the conjugated Fourier family.
///
/// `u_{a,x} = n^{-1/2} ω^{ax} V_a` with Haar unitaries `V_a`, then `U ↦ (u⊗I) U (v⊗w)` with Haar
/// `u, v ∈ M_n`, `w ∈ M_d`. This family does not exhaust all bi-unitaries.
pub fn random_biunitary(n: usize, d: usize, seed: u64) -> BiUnitary {
    assert!(n >= 1 && d >= 1, "random_biunitary needs n, d >= 1");
    let mut rng = seeded(seed);
    let vs: Vec<ComplexMatrix> = (0..n).map(|_| haar_unitary(d, &mut rng)).collect();
    let left = haar_unitary(n, &mut rng);
    let right = haar_unitary(n, &mut rng);
    let w = haar_unitary(d, &mut rng);
    let norm = 1.0 / (n as f64).sqrt();
    let fourier = |a: usize, x: usize| C64::from_polar(norm, 2.0 * PI * ((a * x) % n) as f64 / n as f64);
    let mut blocks = Vec::with_capacity(n * n);
    for a in 0..n {
        for x in 0..n {
            let mut acc = ComplexMatrix::zeros(d, d);
            for b in 0..n {
                for y in 0..n {
                    let coeff = left[(a, b)] * fourier(b, y) * right[(y, x)];
                    acc += &vs[b].scale(coeff);
                }
            }
            blocks.push(acc.matmul(&w));
        }
    }
    BiUnitary::new(n, d, blocks).expect("shapes are consistent")
}

/// Result of testing membership in the cone `L_X`.
#[derive(Clone, Debug)]
pub struct LxCheck {
    pub report: CheckReport,
    /// `Tr(C)/n`, the only admissible constant.
    pub c: C64,
}

/// Membership of `λ_{x,x',a,a'} = C[(x,a),(x',a')]` in `L_X`.
///
/// Items `sum_over_outputs` (`Σ_b λ_{x,x',b,b} = δ_{x,x'} c`) and `sum_over_inputs`
/// (`Σ_y λ_{y,y,a,a'} = δ_{a,a'} c`), each the largest entrywise deviation.
pub fn lx_check(m: &ComplexMatrix, n: usize, tol: f64) -> Result<LxCheck> {
    if n == 0 || m.shape() != (n * n, n * n) {
        return Err(Error::DimensionMismatch(format!(
            "L_X membership needs an {0}x{0} matrix for n={n}, got {1}x{2}",
            n * n,
            m.rows(),
            m.cols()
        )));
    }
    let c = m.trace() / n as f64;
    let lambda = |x: usize, xp: usize, a: usize, ap: usize| m[(x * n + a, xp * n + ap)];
    let mut out_res: f64 = 0.0;
    let mut in_res: f64 = 0.0;
    for i in 0..n {
        for j in 0..n {
            let target = if i == j { c } else { C64::new(0.0, 0.0) };
            let s_out: C64 = (0..n).map(|b| lambda(i, j, b, b)).sum();
            let s_in: C64 = (0..n).map(|y| lambda(y, y, i, j)).sum();
            out_res = out_res.max((s_out - target).norm());
            in_res = in_res.max((s_in - target).norm());
        }
    }
    let thr = tol * scale_of(m.frobenius_norm());
    let mut report = CheckReport::new();
    report.push("sum_over_outputs", out_res, thr);
    report.push("sum_over_inputs", in_res, thr);
    Ok(LxCheck { report, c })
}

/// The flip `λ'_{x,x',a,a'} = λ_{x',x,a',a}`, which is the full transpose.
pub fn lx_flip(m: &ComplexMatrix) -> ComplexMatrix {
    m.transpose()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scalar(v: f64) -> ComplexMatrix {
        ComplexMatrix::from_real(1, 1, &[v]).unwrap()
    }

    #[test]
    fn uniform_and_permutation_are_bistochastic() {
        let n = 3;
        let uniform = BistochasticMatrix::new(n, 2, ComplexMatrix::identity(n * n * 2).scale_real(1.0 / n as f64)).unwrap();
        assert!(check_bistochastic(&uniform, 1e-9).overall_pass());
        let perm = BistochasticMatrix::from_permutation(&[2, 0, 1]);
        assert!(check_bistochastic(&perm, 1e-9).overall_pass());
    }

    #[test]
    fn column_defect_is_reported_by_trx() {
        // rows sum to one, columns to 1.3 and 0.7
        let b = [[0.6, 0.4], [0.7, 0.3]];
        let e = BistochasticMatrix::from_blocks(2, 1, |x, xp, a, ap| {
            scalar(if x == xp && a == ap { b[x][a] } else { 0.0 })
        });
        let r = check_bistochastic(&e, 1e-9);
        assert!(r.passes("trA"));
        assert!((r.residual("trX") - 0.3).abs() < 1e-12);
    }

    #[test]
    fn permutation_biisometry_gives_permutation_matrix() {
        let sigma = [1, 2, 0];
        let u = BiUnitary::from_permutation(&sigma);
        assert!(check_biunitary(&u, 1e-12).overall_pass());
        let e = from_biisometry(u.as_biisometry(), 1e-9).unwrap();
        assert!(e.matrix().distance(BistochasticMatrix::from_permutation(&sigma).matrix()) < 1e-15);
    }

    #[test]
    fn factorize_uniform_n2() {
        let e = BistochasticMatrix::new(2, 1, ComplexMatrix::identity(4).scale_real(0.5)).unwrap();
        let v = factorize(&e, 1e-9, false).unwrap();
        let r = check_biisometry(&v, 1e-10);
        assert!(r.residual("isometry") <= 1e-10 && r.residual("transpose_isometry") <= 1e-10);
        let back = from_biisometry(&v, 1e-9).unwrap();
        assert!(back.matrix().distance(e.matrix()) <= 1e-10);
    }

    #[test]
    fn truncated_factorization_has_rank_dimension() {
        let e = BistochasticMatrix::from_permutation(&[1, 0]);
        let v = factorize(&e, 1e-9, true).unwrap();
        // the Gram matrix of a permutation is the rank-one projector onto Σ e_{σ(x)} ⊗ e_x
        assert_eq!(v.d_k(), 1);
        let back = from_biisometry(&v, 1e-9).unwrap();
        assert!(back.matrix().distance(e.matrix()) < 1e-12);
    }

    #[test]
    fn factorize_rejects_non_bistochastic() {
        let e = BistochasticMatrix::new(2, 1, ComplexMatrix::identity(4)).unwrap();
        assert!(matches!(factorize(&e, 1e-9, false), Err(Error::Precondition(_))));
    }

    #[test]
    fn fourier_family_n1_is_a_unitary() {
        let u = random_biunitary(1, 3, 5);
        let b = u.block(0, 0);
        assert!(b.adjoint().matmul(b).distance(&ComplexMatrix::identity(3)) < 1e-12);
    }

    #[test]
    fn random_biunitary_n3_d2_seed42() {
        let u = random_biunitary(3, 2, 42);
        let r = check_biunitary(&u, 1e-10);
        for item in &r.items {
            assert!(item.residual <= 1e-10, "{} = {}", item.name, item.residual);
        }
        assert_eq!(random_biunitary(3, 2, 42), u);
    }

    #[test]
    fn identity_is_in_lx_with_c_n() {
        let r = lx_check(&ComplexMatrix::identity(9), 3, 1e-9).unwrap();
        assert!(r.report.overall_pass());
        assert!((r.c - C64::new(3.0, 0.0)).norm() < 1e-14);
    }

    #[test]
    fn lx_perturbation_shows_up_linearly() {
        let n = 2;
        let mut m = ComplexMatrix::identity(4);
        // λ_{0,1,0,0} sits at row (0,0), column (1,0)
        m[(0, 2)] = C64::new(0.25, 0.0);
        let r = lx_check(&m, n, 1e-9).unwrap();
        assert!((r.report.residual("sum_over_outputs") - 0.25).abs() < 1e-14);
        assert!(lx_check(&ComplexMatrix::identity(5), 2, 1e-9).is_err());
    }
}
