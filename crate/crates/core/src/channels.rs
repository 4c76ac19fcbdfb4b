//! Bipartite channels `M_X ⊗ M_Y → M_A ⊗ M_B` held as Choi matrices.
//!
//! The Choi matrix is `C = Σ ε_{x,x'} ⊗ ε_{y,y'} ⊗ Γ(ε_{x,x'} ⊗ ε_{y,y'})` with row index
//! `(x, y, a, b)` and column index `(x', y', a', b')`. The duality pairing is
//! `⟨ρ, ω⟩ = Tr(ρ ωᵗ)`, under which the dual channel is a pure reordering of Choi slots.

use serde::{Deserialize, Serialize};

use crate::bistochastic::{check_bistochastic, check_biunitary, BiUnitary, BistochasticMatrix};
use crate::error::{Error, Result};
use crate::numerics::{
    min_eigenvalue, partial_trace, scale_of, vec_inner, vec_norm, CheckReport, ComplexMatrix, C64, HERMITIAN_TOL, ZERO,
};

/// Sizes of the input systems `X`, `Y` and output systems `A`, `B`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Dims {
    pub x: usize,
    pub y: usize,
    pub a: usize,
    pub b: usize,
}

impl Dims {
    pub fn new(x: usize, y: usize, a: usize, b: usize) -> Self {
        Self { x, y, a, b }
    }

    /// All four systems of size `n`.
    pub fn square(n: usize) -> Self {
        Self::new(n, n, n, n)
    }

    pub fn input(&self) -> usize {
        self.x * self.y
    }

    pub fn output(&self) -> usize {
        self.a * self.b
    }

    pub fn choi_size(&self) -> usize {
        self.input() * self.output()
    }

    /// Dimensions of the dual channel.
    pub fn swapped(&self) -> Self {
        Self::new(self.a, self.b, self.x, self.y)
    }

    fn validate(&self) -> Result<()> {
        if self.x == 0 || self.y == 0 || self.a == 0 || self.b == 0 {
            return Err(Error::InvalidInput(format!("all dimensions must be positive, got {self:?}")));
        }
        Ok(())
    }
}

/// Channel `M_{dim_in} → M_{dim_out}` with Choi matrix `Σ ε_{x,x'} ⊗ Φ(ε_{x,x'})`.
#[derive(Clone, Debug, PartialEq)]
pub struct SingleChannel {
    dim_in: usize,
    dim_out: usize,
    choi: ComplexMatrix,
}

impl SingleChannel {
    pub fn new(dim_in: usize, dim_out: usize, choi: ComplexMatrix) -> Result<Self> {
        let s = dim_in * dim_out;
        if dim_in == 0 || dim_out == 0 || choi.shape() != (s, s) {
            return Err(Error::DimensionMismatch(format!("Choi matrix of M_{dim_in} → M_{dim_out} must be {s}x{s}")));
        }
        Ok(Self { dim_in, dim_out, choi })
    }

    /// Choi matrix of an arbitrary linear map given on matrix units.
    pub fn from_map(dim_in: usize, dim_out: usize, f: impl Fn(&ComplexMatrix) -> ComplexMatrix) -> Self {
        let mut choi = ComplexMatrix::zeros(dim_in * dim_out, dim_in * dim_out);
        for x in 0..dim_in {
            for xp in 0..dim_in {
                let img = f(&ComplexMatrix::unit(dim_in, dim_in, x, xp));
                choi.set_block(x * dim_out, xp * dim_out, &img);
            }
        }
        Self { dim_in, dim_out, choi }
    }

    pub fn identity(n: usize) -> Self {
        Self::from_map(n, n, |m| m.clone())
    }

    /// `Φ(ω) = U* ω U`.
    pub fn unitary_conjugation(u: &ComplexMatrix) -> Result<Self> {
        if !u.is_square() {
            return Err(Error::DimensionMismatch("unitary must be square".into()));
        }
        let ua = u.adjoint();
        Ok(Self::from_map(u.rows(), u.cols(), |m| ua.matmul(m).matmul(u)))
    }

    pub fn dim_in(&self) -> usize {
        self.dim_in
    }

    pub fn dim_out(&self) -> usize {
        self.dim_out
    }

    pub fn choi(&self) -> &ComplexMatrix {
        &self.choi
    }

    pub fn apply(&self, rho: &ComplexMatrix) -> Result<ComplexMatrix> {
        apply_choi(&self.choi, self.dim_in, self.dim_out, rho)
    }
}

/// `Φ♯(ω) = Φ(ωᵗ)ᵗ`, whose Choi matrix is the transpose of the Choi matrix of `Φ`.
pub fn sharp(phi: &SingleChannel) -> SingleChannel {
    SingleChannel { dim_in: phi.dim_in, dim_out: phi.dim_out, choi: phi.choi.transpose() }
}

#[derive(Clone, Debug, PartialEq)]
pub struct BipartiteChannel {
    dims: Dims,
    choi: ComplexMatrix,
}

impl BipartiteChannel {
    pub fn new(dims: Dims, choi: ComplexMatrix) -> Result<Self> {
        dims.validate()?;
        let s = dims.choi_size();
        if choi.shape() != (s, s) {
            return Err(Error::DimensionMismatch(format!(
                "Choi matrix for {dims:?} must be {s}x{s}, got {}x{}",
                choi.rows(),
                choi.cols()
            )));
        }
        if !choi.is_finite() {
            return Err(Error::InvalidInput("Choi matrix has non-finite entries".into()));
        }
        Ok(Self { dims, choi })
    }

    /// Choi matrix of a linear map given on matrix units of `M_X ⊗ M_Y`.
    pub fn from_map(dims: Dims, f: impl Fn(&ComplexMatrix) -> ComplexMatrix) -> Self {
        let (i, o) = (dims.input(), dims.output());
        let mut choi = ComplexMatrix::zeros(i * o, i * o);
        for r in 0..i {
            for c in 0..i {
                let img = f(&ComplexMatrix::unit(i, i, r, c));
                choi.set_block(r * o, c * o, &img);
            }
        }
        Self { dims, choi }
    }

    pub fn identity(x: usize, y: usize) -> Self {
        Self::from_map(Dims::new(x, y, x, y), |m| m.clone())
    }

    /// `ρ ⊗ σ ↦ σ ⊗ ρ` on `M_n ⊗ M_n`.
    pub fn swap(n: usize) -> Self {
        Self::from_map(Dims::square(n), |m| m.permute_slots(&[n, n], &[1, 0]).expect("square input"))
    }

    /// `Φ ⊗ Ψ`.
    pub fn product(phi: &SingleChannel, psi: &SingleChannel) -> Self {
        let dims = Dims::new(phi.dim_in, psi.dim_in, phi.dim_out, psi.dim_out);
        let k = phi.choi.kron(&psi.choi);
        // kron is indexed (x, a, y, b); the Choi convention is (x, y, a, b)
        let choi = k
            .permute_slots(&[phi.dim_in, phi.dim_out, psi.dim_in, psi.dim_out], &[0, 2, 1, 3])
            .expect("sizes agree");
        Self { dims, choi }
    }

    pub fn dims(&self) -> Dims {
        self.dims
    }

    pub fn choi(&self) -> &ComplexMatrix {
        &self.choi
    }

    /// `Γ(ε_{x,x'} ⊗ ε_{y,y'})`.
    pub fn image_of_unit(&self, x: usize, xp: usize, y: usize, yp: usize) -> ComplexMatrix {
        let o = self.dims.output();
        let r = x * self.dims.y + y;
        let c = xp * self.dims.y + yp;
        self.choi.block(r * o, c * o, o, o)
    }

    pub fn apply(&self, rho: &ComplexMatrix) -> Result<ComplexMatrix> {
        apply_choi(&self.choi, self.dims.input(), self.dims.output(), rho)
    }
}

/// Evaluates the map with Choi matrix `choi` (input slot first) on `rho`.
pub fn apply_choi(choi: &ComplexMatrix, dim_in: usize, dim_out: usize, rho: &ComplexMatrix) -> Result<ComplexMatrix> {
    if rho.shape() != (dim_in, dim_in) {
        return Err(Error::DimensionMismatch(format!(
            "input must be {dim_in}x{dim_in}, got {}x{}",
            rho.rows(),
            rho.cols()
        )));
    }
    let mut out = ComplexMatrix::zeros(dim_out, dim_out);
    for i in 0..dim_in {
        for ip in 0..dim_in {
            let w = rho[(i, ip)];
            if w == ZERO {
                continue;
            }
            for o in 0..dim_out {
                for op in 0..dim_out {
                    out[(o, op)] += w * choi[(i * dim_out + o, ip * dim_out + op)];
                }
            }
        }
    }
    Ok(out)
}

pub fn apply(c: &BipartiteChannel, rho: &ComplexMatrix) -> Result<ComplexMatrix> {
    c.apply(rho)
}

/// Items `cp`, `tp`, `unital`.
pub fn check_channel(c: &BipartiteChannel, tol: f64) -> CheckReport {
    let (i, o) = (c.dims.input(), c.dims.output());
    let thr = tol * scale_of(c.choi.frobenius_norm());
    let mut report = CheckReport::new();
    let herm = c.choi.hermitian_defect();
    let cp = if herm <= HERMITIAN_TOL * scale_of(c.choi.frobenius_norm()) {
        min_eigenvalue(&c.choi).map(|l| (-l).max(0.0)).unwrap_or(f64::INFINITY)
    } else {
        f64::INFINITY
    };
    report.push("cp", cp, thr);
    let tr_out = partial_trace(&c.choi, &[i, o], 1).expect("sizes agree");
    report.push("tp", tr_out.distance(&ComplexMatrix::identity(i)), thr);
    let unital = c.apply(&ComplexMatrix::identity(i)).expect("sizes agree");
    let unital_res = if i == o { unital.distance(&ComplexMatrix::identity(o)) } else { f64::INFINITY };
    report.push("unital", unital_res, thr);
    report
}

/// No-signalling report.
///
/// `ns_a` accumulates `‖Tr_A Γ(ρ_X ⊗ ε_{y,y'})‖_F` over the traceless basis
/// `{ε_{x,x'} (x≠x'), ε_{x,x} − ε_{0,0}}` (root sum of squares); `ns_b` is the mirror image.
/// `ns_a_slice` and `ns_b_slice` test the equivalent slice conditions
/// `Σ_a C_{(x,y,a,b),(x',y',a,b')} = δ_{x,x'} c_{y,y',b,b'}` directly on the Choi entries, and
/// `ns_agreement` records whether the two formulations reach the same verdict.
pub fn check_ns(c: &BipartiteChannel, tol: f64) -> CheckReport {
    let Dims { x: nx, y: ny, a: na, b: nb } = c.dims;
    let thr = tol * scale_of(c.choi.frobenius_norm());
    let out_dims = [na, nb];

    // Γ on the traceless basis element indexed by `k` of M_n tensored with a unit, via Choi blocks
    let traceless_count = |n: usize| n * n - 1;
    let traceless_image = |n: usize, k: usize, unit_image: &dyn Fn(usize, usize) -> ComplexMatrix| {
        let off = n * (n - 1);
        if k < off {
            let (i, r) = (k / (n - 1), k % (n - 1));
            let j = if r >= i { r + 1 } else { r };
            unit_image(i, j)
        } else {
            let i = k - off + 1;
            &unit_image(i, i) - &unit_image(0, 0)
        }
    };

    let mut direct_a = 0.0;
    for y in 0..ny {
        for yp in 0..ny {
            for k in 0..traceless_count(nx) {
                let img = traceless_image(nx, k, &|x, xp| c.image_of_unit(x, xp, y, yp));
                direct_a += partial_trace(&img, &out_dims, 0).expect("sizes agree").frobenius_norm().powi(2);
            }
        }
    }
    let mut direct_b = 0.0;
    for x in 0..nx {
        for xp in 0..nx {
            for k in 0..traceless_count(ny) {
                let img = traceless_image(ny, k, &|y, yp| c.image_of_unit(x, xp, y, yp));
                direct_b += partial_trace(&img, &out_dims, 1).expect("sizes agree").frobenius_norm().powi(2);
            }
        }
    }

    let entry = |x: usize, y: usize, a: usize, b: usize, xp: usize, yp: usize, ap: usize, bp: usize| {
        c.choi[(((x * ny + y) * na + a) * nb + b, ((xp * ny + yp) * na + ap) * nb + bp)]
    };
    // slice over the A output: M^{y,y',b,b'}_{x,x'} = Σ_a C
    let mut slice_a = 0.0;
    for y in 0..ny {
        for yp in 0..ny {
            for b in 0..nb {
                for bp in 0..nb {
                    let m = |x: usize, xp: usize| (0..na).map(|a| entry(x, y, a, b, xp, yp, a, bp)).sum::<C64>();
                    let mean: C64 = (0..nx).map(|x| m(x, x)).sum::<C64>() / nx as f64;
                    for x in 0..nx {
                        for xp in 0..nx {
                            let target = if x == xp { mean } else { ZERO };
                            slice_a += (m(x, xp) - target).norm_sqr();
                        }
                    }
                }
            }
        }
    }
    let mut slice_b = 0.0;
    for x in 0..nx {
        for xp in 0..nx {
            for a in 0..na {
                for ap in 0..na {
                    let m = |y: usize, yp: usize| (0..nb).map(|b| entry(x, y, a, b, xp, yp, ap, b)).sum::<C64>();
                    let mean: C64 = (0..ny).map(|y| m(y, y)).sum::<C64>() / ny as f64;
                    for y in 0..ny {
                        for yp in 0..ny {
                            let target = if y == yp { mean } else { ZERO };
                            slice_b += (m(y, yp) - target).norm_sqr();
                        }
                    }
                }
            }
        }
    }

    let mut report = CheckReport::new();
    let pa = report.push("ns_a", direct_a.sqrt(), thr);
    let pb = report.push("ns_b", direct_b.sqrt(), thr);
    let sa = report.push("ns_a_slice", slice_a.sqrt(), thr);
    let sb = report.push("ns_b_slice", slice_b.sqrt(), thr);
    report.push_verdict("ns_agreement", pa == sa && pb == sb);
    report
}

/// Dual channel under `⟨ρ, ω⟩ = Tr(ρ ωᵗ)`: Choi slots `(x, y, a, b) → (a, b, x, y)`.
pub fn dual(c: &BipartiteChannel) -> BipartiteChannel {
    let Dims { x, y, a, b } = c.dims;
    let choi = c.choi.permute_slots(&[x, y, a, b], &[2, 3, 0, 1]).expect("sizes agree");
    BipartiteChannel { dims: c.dims.swapped(), choi }
}

/// Channel, no-signalling and dual no-signalling items (prefix `dual.` for the latter).
pub fn check_bicorrelation(c: &BipartiteChannel, tol: f64) -> Result<CheckReport> {
    let d = c.dims;
    if d.a != d.x || d.b != d.y {
        return Err(Error::DimensionMismatch(format!("bicorrelations need a = x and b = y, got {d:?}")));
    }
    let mut report = check_channel(c, tol);
    report.merge("", check_ns(c, tol));
    report.merge("dual", check_ns(&dual(c), tol));
    Ok(report)
}

/// `J_n = (1/n) Σ ε_{x,y} ⊗ ε_{x,y}`.
pub fn maximally_entangled(n: usize) -> ComplexMatrix {
    let mut j = ComplexMatrix::zeros(n * n, n * n);
    let w = C64::new(1.0 / n as f64, 0.0);
    for x in 0..n {
        for y in 0..n {
            j[(x * n + x, y * n + y)] = w;
        }
    }
    j
}

/// Items `concurrent` (`‖Γ(J) − J‖_F`) and `dual_concurrent` (`‖Γ*(J) − J‖_F`).
pub fn check_concurrent(c: &BipartiteChannel, tol: f64) -> Result<CheckReport> {
    let d = c.dims;
    if !(d.x == d.y && d.y == d.a && d.a == d.b) {
        return Err(Error::DimensionMismatch(format!("concurrency needs x = y = a = b, got {d:?}")));
    }
    let j = maximally_entangled(d.x);
    let thr = tol * scale_of(c.choi.frobenius_norm());
    let mut report = CheckReport::new();
    report.push("concurrent", c.apply(&j)?.distance(&j), thr);
    report.push("dual_concurrent", dual(c).apply(&j)?.distance(&j), thr);
    Ok(report)
}

fn check_weights(weights: &[f64]) -> Result<()> {
    if weights.is_empty() {
        return Err(Error::InvalidInput("at least one term is required".into()));
    }
    if weights.iter().any(|&w| !w.is_finite() || w <= 0.0) {
        return Err(Error::InvalidInput("weights must be positive".into()));
    }
    let total: f64 = weights.iter().sum();
    if (total - 1.0).abs() > 1e-12 {
        return Err(Error::InvalidInput(format!("weights sum to {total}, expected 1")));
    }
    Ok(())
}

/// `Γ = Σ w_i Φ_i ⊗ Φ_i♯` with `Φ_i(ω) = U_i* ω U_i`.
pub fn from_local_unitaries(terms: &[(f64, ComplexMatrix)], tol: f64) -> Result<BipartiteChannel> {
    check_weights(&terms.iter().map(|t| t.0).collect::<Vec<_>>())?;
    let n = terms[0].1.rows();
    let mut acc: Option<ComplexMatrix> = None;
    for (w, u) in terms {
        if u.shape() != (n, n) {
            return Err(Error::DimensionMismatch(format!("all unitaries must be {n}x{n}")));
        }
        let defect = u.adjoint().matmul(u).distance(&ComplexMatrix::identity(n));
        if defect > tol * scale_of(u.frobenius_norm()) {
            return Err(Error::NotUnitary { residual: defect });
        }
        let phi = SingleChannel::unitary_conjugation(u)?;
        let term = BipartiteChannel::product(&phi, &sharp(&phi)).choi.scale_real(*w);
        acc = Some(match acc {
            None => term,
            Some(a) => &a + &term,
        });
    }
    BipartiteChannel::new(Dims::square(n), acc.expect("non-empty"))
}

/// Choi entries `Σ_i w_i (1/d_i) Tr(u_{a,x}* u_{a',x'} u_{b',y'}* u_{b,y})`.
///
/// The weighted normalised block traces form a faithful trace on `⊕ M_{d_i}`.
pub fn from_biunitary_trace(terms: &[(f64, BiUnitary)], tol: f64) -> Result<BipartiteChannel> {
    check_weights(&terms.iter().map(|t| t.0).collect::<Vec<_>>())?;
    let n = terms[0].1.n();
    let size = n.pow(4);
    let mut choi = ComplexMatrix::zeros(size, size);
    for (w, u) in terms {
        if u.n() != n {
            return Err(Error::DimensionMismatch("all bi-unitaries must share n".into()));
        }
        let report = check_biunitary(u, tol);
        if !report.overall_pass() {
            return Err(Error::NotUnitary { residual: report.max_residual() });
        }
        let d = u.d();
        let scale = w / d as f64;
        // words[(a,x),(a',x')] = u_{a,x}* u_{a',x'}
        let idx = |a: usize, x: usize| a * n + x;
        let mut words = vec![ComplexMatrix::zeros(d, d); n.pow(4)];
        for a in 0..n {
            for x in 0..n {
                let left = u.block(a, x).adjoint();
                for ap in 0..n {
                    for xp in 0..n {
                        words[idx(a, x) * n * n + idx(ap, xp)] = left.matmul(u.block(ap, xp));
                    }
                }
            }
        }
        let trace_of_product = |p: &ComplexMatrix, q: &ComplexMatrix| -> C64 {
            let mut s = ZERO;
            for i in 0..d {
                for j in 0..d {
                    s += p[(i, j)] * q[(j, i)];
                }
            }
            s
        };
        for x in 0..n {
            for y in 0..n {
                for a in 0..n {
                    for b in 0..n {
                        let row = ((x * n + y) * n + a) * n + b;
                        for xp in 0..n {
                            for yp in 0..n {
                                for ap in 0..n {
                                    for bp in 0..n {
                                        let col = ((xp * n + yp) * n + ap) * n + bp;
                                        let left = &words[idx(a, x) * n * n + idx(ap, xp)];
                                        let right = &words[idx(bp, yp) * n * n + idx(b, y)];
                                        choi[(row, col)] += trace_of_product(left, right) * scale;
                                    }
                                }
                            }
                        }
                    }
                }
            }
        }
    }
    BipartiteChannel::new(Dims::square(n), choi)
}

/// Quantum commuting correlation `⟨E_{x,x',a,a'} F_{y,y',b,b'} ξ, ξ⟩`.
pub fn from_qc_pair(e: &BistochasticMatrix, f: &BistochasticMatrix, xi: &[C64], tol: f64) -> Result<BipartiteChannel> {
    let d = e.d();
    if f.d() != d || xi.len() != d {
        return Err(Error::DimensionMismatch(format!(
            "block dimensions {} and {} and vector length {} must agree",
            e.d(),
            f.d(),
            xi.len()
        )));
    }
    if (vec_norm(xi) - 1.0).abs() > 1e-12 {
        return Err(Error::InvalidInput(format!("ξ must be a unit vector, norm is {}", vec_norm(xi))));
    }
    for (name, m) in [("E", e), ("F", f)] {
        let r = check_bistochastic(m, tol);
        if !r.overall_pass() {
            return Err(Error::Precondition(format!("{name} is not a bistochastic operator matrix")));
        }
    }
    let (nx, ny) = (e.n(), f.n());
    let e_blocks: Vec<ComplexMatrix> = (0..nx.pow(4))
        .map(|k| e.block(k / nx.pow(3), (k / nx.pow(2)) % nx, (k / nx) % nx, k % nx))
        .collect();
    let f_blocks: Vec<ComplexMatrix> = (0..ny.pow(4))
        .map(|k| f.block(k / ny.pow(3), (k / ny.pow(2)) % ny, (k / ny) % ny, k % ny))
        .collect();
    let mut worst: f64 = 0.0;
    let mut scale: f64 = 1.0;
    for eb in &e_blocks {
        for fb in &f_blocks {
            worst = worst.max(eb.commutator(fb).frobenius_norm());
            scale = scale.max(eb.frobenius_norm() * fb.frobenius_norm());
        }
    }
    if worst > tol * scale {
        return Err(Error::Commutation { norm: worst });
    }
    // entry = ⟨E F ξ, ξ⟩ = ⟨F ξ, E† ξ⟩
    let e_adj_xi: Vec<Vec<C64>> = e_blocks.iter().map(|b| b.adjoint().apply(xi)).collect();
    let f_xi: Vec<Vec<C64>> = f_blocks.iter().map(|b| b.apply(xi)).collect();
    let dims = Dims::new(nx, ny, nx, ny);
    let size = dims.choi_size();
    let choi = ComplexMatrix::from_fn(size, size, |r, c| {
        let (x, y, a, b) = (r / (ny * nx * ny), (r / (nx * ny)) % ny, (r / ny) % nx, r % ny);
        let (xp, yp, ap, bp) = (c / (ny * nx * ny), (c / (nx * ny)) % ny, (c / ny) % nx, c % ny);
        let ek = ((x * nx + xp) * nx + a) * nx + ap;
        let fk = ((y * ny + yp) * ny + b) * ny + bp;
        vec_inner(&e_adj_xi[ek], &f_xi[fk])
    });
    BipartiteChannel::new(dims, choi)
}

/// Correlation family `p(a, b | x, y)`.
#[derive(Clone, Debug, PartialEq)]
pub struct ClassicalCorrelation {
    dims: Dims,
    p: Vec<f64>,
}

impl ClassicalCorrelation {
    /// Validates nonnegativity (to `-1e-12`) and normalisation (to `1e-9`).
    pub fn new(dims: Dims, p: Vec<f64>) -> Result<Self> {
        dims.validate()?;
        if p.len() != dims.choi_size() {
            return Err(Error::DimensionMismatch(format!("expected {} probabilities, got {}", dims.choi_size(), p.len())));
        }
        if let Some(v) = p.iter().find(|v| !v.is_finite() || **v < -1e-12) {
            return Err(Error::InvalidInput(format!("negative or non-finite probability {v}")));
        }
        let out = dims.output();
        for (k, chunk) in p.chunks(out).enumerate() {
            let s: f64 = chunk.iter().sum();
            if (s - 1.0).abs() > 1e-9 {
                return Err(Error::InvalidInput(format!(
                    "p(·,·|{},{}) sums to {s}",
                    k / dims.y,
                    k % dims.y
                )));
            }
        }
        Ok(Self { dims, p })
    }

    pub fn from_fn(dims: Dims, f: impl Fn(usize, usize, usize, usize) -> f64) -> Result<Self> {
        let mut p = Vec::with_capacity(dims.choi_size());
        for x in 0..dims.x {
            for y in 0..dims.y {
                for a in 0..dims.a {
                    for b in 0..dims.b {
                        p.push(f(x, y, a, b));
                    }
                }
            }
        }
        Self::new(dims, p)
    }

    pub fn dims(&self) -> Dims {
        self.dims
    }

    pub fn values(&self) -> &[f64] {
        &self.p
    }

    pub fn get(&self, x: usize, y: usize, a: usize, b: usize) -> f64 {
        let d = self.dims;
        self.p[((x * d.y + y) * d.a + a) * d.b + b]
    }

    /// `p*(x, y | a, b) = p(a, b | x, y)`, if that family is again normalised.
    pub fn transposed(&self) -> Result<Self> {
        let d = self.dims;
        Self::from_fn(d.swapped(), |a, b, x, y| self.get(x, y, a, b))
    }
}

/// `Γ_p = E_p ∘ Δ`: Choi matrix diagonal with entries `p(a, b | x, y)`.
pub fn from_classical(p: &ClassicalCorrelation) -> BipartiteChannel {
    let vals: Vec<C64> = p.p.iter().map(|&v| C64::new(v, 0.0)).collect();
    BipartiteChannel { dims: p.dims, choi: ComplexMatrix::diagonal(&vals) }
}

/// `p(a, b | x, y) = ⟨Γ(ε_{x,x} ⊗ ε_{y,y}), ε_{a,a} ⊗ ε_{b,b}⟩`.
pub fn extract_classical(c: &BipartiteChannel) -> Result<ClassicalCorrelation> {
    let size = c.dims.choi_size();
    let p = (0..size).map(|k| c.choi[(k, k)].re).collect();
    ClassicalCorrelation::new(c.dims, p)
}

/// Items `ns`, `bicorrelation` and (when all four systems agree) `bisynchronous`.
pub fn classical_checks(p: &ClassicalCorrelation, tol: f64) -> CheckReport {
    let d = p.dims;
    let mut report = CheckReport::new();
    report.push("ns", ns_defect(d, |x, y, a, b| p.get(x, y, a, b)), tol);
    if d.a == d.x && d.b == d.y {
        // p*(x, y | a, b) = p(a, b | x, y): a family indexed by (a, b)
        let star = |a: usize, b: usize, x: usize, y: usize| p.get(x, y, a, b);
        let mut norm_defect: f64 = 0.0;
        for a in 0..d.a {
            for b in 0..d.b {
                let s: f64 = (0..d.x).flat_map(|x| (0..d.y).map(move |y| (x, y))).map(|(x, y)| star(a, b, x, y)).sum();
                norm_defect = norm_defect.max((s - 1.0).abs());
            }
        }
        report.push("bicorrelation", norm_defect.max(ns_defect(d.swapped(), star)), tol);
    } else {
        report.push("bicorrelation", f64::INFINITY, tol);
    }
    if d.x == d.y && d.y == d.a && d.a == d.b {
        let n = d.x;
        let mut defect: f64 = 0.0;
        for x in 0..n {
            for y in 0..n {
                for a in 0..n {
                    for b in 0..n {
                        if (x == y && a != b) || (a == b && x != y) {
                            defect = defect.max(p.get(x, y, a, b).abs());
                        }
                    }
                }
            }
        }
        report.push("bisynchronous", defect, tol);
    }
    report
}

/// Largest deviation of a marginal from being independent of the other party's input.
fn ns_defect(d: Dims, p: impl Fn(usize, usize, usize, usize) -> f64) -> f64 {
    let mut worst: f64 = 0.0;
    for x in 0..d.x {
        for a in 0..d.a {
            let marg = |y: usize| (0..d.b).map(|b| p(x, y, a, b)).sum::<f64>();
            let m0 = marg(0);
            for y in 1..d.y {
                worst = worst.max((marg(y) - m0).abs());
            }
        }
    }
    for y in 0..d.y {
        for b in 0..d.b {
            let marg = |x: usize| (0..d.a).map(|a| p(x, y, a, b)).sum::<f64>();
            let m0 = marg(0);
            for x in 1..d.x {
                worst = worst.max((marg(x) - m0).abs());
            }
        }
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::random::{haar_unitary, random_density, seeded};
    use crate::numerics::ONE;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn diag_i() -> ComplexMatrix {
        ComplexMatrix::diagonal(&[c(1.0, 0.0), c(0.0, 1.0)])
    }

    #[test]
    fn identity_channel_passes_everything() {
        let id = BipartiteChannel::identity(2, 2);
        let rho = random_density(4, &mut seeded(1));
        assert!(id.apply(&rho).unwrap().distance(&rho) < 1e-15);
        let r = check_bicorrelation(&id, 1e-9).unwrap();
        assert!(r.overall_pass(), "{r:?}");
        assert!(r.max_residual() <= 1e-12);
        assert_eq!(dual(&id), id);
    }

    #[test]
    fn depolarizing_channel_outputs_maximally_mixed() {
        let dims = Dims::new(2, 2, 3, 2);
        let choi = ComplexMatrix::identity(dims.choi_size()).scale_real(1.0 / 6.0);
        let ch = BipartiteChannel::new(dims, choi).unwrap();
        let rho = random_density(4, &mut seeded(2)).scale_real(2.5);
        let out = ch.apply(&rho).unwrap();
        assert!(out.distance(&ComplexMatrix::identity(6).scale_real(2.5 / 6.0)) < 1e-14);
    }

    #[test]
    fn swap_channel_moves_units_and_signals() {
        let sw = BipartiteChannel::swap(2);
        let input = ComplexMatrix::unit(2, 2, 0, 0).kron(&ComplexMatrix::unit(2, 2, 1, 1));
        let expect = ComplexMatrix::unit(2, 2, 1, 1).kron(&ComplexMatrix::unit(2, 2, 0, 0));
        assert!(sw.apply(&input).unwrap().distance(&expect) < 1e-15);
        let r = check_ns(&sw, 1e-9);
        // Tr_A Γ(ρ_X ⊗ ε_{yy'}) = δ_{yy'} ρ_X: squared norms 1 + 1 + 2 for each of the two y
        assert!((r.residual("ns_a") - 8f64.sqrt()).abs() < 1e-12);
        assert!((r.residual("ns_b") - 8f64.sqrt()).abs() < 1e-12);
        assert!(!r.passes("ns_a_slice"));
        assert!(r.passes("ns_agreement"));
    }

    #[test]
    fn negative_identity_choi_fails_cp_by_one() {
        let ch = BipartiteChannel::new(Dims::square(1), -&ComplexMatrix::identity(1)).unwrap();
        assert!((check_channel(&ch, 1e-9).residual("cp") - 1.0).abs() < 1e-15);
    }

    #[test]
    fn sharp_of_diag_i_is_conjugation_by_conjugate() {
        let phi = SingleChannel::unitary_conjugation(&diag_i()).unwrap();
        let expect = SingleChannel::unitary_conjugation(&diag_i().conj()).unwrap();
        assert!(sharp(&phi).choi().distance(expect.choi()) < 1e-15);
        assert_eq!(sharp(&sharp(&phi)), phi);
    }

    #[test]
    fn phi_phi_without_sharp_is_not_concurrent() {
        let phi = SingleChannel::unitary_conjugation(&diag_i()).unwrap();
        let g = BipartiteChannel::product(&phi, &phi);
        let j = maximally_entangled(2);
        let out = g.apply(&j).unwrap();
        let u = |i, j| ComplexMatrix::unit(2, 2, i, j);
        let mut expect = &u(0, 0).kron(&u(0, 0)) + &u(1, 1).kron(&u(1, 1));
        expect -= &u(0, 1).kron(&u(0, 1));
        expect -= &u(1, 0).kron(&u(1, 0));
        assert!(out.distance(&expect.scale_real(0.5)) < 1e-15);
        let pauli_x = ComplexMatrix::from_real(2, 2, &[0.0, 1.0, 1.0, 0.0]).unwrap();
        let px = SingleChannel::unitary_conjugation(&pauli_x).unwrap();
        let conc = BipartiteChannel::product(&px, &sharp(&px));
        assert!(conc.apply(&j).unwrap().distance(&j) < 1e-15);
    }

    #[test]
    fn maximally_entangled_n2_matches_definition() {
        let j = maximally_entangled(2);
        let expect = ComplexMatrix::from_real(
            4,
            4,
            &[0.5, 0.0, 0.0, 0.5, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.5, 0.0, 0.0, 0.5],
        )
        .unwrap();
        assert_eq!(j, expect);
    }

    #[test]
    fn dual_satisfies_pairing_identity_on_basis() {
        let mut rng = seeded(3);
        let u = haar_unitary(2, &mut rng);
        let v = haar_unitary(3, &mut rng);
        let uv = u.kron(&v);
        let dims = Dims::new(2, 3, 2, 3);
        let g = BipartiteChannel::from_map(dims, |m| uv.adjoint().matmul(m).matmul(&uv));
        let gd = dual(&g);
        for i in 0..36 {
            let rho = ComplexMatrix::unit(6, 6, i / 6, i % 6);
            for k in 0..36 {
                let omega = ComplexMatrix::unit(6, 6, k / 6, k % 6);
                let lhs = gd.apply(&omega).unwrap().bilinear_pairing(&rho);
                let rhs = omega.bilinear_pairing(&g.apply(&rho).unwrap());
                assert!((lhs - rhs).norm() < 1e-13);
            }
        }
        assert_eq!(dual(&gd), g);
    }

    #[test]
    fn permutation_unitary_gives_deterministic_correlation() {
        let sigma = [2usize, 0, 1];
        // Φ(ε_{xx}) = U* ε_{xx} U has diagonal |U_{x,a}|², so U = P_σᵗ
        let u = ComplexMatrix::from_fn(3, 3, |x, a| if a == sigma[x] { ONE } else { ZERO });
        let g = from_local_unitaries(&[(1.0, u)], 1e-9).unwrap();
        let p = extract_classical(&g).unwrap();
        for x in 0..3 {
            for y in 0..3 {
                for a in 0..3 {
                    for b in 0..3 {
                        let expect = if a == sigma[x] && b == sigma[y] { 1.0 } else { 0.0 };
                        assert!((p.get(x, y, a, b) - expect).abs() < 1e-15);
                    }
                }
            }
        }
    }

    #[test]
    fn identity_biunitary_gives_identity_channel() {
        let u = BiUnitary::from_permutation(&[0, 1]);
        let g = from_biunitary_trace(&[(1.0, u)], 1e-9).unwrap();
        assert!(g.choi().distance(BipartiteChannel::identity(2, 2).choi()) < 1e-15);
    }

    #[test]
    fn classical_round_trip_is_exact() {
        let dims = Dims::new(2, 2, 2, 2);
        let p = ClassicalCorrelation::from_fn(dims, |x, y, a, b| if a ^ b == x & y { 0.5 } else { 0.0 }).unwrap();
        assert_eq!(extract_classical(&from_classical(&p)).unwrap(), p);
    }

    #[test]
    fn classical_check_examples() {
        let n = 3;
        let d = Dims::square(n);
        let sigma = [1usize, 2, 0];
        let perm = ClassicalCorrelation::from_fn(d, |x, y, a, b| (a == sigma[x] && b == sigma[y]) as u8 as f64).unwrap();
        assert!(classical_checks(&perm, 1e-9).overall_pass());
        let uniform = ClassicalCorrelation::from_fn(d, |_, _, _, _| 1.0 / 9.0).unwrap();
        let r = classical_checks(&uniform, 1e-9);
        assert!(r.passes("ns") && !r.passes("bisynchronous"));
        let constant_b = ClassicalCorrelation::from_fn(d, |x, _, a, b| (a == x && b == 0) as u8 as f64).unwrap();
        let r = classical_checks(&constant_b, 1e-9);
        assert!(r.passes("ns") && !r.passes("bicorrelation"));
        // the output a = x with b uniform is the identity tensored with a doubly stochastic matrix
        let uniform_b = ClassicalCorrelation::from_fn(d, |x, _, a, _| (a == x) as u8 as f64 / n as f64).unwrap();
        assert!(classical_checks(&uniform_b, 1e-9).passes("bicorrelation"));
    }

    #[test]
    fn commuting_violation_is_an_error() {
        let mut rng = seeded(11);
        let u = haar_unitary(2, &mut rng);
        let p = ComplexMatrix::unit(2, 2, 0, 0);
        let q = u.matmul(&p).matmul(&u.adjoint());
        let id = ComplexMatrix::identity(2);
        let square = |proj: &ComplexMatrix| {
            let comp = &id - proj;
            BistochasticMatrix::from_blocks(2, 2, |x, xp, a, ap| {
                if x != xp || a != ap {
                    ComplexMatrix::zeros(2, 2)
                } else if a == x {
                    proj.clone()
                } else {
                    comp.clone()
                }
            })
        };
        let xi = [ONE, ZERO];
        assert!(matches!(from_qc_pair(&square(&p), &square(&q), &xi, 1e-9), Err(Error::Commutation { .. })));
        assert!(from_qc_pair(&square(&p), &square(&p), &xi, 1e-9).is_ok());
    }
}
