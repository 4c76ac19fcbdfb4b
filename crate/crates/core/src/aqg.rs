//! Quantum adjacency matrices on `(M_n, tr)` and the pseudo-graph layer built from them.
//!
//! `L²(M_n, tr)` carries the orthonormal basis `f_{(i,j)} = √n ε_{i,j}`, ordered
//! lexicographically, so `Λ(x)` has coordinates `x_{i,j}/√n` at index `i·n + j`. Left
//! multiplication by `a` is `a ⊗ I`, the involution index map is `(i, j) ↦ (j, i)`, and every
//! operator on `L²(M_n)` is an `n² × n²` matrix in this basis.

use crate::bistochastic::{check_biunitary, BiUnitary};
use crate::channels::{dual, from_biunitary_trace, BipartiteChannel, Dims};
use crate::error::{Error, Result};
use crate::numerics::{scale_of, subspace_relate, vec_norm, CheckReport, ComplexMatrix, Subspace, C64, ONE, ZERO};

/// Operator `A` on `L²(M_n)` in the GNS basis.
#[derive(Clone, Debug, PartialEq)]
pub struct QuantumAdjacency {
    n: usize,
    a: ComplexMatrix,
}

impl QuantumAdjacency {
    pub fn new(n: usize, a: ComplexMatrix) -> Result<Self> {
        if n == 0 || a.shape() != (n * n, n * n) {
            return Err(Error::DimensionMismatch(format!("adjacency on L²(M_{n}) must be {0}x{0}", n * n)));
        }
        if !a.is_finite() {
            return Err(Error::InvalidInput("adjacency has non-finite entries".into()));
        }
        Ok(Self { n, a })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.a
    }

    /// Evaluates `A` on a matrix `x ∈ M_n`.
    pub fn apply(&self, x: &ComplexMatrix) -> ComplexMatrix {
        from_coords(self.n, &self.a.apply(&coords(x)))
    }
}

/// Coordinates of `Λ(x)`.
pub fn coords(x: &ComplexMatrix) -> Vec<C64> {
    let s = 1.0 / (x.rows() as f64).sqrt();
    x.data().iter().map(|v| v * s).collect()
}

/// Inverse of [`coords`].
pub fn from_coords(n: usize, c: &[C64]) -> ComplexMatrix {
    let s = (n as f64).sqrt();
    ComplexMatrix::from_fn(n, n, |i, j| c[i * n + j] * s)
}

/// Index of `f_k*` for `k = (i, j)`.
fn star(n: usize, k: usize) -> usize {
    (k % n) * n + k / n
}

/// Permutation `Λ(f_k) ↦ Λ(f_k*)` on `L²(M_n)`.
pub fn star_permutation(n: usize) -> ComplexMatrix {
    let nn = n * n;
    ComplexMatrix::from_fn(nn, nn, |r, c| if r == star(n, c) { ONE } else { ZERO })
}

/// Multiplication `m: L² ⊗ L² → L²`, `m(f_{ij} ⊗ f_{kl}) = √n δ_{jk} f_{il}`.
pub fn m_matrix(n: usize) -> ComplexMatrix {
    let nn = n * n;
    let s = C64::new((n as f64).sqrt(), 0.0);
    let mut m = ComplexMatrix::zeros(nn, nn * nn);
    for i in 0..n {
        for j in 0..n {
            for l in 0..n {
                m[(i * n + l, (i * n + j) * nn + j * n + l)] = s;
            }
        }
    }
    m
}

/// `m*`, the Hilbert-space adjoint of [`m_matrix`].
pub fn mstar_matrix(n: usize) -> ComplexMatrix {
    m_matrix(n).adjoint()
}

/// `Λ(1)`.
pub fn unit_vector(n: usize) -> Vec<C64> {
    coords(&ComplexMatrix::identity(n))
}

/// Items `axiom_1` (`m(A⊗A)m* = A`), `axiom_2` (`(id⊗η*m)(1⊗A⊗1)(m*η⊗id) = A`), `axiom_3`
/// (`m(A⊗1)m* = 0`) and `self_adjoint`, all as Frobenius norms.
pub fn check_adjacency_axioms(a: &QuantumAdjacency, tol: f64) -> CheckReport {
    let n = a.n;
    let nn = n * n;
    let am = &a.a;
    let m = m_matrix(n);
    let ms = m.adjoint();
    let eta = unit_vector(n);
    let id = ComplexMatrix::identity(nn);

    let one = m.matmul(&am.kron(am)).matmul(&ms);
    let three = m.matmul(&am.kron(&id)).matmul(&ms);

    // m*η as an nn×nn array V0, η*m as an nn×nn array H; the composite is V0 Aᵗ H
    let v0 = ms.apply(&eta);
    let v0m = ComplexMatrix::from_fn(nn, nn, |p, q| v0[p * nn + q]);
    let h_row: Vec<C64> = (0..nn * nn).map(|c| (0..nn).map(|s| eta[s].conj() * m[(s, c)]).sum()).collect();
    let hm = ComplexMatrix::from_fn(nn, nn, |q, r| h_row[q * nn + r]);
    let two = v0m.matmul(&am.transpose()).matmul(&hm);

    let thr = tol * scale_of(am.frobenius_norm());
    let mut report = CheckReport::new();
    report.push("axiom_1", one.distance(am), thr);
    report.push("axiom_2", two.distance(am), thr);
    report.push("axiom_3", three.frobenius_norm(), thr);
    report.push("self_adjoint", am.hermitian_defect(), thr);
    report
}

/// Schur multiplier `x ↦ K ∘ x`, diagonal in the GNS basis.
pub fn schur_adjacency(kernel: &ComplexMatrix) -> Result<QuantumAdjacency> {
    let n = kernel.rows();
    if !kernel.is_square() {
        return Err(Error::DimensionMismatch("Schur kernel must be square".into()));
    }
    let diag: Vec<C64> = kernel.data().to_vec();
    QuantumAdjacency::new(n, ComplexMatrix::diagonal(&diag))
}

/// `K = (I − J/n)/n`; `nK` is the projection onto the complement of the all-ones vector.
pub fn canonical_kernel(n: usize) -> ComplexMatrix {
    let nf = n as f64;
    ComplexMatrix::from_fn(n, n, |i, j| C64::new(((i == j) as u8 as f64 - 1.0 / nf) / nf, 0.0))
}

/// `e = n Σ ε_{i,j} ⊗ A(ε_{j,i})`, entrywise `e[(i,p),(j,q)] = n A[(p,q),(j,i)]`.
pub fn e_of_a(a: &QuantumAdjacency) -> ComplexMatrix {
    let n = a.n;
    let nf = n as f64;
    ComplexMatrix::from_fn(n * n, n * n, |r, c| {
        let (i, p, j, q) = (r / n, r % n, c / n, c % n);
        a.a[(p * n + q, j * n + i)] * nf
    })
}

/// The tensor flip `a ⊗ b ↦ b ⊗ a` on `M_n ⊗ M_n`.
pub fn tensor_flip(e: &ComplexMatrix, n: usize) -> Result<ComplexMatrix> {
    e.permute_slots(&[n, n], &[1, 0])
}

/// Inverse of [`e_of_a`]; requires `e` Hermitian and flip invariant within `tol`.
pub fn a_of_e(e: &ComplexMatrix, n: usize, tol: f64) -> Result<QuantumAdjacency> {
    if e.shape() != (n * n, n * n) {
        return Err(Error::DimensionMismatch(format!("e must be {0}x{0}", n * n)));
    }
    let thr = tol * scale_of(e.frobenius_norm());
    let herm = e.hermitian_defect();
    let flip = tensor_flip(e, n)?.distance(e);
    if herm > thr || flip > thr {
        return Err(Error::Precondition(format!(
            "e must be Hermitian and flip invariant (defects {herm:.3e}, {flip:.3e})"
        )));
    }
    let nf = n as f64;
    let a = ComplexMatrix::from_fn(n * n, n * n, |r, c| {
        let (p, q, j, i) = (r / n, r % n, c / n, c % n);
        e[(i * n + p, j * n + q)] / nf
    });
    QuantumAdjacency::new(n, a)
}

/// Transpose of the first tensor factor of `M_n ⊗ M_n`.
fn partial_transpose_first(e: &ComplexMatrix, n: usize) -> ComplexMatrix {
    ComplexMatrix::from_fn(n * n, n * n, |r, c| e[((c / n) * n + r % n, (r / n) * n + c % n)])
}

/// Product on `M_nᵒᵖ ⊗ M_n`: `(a ⊗ b)·(c ⊗ d) = (ca) ⊗ (bd)`.
///
/// Transposing the first factor is an isomorphism onto `M_n ⊗ M_n`, so the product is computed
/// there.
pub fn op_product(e1: &ComplexMatrix, e2: &ComplexMatrix, n: usize) -> Result<ComplexMatrix> {
    if e1.shape() != (n * n, n * n) || e2.shape() != (n * n, n * n) {
        return Err(Error::DimensionMismatch(format!("operands must be {0}x{0}", n * n)));
    }
    let prod = partial_transpose_first(e1, n).matmul(&partial_transpose_first(e2, n));
    Ok(partial_transpose_first(&prod, n))
}

/// `Ψ(Θ_{Λ(x),Λ(y)}) = x* ⊗ y`, where `Θ_{ξ,η} = η ξ†`.
///
/// `t = Σ t_{l,k} Θ_{Λ(f_k),Λ(f_l)}` is expanded over rank-one operators term by term.
pub fn psi(t: &ComplexMatrix, n: usize) -> Result<ComplexMatrix> {
    let nn = n * n;
    if t.shape() != (nn, nn) {
        return Err(Error::DimensionMismatch(format!("operator on L²(M_{n}) must be {nn}x{nn}")));
    }
    let basis: Vec<ComplexMatrix> = (0..nn).map(|k| from_coords(n, &unit(nn, k))).collect();
    let mut out = ComplexMatrix::zeros(nn, nn);
    for l in 0..nn {
        for k in 0..nn {
            let w = t[(l, k)];
            if w != ZERO {
                out += &basis[k].adjoint().kron(&basis[l]).scale(w);
            }
        }
    }
    Ok(out)
}

fn unit(len: usize, k: usize) -> Vec<C64> {
    let mut v = vec![ZERO; len];
    v[k] = ONE;
    v
}

/// Subspace of `L²(M_n) ⊗ L²(M_n)` with coordinates `(k, l) ↦ k·n² + l`.
#[derive(Clone, Debug, PartialEq)]
pub struct PseudoGraph {
    n: usize,
    space: Subspace,
}

impl PseudoGraph {
    pub fn new(n: usize, space: Subspace) -> Result<Self> {
        if space.ambient() != n.pow(4) {
            return Err(Error::DimensionMismatch(format!("pseudo-graph on M_{n} lives in C^{}", n.pow(4))));
        }
        Ok(Self { n, space })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn space(&self) -> &Subspace {
        &self.space
    }

    pub fn dim(&self) -> usize {
        self.space.dim()
    }

    /// `span{ε_{x,x} ⊗ ε_{y,y} : x ∼ y}` read in the GNS coordinates of each factor.
    pub fn of_graph(g: &crate::qgraph::Graph) -> Self {
        let n = g.n();
        let nn = n * n;
        let vectors: Vec<Vec<C64>> = g
            .edges()
            .into_iter()
            .flat_map(|(x, y)| [(x, y), (y, x)])
            .map(|(x, y)| unit(nn * nn, (x * n + x) * nn + y * n + y))
            .collect();
        Self { n, space: Subspace::span(nn * nn, &vectors).expect("consistent lengths") }
    }
}

/// Applies a coordinate map `v ↦ w` (linear or conjugate-linear) to every basis vector.
fn map_space(space: &Subspace, f: impl Fn(&[C64]) -> Vec<C64>) -> Result<Subspace> {
    let images: Vec<Vec<C64>> = space.basis().iter().map(|b| f(b)).collect();
    Subspace::span(space.ambient(), &images)
}

/// Items `skew` (`‖P_W Σ_k Λ(f_k) ⊗ Λ(f_k)‖`), `conjugate_flip` (`‖P_{(𝔡∘𝔣)W} − P_W‖_F`) and
/// `j0_invariance`, the same test written as `J₀`-invariance of `(∂⁻¹ ⊗ 1)W` with
/// `J₀(Λ(x) ⊗ Λ(y)) = Λ(y*) ⊗ Λ(x*)`; `agreement` records that the last two verdicts coincide.
pub fn check_pseudograph(w: &PseudoGraph, tol: f64) -> Result<CheckReport> {
    let n = w.n;
    let nn = n * n;
    let mut diag = vec![ZERO; nn * nn];
    for k in 0..nn {
        diag[k * nn + k] = ONE;
    }
    let skew = vec_norm(&w.space.project(&diag));

    let conj_flip = |v: &[C64]| -> Vec<C64> { (0..nn * nn).map(|i| v[(i % nn) * nn + i / nn].conj()).collect() };
    let flipped = map_space(&w.space, conj_flip)?;
    let cf = subspace_relate(&flipped, &w.space)?.equal;

    let undo_partial = |v: &[C64]| -> Vec<C64> { (0..nn * nn).map(|i| v[star(n, i / nn) * nn + i % nn]).collect() };
    let u = map_space(&w.space, undo_partial)?;
    // J₀ sends coordinate (k, l) to (l*, k*) with conjugation
    let j0 = |v: &[C64]| -> Vec<C64> {
        (0..nn * nn)
            .map(|i| {
                let (a, b) = (i / nn, i % nn);
                v[star(n, b) * nn + star(n, a)].conj()
            })
            .collect()
    };
    let u_j0 = map_space(&u, j0)?;
    let jr = subspace_relate(&u_j0, &u)?.equal;

    let mut report = CheckReport::new();
    report.push("skew", skew, tol);
    let p1 = report.push("conjugate_flip", cf, tol);
    let p2 = report.push("j0_invariance", jr, tol);
    report.push_verdict("agreement", p1 == p2);
    Ok(report)
}

/// Output of [`bridge`].
#[derive(Clone, Debug)]
pub struct Bridge {
    /// `S′ = span{aAb}` with operators vectorised row-major.
    pub s_prime: Subspace,
    /// `𝒰_G = Λ^{⊗2}(Ψ(S′))`.
    pub u_g: Subspace,
    /// `Ũ_G = (∂ ⊗ 1)(𝒰_G)`.
    pub u_tilde: PseudoGraph,
    /// Pseudo-graph items for `Ũ_G`; the adjacency axioms appear as notes.
    pub report: CheckReport,
}

impl Bridge {
    pub fn s_prime_dim(&self) -> usize {
        self.s_prime.dim()
    }
}

/// `S′ → 𝒰_G → Ũ_G` for an adjacency matrix.
///
/// An operator `t ∈ S′` contributes `Σ t_{l,k} Λ(f_k*) ⊗ Λ(f_l)` to `𝒰_G` and
/// `Σ t_{l,k} Λ(f_k) ⊗ Λ(f_l)` to `Ũ_G`.
pub fn bridge(a: &QuantumAdjacency, tol: f64) -> Result<Bridge> {
    let n = a.n;
    let nn = n * n;
    let id = ComplexMatrix::identity(n);
    let lefts: Vec<ComplexMatrix> = (0..nn).map(|k| ComplexMatrix::unit(n, n, k / n, k % n).kron(&id)).collect();
    let mut spanning = Vec::with_capacity(nn * nn);
    for l in &lefts {
        let la = l.matmul(&a.a);
        for r in &lefts {
            spanning.push(la.matmul(r).into_vec());
        }
    }
    let s_prime = Subspace::span(nn * nn, &spanning)?;
    let to_u = |tilde: bool| -> Result<Subspace> {
        map_space(&s_prime, |t| {
            let mut v = vec![ZERO; nn * nn];
            for l in 0..nn {
                for k in 0..nn {
                    let first = if tilde { k } else { star(n, k) };
                    v[first * nn + l] = t[l * nn + k];
                }
            }
            v
        })
    };
    let u_g = to_u(false)?;
    let u_tilde = PseudoGraph::new(n, to_u(true)?)?;
    let mut report = check_pseudograph(&u_tilde, tol)?;
    for item in check_adjacency_axioms(a, tol).items {
        report.note(item.name, item.residual, item.threshold);
    }
    Ok(Bridge { s_prime, u_g, u_tilde, report })
}

fn require_gns_biunitary(u: &BiUnitary, n: usize, tol: f64) -> Result<()> {
    if u.n() != n * n {
        return Err(Error::DimensionMismatch(format!("bi-unitary must have {} block rows, got {}", n * n, u.n())));
    }
    let r = check_biunitary(u, tol);
    if !r.overall_pass() {
        return Err(Error::NotUnitary { residual: r.max_residual() });
    }
    Ok(())
}

/// `ρ(f_i) = Σ_j f_j ⊗ u_{j,i}` as an `nd × nd` matrix.
fn rho_of_basis(u: &BiUnitary, n: usize, i: usize) -> ComplexMatrix {
    let d = u.d();
    let s = (n as f64).sqrt();
    let mut out = ComplexMatrix::zeros(n * d, n * d);
    for j in 0..n * n {
        out += &ComplexMatrix::unit(n, n, j / n, j % n).scale_real(s).kron(u.block(j, i));
    }
    out
}

/// Items `intertwining` (`‖(A₂ ⊗ I)U − U(A₁ ⊗ I)‖_F`) and the homomorphism items of
/// `ρ(f_i) = Σ_j f_j ⊗ u_{j,i}`: `multiplicative`, `star`, `unital`, `trace_preserving`.
pub fn intertwiner_check(u: &BiUnitary, a1: &QuantumAdjacency, a2: &QuantumAdjacency, tol: f64) -> Result<CheckReport> {
    let n = a1.n;
    if a2.n != n {
        return Err(Error::DimensionMismatch("adjacencies must act on the same M_n".into()));
    }
    if u.n() != n * n {
        return Err(Error::DimensionMismatch(format!("bi-unitary must have {} block rows, got {}", n * n, u.n())));
    }
    let d = u.d();
    let nn = n * n;
    let full = u.full();
    let id_d = ComplexMatrix::identity(d);
    let inter = a2.a.kron(&id_d).matmul(&full).distance(&full.matmul(&a1.a.kron(&id_d)));

    let rho: Vec<ComplexMatrix> = (0..nn).map(|i| rho_of_basis(u, n, i)).collect();
    let s = (n as f64).sqrt();
    let mut mult: f64 = 0.0;
    for i in 0..nn {
        for k in 0..nn {
            // f_{(a,b)} f_{(c,e)} = √n δ_{bc} f_{(a,e)}
            let (a, b, c, e) = (i / n, i % n, k / n, k % n);
            let lhs = if b == c { rho[a * n + e].scale_real(s) } else { ComplexMatrix::zeros(n * d, n * d) };
            mult = mult.max(lhs.distance(&rho[i].matmul(&rho[k])));
        }
    }
    let star_res = (0..nn).map(|i| rho[star(n, i)].distance(&rho[i].adjoint())).fold(0.0, f64::max);
    let mut one = ComplexMatrix::zeros(n * d, n * d);
    for a in 0..n {
        one += &rho[a * n + a].scale_real(1.0 / s);
    }
    let unital = one.distance(&ComplexMatrix::identity(n * d));
    let mut tp: f64 = 0.0;
    for i in 0..nn {
        let mut traced = ComplexMatrix::zeros(d, d);
        for a in 0..n {
            traced += &u.block(a * n + a, i).scale_real(1.0 / s);
        }
        let target = if i / n == i % n { id_d.scale_real(1.0 / s) } else { ComplexMatrix::zeros(d, d) };
        tp = tp.max(traced.distance(&target));
    }

    let thr = tol * scale_of(full.frobenius_norm().max(a1.a.frobenius_norm()).max(a2.a.frobenius_norm()));
    let mut report = CheckReport::new();
    report.push("intertwining", inter, thr);
    report.push("multiplicative", mult, thr);
    report.push("star", star_res, thr);
    report.push("unital", unital, thr);
    report.push("trace_preserving", tp, thr);
    Ok(report)
}

/// Largest `n` for which the channel-level checks on `M_{n²} ⊗ M_{n²}` are run.
pub const MAX_CHANNEL_N: usize = 2;

fn require_channel_size(n: usize) -> Result<()> {
    if n > MAX_CHANNEL_N {
        return Err(Error::UnsupportedSize(format!(
            "channels on M_{0} ⊗ M_{0} are limited to n <= {MAX_CHANNEL_N}",
            n * n
        )));
    }
    Ok(())
}

/// Index reshuffle `ε_{k,k'} ⊗ ε_{l,l'} ↦ ε_{l,k} ⊗ ε_{l',k'}` on `M_N ⊗ M_N`.
pub fn sigma(m: &ComplexMatrix, big_n: usize) -> ComplexMatrix {
    let nn = big_n;
    ComplexMatrix::from_fn(nn * nn, nn * nn, |r, c| {
        let (l, lp, k, kp) = (r / nn, r % nn, c / nn, c % nn);
        m[(k * nn + l, kp * nn + lp)]
    })
}

/// Inverse of [`sigma`]: `ε_{p,q} ⊗ ε_{r,s} ↦ ε_{q,s} ⊗ ε_{p,r}`.
pub fn sigma_inv(m: &ComplexMatrix, big_n: usize) -> ComplexMatrix {
    let nn = big_n;
    ComplexMatrix::from_fn(nn * nn, nn * nn, |r, c| {
        let (q, p, s, rr) = (r / nn, r % nn, c / nn, c % nn);
        m[(p * nn + rr, q * nn + s)]
    })
}

fn validate_terms(terms: &[(f64, BiUnitary)]) -> Result<usize> {
    let Some((_, first)) = terms.first() else {
        return Err(Error::InvalidInput("at least one term is required".into()));
    };
    let big_n = first.n();
    let n = (big_n as f64).sqrt().round() as usize;
    if n * n != big_n {
        return Err(Error::DimensionMismatch(format!("{big_n} block rows is not n² for any n")));
    }
    Ok(n)
}

/// The channel `Γ̃(ε_{k,k'} ⊗ ε_{l,l'}) = Σ_{i,i',j,j'} τ(u_{l,j}* u_{k,i} u_{k',i'}* u_{l',j'}) ε_{i,i'} ⊗ ε_{j,j'}`
/// with `τ = Σ_t w_t tr_{d_t}`.
///
/// Construction also evaluates `Γ̃ = σ⁻¹ ∘ Γ* ∘ σ` for the channel `Γ` of the same data and fails
/// with [`Error::Numerical`] if the residual exceeds `1e-10·scale`.
pub fn tilde_gamma(terms: &[(f64, BiUnitary)], tol: f64) -> Result<BipartiteChannel> {
    let n = validate_terms(terms)?;
    require_channel_size(n)?;
    let big_n = n * n;
    let gamma = from_biunitary_trace(terms, tol)?;
    let size = big_n.pow(4);
    let mut choi = ComplexMatrix::zeros(size, size);
    for (w, u) in terms {
        let d = u.d();
        let scale = w / d as f64;
        let adj: Vec<ComplexMatrix> = u.blocks().iter().map(|b| b.adjoint()).collect();
        let blk = |a: usize, x: usize| u.block(a, x);
        for k in 0..big_n {
            for l in 0..big_n {
                for i in 0..big_n {
                    for j in 0..big_n {
                        let left = adj[l * big_n + j].matmul(blk(k, i));
                        let row = ((k * big_n + l) * big_n + i) * big_n + j;
                        for kp in 0..big_n {
                            for ip in 0..big_n {
                                let mid = left.matmul(&adj[kp * big_n + ip]);
                                for lp in 0..big_n {
                                    for jp in 0..big_n {
                                        let col = ((kp * big_n + lp) * big_n + ip) * big_n + jp;
                                        choi[(row, col)] += mid.matmul(blk(lp, jp)).trace() * scale;
                                    }
                                }
                            }
                        }
                    }
                }
            }
        }
    }
    let tilde = BipartiteChannel::new(Dims::square(big_n), choi)?;
    let residual = tilde_gamma_identity_residual(&gamma, &tilde)?;
    let limit = 1e-10 * scale_of(tilde.choi().frobenius_norm());
    if residual > limit {
        return Err(Error::Numerical(format!("Γ̃ = σ⁻¹∘Γ*∘σ fails with residual {residual:.3e}")));
    }
    Ok(tilde)
}

/// `‖Choi(Γ̃) − Choi(σ⁻¹ ∘ Γ* ∘ σ)‖_F`.
pub fn tilde_gamma_identity_residual(gamma: &BipartiteChannel, tilde: &BipartiteChannel) -> Result<f64> {
    let dims = gamma.dims();
    if dims != tilde.dims() || dims.x != dims.y || dims.x != dims.a || dims.a != dims.b {
        return Err(Error::DimensionMismatch("both channels must act on M_N ⊗ M_N".into()));
    }
    let big_n = dims.x;
    let g_dual = dual(gamma);
    let composed = BipartiteChannel::from_map(dims, |m| {
        sigma_inv(&g_dual.apply(&sigma(m, big_n)).expect("sizes agree"), big_n)
    });
    Ok(composed.choi().distance(tilde.choi()))
}

/// `U_{2,3} Ū_{1,3}` with `Ū` the block matrix `(u_{i,k}*)`, on `L² ⊗ L² ⊗ C^d`.
fn leg_product(u: &BiUnitary) -> ComplexMatrix {
    let (big_n, d) = (u.n(), u.d());
    let mut g = ComplexMatrix::zeros(big_n * big_n * d, big_n * big_n * d);
    for i in 0..big_n {
        for j in 0..big_n {
            for k in 0..big_n {
                let right = u.block(i, k).adjoint();
                for l in 0..big_n {
                    g.set_block((i * big_n + j) * d, (k * big_n + l) * d, &u.block(j, l).matmul(&right));
                }
            }
        }
    }
    g
}

/// `U_{2,3}* Ū_{1,3}*`, block `[(i,j),(k,l)] = u_{l,j}* u_{k,i}`.
fn leg_product_adjoint_order(u: &BiUnitary) -> ComplexMatrix {
    let (big_n, d) = (u.n(), u.d());
    let mut g = ComplexMatrix::zeros(big_n * big_n * d, big_n * big_n * d);
    for i in 0..big_n {
        for j in 0..big_n {
            for k in 0..big_n {
                for l in 0..big_n {
                    g.set_block((i * big_n + j) * d, (k * big_n + l) * d, &u.block(l, j).adjoint().matmul(u.block(k, i)));
                }
            }
        }
    }
    g
}

/// Pseudo-isomorphism of `Ũ₁ = bridge(a1)` and `Ũ₂ = bridge(a2)` witnessed by bi-unitaries.
///
/// Items `forward_strategy` (`|Tr Γ(P₁) P₂^⊥|`) and `backward_strategy` (`|Tr Γ̃(P₂) P₁^⊥|`) use the
/// channels of the data; `forward_compression` is `Σ_t ‖(P₂^⊥ ⊗ 1)U_{2,3}Ū_{1,3}(P₁ ⊗ 1)‖²` and
/// `backward_compression` is `Σ_t ‖(P₁^⊥ ⊗ 1)U_{2,3}*Ū_{1,3}*(P₂ ⊗ 1)‖²`, both as square roots.
/// `agreement` records that both formulations give the same verdicts.
pub fn pseudo_iso_check(
    terms: &[(f64, BiUnitary)],
    a1: &QuantumAdjacency,
    a2: &QuantumAdjacency,
    tol: f64,
) -> Result<CheckReport> {
    let n = validate_terms(terms)?;
    if a1.n != n || a2.n != n {
        return Err(Error::DimensionMismatch(format!("bi-unitaries of size {} need adjacencies on M_{n}", n * n)));
    }
    require_channel_size(n)?;
    let big_n = n * n;
    let w1 = bridge(a1, tol)?.u_tilde;
    let w2 = bridge(a2, tol)?.u_tilde;
    let p1 = w1.space.projector();
    let p2 = w2.space.projector();
    let id = ComplexMatrix::identity(big_n * big_n);
    let p1_perp = &id - &p1;
    let p2_perp = &id - &p2;

    let gamma = from_biunitary_trace(terms, tol)?;
    let tilde = tilde_gamma(terms, tol)?;
    let g1 = gamma.apply(&p1)?;
    let g2 = tilde.apply(&p2)?;
    let fwd = g1.matmul(&p2_perp).trace().norm();
    let bwd = g2.matmul(&p1_perp).trace().norm();

    let mut cf = 0.0;
    let mut cb = 0.0;
    let mut scale: f64 = 1.0;
    for (_, u) in terms {
        let id_d = ComplexMatrix::identity(u.d());
        let g = leg_product(u);
        let h = leg_product_adjoint_order(u);
        scale = scale.max(g.frobenius_norm());
        cf += p2_perp.kron(&id_d).matmul(&g).matmul(&p1.kron(&id_d)).frobenius_norm().powi(2);
        cb += p1_perp.kron(&id_d).matmul(&h).matmul(&p2.kron(&id_d)).frobenius_norm().powi(2);
    }

    let mut report = CheckReport::new();
    let s1 = report.push("forward_strategy", fwd, tol * scale_of(g1.frobenius_norm()));
    let s2 = report.push("backward_strategy", bwd, tol * scale_of(g2.frobenius_norm()));
    let c1 = report.push("forward_compression", cf.sqrt(), tol * scale);
    let c2 = report.push("backward_compression", cb.sqrt(), tol * scale);
    report.push_verdict("agreement", s1 == c1 && s2 == c2);
    Ok(report)
}

/// Projection onto `Λ̃(S′)` inside `L²(B(L²(M_n)))`, operators vectorised row-major.
fn s_prime_projection(a: &QuantumAdjacency, tol: f64) -> Result<ComplexMatrix> {
    Ok(bridge(a, tol)?.s_prime.projector())
}

/// `ω: Λ̃(Θ_{Λ(x),Λ(y)}) ↦ Λ(x)‾ ⊗ Λ(y)`; with row-major `Λ̃` it is the index swap `(l, k) ↦ (k, l)`.
fn omega(big_n: usize) -> ComplexMatrix {
    let s = big_n * big_n;
    ComplexMatrix::from_fn(s, s, |r, c| if r == (c % big_n) * big_n + c / big_n { ONE } else { ZERO })
}

/// `(Λᵒᵖ ⊗ Λ)(e)`: `Λᵒᵖ(x)` has the coordinates of `Λ(xᵗ)`.
fn op_lambda(e: &ComplexMatrix, n: usize) -> Vec<C64> {
    let nn = n * n;
    let mut v = vec![ZERO; nn * nn];
    let inv_n = 1.0 / n as f64;
    for i in 0..n {
        for p in 0..n {
            for j in 0..n {
                for q in 0..n {
                    v[(j * n + i) * nn + p * n + q] += e[(i * n + p, j * n + q)] * inv_n;
                }
            }
        }
    }
    v
}

/// `(J̄ ⊗ J) e (J̄ ⊗ J)` with `e` acting through `aᵗ ⊗ I` on the first and `b ⊗ I` on the second leg.
fn conjugated_e(e: &ComplexMatrix, n: usize) -> ComplexMatrix {
    let id = ComplexMatrix::identity(n);
    let nn = n * n;
    let mut action = ComplexMatrix::zeros(nn * nn, nn * nn);
    for i in 0..n {
        for p in 0..n {
            for j in 0..n {
                for q in 0..n {
                    let w = e[(i * n + p, j * n + q)];
                    if w == ZERO {
                        continue;
                    }
                    let first = ComplexMatrix::unit(n, n, j, i).kron(&id);
                    let second = ComplexMatrix::unit(n, n, p, q).kron(&id);
                    action += &first.kron(&second).scale(w);
                }
            }
        }
    }
    let pi = star_permutation(n);
    let pp = pi.kron(&pi);
    pp.matmul(&action.conj()).matmul(&pp)
}

/// Identity suite for a bi-unitary `U` over the GNS basis and adjacencies `a1`, `a2`.
///
/// Per adjacency `r`: `omega_of_adjacency_r` (`ω Λ̃(A_r) = (Λᵒᵖ ⊗ Λ)(e_r)`), `range_projection_r`
/// (`ω p_r ω* = (J̄ ⊗ J) e_r (J̄ ⊗ J)`) and `unit_image_r` (`p_r ω*(Λ(1)‾ ⊗ Λ(1)) = Λ̃(A_r)`).
/// Then `leg_identity` (`(ω ⊗ 1)Ũ(ω* ⊗ 1) = U_{2,3}V_{1,3}`), `conjugate_relation`
/// (`V = (F⁻¹ ⊗ 1)U(F ⊗ 1)`), `unit_fixed` (`U(Λ(1) ⊗ ξ) = Λ(1) ⊗ ξ`), the bimodule conditions
/// `bimodule_forward` and `bimodule_backward` on `Ũ`, and `intertwining`
/// (`U(A₁ ⊗ I) = (A₂ ⊗ I)U`). `conclusion_consistent` fails only if every other item passes but
/// `intertwining` does not.
pub fn verify_identities(u: &BiUnitary, a1: &QuantumAdjacency, a2: &QuantumAdjacency, tol: f64) -> Result<CheckReport> {
    let n = a1.n;
    if a2.n != n {
        return Err(Error::DimensionMismatch("adjacencies must act on the same M_n".into()));
    }
    require_gns_biunitary(u, n, tol)?;
    let nn = n * n;
    let d = u.d();
    let big = nn * nn;
    let id_d = ComplexMatrix::identity(d);
    let om = omega(nn);
    let om_adj = om.adjoint();
    let lambda1 = unit_vector(n);
    let ones = crate::numerics::kron_vec(&lambda1.iter().map(|v| v.conj()).collect::<Vec<_>>(), &lambda1);

    let mut report = CheckReport::new();
    let mut projections = Vec::with_capacity(2);
    for (r, a) in [(1, a1), (2, a2)] {
        let thr = tol * scale_of(a.a.frobenius_norm());
        let e = e_of_a(a);
        let lhs = om.apply(a.a.data());
        let rhs = op_lambda(&e, n);
        let diff: Vec<C64> = lhs.iter().zip(&rhs).map(|(x, y)| x - y).collect();
        report.push(format!("omega_of_adjacency_{r}"), vec_norm(&diff), thr);
        let p = s_prime_projection(a, tol)?;
        let lhs = om.matmul(&p).matmul(&om_adj);
        report.push(format!("range_projection_{r}"), lhs.distance(&conjugated_e(&e, n)), tol * scale_of(p.frobenius_norm()));
        let img = p.apply(&om_adj.apply(&ones));
        let diff: Vec<C64> = img.iter().zip(a.a.data()).map(|(x, y)| x - y).collect();
        report.push(format!("unit_image_{r}"), vec_norm(&diff), thr);
        projections.push(p);
    }

    // Ũ on L²(B(H)) ⊗ C^d: block [(i,j),(s,t)] = u_{i,s} u_{j,t}*
    let mut u_tilde = ComplexMatrix::zeros(big * d, big * d);
    for i in 0..nn {
        for j in 0..nn {
            for s in 0..nn {
                for t in 0..nn {
                    let blk = u.block(i, s).matmul(&u.block(j, t).adjoint());
                    u_tilde.set_block((i * nn + j) * d, (s * nn + t) * d, &blk);
                }
            }
        }
    }
    // U_{2,3}V_{1,3} on H^d ⊗ H ⊗ C^d with V = (u_{i,j}*): block [(l,i),(t,s)] = u_{i,s} u_{l,t}*
    let mut legs = ComplexMatrix::zeros(big * d, big * d);
    for l in 0..nn {
        for i in 0..nn {
            for t in 0..nn {
                for s in 0..nn {
                    let blk = u.block(i, s).matmul(&u.block(l, t).adjoint());
                    legs.set_block((l * nn + i) * d, (t * nn + s) * d, &blk);
                }
            }
        }
    }
    let conj_leg = om.kron(&id_d).matmul(&u_tilde).matmul(&om_adj.kron(&id_d));
    let thr_u = tol * scale_of(u_tilde.frobenius_norm());
    report.push("leg_identity", conj_leg.distance(&legs), thr_u);

    let full = u.full();
    let v = ComplexMatrix::from_fn(nn * d, nn * d, |r, c| u.block(r / d, c / d)[(c % d, r % d)].conj());
    let f = star_permutation(n).kron(&id_d);
    let thr_full = tol * scale_of(full.frobenius_norm());
    report.push("conjugate_relation", v.distance(&f.adjoint().matmul(&full).matmul(&f)), thr_full);
    let fixed = ComplexMatrix::column(&lambda1).kron(&id_d);
    report.push("unit_fixed", full.matmul(&fixed).distance(&fixed), thr_full);

    let id_big = ComplexMatrix::identity(big);
    let (q1, q2) = (projections[0].kron(&id_d), projections[1].kron(&id_d));
    let (q1_perp, q2_perp) = ((&id_big - &projections[0]).kron(&id_d), (&id_big - &projections[1]).kron(&id_d));
    report.push("bimodule_forward", q2_perp.matmul(&u_tilde).matmul(&q1).frobenius_norm(), thr_u);
    report.push("bimodule_backward", q1_perp.matmul(&u_tilde.adjoint()).matmul(&q2).frobenius_norm(), thr_u);

    let thr_i = tol * scale_of(full.frobenius_norm().max(a1.a.frobenius_norm()).max(a2.a.frobenius_norm()));
    let premises = report.overall_pass();
    let holds = report.push(
        "intertwining",
        full.matmul(&a1.a.kron(&id_d)).distance(&a2.a.kron(&id_d).matmul(&full)),
        thr_i,
    );
    report.push_verdict("conclusion_consistent", !premises || holds);
    Ok(report)
}

/// The bi-unitary `W* ⊗ Wᵗ` implementing `ρ(x) = W* x W`.
pub fn conjugation_witness(w: &ComplexMatrix) -> Result<BiUnitary> {
    let n = w.rows();
    if !w.is_square() {
        return Err(Error::DimensionMismatch("W must be square".into()));
    }
    let defect = w.adjoint().matmul(w).distance(&ComplexMatrix::identity(n));
    if defect > 1e-9 * scale_of(w.frobenius_norm()) {
        return Err(Error::NotUnitary { residual: defect });
    }
    BiUnitary::from_full(n * n, 1, &w.adjoint().kron(&w.transpose()))
}

/// `x ↦ A(W x W*)` conjugated back: the adjacency `U A U*` for `U = W* ⊗ Wᵗ`.
pub fn conjugate_adjacency(a: &QuantumAdjacency, w: &ComplexMatrix) -> Result<QuantumAdjacency> {
    let u = w.adjoint().kron(&w.transpose());
    QuantumAdjacency::new(a.n, u.matmul(&a.a).matmul(&u.adjoint()))
}
