//! Quantum graphs as subspaces of `C^n ⊗ C^n` and verifiers for the graph isomorphism game.
//!
//! A vector `Σ α_{x,y} e_x ⊗ e_y` has coordinate `α_{x,y}` at index `x·n + y`.

use crate::bistochastic::{check_biunitary, BiUnitary};
use crate::channels::{check_bicorrelation, check_concurrent, dual, from_local_unitaries, BipartiteChannel, Dims};
use crate::error::{Error, Result};
use crate::magic::{check_magic, MagicSquare};
use crate::numerics::random::{random_density, seeded};
use crate::numerics::{scale_of, subspace_relate, CheckReport, ComplexMatrix, Subspace, C64, ONE};

/// Simple undirected graph on `0..n`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Graph {
    n: usize,
    adj: Vec<bool>,
}

impl Graph {
    /// Rejects self-loops and out-of-range vertices; repeated edges are merged.
    pub fn from_edges(n: usize, edges: &[(usize, usize)]) -> Result<Self> {
        let mut adj = vec![false; n * n];
        for &(i, j) in edges {
            if i >= n || j >= n {
                return Err(Error::InvalidInput(format!("edge ({i}, {j}) leaves the vertex set 0..{n}")));
            }
            if i == j {
                return Err(Error::InvalidInput(format!("self-loop at vertex {i}: the adjacency diagonal must be zero")));
            }
            adj[i * n + j] = true;
            adj[j * n + i] = true;
        }
        Ok(Self { n, adj })
    }

    /// Rows of a symmetric 0/1 matrix with zero diagonal.
    pub fn from_adjacency(rows: &[Vec<u8>]) -> Result<Self> {
        let n = rows.len();
        let mut edges = Vec::new();
        for (i, row) in rows.iter().enumerate() {
            if row.len() != n {
                return Err(Error::DimensionMismatch("adjacency matrix must be square".into()));
            }
            for (j, &v) in row.iter().enumerate() {
                if v > 1 || v != rows[j][i] {
                    return Err(Error::InvalidInput(format!("adjacency must be symmetric 0/1, entry ({i}, {j}) is {v}")));
                }
                if v == 1 {
                    edges.push((i, j));
                }
            }
        }
        Self::from_edges(n, &edges)
    }

    pub fn empty(n: usize) -> Self {
        Self { n, adj: vec![false; n * n] }
    }

    pub fn complete(n: usize) -> Self {
        Self { n, adj: (0..n * n).map(|k| k / n != k % n).collect() }
    }

    /// `C_n`; needs `n ≥ 3`.
    pub fn cycle(n: usize) -> Result<Self> {
        if n < 3 {
            return Err(Error::InvalidInput(format!("a cycle needs at least 3 vertices, got {n}")));
        }
        Self::from_edges(n, &(0..n).map(|i| (i, (i + 1) % n)).collect::<Vec<_>>())
    }

    pub fn path(n: usize) -> Self {
        Self::from_edges(n, &(1..n).map(|i| (i - 1, i)).collect::<Vec<_>>()).expect("valid edges")
    }

    /// `K_{1,n−1}` centred at vertex 0.
    pub fn star(n: usize) -> Self {
        Self::from_edges(n, &(1..n).map(|i| (0, i)).collect::<Vec<_>>()).expect("valid edges")
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn adjacent(&self, x: usize, y: usize) -> bool {
        self.adj[x * self.n + y]
    }

    /// Edges `(i, j)` with `i < j`.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        (0..self.n).flat_map(|i| (i + 1..self.n).map(move |j| (i, j))).filter(|&(i, j)| self.adjacent(i, j)).collect()
    }

    pub fn degree(&self, x: usize) -> usize {
        (0..self.n).filter(|&y| self.adjacent(x, y)).count()
    }

    pub fn adjacency_matrix(&self) -> ComplexMatrix {
        ComplexMatrix::from_fn(self.n, self.n, |i, j| C64::new(self.adjacent(i, j) as u8 as f64, 0.0))
    }

    /// The graph with `σ(x) ∼ σ(y)` iff `x ∼ y`.
    pub fn relabel(&self, sigma: &[usize]) -> Result<Self> {
        if !is_permutation(sigma, self.n) {
            return Err(Error::InvalidInput(format!("{sigma:?} is not a permutation of 0..{}", self.n)));
        }
        let edges: Vec<_> = self.edges().into_iter().map(|(i, j)| (sigma[i], sigma[j])).collect();
        Self::from_edges(self.n, &edges)
    }

    /// Whether `x ∼ y ⟺ σ(x) ∼ σ(y)` in `h`.
    pub fn is_isomorphism(&self, h: &Graph, sigma: &[usize]) -> bool {
        self.n == h.n
            && is_permutation(sigma, self.n)
            && (0..self.n).all(|x| (0..self.n).all(|y| self.adjacent(x, y) == h.adjacent(sigma[x], sigma[y])))
    }
}

fn is_permutation(p: &[usize], n: usize) -> bool {
    let mut seen = vec![false; n];
    p.len() == n && p.iter().all(|&v| v < n && !std::mem::replace(&mut seen[v], true))
}

/// Subspace of `C^n ⊗ C^n`; the quantum-graph conditions are checked separately.
#[derive(Clone, Debug, PartialEq)]
pub struct QuantumGraphSpace {
    n: usize,
    space: Subspace,
}

impl QuantumGraphSpace {
    pub fn new(n: usize, space: Subspace) -> Result<Self> {
        if space.ambient() != n * n {
            return Err(Error::DimensionMismatch(format!("subspace of C^{} is not in C^{n} ⊗ C^{n}", space.ambient())));
        }
        Ok(Self { n, space })
    }

    pub fn from_vectors(n: usize, vectors: &[Vec<C64>]) -> Result<Self> {
        Self::new(n, Subspace::span(n * n, vectors)?)
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

    pub fn projector(&self) -> ComplexMatrix {
        self.space.projector()
    }
}

/// `span{e_x ⊗ e_y : x ∼ y}`.
pub fn from_classical_graph(g: &Graph) -> QuantumGraphSpace {
    let n = g.n;
    let basis: Vec<Vec<C64>> = (0..n * n)
        .filter(|&k| g.adj[k])
        .map(|k| {
            let mut v = vec![C64::new(0.0, 0.0); n * n];
            v[k] = ONE;
            v
        })
        .collect();
    QuantumGraphSpace::from_vectors(n, &basis).expect("standard basis vectors")
}

/// Flip unitary `e_x ⊗ e_y ↦ e_y ⊗ e_x` on `C^n ⊗ C^n`.
pub fn flip(n: usize) -> ComplexMatrix {
    ComplexMatrix::from_fn(n * n, n * n, |r, c| if r == (c % n) * n + c / n { ONE } else { C64::new(0.0, 0.0) })
}

/// Items `skew` (`‖P Σ_x e_x ⊗ e_x‖`) and `symmetric` (`‖F P F − P‖_F`).
pub fn check_quantum_graph(u: &QuantumGraphSpace, tol: f64) -> CheckReport {
    let n = u.n;
    let mut diag = vec![C64::new(0.0, 0.0); n * n];
    for x in 0..n {
        diag[x * n + x] = ONE;
    }
    let p = u.projector();
    let f = flip(n);
    let skew = crate::numerics::vec_norm(&u.space.project(&diag));
    let mut report = CheckReport::new();
    report.push("skew", skew, tol);
    report.push("symmetric", f.matmul(&p).matmul(&f).distance(&p), tol * scale_of(p.frobenius_norm()));
    report
}

/// Operator subspace of `M_n`, stored with the column-major coordinates `T_{i,j}` at `i + j·n`.
#[derive(Clone, Debug, PartialEq)]
pub struct OperatorSubspace {
    n: usize,
    space: Subspace,
}

impl OperatorSubspace {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn space(&self) -> &Subspace {
        &self.space
    }

    pub fn dim(&self) -> usize {
        self.space.dim()
    }

    /// Orthonormal basis as matrices.
    pub fn operators(&self) -> Vec<ComplexMatrix> {
        let n = self.n;
        self.space.basis().iter().map(|v| ComplexMatrix::from_fn(n, n, |i, j| v[i + j * n])).collect()
    }

    /// `span{ε_{x,y} : x ∼ y}`.
    pub fn of_graph(g: &Graph) -> Self {
        let n = g.n;
        let vectors: Vec<Vec<C64>> = g
            .edges()
            .into_iter()
            .flat_map(|(x, y)| [(x, y), (y, x)])
            .map(|(x, y)| {
                let mut v = vec![C64::new(0.0, 0.0); n * n];
                v[x + y * n] = ONE;
                v
            })
            .collect();
        Self { n, space: Subspace::span(n * n, &vectors).expect("consistent lengths") }
    }
}

/// `Σ α_{x,y} e_x ⊗ e_y ↦ Σ α_{x,y} ε_{y,x}`.
///
/// In column-major coordinates `ε_{y,x}` sits at `y + x·n`, the index of `e_x ⊗ e_y`, so the map
/// is the identity on coordinates.
pub fn s_tilde(u: &QuantumGraphSpace) -> OperatorSubspace {
    OperatorSubspace { n: u.n, space: u.space.clone() }
}

fn require_square_channel(c: &BipartiteChannel, n: usize) -> Result<()> {
    if c.dims() != Dims::square(n) {
        return Err(Error::DimensionMismatch(format!("channel {:?} does not act on M_{n} ⊗ M_{n}", c.dims())));
    }
    Ok(())
}

fn graph_warnings(report: &mut CheckReport, label: &str, u: &QuantumGraphSpace, tol: f64) {
    for item in check_quantum_graph(u, tol).items {
        report.note(format!("{label}.{}", item.name), item.residual, item.threshold);
    }
}

const DIAGNOSTIC_SAMPLES: usize = 20;

/// Homomorphism condition `Γ(ω) = Q Γ(ω) Q` for all `ω = P ω P`.
///
/// Item `trace_condition` is `|Tr(Γ(P) Q^⊥)|`, decisive for completely positive `Γ` because every
/// PSD `ω = P ω P` satisfies `ω ≤ ‖ω‖ P`. The note `random_omega` evaluates the same quantity on
/// random `ω = P ρ P` with `ρ ≥ I/2`, and the item `random_agreement` records that both
/// verdicts coincide. Non-quantum-graph inputs are accepted and flagged in the notes.
pub fn check_perfect_homomorphism_strategy(
    c: &BipartiteChannel,
    u: &QuantumGraphSpace,
    v: &QuantumGraphSpace,
    tol: f64,
    seed: u64,
) -> Result<CheckReport> {
    let n = u.n;
    if v.n != n {
        return Err(Error::DimensionMismatch(format!("graphs on {n} and {} vertices", v.n)));
    }
    require_square_channel(c, n)?;
    let p = u.projector();
    let q_perp = &ComplexMatrix::identity(n * n) - &v.projector();
    let image = c.apply(&p)?;
    let thr = tol * scale_of(image.frobenius_norm());
    let leak = |m: &ComplexMatrix| m.matmul(&q_perp).trace().norm();

    let mut report = CheckReport::new();
    let decisive = report.push("trace_condition", leak(&image), thr);
    let mut rng = seeded(seed);
    let half_id = ComplexMatrix::identity(n * n).scale_real(0.5);
    let mut worst: f64 = 0.0;
    for _ in 0..DIAGNOSTIC_SAMPLES {
        let rho = &half_id + &random_density(n * n, &mut rng).scale_real(0.5);
        let omega = p.matmul(&rho).matmul(&p);
        worst = worst.max(leak(&c.apply(&omega)?));
    }
    report.note("random_omega", worst, thr);
    report.push_verdict("random_agreement", (worst <= thr) == decisive);
    graph_warnings(&mut report, "u", u, tol);
    graph_warnings(&mut report, "v", v, tol);
    Ok(report)
}

/// Checks a fixed channel against many graph pairs, computing the channel-only items once.
pub struct PerfectIsoChecker<'a> {
    channel: &'a BipartiteChannel,
    dual: BipartiteChannel,
    channel_report: CheckReport,
    tol: f64,
    seed: u64,
}

impl<'a> PerfectIsoChecker<'a> {
    pub fn new(c: &'a BipartiteChannel, tol: f64, seed: u64) -> Result<Self> {
        require_square_channel(c, c.dims().x)?;
        let mut channel_report = CheckReport::new();
        channel_report.merge("bicorrelation", check_bicorrelation(c, tol)?);
        channel_report.merge("", check_concurrent(c, tol)?);
        Ok(Self { channel: c, dual: dual(c), channel_report, tol, seed })
    }

    /// Bicorrelation and concurrency items, then the homomorphism conditions for `Γ: 𝒰 → 𝒱`
    /// (prefix `forward`) and `Γ*: 𝒱 → 𝒰` (prefix `backward`).
    pub fn check(&self, u: &QuantumGraphSpace, v: &QuantumGraphSpace) -> Result<CheckReport> {
        let mut report = self.channel_report.clone();
        report.merge("forward", check_perfect_homomorphism_strategy(self.channel, u, v, self.tol, self.seed)?);
        report.merge("backward", check_perfect_homomorphism_strategy(&self.dual, v, u, self.tol, self.seed)?);
        Ok(report)
    }
}

/// Perfect strategy for the isomorphism game `𝒰 ≅ 𝒱`.
pub fn check_perfect_iso_strategy(
    c: &BipartiteChannel,
    u: &QuantumGraphSpace,
    v: &QuantumGraphSpace,
    tol: f64,
    seed: u64,
) -> Result<CheckReport> {
    require_square_channel(c, u.n)?;
    PerfectIsoChecker::new(c, tol, seed)?.check(u, v)
}

/// Largest block size accepted by [`check_biunitary_iso`].
pub const MAX_BIUNITARY_BLOCK: usize = 8;

/// Zero-compression and operator-space forms of the bi-unitary isomorphism conditions.
///
/// With `F = Σ ε_{x,a} ⊗ ε_{y,b} ⊗ u_{a,x} u_{b,y}*`, items `compression_forward`
/// (`‖(P ⊗ I) F (Q^⊥ ⊗ I)‖_F`) and `compression_backward` (`‖(P̄^⊥ ⊗ I) F (Q̄ ⊗ I)‖_F`) form one
/// family; `containment_forward` (`U(S̃_𝒰 ⊗ 1)U* ⊆ S̃_𝒱 ⊗ M_d`) and `containment_backward`
/// (`Uᵗ(S̃_𝒱 ⊗ 1)Uᵗ* ⊆ S̃_𝒰 ⊗ M_d`) the other. `agreement` records that both families reach the
/// same verdict.
pub fn check_biunitary_iso(uu: &BiUnitary, u: &QuantumGraphSpace, v: &QuantumGraphSpace, tol: f64) -> Result<CheckReport> {
    let (n, d) = (uu.n(), uu.d());
    if u.n != n || v.n != n {
        return Err(Error::DimensionMismatch(format!("bi-unitary of size {n} against graphs on {} and {}", u.n, v.n)));
    }
    if d > MAX_BIUNITARY_BLOCK {
        return Err(Error::UnsupportedSize(format!("block size {d} exceeds {MAX_BIUNITARY_BLOCK}")));
    }
    let bu = check_biunitary(uu, tol);
    if !bu.overall_pass() {
        return Err(Error::NotUnitary { residual: bu.max_residual() });
    }

    let nn = n * n;
    let mut f = ComplexMatrix::zeros(nn * d, nn * d);
    let adj: Vec<ComplexMatrix> = uu.blocks().iter().map(|b| b.adjoint()).collect();
    for x in 0..n {
        for y in 0..n {
            for a in 0..n {
                for b in 0..n {
                    let blk = uu.block(a, x).matmul(&adj[b * n + y]);
                    f.set_block((x * n + y) * d, (a * n + b) * d, &blk);
                }
            }
        }
    }
    let id_d = ComplexMatrix::identity(d);
    let id_nn = ComplexMatrix::identity(nn);
    let p = u.projector();
    let q = v.projector();
    let lift = |m: &ComplexMatrix| m.kron(&id_d);
    let thr = tol * scale_of(f.frobenius_norm());
    let forward = lift(&p).matmul(&f).matmul(&lift(&(&id_nn - &q))).frobenius_norm();
    let backward = lift(&(&id_nn - &p.conj())).matmul(&f).matmul(&lift(&q.conj())).frobenius_norm();

    let full = uu.full();
    let ut = uu.block_transpose();
    let s_u = s_tilde(u);
    let s_v = s_tilde(v);
    let cont_forward = containment(&full, &s_u, &s_v, d)?;
    let cont_backward = containment(&ut, &s_v, &s_u, d)?;

    let mut report = CheckReport::new();
    let c1 = report.push("compression_forward", forward, thr);
    let c2 = report.push("compression_backward", backward, thr);
    let o1 = report.push("containment_forward", cont_forward, tol);
    let o2 = report.push("containment_backward", cont_backward, tol);
    report.push_verdict("agreement", (c1 && c2) == (o1 && o2));
    graph_warnings(&mut report, "u", u, tol);
    graph_warnings(&mut report, "v", v, tol);
    Ok(report)
}

/// `‖(I − P_{T⊗M_d}) W‖` over the orthonormal images `W = vec(U(s ⊗ 1)U*)`, `s` running over a
/// basis of `source`; operators on `C^n ⊗ C^d` are vectorised row-major.
fn containment(unitary: &ComplexMatrix, source: &OperatorSubspace, target: &OperatorSubspace, d: usize) -> Result<f64> {
    let id_d = ComplexMatrix::identity(d);
    let uadj = unitary.adjoint();
    let images: Vec<Vec<C64>> = source
        .operators()
        .iter()
        .map(|s| unitary.matmul(&s.kron(&id_d)).matmul(&uadj).into_vec())
        .collect();
    let ambient = unitary.rows() * unitary.rows();
    let mut target_vectors = Vec::with_capacity(target.dim() * d * d);
    for t in target.operators() {
        for i in 0..d {
            for j in 0..d {
                target_vectors.push(t.kron(&ComplexMatrix::unit(d, d, i, j)).into_vec());
            }
        }
    }
    let image_space = Subspace::span(ambient, &images)?;
    let target_space = Subspace::span(ambient, &target_vectors)?;
    Ok(subspace_relate(&image_space, &target_space)?.u_in_v)
}

/// Local isomorphism `(U ⊗ Ū)(𝒰) = 𝒱` by a scalar unitary `U`.
///
/// Item `equality` is `‖P_{(U⊗Ū)𝒰} − P_𝒱‖_F`. The report also carries the perfect-strategy check
/// of the induced channel `ω ↦ U ω U*` tensored with its sharp (prefix `channel`), and
/// `channel_agreement` records that the two verdicts coincide.
pub fn check_local_iso(u0: &ComplexMatrix, u: &QuantumGraphSpace, v: &QuantumGraphSpace, tol: f64, seed: u64) -> Result<CheckReport> {
    let n = u.n;
    if v.n != n || u0.shape() != (n, n) {
        return Err(Error::DimensionMismatch(format!("unitary must be {n}x{n} and graphs must share n")));
    }
    let defect = u0.adjoint().matmul(u0).distance(&ComplexMatrix::identity(n));
    if defect > tol * scale_of(u0.frobenius_norm()) {
        return Err(Error::NotUnitary { residual: defect });
    }
    let image = u.space.image(&u0.kron(&u0.conj()))?;
    let rel = subspace_relate(&image, &v.space)?;
    let channel = from_local_unitaries(&[(1.0, u0.adjoint())], tol)?;
    let strategy = check_perfect_iso_strategy(&channel, u, v, tol, seed)?;
    let mut report = CheckReport::new();
    let eq = report.push("equality", rel.equal, tol);
    report.push_verdict("channel_agreement", eq == strategy.overall_pass());
    report.merge("channel", strategy);
    Ok(report)
}

/// The scalar unitary `U e_x = e_{σ(x)}`, which maps `𝒰_G` onto `𝒰_H` when `σ: G → H` is an
/// isomorphism.
pub fn permutation_unitary(sigma: &[usize]) -> ComplexMatrix {
    let n = sigma.len();
    ComplexMatrix::from_fn(n, n, |a, x| if a == sigma[x] { ONE } else { C64::new(0.0, 0.0) })
}

/// Largest vertex count accepted by [`search_classical_local_iso`].
pub const MAX_SEARCH_VERTICES: usize = 10;

/// Exhaustive search for an isomorphism `σ: G → H`; `None` means none exists.
///
/// Vertices are assigned in order of decreasing degree and candidates must match in degree and
/// in adjacency to every vertex assigned so far.
pub fn search_classical_local_iso(g: &Graph, h: &Graph) -> Result<Option<Vec<usize>>> {
    if g.n != h.n {
        return Err(Error::DimensionMismatch(format!("graphs on {} and {} vertices", g.n, h.n)));
    }
    let n = g.n;
    if n > MAX_SEARCH_VERTICES {
        return Err(Error::UnsupportedSize(format!("search is capped at {MAX_SEARCH_VERTICES} vertices, got {n}")));
    }
    let dg: Vec<usize> = (0..n).map(|x| g.degree(x)).collect();
    let dh: Vec<usize> = (0..n).map(|x| h.degree(x)).collect();
    let mut sg = dg.clone();
    let mut sh = dh.clone();
    sg.sort_unstable();
    sh.sort_unstable();
    if sg != sh {
        return Ok(None);
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by_key(|&x| std::cmp::Reverse(dg[x]));

    #[allow(clippy::too_many_arguments)]
    fn extend(
        depth: usize,
        order: &[usize],
        g: &Graph,
        h: &Graph,
        dg: &[usize],
        dh: &[usize],
        sigma: &mut [usize],
        used: &mut [bool],
    ) -> bool {
        if depth == order.len() {
            return true;
        }
        let x = order[depth];
        for a in 0..g.n {
            if used[a] || dh[a] != dg[x] {
                continue;
            }
            if order[..depth].iter().any(|&y| g.adjacent(x, y) != h.adjacent(a, sigma[y])) {
                continue;
            }
            sigma[x] = a;
            used[a] = true;
            if extend(depth + 1, order, g, h, dg, dh, sigma, used) {
                return true;
            }
            used[a] = false;
        }
        false
    }

    let mut sigma = vec![usize::MAX; n];
    let mut used = vec![false; n];
    Ok(extend(0, &order, g, h, &dg, &dh, &mut sigma, &mut used).then_some(sigma))
}

/// Quantum permutation `p` (with `u_{a,x} = p_{x,a}`) as an isomorphism `G → H`.
///
/// Item `conjugation` is `‖U(A_G ⊗ I)U* − A_H ⊗ I‖_F`; item `schur` is the root sum of squares of
/// `‖u_{a,x} u_{b,y}‖_F` over all `(x ∼ y) ≠ (a ∼ b)`. `agreement` records that the two verdicts
/// coincide.
pub fn check_qperm_intertwiner(p: &MagicSquare, g: &Graph, h: &Graph, tol: f64) -> Result<CheckReport> {
    let (n, d) = (p.n(), p.d());
    if g.n != n || h.n != n {
        return Err(Error::DimensionMismatch(format!("quantum permutation of size {n} against graphs on {} and {}", g.n, h.n)));
    }
    let magic = check_magic(p, tol);
    if !magic.overall_pass() || !magic.passes("quantum_permutation") {
        return Err(Error::Precondition("input is not a quantum permutation".into()));
    }
    let grid: Vec<Vec<ComplexMatrix>> = (0..n).map(|a| (0..n).map(|x| p.entry(x, a).clone()).collect()).collect();
    let u = ComplexMatrix::from_blocks(&grid)?;
    let id_d = ComplexMatrix::identity(d);
    let lhs = u.matmul(&g.adjacency_matrix().kron(&id_d)).matmul(&u.adjoint());
    let conj = lhs.distance(&h.adjacency_matrix().kron(&id_d));
    let mut schur = 0.0;
    for x in 0..n {
        for y in 0..n {
            for a in 0..n {
                for b in 0..n {
                    if g.adjacent(x, y) != h.adjacent(a, b) {
                        schur += p.entry(x, a).matmul(p.entry(y, b)).frobenius_norm().powi(2);
                    }
                }
            }
        }
    }
    let thr = tol * scale_of(u.frobenius_norm());
    let mut report = CheckReport::new();
    let c = report.push("conjugation", conj, thr);
    let s = report.push("schur", schur.sqrt(), thr);
    report.push_verdict("agreement", c == s);
    Ok(report)
}
