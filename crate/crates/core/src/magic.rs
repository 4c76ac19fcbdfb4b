//! Quantum magic squares, permutation decompositions and their dilations.

use crate::bistochastic::BistochasticMatrix;
use crate::error::{Error, Result};
use crate::numerics::{herm_eigen, herm_pinv, min_eigenvalue, psd_sqrt, scale_of, CheckReport, ComplexMatrix, C64, HERMITIAN_TOL};

/// Operator-valued doubly stochastic matrix `(E_{x,a})` with entries in `M_d`.
#[derive(Clone, Debug, PartialEq)]
pub struct MagicSquare {
    n: usize,
    d: usize,
    entries: Vec<ComplexMatrix>,
}

impl MagicSquare {
    /// `entries[x·n + a]` is `E_{x,a}`; shapes are validated, the magic-square conditions are not.
    pub fn new(n: usize, d: usize, entries: Vec<ComplexMatrix>) -> Result<Self> {
        if n == 0 || d == 0 || entries.len() != n * n {
            return Err(Error::DimensionMismatch(format!("expected {} entries, got {}", n * n, entries.len())));
        }
        if entries.iter().any(|e| e.shape() != (d, d) || !e.is_finite()) {
            return Err(Error::DimensionMismatch(format!("every entry must be a finite {d}x{d} matrix")));
        }
        Ok(Self { n, d, entries })
    }

    pub fn from_fn(n: usize, d: usize, f: impl Fn(usize, usize) -> ComplexMatrix) -> Result<Self> {
        Self::new(n, d, (0..n * n).map(|k| f(k / n, k % n)).collect())
    }

    /// `E_{x,a} = δ_{a,σ(x)}` with `d = 1`.
    pub fn from_permutation(sigma: &[usize]) -> Self {
        let n = sigma.len();
        Self::from_fn(n, 1, |x, a| ComplexMatrix::from_real(1, 1, &[(a == sigma[x]) as u8 as f64]).expect("1x1"))
            .expect("consistent shapes")
    }

    /// Doubly stochastic scalar matrix as a `d = 1` square.
    pub fn from_scalar(b: &[Vec<f64>]) -> Result<Self> {
        let n = b.len();
        if b.iter().any(|r| r.len() != n) {
            return Err(Error::DimensionMismatch("matrix must be square".into()));
        }
        Self::from_fn(n, 1, |x, a| ComplexMatrix::from_real(1, 1, &[b[x][a]]).expect("1x1"))
    }

    /// `E_{x,a} = I/n`.
    pub fn uniform(n: usize, d: usize) -> Self {
        Self::from_fn(n, d, |_, _| ComplexMatrix::identity(d).scale_real(1.0 / n as f64)).expect("consistent shapes")
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn entry(&self, x: usize, a: usize) -> &ComplexMatrix {
        &self.entries[x * self.n + a]
    }

    pub fn entries(&self) -> &[ComplexMatrix] {
        &self.entries
    }

    /// `(Σ_k ‖E_k‖_F²)^{1/2}`.
    pub fn norm(&self) -> f64 {
        self.entries.iter().map(|e| e.frobenius_norm().powi(2)).sum::<f64>().sqrt()
    }

    /// Block matrix with `E_{x,a}` at block position `(x, a)`.
    pub fn block_matrix(&self) -> ComplexMatrix {
        let grid: Vec<Vec<ComplexMatrix>> =
            (0..self.n).map(|x| (0..self.n).map(|a| self.entry(x, a).clone()).collect()).collect();
        ComplexMatrix::from_blocks(&grid).expect("uniform blocks")
    }
}

/// Items `psd_entries`, `row_sums`, `col_sums`; the note `quantum_permutation` reports
/// `max ‖E² − E‖_F, ‖E − E†‖_F` without affecting the verdict.
pub fn check_magic(e: &MagicSquare, tol: f64) -> CheckReport {
    let (n, d) = (e.n, e.d);
    let thr = tol * scale_of(e.norm());
    let id = ComplexMatrix::identity(d);
    let mut psd: f64 = 0.0;
    let mut proj: f64 = 0.0;
    for m in &e.entries {
        let herm = m.hermitian_defect();
        let neg = if herm <= HERMITIAN_TOL * scale_of(m.frobenius_norm()) {
            min_eigenvalue(m).map(|l| (-l).max(0.0)).unwrap_or(f64::INFINITY)
        } else {
            f64::INFINITY
        };
        psd = psd.max(herm).max(neg);
        proj = proj.max(m.matmul(m).distance(m)).max(herm);
    }
    let mut rows: f64 = 0.0;
    let mut cols: f64 = 0.0;
    for i in 0..n {
        let mut r = ComplexMatrix::zeros(d, d);
        let mut c = ComplexMatrix::zeros(d, d);
        for j in 0..n {
            r += e.entry(i, j);
            c += e.entry(j, i);
        }
        rows = rows.max(r.distance(&id));
        cols = cols.max(c.distance(&id));
    }
    let mut report = CheckReport::new();
    report.push("psd_entries", psd, thr);
    report.push("row_sums", rows, thr);
    report.push("col_sums", cols, thr);
    report.note("quantum_permutation", proj, thr);
    report
}

/// `Ẽ_{x,x',a,a'} = δ_{x,x'} δ_{a,a'} E_{x,a}`.
pub fn embed_diagonal(e: &MagicSquare, tol: f64) -> Result<BistochasticMatrix> {
    if !check_magic(e, tol).overall_pass() {
        return Err(Error::Precondition("input is not a quantum magic square".into()));
    }
    let d = e.d;
    Ok(BistochasticMatrix::from_blocks(e.n, d, |x, xp, a, ap| {
        if x == xp && a == ap {
            e.entry(x, a).clone()
        } else {
            ComplexMatrix::zeros(d, d)
        }
    }))
}

/// `E_{x,a} = Σ{γ_θ : θ(x) = a}`; `θ` is stored as the list `[θ(0), …, θ(n−1)]`.
#[derive(Clone, Debug, PartialEq)]
pub struct PermDecomposition {
    n: usize,
    d: usize,
    terms: Vec<(Vec<usize>, ComplexMatrix)>,
}

impl PermDecomposition {
    pub fn new(n: usize, d: usize, terms: Vec<(Vec<usize>, ComplexMatrix)>) -> Result<Self> {
        for (theta, gamma) in &terms {
            if !is_permutation(theta, n) {
                return Err(Error::InvalidInput(format!("{theta:?} is not a permutation of 0..{n}")));
            }
            if gamma.shape() != (d, d) || !gamma.is_finite() {
                return Err(Error::DimensionMismatch(format!("every γ must be a finite {d}x{d} matrix")));
            }
        }
        Ok(Self { n, d, terms })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn terms(&self) -> &[(Vec<usize>, ComplexMatrix)] {
        &self.terms
    }

    /// The magic square `E_{x,a} = Σ{γ_θ : θ(x) = a}`.
    pub fn reconstruct(&self) -> MagicSquare {
        let (n, d) = (self.n, self.d);
        let mut entries = vec![ComplexMatrix::zeros(d, d); n * n];
        for (theta, gamma) in &self.terms {
            for x in 0..n {
                entries[x * n + theta[x]] += gamma;
            }
        }
        MagicSquare { n, d, entries }
    }
}

fn is_permutation(p: &[usize], n: usize) -> bool {
    let mut seen = vec![false; n];
    p.len() == n && p.iter().all(|&v| v < n && !std::mem::replace(&mut seen[v], true))
}

/// Items `reconstruction` (max `‖E_{x,a} − Σ γ_θ‖_F`), `psd_terms` and `sum_identity`.
pub fn verify_decomposition(e: &MagicSquare, dec: &PermDecomposition, tol: f64) -> Result<CheckReport> {
    if e.n != dec.n || e.d != dec.d {
        return Err(Error::DimensionMismatch(format!(
            "square has n={}, d={} but decomposition has n={}, d={}",
            e.n, e.d, dec.n, dec.d
        )));
    }
    let thr = tol * scale_of(e.norm());
    let rec = dec.reconstruct();
    let recon = e.entries.iter().zip(&rec.entries).map(|(a, b)| a.distance(b)).fold(0.0, f64::max);
    let mut psd: f64 = 0.0;
    let mut sum = ComplexMatrix::zeros(dec.d, dec.d);
    for (_, g) in &dec.terms {
        let herm = g.hermitian_defect();
        let neg = if herm <= HERMITIAN_TOL * scale_of(g.frobenius_norm()) {
            min_eigenvalue(g).map(|l| (-l).max(0.0)).unwrap_or(f64::INFINITY)
        } else {
            f64::INFINITY
        };
        psd = psd.max(herm).max(neg);
        sum += g;
    }
    let mut report = CheckReport::new();
    report.push("reconstruction", recon, thr);
    report.push("psd_terms", psd, thr);
    report.push("sum_identity", sum.distance(&ComplexMatrix::identity(dec.d)), thr);
    Ok(report)
}

/// Birkhoff decomposition of a doubly stochastic matrix by repeated perfect matchings.
pub fn birkhoff_scalar(b: &[Vec<f64>]) -> Result<PermDecomposition> {
    let n = b.len();
    if n == 0 || b.iter().any(|r| r.len() != n) {
        return Err(Error::DimensionMismatch("matrix must be square and non-empty".into()));
    }
    for (i, row) in b.iter().enumerate() {
        if let Some(v) = row.iter().find(|v| !v.is_finite() || **v < -1e-12) {
            return Err(Error::NotDoublyStochastic(format!("entry {v} in row {i}")));
        }
        let rs: f64 = row.iter().sum();
        let cs: f64 = b.iter().map(|r| r[i]).sum();
        if (rs - 1.0).abs() > 1e-9 || (cs - 1.0).abs() > 1e-9 {
            return Err(Error::NotDoublyStochastic(format!("row/column {i} sums to {rs}/{cs}")));
        }
    }
    const ZERO_TOL: f64 = 1e-13;
    let mut rest: Vec<Vec<f64>> = b.iter().map(|r| r.iter().map(|&v| if v > ZERO_TOL { v } else { 0.0 }).collect()).collect();
    let mut terms = Vec::new();
    loop {
        let peak = rest.iter().flatten().fold(0.0f64, |m, &v| m.max(v));
        if peak <= ZERO_TOL {
            break;
        }
        let Some(theta) = perfect_matching(&rest) else {
            if peak <= 1e-11 {
                break;
            }
            return Err(Error::Numerical(format!("no perfect matching on the support (largest remaining entry {peak:.3e})")));
        };
        let (argmin, w) = (0..n).map(|x| (x, rest[x][theta[x]])).min_by(|a, b| a.1.total_cmp(&b.1)).expect("n > 0");
        for x in 0..n {
            let v = &mut rest[x][theta[x]];
            *v -= w;
            if *v <= ZERO_TOL || x == argmin {
                *v = 0.0;
            }
        }
        terms.push((theta, ComplexMatrix::from_real(1, 1, &[w]).expect("1x1")));
    }
    PermDecomposition::new(n, 1, terms)
}

/// Perfect matching on the positive support by augmenting paths; `θ(x)` is the matched column.
fn perfect_matching(m: &[Vec<f64>]) -> Option<Vec<usize>> {
    let n = m.len();
    let mut col_owner: Vec<Option<usize>> = vec![None; n];
    fn augment(x: usize, m: &[Vec<f64>], seen: &mut [bool], owner: &mut [Option<usize>]) -> bool {
        // visit larger entries first so that heavy permutations are peeled early
        let mut cols: Vec<usize> = (0..m.len()).filter(|&a| m[x][a] > 0.0).collect();
        cols.sort_by(|&p, &q| m[x][q].total_cmp(&m[x][p]));
        for a in cols {
            if seen[a] {
                continue;
            }
            seen[a] = true;
            if owner[a].is_none() || augment(owner[a].expect("checked"), m, seen, owner) {
                owner[a] = Some(x);
                return true;
            }
        }
        false
    }
    for x in 0..n {
        let mut seen = vec![false; n];
        if !augment(x, m, &mut seen, &mut col_owner) {
            return None;
        }
    }
    let mut theta = vec![0; n];
    for (a, owner) in col_owner.iter().enumerate() {
        theta[owner.expect("perfect")] = a;
    }
    Some(theta)
}

/// All permutations of `0..n` in lexicographic order.
pub fn permutations(n: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut p: Vec<usize> = (0..n).collect();
    loop {
        out.push(p.clone());
        let Some(i) = (1..n).rev().find(|&i| p[i - 1] < p[i]) else { break };
        let j = (i..n).rev().find(|&j| p[j] > p[i - 1]).expect("exists");
        p.swap(i - 1, j);
        p[i..].reverse();
    }
    out
}

/// Outcome of the decomposition search.
#[derive(Clone, Debug)]
pub enum Decomposition {
    Found(PermDecomposition),
    /// The iteration budget ran out; this is not evidence that no decomposition exists.
    Undetermined { iterations: usize, affine_residual: f64 },
}

/// Search for `E_{x,a} = Σ{γ_θ : θ(x) = a}` with PSD `γ_θ` by Dykstra's alternating projections.
///
/// The PSD cone product is projected onto by eigenvalue clipping; the affine constraint set by
/// `γ ↦ γ − Aᵗ N⁺ (Aγ − E)` with the counting matrix `N_{(x,a),(x',a')} = #{θ : θ(x) = a, θ(x') = a'}`.
pub fn decompose_operator(e: &MagicSquare, max_iter: usize, tol: f64) -> Result<Decomposition> {
    let (n, d) = (e.n, e.d);
    if n > 5 {
        return Err(Error::UnsupportedSize(format!("operator decomposition needs n <= 5, got {n}")));
    }
    if !check_magic(e, tol).overall_pass() {
        return Err(Error::Precondition("input is not a quantum magic square".into()));
    }
    let perms = permutations(n);
    let count = perms.len();
    let nn = n * n;
    let mut counting = ComplexMatrix::zeros(nn, nn);
    for theta in &perms {
        for x in 0..n {
            for xp in 0..n {
                counting[(x * n + theta[x], xp * n + theta[xp])] += C64::new(1.0, 0.0);
            }
        }
    }
    let pinv = herm_pinv(&counting, 1e-9 * count as f64)?;
    let thr = tol * scale_of(e.norm());

    let marginals = |gammas: &[ComplexMatrix]| -> Vec<ComplexMatrix> {
        let mut out = vec![ComplexMatrix::zeros(d, d); nn];
        for (theta, g) in perms.iter().zip(gammas) {
            for x in 0..n {
                out[x * n + theta[x]] += g;
            }
        }
        out
    };
    let project_affine = |gammas: &mut [ComplexMatrix]| {
        let m = marginals(gammas);
        let resid: Vec<ComplexMatrix> = m.iter().zip(&e.entries).map(|(a, b)| a - b).collect();
        let mut y = vec![ComplexMatrix::zeros(d, d); nn];
        for (i, yi) in y.iter_mut().enumerate() {
            for (j, rj) in resid.iter().enumerate() {
                let w = pinv[(i, j)];
                if w.norm() > 0.0 {
                    *yi += &rj.scale(w);
                }
            }
        }
        for (theta, g) in perms.iter().zip(gammas.iter_mut()) {
            for x in 0..n {
                *g -= &y[x * n + theta[x]];
            }
        }
    };
    let affine_residual = |gammas: &[ComplexMatrix]| -> f64 {
        marginals(gammas).iter().zip(&e.entries).map(|(a, b)| a.distance(b)).fold(0.0, f64::max)
    };

    let mut x: Vec<ComplexMatrix> = vec![ComplexMatrix::identity(d).scale_real(1.0 / count as f64); count];
    let mut increments = vec![ComplexMatrix::zeros(d, d); count];
    let mut last = affine_residual(&x);
    for iter in 0..max_iter {
        project_affine(&mut x);
        for (g, q) in x.iter_mut().zip(increments.iter_mut()) {
            let shifted = &*g + q;
            let eig = herm_eigen(&shifted.hermitian_part())?;
            let clipped = eig.recompose(|l| l.max(0.0));
            *q = &shifted - &clipped;
            *g = clipped;
        }
        last = affine_residual(&x);
        if last <= thr {
            let terms: Vec<(Vec<usize>, ComplexMatrix)> = perms
                .iter()
                .zip(&x)
                .filter(|(_, g)| g.trace().re > 1e-15)
                .map(|(p, g)| (p.clone(), g.clone()))
                .collect();
            let dec = PermDecomposition::new(n, d, terms)?;
            if verify_decomposition(e, &dec, tol)?.overall_pass() {
                return Ok(Decomposition::Found(dec));
            }
        }
        if iter + 1 == max_iter {
            break;
        }
    }
    Ok(Decomposition::Undetermined { iterations: max_iter, affine_residual: last })
}

/// Commuting dilation `E_{x,a} = V† P_{x,a} V`.
#[derive(Clone, Debug)]
pub struct Dilation {
    /// Isometry `C^d → C^{|terms|} ⊗ C^d`.
    pub v: ComplexMatrix,
    /// Diagonal projections, hence pairwise commuting.
    pub p: MagicSquare,
    pub report: CheckReport,
}

/// `P_{x,a} = diag_θ(δ_{θ(x),a} I_d)` and `V` the column of the blocks `√γ_θ`.
pub fn dilate(dec: &PermDecomposition, tol: f64) -> Result<Dilation> {
    let (n, d) = (dec.n, dec.d);
    let e = dec.reconstruct();
    let own = verify_decomposition(&e, dec, tol)?;
    if !own.overall_pass() {
        return Err(Error::Precondition("decomposition terms are not PSD or do not sum to the identity".into()));
    }
    let t = dec.terms.len();
    let mut v = ComplexMatrix::zeros(t * d, d);
    for (k, (_, g)) in dec.terms.iter().enumerate() {
        v.set_block(k * d, 0, &psd_sqrt(g, tol)?);
    }
    let entries = (0..n * n)
        .map(|idx| {
            let (x, a) = (idx / n, idx % n);
            let mut p = ComplexMatrix::zeros(t * d, t * d);
            for (k, (theta, _)) in dec.terms.iter().enumerate() {
                if theta[x] == a {
                    for i in 0..d {
                        p[(k * d + i, k * d + i)] = C64::new(1.0, 0.0);
                    }
                }
            }
            p
        })
        .collect();
    let p = MagicSquare::new(n, t * d, entries)?;
    let report = verify_dilation(&e, &v, &p, tol)?;
    Ok(Dilation { v, p, report })
}

/// Items `isometry`, `compression`, `projections`, `commuting`, `row_sums`, `col_sums` for a
/// candidate dilation `(V, P)` of `e`.
pub fn verify_dilation(e: &MagicSquare, v: &ComplexMatrix, p: &MagicSquare, tol: f64) -> Result<CheckReport> {
    let (n, d) = (e.n, e.d);
    if p.n != n || v.shape() != (p.d, d) {
        return Err(Error::DimensionMismatch("dilation shapes do not match the magic square".into()));
    }
    let thr = tol * scale_of(e.norm());
    let vd = v.adjoint();
    let mut compression: f64 = 0.0;
    for x in 0..n {
        for a in 0..n {
            compression = compression.max(vd.matmul(p.entry(x, a)).matmul(v).distance(e.entry(x, a)));
        }
    }
    let mut commuting: f64 = 0.0;
    for i in 0..p.entries.len() {
        for j in i + 1..p.entries.len() {
            commuting = commuting.max(p.entries[i].commutator(&p.entries[j]).frobenius_norm());
        }
    }
    let sums = check_magic(p, tol);
    let mut report = CheckReport::new();
    report.push("isometry", vd.matmul(v).distance(&ComplexMatrix::identity(d)), thr);
    report.push("compression", compression, thr);
    let proj = sums.item("quantum_permutation").expect("present").residual;
    report.push("projections", proj, thr);
    report.push("commuting", commuting, thr);
    report.push("row_sums", sums.residual("row_sums"), thr);
    report.push("col_sums", sums.residual("col_sums"), thr);
    Ok(report)
}

/// Result of a membership test for the cone of real-diagonal doubly-balanced matrices.
#[derive(Clone, Debug)]
pub struct MxCheck {
    pub report: CheckReport,
    /// Birkhoff decomposition when the diagonal is nonnegative with unit line sums.
    pub witness: Option<PermDecomposition>,
}

/// Reads `μ_{x,a} = t[(x,a),(x,a)]` and tests that all row and column sums are equal.
///
/// The residual is the largest deviation of a line sum from the mean of all `2n` line sums.
pub fn mx_cone_check(t: &ComplexMatrix, n: usize, tol: f64) -> Result<MxCheck> {
    if n == 0 || t.shape() != (n * n, n * n) {
        return Err(Error::DimensionMismatch(format!("expected a {0}x{0} matrix", n * n)));
    }
    let thr = tol * scale_of(t.frobenius_norm());
    let mut off: f64 = 0.0;
    for i in 0..n * n {
        for j in 0..n * n {
            if i != j {
                off = off.max(t[(i, j)].norm());
            }
        }
    }
    if off > thr {
        return Err(Error::InvalidInput(format!("matrix is not diagonal (off-diagonal entry {off:.3e})")));
    }
    let mu = |x: usize, a: usize| t[(x * n + a, x * n + a)];
    let rows: Vec<C64> = (0..n).map(|x| (0..n).map(|a| mu(x, a)).sum()).collect();
    let cols: Vec<C64> = (0..n).map(|a| (0..n).map(|x| mu(x, a)).sum()).collect();
    let mean: C64 = (rows.iter().sum::<C64>() + cols.iter().sum::<C64>()) / (2 * n) as f64;
    let dev = rows.iter().chain(&cols).map(|s| (s - mean).norm()).fold(0.0, f64::max);
    let mut report = CheckReport::new();
    report.push("line_sums", dev, thr);
    let scalar: Vec<Vec<f64>> = (0..n).map(|x| (0..n).map(|a| mu(x, a).re).collect()).collect();
    let real = (0..n * n).all(|k| t[(k, k)].im.abs() <= thr);
    let positive = scalar.iter().flatten().all(|&v| v >= -1e-12);
    let witness = if report.overall_pass() && real && positive && (mean.re - 1.0).abs() <= 1e-9 {
        birkhoff_scalar(&scalar).ok()
    } else {
        None
    };
    Ok(MxCheck { report, witness })
}
