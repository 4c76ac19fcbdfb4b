//! Acceptance suite: one pass/fail line per criterion, non-zero exit if any criterion fails.

use std::collections::HashMap;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use bicorr::aqg::{
    bridge, canonical_kernel, check_adjacency_axioms, check_pseudograph, conjugate_adjacency, conjugation_witness, e_of_a,
    m_matrix, mstar_matrix, op_product, psi, schur_adjacency, tensor_flip, tilde_gamma, verify_identities, PseudoGraph,
    QuantumAdjacency,
};
use bicorr::bistochastic::{check_biisometry, factorize, random_biunitary, BiIsometry, BiUnitary, BistochasticMatrix};
use bicorr::channels::{
    check_bicorrelation, check_concurrent, check_ns, dual, extract_classical, from_biunitary_trace, from_classical,
    from_local_unitaries, maximally_entangled, sharp, BipartiteChannel, ClassicalCorrelation, Dims, SingleChannel,
};
use bicorr::magic::{birkhoff_scalar, check_magic, decompose_operator, dilate, Decomposition, MagicSquare, PermDecomposition};
use bicorr::numerics::random::{haar_orthogonal, haar_unitary, random_density, random_permutation, random_psd, seeded};
use bicorr::numerics::{herm_eigen, scale_of, vec_norm, ComplexMatrix, Subspace, C64, ONE, ZERO};
use bicorr::qgraph::{
    check_biunitary_iso, check_perfect_homomorphism_strategy, check_perfect_iso_strategy, check_qperm_intertwiner,
    check_quantum_graph, from_classical_graph, permutation_unitary, search_classical_local_iso, Graph, PerfectIsoChecker, QuantumGraphSpace,
};
use rand::Rng;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome { pass, detail: detail.into() }
}

/// Merges a boolean check into a running verdict, remembering the first failure.
#[derive(Default)]
struct Tally {
    failures: Vec<String>,
    checks: usize,
}

impl Tally {
    fn check(&mut self, ok: bool, what: impl FnOnce() -> String) {
        self.checks += 1;
        if !ok && self.failures.len() < 5 {
            self.failures.push(what());
        }
    }

    fn finish(self, summary: String) -> Outcome {
        if self.failures.is_empty() {
            outcome(true, format!("{summary}; {} checks", self.checks))
        } else {
            outcome(false, format!("{summary}; first failures: {}", self.failures.join(" | ")))
        }
    }
}

// ---------- independent oracles ----------

/// `Γ(ρ)` straight from the Choi entries `C[(x,y,a,b),(x',y',a',b')]`.
fn oracle_apply(c: &BipartiteChannel, rho: &ComplexMatrix) -> ComplexMatrix {
    let Dims { x, y, a, b } = c.dims();
    let choi = c.choi();
    let (inp, out) = (x * y, a * b);
    ComplexMatrix::from_fn(out, out, |r, col| {
        let mut s = ZERO;
        for i in 0..inp {
            for j in 0..inp {
                let w = rho[(i, j)];
                if w != ZERO {
                    s += w * choi[(i * out + r, j * out + col)];
                }
            }
        }
        s
    })
}

fn oracle_bistochastic(v: &BiIsometry) -> ComplexMatrix {
    let (n, d) = (v.n(), v.d_h());
    let mut m = ComplexMatrix::zeros(n * n * d, n * n * d);
    for x in 0..n {
        for a in 0..n {
            for xp in 0..n {
                for ap in 0..n {
                    m.set_block((x * n + a) * d, (xp * n + ap) * d, &v.block(a, x).adjoint().matmul(v.block(ap, xp)));
                }
            }
        }
    }
    m
}

fn all_permutations(n: usize) -> Vec<Vec<usize>> {
    // Heap's algorithm
    let mut p: Vec<usize> = (0..n).collect();
    let mut out = vec![p.clone()];
    let mut c = vec![0; n];
    let mut i = 0;
    while i < n {
        if c[i] < i {
            if i % 2 == 0 {
                p.swap(0, i);
            } else {
                p.swap(c[i], i);
            }
            out.push(p.clone());
            c[i] += 1;
            i = 0;
        } else {
            c[i] = 0;
            i += 1;
        }
    }
    out
}

fn is_iso(g: &Graph, h: &Graph, sigma: &[usize]) -> bool {
    let n = g.n();
    (0..n).all(|x| (0..n).all(|y| g.adjacent(x, y) == h.adjacent(sigma[x], sigma[y])))
}

fn random_weights<R: Rng>(k: usize, rng: &mut R) -> Vec<f64> {
    let w: Vec<f64> = (0..k).map(|_| rng.gen_range(0.2..1.0)).collect();
    let s: f64 = w.iter().sum();
    w.into_iter().map(|v| v / s).collect()
}

fn inverse_sqrt(m: &ComplexMatrix) -> ComplexMatrix {
    herm_eigen(m).unwrap().recompose(|l| 1.0 / l.sqrt())
}

// ---------- criteria ----------

fn factorization_round_trip() -> Outcome {
    let mut t = Tally::default();
    let mut worst_recon: f64 = 0.0;
    let mut worst_iso: f64 = 0.0;
    let mut rng = seeded(101);
    for k in 0..50 {
        let n = 2 + k % 2;
        let d = 1 + (k / 2) % 3;
        let u = random_biunitary(n, d, 1000 + k as u64);
        let d_k = d + k % 3;
        let w = haar_unitary(d_k, &mut rng).block(0, 0, d_k, d);
        let blocks = u.blocks().iter().map(|b| w.matmul(b)).collect();
        let v = BiIsometry::new(n, d, d_k, blocks).unwrap();
        let e = BistochasticMatrix::new(n, d, oracle_bistochastic(&v)).unwrap();
        let f = factorize(&e, 1e-9, false).unwrap();
        let recon = oracle_bistochastic(&f).distance(e.matrix());
        let rel = recon / scale_of(e.matrix().frobenius_norm());
        let r = check_biisometry(&f, 1e-9);
        let iso = r.residual("isometry").max(r.residual("transpose_isometry"));
        worst_recon = worst_recon.max(rel);
        worst_iso = worst_iso.max(iso);
        t.check(rel <= 1e-7, || format!("instance {k}: reconstruction {rel:.2e}"));
        t.check(iso <= 1e-8, || format!("instance {k}: isometry {iso:.2e}"));
    }
    t.finish(format!("max relative reconstruction {worst_recon:.2e}, max isometry residual {worst_iso:.2e}"))
}

fn suite_two_channels() -> Vec<BipartiteChannel> {
    let mut rng = seeded(202);
    let mut out = Vec::with_capacity(60);
    for k in 0..30 {
        let n = 2 + k % 2;
        let terms = 1 + k % 3;
        let w = random_weights(terms, &mut rng);
        let t: Vec<(f64, BiUnitary)> =
            w.into_iter().enumerate().map(|(i, w)| (w, random_biunitary(n, 1 + (k + i) % 3, 2000 + (k * 7 + i) as u64))).collect();
        out.push(from_biunitary_trace(&t, 1e-9).unwrap());
    }
    for k in 0..30 {
        let n = 2 + k % 2;
        let terms = 1 + k % 3;
        let w = random_weights(terms, &mut rng);
        let t: Vec<(f64, ComplexMatrix)> = w.into_iter().map(|w| (w, haar_unitary(n, &mut rng))).collect();
        out.push(from_local_unitaries(&t, 1e-9).unwrap());
    }
    out
}

fn constructor_soundness() -> Outcome {
    let mut t = Tally::default();
    let channels = suite_two_channels();
    let mut worst: f64 = 0.0;
    for (k, c) in channels.iter().enumerate() {
        let b = check_bicorrelation(c, 1e-9).unwrap();
        let q = check_concurrent(c, 1e-9).unwrap();
        worst = worst.max(b.max_residual()).max(q.max_residual());
        t.check(b.overall_pass(), || format!("channel {k} bicorrelation {:.2e}", b.max_residual()));
        t.check(q.overall_pass(), || format!("channel {k} concurrency {:.2e}", q.max_residual()));
        let n = c.dims().x;
        let j = maximally_entangled(n);
        let oracle = oracle_apply(c, &j).distance(&j);
        t.check(oracle <= 1e-9, || format!("channel {k} oracle concurrency {oracle:.2e}"));
    }
    t.finish(format!("{} channels, max residual {worst:.2e}", channels.len()))
}

fn duality_laws() -> Outcome {
    let mut t = Tally::default();
    let mut worst: f64 = 0.0;
    let mut rng = seeded(303);
    for (k, c) in suite_two_channels().iter().enumerate() {
        let dd = dual(&dual(c));
        t.check(dd.choi() == c.choi() && dd.dims() == c.dims(), || format!("channel {k}: dual∘dual differs"));
        let d = dual(c);
        let b = check_bicorrelation(&d, 1e-9).unwrap();
        worst = worst.max(b.max_residual());
        t.check(b.overall_pass(), || format!("channel {k}: dual bicorrelation {:.2e}", b.max_residual()));
        if check_concurrent(c, 1e-9).unwrap().overall_pass() {
            let q = check_concurrent(&d, 1e-9).unwrap();
            worst = worst.max(q.max_residual());
            t.check(q.overall_pass(), || format!("channel {k}: dual concurrency {:.2e}", q.max_residual()));
        }
        // Tr(Γ(ρ) ωᵗ) = Tr(ρ Γ*(ω)ᵗ)
        let s = c.dims().input();
        let rho = random_density(s, &mut rng);
        let omega = random_density(s, &mut rng);
        let lhs = oracle_apply(c, &rho).matmul(&omega.transpose()).trace();
        let rhs = rho.matmul(&oracle_apply(&d, &omega).transpose()).trace();
        t.check((lhs - rhs).norm() <= 1e-12, || format!("channel {k}: pairing defect {:.2e}", (lhs - rhs).norm()));
    }
    t.finish(format!("max residual {worst:.2e}"))
}

fn unitary_channel(n: usize, w: &ComplexMatrix) -> BipartiteChannel {
    BipartiteChannel::from_map(Dims::square(n), |m| w.matmul(m).matmul(&w.adjoint()))
}

/// Largest change of each output marginal under a change of the other party's input.
fn oracle_signalling(c: &BipartiteChannel, seed: u64) -> f64 {
    let Dims { x, y, a, b } = c.dims();
    let mut rng = seeded(seed);
    let mut worst: f64 = 0.0;
    for _ in 0..4 {
        let r = random_density(x, &mut rng);
        let s1 = random_density(y, &mut rng);
        let s2 = random_density(y, &mut rng);
        let out1 = oracle_apply(c, &r.kron(&s1));
        let out2 = oracle_apply(c, &r.kron(&s2));
        let ma = |m: &ComplexMatrix| bicorr::numerics::partial_trace(m, &[a, b], 1).unwrap();
        worst = worst.max(ma(&out1).distance(&ma(&out2)));
        let r2 = random_density(x, &mut rng);
        let out3 = oracle_apply(c, &r2.kron(&s1));
        let mb = |m: &ComplexMatrix| bicorr::numerics::partial_trace(m, &[a, b], 0).unwrap();
        worst = worst.max(mb(&out1).distance(&mb(&out3)));
    }
    worst
}

fn ns_equivalence() -> Outcome {
    let mut t = Tally::default();
    let mut rng = seeded(404);
    let mut channels: Vec<(BipartiteChannel, bool)> = Vec::new();
    let suite = suite_two_channels();
    for c in suite.iter().step_by(3) {
        channels.push((c.clone(), false));
    }
    for k in 0..5 {
        let n = 2 + k % 2;
        let p = ClassicalCorrelation::from_fn(Dims::square(n), |x, y, a, b| {
            let sa = (x + k) % n;
            let sb = (y * (k + 1) + 1) % n;
            0.5 * ((a == sa && b == sb) as u8 as f64) + 0.5 * ((a == x && b == y) as u8 as f64)
        })
        .unwrap();
        channels.push((from_classical(&p), false));
    }
    for k in 0..5 {
        let n = 2 + k % 2;
        let phi = SingleChannel::unitary_conjugation(&haar_unitary(n, &mut rng)).unwrap();
        let psi = SingleChannel::unitary_conjugation(&haar_unitary(n, &mut rng)).unwrap();
        channels.push((BipartiteChannel::product(&phi, &sharp(&psi)), false));
    }
    // signalling channels
    channels.push((BipartiteChannel::swap(2), true));
    channels.push((BipartiteChannel::swap(3), true));
    for (i, tmix) in [0.1, 0.3, 0.6, 0.9].iter().enumerate() {
        let n = 2 + i % 2;
        let mixed = &BipartiteChannel::swap(n).choi().scale_real(*tmix) + &BipartiteChannel::identity(n, n).choi().scale_real(1.0 - tmix);
        channels.push((BipartiteChannel::new(Dims::square(n), mixed).unwrap(), true));
    }
    let mut cnot = ComplexMatrix::zeros(4, 4);
    for (r, c) in [(0, 0), (1, 1), (2, 3), (3, 2)] {
        cnot[(r, c)] = ONE;
    }
    let hadamard = ComplexMatrix::from_real(2, 2, &[1.0, 1.0, 1.0, -1.0]).unwrap().scale_real(1.0 / 2f64.sqrt());
    let had_cnot = hadamard.kron(&ComplexMatrix::identity(2)).matmul(&cnot);
    channels.push((unitary_channel(2, &had_cnot), true));
    let mut controlled = ComplexMatrix::zeros(9, 9);
    let v = haar_unitary(3, &mut rng);
    for x in 0..3 {
        let blk = if x == 0 { ComplexMatrix::identity(3) } else { v.clone() };
        controlled.set_block(x * 3, x * 3, &blk);
    }
    let f3 = haar_unitary(3, &mut rng).kron(&ComplexMatrix::identity(3));
    channels.push((unitary_channel(3, &f3.matmul(&controlled)), true));
    let swap_u = |n: usize, rng: &mut _| {
        let s = bicorr::qgraph::flip(n);
        let local = haar_unitary(n, rng).kron(&haar_unitary(n, rng));
        unitary_channel(n, &s.matmul(&local))
    };
    channels.push((swap_u(2, &mut rng), true));
    channels.push((swap_u(3, &mut rng), true));

    let signalling = channels.iter().filter(|c| c.1).count();
    for (k, (c, expect_signal)) in channels.iter().enumerate() {
        let r = check_ns(c, 1e-8);
        let direct = r.passes("ns_a") && r.passes("ns_b");
        let slice = r.passes("ns_a_slice") && r.passes("ns_b_slice");
        let oracle = oracle_signalling(c, 40 + k as u64);
        t.check(direct == slice, || format!("channel {k}: direct {direct} vs slice {slice}"));
        t.check(direct == !expect_signal, || format!("channel {k}: direct verdict {direct}, expected signalling {expect_signal}"));
        t.check((oracle > 1e-6) == *expect_signal, || format!("channel {k}: oracle marginal change {oracle:.2e}"));
    }
    t.finish(format!("{} channels, {signalling} signalling", channels.len()))
}

fn classical_bridge() -> Outcome {
    let mut t = Tally::default();
    let mut rng = seeded(505);
    let mut worst: f64 = 0.0;
    for k in 0..20 {
        let (n, m) = (2 + k % 2, 2 + (k / 2) % 2);
        let terms = 1 + k % 4;
        let w = random_weights(terms, &mut rng);
        let perms: Vec<(Vec<usize>, Vec<usize>)> = (0..terms).map(|_| (random_permutation(n, &mut rng), random_permutation(m, &mut rng))).collect();
        let p = ClassicalCorrelation::from_fn(Dims::new(n, m, n, m), |x, y, a, b| {
            perms.iter().zip(&w).filter(|((s, r), _)| s[x] == a && r[y] == b).map(|(_, w)| w).sum()
        })
        .unwrap();
        t.check(bicorr::channels::classical_checks(&p, 1e-9).passes("bicorrelation"), || format!("instance {k} not a bicorrelation"));
        let star = ClassicalCorrelation::from_fn(Dims::new(n, m, n, m), |a, b, x, y| p.get(x, y, a, b)).unwrap();
        t.check(star == p.transposed().unwrap(), || format!("instance {k}: transposed family differs"));
        let diff = from_classical(&star).choi().distance(dual(&from_classical(&p)).choi());
        worst = worst.max(diff);
        t.check(diff <= 1e-12, || format!("instance {k}: dual mismatch {diff:.2e}"));
        let back = extract_classical(&from_classical(&p)).unwrap();
        t.check(back == p, || format!("instance {k}: extraction is not exact"));
    }
    t.finish(format!("max dual mismatch {worst:.2e}"))
}

fn birkhoff_and_dykstra() -> Outcome {
    let mut t = Tally::default();
    let mut rng = seeded(606);
    let mut worst_b: f64 = 0.0;
    for k in 0..100 {
        let n = 1 + k % 8;
        let terms = 1 + (k / 8) % 6;
        let w = random_weights(terms, &mut rng);
        let perms: Vec<Vec<usize>> = (0..terms).map(|_| random_permutation(n, &mut rng)).collect();
        let mut b = vec![vec![0.0; n]; n];
        for (p, w) in perms.iter().zip(&w) {
            for x in 0..n {
                b[x][p[x]] += w;
            }
        }
        let dec = birkhoff_scalar(&b).unwrap();
        let mut rebuilt = vec![vec![0.0; n]; n];
        let mut total = 0.0;
        for (p, g) in dec.terms() {
            let wt = g[(0, 0)].re;
            t.check(wt > 0.0 && g[(0, 0)].im == 0.0, || format!("instance {k}: weight {wt}"));
            total += wt;
            let mut seen = vec![false; n];
            t.check(p.len() == n && p.iter().all(|&a| a < n && !std::mem::replace(&mut seen[a], true)), || format!("instance {k}: {p:?} is not a permutation"));
            for x in 0..n {
                rebuilt[x][p[x]] += wt;
            }
        }
        let err = b.iter().flatten().zip(rebuilt.iter().flatten()).map(|(a, c)| (a - c).abs()).fold(0.0, f64::max);
        worst_b = worst_b.max(err).max((total - 1.0).abs());
        t.check(err <= 1e-10, || format!("instance {k}: reconstruction {err:.2e}"));
        t.check(dec.terms().len() <= (n - 1) * (n - 1) + 1, || format!("instance {k}: {} terms for n={n}", dec.terms().len()));
    }

    let mut successes = 0;
    let mut worst_feas: f64 = 0.0;
    let mut worst_dil: f64 = 0.0;
    for k in 0..20 {
        let n = 2 + k % 3;
        let d = 1 + (k / 3) % 3;
        let perms = all_permutations(n);
        let count = (2 + k % 4).min(perms.len());
        let mut chosen: Vec<Vec<usize>> = Vec::new();
        while chosen.len() < count {
            let p = perms[rng.gen_range(0..perms.len())].clone();
            if !chosen.contains(&p) {
                chosen.push(p);
            }
        }
        let raw: Vec<ComplexMatrix> = chosen.iter().map(|_| random_psd(d, &mut rng)).collect();
        let mut s = ComplexMatrix::zeros(d, d);
        for r in &raw {
            s += r;
        }
        let si = inverse_sqrt(&s);
        let planted: Vec<(Vec<usize>, ComplexMatrix)> = chosen.into_iter().zip(&raw).map(|(p, r)| (p, si.matmul(r).matmul(&si))).collect();
        let e = PermDecomposition::new(n, d, planted).unwrap().reconstruct();
        match decompose_operator(&e, 5000, 1e-8).unwrap() {
            Decomposition::Found(dec) => {
                // feasibility residual from the terms alone
                let mut sum = ComplexMatrix::zeros(d, d);
                let mut neg: f64 = 0.0;
                let mut recon: f64 = 0.0;
                for (_, g) in dec.terms() {
                    sum += g;
                    neg = neg.max(-herm_eigen(&g.hermitian_part()).unwrap().values.iter().copied().fold(f64::INFINITY, f64::min));
                    neg = neg.max(g.hermitian_defect());
                }
                for x in 0..n {
                    for a in 0..n {
                        let mut acc = ComplexMatrix::zeros(d, d);
                        for (p, g) in dec.terms() {
                            if p[x] == a {
                                acc += g;
                            }
                        }
                        recon = recon.max(acc.distance(e.entry(x, a)));
                    }
                }
                let feas = recon.max(neg.max(0.0)).max(sum.distance(&ComplexMatrix::identity(d)));
                worst_feas = worst_feas.max(feas);
                if feas <= 1e-6 {
                    successes += 1;
                }
                let dil = dilate(&dec, 1e-8).unwrap();
                let v = &dil.v;
                let mut dil_err: f64 = 0.0;
                let mut comm: f64 = 0.0;
                let ps = dil.p.entries();
                for x in 0..n {
                    for a in 0..n {
                        let p = dil.p.entry(x, a);
                        dil_err = dil_err.max(v.adjoint().matmul(p).matmul(v).distance(e.entry(x, a)));
                    }
                }
                for p in ps {
                    for q in ps {
                        comm = comm.max(p.matmul(q).distance(&q.matmul(p)));
                    }
                }
                worst_dil = worst_dil.max(dil_err);
                t.check(dil_err <= 1e-7, || format!("planted {k}: dilation error {dil_err:.2e}"));
                t.check(comm == 0.0, || format!("planted {k}: commutator {comm:.2e}"));
            }
            Decomposition::Undetermined { affine_residual, .. } => {
                worst_feas = worst_feas.max(affine_residual);
            }
        }
    }
    t.check(successes >= 18, || format!("only {successes}/20 planted decompositions recovered"));
    t.finish(format!(
        "Birkhoff max error {worst_b:.2e}; Dykstra {successes}/20 recovered, max feasibility {worst_feas:.2e}, max dilation error {worst_dil:.2e}"
    ))
}

fn family(n: usize) -> Vec<(String, Graph)> {
    let mut out = Vec::new();
    if n >= 3 {
        out.push((format!("C{n}"), Graph::cycle(n).unwrap()));
    }
    out.push((format!("P{n}"), Graph::path(n)));
    out.push((format!("K1,{}", n - 1), Graph::star(n)));
    out.push((format!("K{n}"), Graph::complete(n)));
    out
}

fn game_verifiers() -> Outcome {
    let mut t = Tally::default();
    let tol = 1e-9;
    let mut rng = seeded(707);
    let (mut iso_pairs, mut non_iso_pairs) = (0, 0);
    for n in 2..=6 {
        let graphs = family(n);
        let perms = all_permutations(n);
        // one cached checker per witness permutation; the channel checks dominate at n = 6
        let mut witnesses: HashMap<Vec<usize>, BipartiteChannel> = HashMap::new();
        for (i, (_, g)) in graphs.iter().enumerate() {
            for (_, h) in &graphs[i..] {
                if let Some(sigma) = search_classical_local_iso(g, h).unwrap() {
                    let c = from_local_unitaries(&[(1.0, permutation_unitary(&sigma).adjoint())], tol).unwrap();
                    witnesses.insert(sigma, c);
                }
            }
        }
        let checkers: HashMap<&Vec<usize>, PerfectIsoChecker> =
            witnesses.iter().map(|(s, c)| (s, PerfectIsoChecker::new(c, tol, 7).unwrap())).collect();
        for i in 0..graphs.len() {
            for j in i..graphs.len() {
                let (gn, g) = &graphs[i];
                let (hn, h) = &graphs[j];
                let brute = perms.iter().find(|s| is_iso(g, h, s)).cloned();
                let found = search_classical_local_iso(g, h).unwrap();
                t.check(found.is_some() == brute.is_some(), || format!("{gn} vs {hn}: search {found:?}, brute force {brute:?}"));
                let (u, v) = (from_classical_graph(g), from_classical_graph(h));
                if let Some(sigma) = found {
                    iso_pairs += 1;
                    t.check(is_iso(g, h, &sigma), || format!("{gn} vs {hn}: {sigma:?} is not an isomorphism"));
                    let r = checkers[&sigma].check(&u, &v).unwrap();
                    t.check(r.overall_pass(), || format!("{gn} vs {hn}: channel strategy fails"));
                    let r = check_biunitary_iso(&BiUnitary::from_permutation(&sigma), &u, &v, tol).unwrap();
                    let both = ["compression_forward", "compression_backward", "containment_forward", "containment_backward"]
                        .iter()
                        .all(|k| r.passes(k));
                    t.check(both && r.overall_pass(), || format!("{gn} vs {hn}: bi-unitary witness fails"));
                    let r = check_qperm_intertwiner(&MagicSquare::from_permutation(&sigma), g, h, tol).unwrap();
                    t.check(r.overall_pass(), || format!("{gn} vs {hn}: quantum permutation witness fails"));
                } else {
                    non_iso_pairs += 1;
                    for sigma in &perms {
                        let r = check_biunitary_iso(&BiUnitary::from_permutation(sigma), &u, &v, tol).unwrap();
                        t.check(!r.passes("compression_forward") || !r.passes("compression_backward"), || format!("{gn} vs {hn}: {sigma:?} passes (ii)"));
                        t.check(!r.passes("containment_forward") || !r.passes("containment_backward"), || format!("{gn} vs {hn}: {sigma:?} passes (iii)"));
                        let r = check_qperm_intertwiner(&MagicSquare::from_permutation(sigma), g, h, tol).unwrap();
                        t.check(!r.overall_pass(), || format!("{gn} vs {hn}: {sigma:?} passes the intertwiner check"));
                    }
                    // channel witnesses: all permutations up to n = 3, identity plus random ones beyond
                    let witnesses: Vec<Vec<usize>> = if n <= 3 {
                        perms.clone()
                    } else {
                        let mut w = vec![(0..n).collect::<Vec<_>>()];
                        w.extend((0..3).map(|_| random_permutation(n, &mut rng)));
                        w
                    };
                    for sigma in &witnesses {
                        let c = from_local_unitaries(&[(1.0, permutation_unitary(sigma).adjoint())], tol).unwrap();
                        let fails = if n <= 3 {
                            !check_perfect_iso_strategy(&c, &u, &v, tol, 7).unwrap().overall_pass()
                        } else {
                            // the forward condition alone already sinks the strategy
                            let fwd = check_perfect_homomorphism_strategy(&c, &u, &v, tol, 7).unwrap();
                            let bwd = check_perfect_homomorphism_strategy(&dual(&c), &v, &u, tol, 7).unwrap();
                            !(fwd.overall_pass() && bwd.overall_pass())
                        };
                        t.check(fails, || format!("{gn} vs {hn}: channel of {sigma:?} passes"));
                    }
                }
            }
        }
    }
    t.finish(format!("{iso_pairs} isomorphic and {non_iso_pairs} non-isomorphic pairs on 2..=6 vertices"))
}

fn random_quantum_graph<R: Rng>(n: usize, k: usize, rng: &mut R) -> QuantumGraphSpace {
    let nn = n * n;
    let f = bicorr::qgraph::flip(n);
    let mut diag = vec![ZERO; nn];
    for x in 0..n {
        diag[x * n + x] = C64::new(1.0 / (n as f64).sqrt(), 0.0);
    }
    let vectors: Vec<Vec<C64>> = (0..k)
        .map(|i| {
            let v: Vec<C64> = (0..nn).map(|_| bicorr::numerics::random::complex_gaussian(rng)).collect();
            let fv = f.apply(&v);
            let sign = if i % 2 == 0 { 1.0 } else { -1.0 };
            let mut w: Vec<C64> = v.iter().zip(&fv).map(|(a, b)| a + b * sign).collect();
            let c: C64 = diag.iter().zip(&w).map(|(d, x)| d.conj() * x).sum();
            for (x, d) in w.iter_mut().zip(&diag) {
                *x -= c * d;
            }
            w
        })
        .collect();
    QuantumGraphSpace::new(n, Subspace::span(nn, &vectors).unwrap()).unwrap()
}

fn biunitary_agreement() -> Outcome {
    let mut t = Tally::default();
    let tol = 1e-8;
    let mut rng = seeded(808);
    let mut positives = 0;
    for k in 0..20 {
        let n = 2 + k % 2;
        let d = 1 + (k / 2) % 4;
        let u = random_quantum_graph(n, 1 + k % (n * (n - 1)), &mut rng);
        t.check(check_quantum_graph(&u, 1e-9).overall_pass(), || format!("instance {k}: generator produced a non-quantum graph"));
        let u0 = haar_orthogonal(n, &mut rng);
        let v = QuantumGraphSpace::new(n, u.space().image(&u0.kron(&u0)).unwrap()).unwrap();
        let w = haar_unitary(d, &mut rng);
        let blocks = (0..n * n).map(|i| w.scale(u0[(i / n, i % n)])).collect();
        let witness = BiUnitary::new(n, d, blocks).unwrap();
        let r = check_biunitary_iso(&witness, &u, &v, tol).unwrap();
        t.check(r.overall_pass(), || format!("instance {k}: conjugation witness fails {:?}", r.items.iter().filter(|i| !i.pass).map(|i| &i.name).collect::<Vec<_>>()));
        positives += r.overall_pass() as usize;
        let other = random_biunitary(n, d, 8000 + k as u64);
        let r = check_biunitary_iso(&other, &u, &v, tol).unwrap();
        t.check(r.passes("agreement"), || {
            format!(
                "instance {k}: random bi-unitary splits the families ({:.2e}, {:.2e} vs {:.2e}, {:.2e})",
                r.residual("compression_forward"),
                r.residual("compression_backward"),
                r.residual("containment_forward"),
                r.residual("containment_backward")
            )
        });
    }
    t.finish(format!("{positives}/20 conjugation witnesses pass both families"))
}

fn oracle_m(n: usize) -> ComplexMatrix {
    let nn = n * n;
    let s = (n as f64).sqrt();
    let f = |k: usize| ComplexMatrix::unit(n, n, k / n, k % n).scale_real(s);
    let mut m = ComplexMatrix::zeros(nn, nn * nn);
    for k in 0..nn {
        for l in 0..nn {
            let prod = f(k).matmul(&f(l));
            for (r, v) in prod.data().iter().enumerate() {
                m[(r, k * nn + l)] = v / s;
            }
        }
    }
    m
}

/// `(a ⊗ b)·(c ⊗ d) = (ca) ⊗ (bd)` expanded over matrix units.
fn oracle_op_product(e1: &ComplexMatrix, e2: &ComplexMatrix, n: usize) -> ComplexMatrix {
    let nn = n * n;
    let mut out = ComplexMatrix::zeros(nn, nn);
    let unit = |i, j| ComplexMatrix::unit(n, n, i, j);
    for r1 in 0..nn {
        for c1 in 0..nn {
            let w1 = e1[(r1, c1)];
            if w1 == ZERO {
                continue;
            }
            let (a, b) = (unit(r1 / n, c1 / n), unit(r1 % n, c1 % n));
            for r2 in 0..nn {
                for c2 in 0..nn {
                    let w2 = e2[(r2, c2)];
                    if w2 == ZERO {
                        continue;
                    }
                    let (c, d) = (unit(r2 / n, c2 / n), unit(r2 % n, c2 % n));
                    out += &c.matmul(&a).kron(&b.matmul(&d)).scale(w1 * w2);
                }
            }
        }
    }
    out
}

fn oracle_sigma(m: &ComplexMatrix, big_n: usize, inverse: bool) -> ComplexMatrix {
    // forward: ε_{k,k'} ⊗ ε_{l,l'} ↦ ε_{l,k} ⊗ ε_{l',k'}
    let nn = big_n;
    let mut out = ComplexMatrix::zeros(nn * nn, nn * nn);
    for k in 0..nn {
        for l in 0..nn {
            for kp in 0..nn {
                for lp in 0..nn {
                    if inverse {
                        out[(k * nn + l, kp * nn + lp)] = m[(l * nn + lp, k * nn + kp)];
                    } else {
                        out[(l * nn + lp, k * nn + kp)] = m[(k * nn + l, kp * nn + lp)];
                    }
                }
            }
        }
    }
    out
}

fn identity_suite() -> Outcome {
    let mut t = Tally::default();
    let mut rng = seeded(909);
    for n in 1..=4 {
        let m = m_matrix(n);
        let ms = mstar_matrix(n);
        let om = oracle_m(n);
        t.check(m.distance(&om) <= 1e-12, || format!("n={n}: m differs from the product oracle"));
        let x: Vec<C64> = (0..n.pow(4)).map(|_| bicorr::numerics::random::complex_gaussian(&mut rng)).collect();
        let y: Vec<C64> = (0..n * n).map(|_| bicorr::numerics::random::complex_gaussian(&mut rng)).collect();
        let lhs: C64 = om.apply(&x).iter().zip(&y).map(|(a, b)| a.conj() * b).sum();
        let rhs: C64 = x.iter().zip(&ms.apply(&y)).map(|(a, b)| a.conj() * b).sum();
        t.check((lhs - rhs).norm() <= 1e-12 * scale_of(vec_norm(&x) * vec_norm(&y)), || format!("n={n}: m* is not the adjoint"));
        let mm = m.matmul(&ms).distance(&ComplexMatrix::identity(n * n).scale_real((n * n) as f64));
        t.check(mm <= 1e-12, || format!("n={n}: m m* defect {mm:.2e}"));
    }

    let mut valid: Vec<QuantumAdjacency> = Vec::new();
    for n in 2..=3 {
        let a = schur_adjacency(&canonical_kernel(n)).unwrap();
        valid.push(conjugate_adjacency(&a, &haar_unitary(n, &mut rng)).unwrap());
        valid.push(a);
    }
    for a in &valid {
        let n = a.n();
        t.check(check_adjacency_axioms(a, 1e-9).overall_pass(), || format!("n={n}: axioms fail"));
        let e = e_of_a(a);
        let r1 = psi(a.matrix(), n).unwrap().distance(&e);
        let r2 = e.hermitian_defect().max(tensor_flip(&e, n).unwrap().distance(&e));
        let r3 = op_product(&e, &e, n).unwrap().distance(&e);
        let r4 = oracle_op_product(&e, &e, n).distance(&e);
        t.check(r1.max(r2).max(r3).max(r4) <= 1e-9, || format!("n={n}: triple residuals {r1:.2e} {r2:.2e} {r3:.2e} {r4:.2e}"));
        let b = bridge(a, 1e-9).unwrap();
        t.check(b.report.overall_pass(), || format!("n={n}: bridge pseudo-graph verdicts fail"));
    }
    for g in [Graph::path(3), Graph::cycle(4).unwrap()] {
        let r = check_pseudograph(&PseudoGraph::of_graph(&g), 1e-9).unwrap();
        t.check(r.overall_pass(), || "classical pseudo-graph fails".into());
    }

    let terms = vec![(0.3, random_biunitary(4, 1, 91)), (0.7, random_biunitary(4, 2, 92))];
    let gamma = from_biunitary_trace(&terms, 1e-9).unwrap();
    let tilde = tilde_gamma(&terms, 1e-9).unwrap();
    let g_dual = dual(&gamma);
    let composed = BipartiteChannel::from_map(gamma.dims(), |m| oracle_sigma(&oracle_apply(&g_dual, &oracle_sigma(m, 4, false)), 4, true));
    let tg = composed.choi().distance(tilde.choi());
    t.check(tg <= 1e-10, || format!("Γ̃ identity residual {tg:.2e}"));

    let mut worst: f64 = 0.0;
    for (n, seed) in [(2, 1u64), (2, 2), (3, 3)] {
        let a = schur_adjacency(&canonical_kernel(n)).unwrap();
        let w = haar_unitary(n, &mut seeded(seed));
        let a2 = conjugate_adjacency(&a, &w).unwrap();
        let r = verify_identities(&conjugation_witness(&w).unwrap(), &a, &a2, 1e-8).unwrap();
        worst = worst.max(r.max_residual());
        t.check(r.overall_pass(), || format!("n={n}: identity suite fails {:?}", r.items.iter().filter(|i| !i.pass).map(|i| &i.name).collect::<Vec<_>>()));
    }
    t.finish(format!("Γ̃ residual {tg:.2e}, identity suite max residual {worst:.2e}"))
}

fn negative_paths() -> Outcome {
    let mut t = Tally::default();
    for n in 2..=4 {
        let r = check_ns(&BipartiteChannel::swap(n), 1e-9);
        let expected = ((n * (n - 1) * (n + 2)) as f64).sqrt();
        for item in ["ns_a", "ns_b"] {
            let got = r.residual(item);
            t.check(!r.passes(item) && (got - expected).abs() <= 1e-10, || format!("swap n={n} {item}: {got} vs {expected}"));
        }
    }
    for n in 2..=4 {
        let mut e = vec![ZERO; n * n];
        e[0] = ONE;
        let u = QuantumGraphSpace::new(n, Subspace::span(n * n, &[e]).unwrap()).unwrap();
        let r = check_quantum_graph(&u, 1e-9);
        t.check(!r.passes("skew") && (r.residual("skew") - 1.0).abs() <= 1e-10, || format!("n={n}: skew residual {}", r.residual("skew")));
    }
    for n in 2..=4 {
        let a = QuantumAdjacency::new(n, ComplexMatrix::identity(n * n).scale_real(1.0 / (n * n) as f64)).unwrap();
        let r = check_adjacency_axioms(&a, 1e-9);
        let got = r.residual("axiom_3");
        t.check(!r.passes("axiom_3") && (got - n as f64).abs() <= 1e-10, || format!("n={n}: axiom 3 residual {got}"));
    }
    let mut rng = seeded(1010);
    for (n, d, delta) in [(3, 2, 0.01), (4, 1, 0.25), (2, 3, 1e-3)] {
        let base = MagicSquare::uniform(n, d);
        let v = bicorr::numerics::random::complex_gaussian(&mut rng);
        let mut dir = vec![ZERO; d];
        dir[0] = v / v.norm();
        let proj = ComplexMatrix::outer(&dir, &dir);
        let entries: Vec<ComplexMatrix> =
            base.entries().iter().enumerate().map(|(k, m)| if k == 0 { m + &proj.scale_real(delta) } else { m.clone() }).collect();
        let r = check_magic(&MagicSquare::new(n, d, entries).unwrap(), 1e-9);
        for item in ["row_sums", "col_sums"] {
            let got = r.residual(item);
            t.check(!r.passes(item) && (got - delta).abs() <= 1e-10, || format!("n={n} {item}: {got} vs {delta}"));
        }
    }
    t.finish("analytic residuals reproduced".into())
}

fn main() -> ExitCode {
    type Criterion = (&'static str, fn() -> Outcome, Option<u64>);
    let criteria: [Criterion; 10] = [
        ("factorization round trip", factorization_round_trip, Some(5)),
        ("constructor soundness", constructor_soundness, Some(10)),
        ("duality laws", duality_laws, None),
        ("no-signalling formulation equivalence", ns_equivalence, None),
        ("classical bridge", classical_bridge, None),
        ("Birkhoff and operator decompositions", birkhoff_and_dykstra, None),
        ("graph game verifiers", game_verifiers, Some(20)),
        ("bi-unitary family agreement", biunitary_agreement, None),
        ("adjacency identity suite", identity_suite, Some(15)),
        ("negative-path determinism", negative_paths, None),
    ];
    let mut all = true;
    for (i, (name, run, budget)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let mut o = run();
        let elapsed = start.elapsed();
        if let Some(b) = budget {
            if elapsed > Duration::from_secs(*b) {
                o.pass = false;
                o.detail.push_str(&format!("; over the {b} s budget"));
            }
        }
        all &= o.pass;
        let mark = if o.pass { "PASS" } else { "FAIL" };
        let budget = budget.map(|b| format!(" of {b} s")).unwrap_or_default();
        println!("criterion {:>2} [{mark}] {name}: {} ({:.2} s{budget})", i + 1, o.detail, elapsed.as_secs_f64());
    }
    if all {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
