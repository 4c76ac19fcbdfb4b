use std::path::{Path, PathBuf};
use std::process::ExitCode;

use bicorr::aqg::{self, PseudoGraph, QuantumAdjacency};
use bicorr::bistochastic::{check_biisometry, check_biunitary, check_bistochastic, factorize, from_biisometry, BiUnitary, BistochasticMatrix};
use bicorr::channels::{
    check_bicorrelation, check_channel, check_concurrent, check_ns, classical_checks, from_biunitary_trace, from_classical,
    from_local_unitaries, from_qc_pair, BipartiteChannel, ClassicalCorrelation,
};
use bicorr::io::{read_file, write_file, FileFormat, IoError, Overall, Verdict};
use bicorr::magic::{birkhoff_scalar, check_magic, decompose_operator, dilate, verify_decomposition, Decomposition, MagicSquare, PermDecomposition};
use bicorr::numerics::{CheckReport, ComplexMatrix, DEFAULT_TOL};
use bicorr::qgraph::{
    check_biunitary_iso, check_perfect_iso_strategy, check_quantum_graph, from_classical_graph, search_classical_local_iso, Graph,
    QuantumGraphSpace,
};
use clap::{Args, Parser, Subcommand, ValueEnum};

/// `println!` that ignores a closed stdout, so piping into `head` exits quietly.
macro_rules! out {
    ($($arg:tt)*) => {{
        use std::io::Write as _;
        let _ = writeln!(std::io::stdout(), $($arg)*);
    }};
}

/// Verifiers and constructors for quantum no-signalling bicorrelations.
#[derive(Parser)]
#[command(name = "bicorr", version)]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone, Copy)]
struct Global {
    /// Relative tolerance; residuals are compared to tol·max(1, ‖input‖_F).
    #[arg(long, global = true, default_value_t = DEFAULT_TOL)]
    tol: f64,
    /// Seed for randomised diagnostics.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Iteration budget for operator decompositions.
    #[arg(long, global = true, default_value_t = 5000)]
    max_iter: usize,
    /// Print the verdict as JSON.
    #[arg(long, global = true)]
    json: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Verify a file against the conditions of its kind.
    #[command(subcommand)]
    Check(CheckCommand),
    /// Factor a bistochastic operator matrix through a bi-isometry.
    Factorize {
        file: PathBuf,
        #[arg(short, long)]
        output: PathBuf,
        /// Drop Stinespring directions with singular value below 1e-10·scale.
        #[arg(long)]
        truncate: bool,
    },
    /// Birkhoff decomposition of a real doubly stochastic matrix.
    Birkhoff {
        file: PathBuf,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Decompose a quantum magic square into PSD-weighted permutations.
    DecomposeMagic {
        file: PathBuf,
        #[arg(short, long)]
        output: PathBuf,
    },
    /// Commuting dilation of a permutation decomposition.
    Dilate {
        file: PathBuf,
        #[arg(short, long)]
        output: PathBuf,
    },
    /// Build an object from its ingredients.
    #[command(subcommand)]
    Make(MakeCommand),
    /// Graph isomorphism game verifiers.
    #[command(subcommand)]
    Game(GameCommand),
    /// Quantum adjacency matrices and pseudo-graphs.
    #[command(subcommand)]
    Aqg(AqgCommand),
}

#[derive(Subcommand)]
enum CheckCommand {
    /// Channel and no-signalling conditions, optionally bicorrelation and concurrency.
    Channel {
        file: PathBuf,
        #[arg(long)]
        bicorrelation: bool,
        #[arg(long)]
        concurrent: bool,
    },
    /// Classical correlation, no-signalling and bicorrelation conditions.
    Classical { file: PathBuf },
    /// Positivity and block trace conditions of a bistochastic operator matrix.
    Bistochastic { file: PathBuf },
    /// Unitarity of a bi-unitary and of its block transpose.
    Biunitary { file: PathBuf },
    /// Positivity, row sums and column sums of a quantum magic square.
    Magic { file: PathBuf },
    /// Skewness and symmetry of a quantum graph.
    Qgraph { file: PathBuf },
    /// Skewness, conjugate-flip and invariance conditions of a pseudo-graph.
    Pseudograph { file: PathBuf },
    /// The three axioms of a quantum adjacency matrix.
    Aqg { file: PathBuf },
}

#[derive(Clone, Copy, ValueEnum)]
enum Kind {
    LocalUnitaries,
    BiunitaryTrace,
    QcPair,
    Classical,
}

#[derive(Subcommand)]
enum MakeCommand {
    /// Bipartite channel from local unitaries, bi-unitaries, a commuting pair or a classical table.
    Correlation {
        #[arg(long, value_enum)]
        kind: Kind,
        /// Unitary matrix file (local-unitaries), repeatable.
        #[arg(long)]
        unitary: Vec<PathBuf>,
        /// Bi-unitary file (biunitary-trace), repeatable.
        #[arg(long)]
        witness: Vec<PathBuf>,
        /// Convex weights, one per term; uniform when omitted.
        #[arg(long)]
        weight: Vec<f64>,
        /// Bistochastic matrix of Alice (qc-pair).
        #[arg(long)]
        e: Option<PathBuf>,
        /// Bistochastic matrix of Bob (qc-pair).
        #[arg(long)]
        f: Option<PathBuf>,
        /// Unit vector as a one-column matrix (qc-pair).
        #[arg(long)]
        xi: Option<PathBuf>,
        /// Classical correlation file (classical).
        #[arg(long)]
        input: Option<PathBuf>,
        #[arg(short, long)]
        output: PathBuf,
    },
}

#[derive(Args)]
struct GraphPair {
    #[arg(long)]
    u: PathBuf,
    #[arg(long)]
    v: PathBuf,
    /// Read classical graph files instead of quantum graph files.
    #[arg(long)]
    classical: bool,
}

#[derive(Subcommand)]
enum GameCommand {
    /// Perfect-strategy conditions for a channel.
    Check {
        #[arg(long)]
        strategy: PathBuf,
        #[command(flatten)]
        graphs: GraphPair,
    },
    /// Search for a vertex bijection between two classical graphs.
    SearchLocal {
        #[arg(long)]
        u: PathBuf,
        #[arg(long)]
        v: PathBuf,
        /// Write the permutation bi-unitary of a found isomorphism.
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Bi-unitary isomorphism conditions.
    Biunitary {
        #[arg(long)]
        witness: PathBuf,
        #[command(flatten)]
        graphs: GraphPair,
    },
}

#[derive(Subcommand)]
enum AqgCommand {
    /// Write S′, 𝒰_G and Ũ_G of an adjacency matrix into a directory.
    Bridge {
        file: PathBuf,
        #[arg(short, long)]
        output: PathBuf,
    },
    /// Intertwining and homomorphism conditions of a bi-unitary.
    Intertwine(AqgPair),
    /// Pseudo-isomorphism conditions through the channels Γ and Γ̃ (n = 2).
    PseudoIso(AqgPair),
    /// Identity suite linking pseudo-isomorphism and intertwining.
    Identities(AqgPair),
}

#[derive(Args)]
struct AqgPair {
    #[arg(long)]
    a1: PathBuf,
    #[arg(long)]
    a2: PathBuf,
    #[arg(long)]
    witness: PathBuf,
}

/// Any failure that makes the inputs unusable; reported with exit code 3.
struct InputError(String);

impl From<IoError> for InputError {
    fn from(e: IoError) -> Self {
        InputError(e.to_string())
    }
}

impl From<bicorr::Error> for InputError {
    fn from(e: bicorr::Error) -> Self {
        InputError(e.to_string())
    }
}

type Outcome = Result<Verdict, InputError>;

fn read<T: FileFormat>(path: &Path) -> Result<T, InputError> {
    read_file(path).map_err(|e| InputError(format!("{}: {e}", path.display())))
}

fn write<T: FileFormat>(value: &T, path: &Path, verdict: &mut Verdict) -> Result<(), InputError> {
    write_file(value, path)?;
    verdict.artifacts.push(path.display().to_string());
    Ok(())
}

fn verdict(command: &str, report: CheckReport) -> Verdict {
    Verdict::from_report(command, report)
}

fn merged(parts: Vec<(&str, CheckReport)>) -> CheckReport {
    let mut out = CheckReport::new();
    for (prefix, r) in parts {
        out.merge(prefix, r);
    }
    out
}

fn run_check(cmd: CheckCommand, g: Global) -> Outcome {
    let tol = g.tol;
    Ok(match cmd {
        CheckCommand::Channel { file, bicorrelation, concurrent } => {
            let c: BipartiteChannel = read(&file)?;
            let mut parts = vec![("channel", check_channel(&c, tol)), ("ns", check_ns(&c, tol))];
            if bicorrelation {
                parts.push(("bicorrelation", check_bicorrelation(&c, tol)?));
            }
            if concurrent {
                parts.push(("concurrent", check_concurrent(&c, tol)?));
            }
            verdict("check channel", merged(parts))
        }
        CheckCommand::Classical { file } => {
            let p: ClassicalCorrelation = read(&file)?;
            verdict("check classical", classical_checks(&p, tol))
        }
        CheckCommand::Bistochastic { file } => {
            let e: BistochasticMatrix = read(&file)?;
            verdict("check bistochastic", check_bistochastic(&e, tol))
        }
        CheckCommand::Biunitary { file } => {
            let u: BiUnitary = read(&file)?;
            verdict("check biunitary", check_biunitary(&u, tol))
        }
        CheckCommand::Magic { file } => {
            let e: MagicSquare = read(&file)?;
            verdict("check magic", check_magic(&e, tol))
        }
        CheckCommand::Qgraph { file } => {
            let u: QuantumGraphSpace = read(&file)?;
            verdict("check qgraph", check_quantum_graph(&u, tol))
        }
        CheckCommand::Pseudograph { file } => {
            let w: PseudoGraph = read(&file)?;
            verdict("check pseudograph", aqg::check_pseudograph(&w, tol)?)
        }
        CheckCommand::Aqg { file } => {
            let a: QuantumAdjacency = read(&file)?;
            verdict("check aqg", aqg::check_adjacency_axioms(&a, tol))
        }
    })
}

fn weights(given: &[f64], count: usize) -> Result<Vec<f64>, InputError> {
    if count == 0 {
        return Err(InputError("at least one term is required".into()));
    }
    if given.is_empty() {
        return Ok(vec![1.0 / count as f64; count]);
    }
    if given.len() != count {
        return Err(InputError(format!("{} weights for {count} terms", given.len())));
    }
    Ok(given.to_vec())
}

fn required<'a>(path: &'a Option<PathBuf>, flag: &str) -> Result<&'a Path, InputError> {
    path.as_deref().ok_or_else(|| InputError(format!("--{flag} is required for this kind")))
}

fn run_make(cmd: MakeCommand, g: Global) -> Outcome {
    let MakeCommand::Correlation { kind, unitary, witness, weight, e, f, xi, input, output } = cmd;
    let channel = match kind {
        Kind::LocalUnitaries => {
            let w = weights(&weight, unitary.len())?;
            let terms = w.into_iter().zip(&unitary).map(|(w, p)| Ok((w, read::<ComplexMatrix>(p)?))).collect::<Result<Vec<_>, InputError>>()?;
            from_local_unitaries(&terms, g.tol)?
        }
        Kind::BiunitaryTrace => {
            let w = weights(&weight, witness.len())?;
            let terms = w.into_iter().zip(&witness).map(|(w, p)| Ok((w, read::<BiUnitary>(p)?))).collect::<Result<Vec<_>, InputError>>()?;
            from_biunitary_trace(&terms, g.tol)?
        }
        Kind::QcPair => {
            let e: BistochasticMatrix = read(required(&e, "e")?)?;
            let f: BistochasticMatrix = read(required(&f, "f")?)?;
            let xi: ComplexMatrix = read(required(&xi, "xi")?)?;
            if xi.cols() != 1 {
                return Err(InputError("xi must be a one-column matrix".into()));
            }
            from_qc_pair(&e, &f, xi.data(), g.tol)?
        }
        Kind::Classical => from_classical(&read::<ClassicalCorrelation>(required(&input, "input")?)?),
    };
    let report = merged(vec![("channel", check_channel(&channel, g.tol)), ("ns", check_ns(&channel, g.tol))]);
    let mut v = verdict("make correlation", report);
    write(&channel, &output, &mut v)?;
    Ok(v)
}

fn graph_pair(p: &GraphPair) -> Result<(QuantumGraphSpace, QuantumGraphSpace), InputError> {
    if p.classical {
        Ok((from_classical_graph(&read::<Graph>(&p.u)?), from_classical_graph(&read::<Graph>(&p.v)?)))
    } else {
        Ok((read(&p.u)?, read(&p.v)?))
    }
}

fn run_game(cmd: GameCommand, g: Global) -> Outcome {
    Ok(match cmd {
        GameCommand::Check { strategy, graphs } => {
            let c: BipartiteChannel = read(&strategy)?;
            let (u, v) = graph_pair(&graphs)?;
            verdict("game check", check_perfect_iso_strategy(&c, &u, &v, g.tol, g.seed)?)
        }
        GameCommand::SearchLocal { u, v, output } => {
            let (gu, gv): (Graph, Graph) = (read(&u)?, read(&v)?);
            let found = search_classical_local_iso(&gu, &gv)?;
            let mut report = CheckReport::new();
            report.push_verdict("isomorphism_found", found.is_some());
            let mut out = verdict("game search-local", report);
            if let Some(sigma) = found {
                if !g.json {
                    out!("permutation {sigma:?}");
                }
                if let Some(path) = output {
                    write(&BiUnitary::from_permutation(&sigma), &path, &mut out)?;
                }
            }
            out
        }
        GameCommand::Biunitary { witness, graphs } => {
            let w: BiUnitary = read(&witness)?;
            let (u, v) = graph_pair(&graphs)?;
            verdict("game biunitary", check_biunitary_iso(&w, &u, &v, g.tol)?)
        }
    })
}

fn read_aqg_pair(p: &AqgPair) -> Result<(QuantumAdjacency, QuantumAdjacency, BiUnitary), InputError> {
    Ok((read(&p.a1)?, read(&p.a2)?, read(&p.witness)?))
}

fn run_aqg(cmd: AqgCommand, g: Global) -> Outcome {
    Ok(match cmd {
        AqgCommand::Bridge { file, output } => {
            let a: QuantumAdjacency = read(&file)?;
            let b = aqg::bridge(&a, g.tol)?;
            std::fs::create_dir_all(&output).map_err(|e| InputError(format!("{}: {e}", output.display())))?;
            let mut out = verdict("aqg bridge", b.report.clone());
            let nn = a.n() * a.n();
            let s_prime = QuantumGraphSpace::new(nn, b.s_prime.clone())?;
            write(&s_prime, &output.join("s_prime.json"), &mut out)?;
            write(&PseudoGraph::new(a.n(), b.u_g.clone())?, &output.join("u_g.json"), &mut out)?;
            write(&b.u_tilde, &output.join("u_tilde.json"), &mut out)?;
            if !g.json {
                out!("dim S′ = {}, dim Ũ = {}", b.s_prime_dim(), b.u_tilde.dim());
            }
            out
        }
        AqgCommand::Intertwine(p) => {
            let (a1, a2, u) = read_aqg_pair(&p)?;
            verdict("aqg intertwine", aqg::intertwiner_check(&u, &a1, &a2, g.tol)?)
        }
        AqgCommand::PseudoIso(p) => {
            let (a1, a2, u) = read_aqg_pair(&p)?;
            verdict("aqg pseudo-iso", aqg::pseudo_iso_check(&[(1.0, u)], &a1, &a2, g.tol)?)
        }
        AqgCommand::Identities(p) => {
            let (a1, a2, u) = read_aqg_pair(&p)?;
            verdict("aqg identities", aqg::verify_identities(&u, &a1, &a2, g.tol)?)
        }
    })
}

fn real_rows(m: &ComplexMatrix) -> Result<Vec<Vec<f64>>, InputError> {
    if m.data().iter().any(|c| c.im != 0.0) {
        return Err(InputError("Birkhoff input must be real".into()));
    }
    Ok((0..m.rows()).map(|i| m.row(i).iter().map(|c| c.re).collect()).collect())
}

fn run(cli: Cli) -> Outcome {
    let g = cli.global;
    if !(g.tol.is_finite() && g.tol > 0.0) {
        return Err(InputError(format!("--tol must be positive, got {}", g.tol)));
    }
    match cli.command {
        Command::Check(c) => run_check(c, g),
        Command::Make(c) => run_make(c, g),
        Command::Game(c) => run_game(c, g),
        Command::Aqg(c) => run_aqg(c, g),
        Command::Factorize { file, output, truncate } => {
            let e: BistochasticMatrix = read(&file)?;
            let v = factorize(&e, g.tol, truncate)?;
            let mut report = check_biisometry(&v, g.tol);
            let back = from_biisometry(&v, g.tol)?;
            let scale = e.matrix().frobenius_norm().max(1.0);
            report.push("reconstruction", back.matrix().distance(e.matrix()), g.tol * scale);
            let mut out = verdict("factorize", report);
            write(&v, &output, &mut out)?;
            Ok(out)
        }
        Command::Birkhoff { file, output } => {
            let m: ComplexMatrix = read(&file)?;
            let b = real_rows(&m)?;
            let dec = birkhoff_scalar(&b)?;
            let e = MagicSquare::from_scalar(&b)?;
            let mut out = verdict("birkhoff", verify_decomposition(&e, &dec, g.tol)?);
            if !g.json {
                for (perm, gamma) in dec.terms() {
                    out!("{:.12} {perm:?}", gamma[(0, 0)].re);
                }
            }
            if let Some(path) = output {
                write(&dec, &path, &mut out)?;
            }
            Ok(out)
        }
        Command::DecomposeMagic { file, output } => {
            let e: MagicSquare = read(&file)?;
            match decompose_operator(&e, g.max_iter, g.tol)? {
                Decomposition::Found(dec) => {
                    let mut out = verdict("decompose-magic", verify_decomposition(&e, &dec, g.tol)?);
                    write(&dec, &output, &mut out)?;
                    Ok(out)
                }
                Decomposition::Undetermined { iterations, affine_residual } => {
                    let mut report = CheckReport::new();
                    report.note("affine_residual", affine_residual, g.tol);
                    report.note("iterations", iterations as f64, g.max_iter as f64);
                    let mut out = verdict("decompose-magic", report);
                    out.overall = Overall::Undetermined;
                    Ok(out)
                }
            }
        }
        Command::Dilate { file, output } => {
            let dec: PermDecomposition = read(&file)?;
            let d = dilate(&dec, g.tol)?;
            let mut out = verdict("dilate", d.report.clone());
            std::fs::create_dir_all(&output).map_err(|e| InputError(format!("{}: {e}", output.display())))?;
            write(&d.v, &output.join("v.json"), &mut out)?;
            write(&d.p, &output.join("p.json"), &mut out)?;
            Ok(out)
        }
    }
}

fn print_human(v: &Verdict) {
    for item in &v.items {
        let mark = if item.pass { "PASS" } else { "FAIL" };
        out!("{mark} {:<32} residual {:.3e} threshold {:.3e}", item.name, item.residual, item.threshold);
    }
    for item in &v.notes {
        out!("note {:<32} value {:.3e} reference {:.3e}", item.name, item.residual, item.threshold);
    }
    for a in &v.artifacts {
        out!("wrote {a}");
    }
    let overall = match v.overall {
        Overall::Pass => "pass",
        Overall::Fail => "fail",
        Overall::Undetermined => "undetermined",
    };
    out!("{}: {overall}", v.command);
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 3 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let json = cli.global.json;
    match run(cli) {
        Ok(v) => {
            if json {
                out!("{}", v.to_json());
            } else {
                print_human(&v);
            }
            ExitCode::from(v.overall.exit_code() as u8)
        }
        Err(InputError(msg)) => {
            if json {
                out!("{}", serde_json::json!({ "error": msg }));
            }
            eprintln!("error: {msg}");
            ExitCode::from(3)
        }
    }
}
