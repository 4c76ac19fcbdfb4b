//! JSON file formats and verdict records.
//!
//! Complex numbers are `[re, im]` pairs and matrices are `{"rows", "cols", "data"}` with
//! row-major data. Floats are written with shortest round-trip precision, so parsing an emitted
//! file reproduces every value bit for bit.

use std::fs;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::error::Category;

use crate::aqg::{PseudoGraph, QuantumAdjacency};
use crate::bistochastic::{BiIsometry, BiUnitary, BistochasticMatrix};
use crate::channels::{BipartiteChannel, ClassicalCorrelation, Dims};
use crate::magic::{MagicSquare, PermDecomposition};
use crate::numerics::{CheckItem, CheckReport, ComplexMatrix, Subspace, C64};
use crate::qgraph::{Graph, QuantumGraphSpace};

/// Parse and I/O failures, one variant per failure class.
#[derive(Debug, thiserror::Error)]
pub enum IoError {
    #[error("malformed JSON: {0}")]
    Json(String),
    #[error("schema mismatch: {0}")]
    Schema(String),
    #[error("invariant violated: {0}")]
    Invariant(String),
    #[error("I/O failure: {0}")]
    Io(String),
}

impl From<serde_json::Error> for IoError {
    fn from(e: serde_json::Error) -> Self {
        match e.classify() {
            Category::Syntax | Category::Eof => IoError::Json(e.to_string()),
            Category::Data => IoError::Schema(e.to_string()),
            Category::Io => IoError::Io(e.to_string()),
        }
    }
}

impl From<crate::Error> for IoError {
    fn from(e: crate::Error) -> Self {
        IoError::Invariant(e.to_string())
    }
}

type IoResult<T> = std::result::Result<T, IoError>;

fn finite(values: impl IntoIterator<Item = f64>, what: &str) -> IoResult<()> {
    if values.into_iter().all(f64::is_finite) {
        Ok(())
    } else {
        Err(IoError::Invariant(format!("{what} has a non-finite entry")))
    }
}

/// A type with a JSON file representation.
pub trait FileFormat: Sized {
    type Repr: Serialize + DeserializeOwned;

    fn to_repr(&self) -> Self::Repr;
    fn from_repr(repr: Self::Repr) -> IoResult<Self>;

    fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.to_repr()).expect("representations serialise")
    }

    fn from_json(text: &str) -> IoResult<Self> {
        Self::from_repr(serde_json::from_str(text)?)
    }
}

pub fn read_file<T: FileFormat>(path: impl AsRef<Path>) -> IoResult<T> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| IoError::Io(format!("{}: {e}", path.display())))?;
    T::from_json(&text)
}

pub fn write_file<T: FileFormat>(value: &T, path: impl AsRef<Path>) -> IoResult<()> {
    let path = path.as_ref();
    fs::write(path, value.to_json() + "\n").map_err(|e| IoError::Io(format!("{}: {e}", path.display())))
}

fn pairs(values: &[C64]) -> Vec<[f64; 2]> {
    values.iter().map(|c| [c.re, c.im]).collect()
}

fn from_pairs(values: &[[f64; 2]], what: &str) -> IoResult<Vec<C64>> {
    finite(values.iter().flatten().copied(), what)?;
    Ok(values.iter().map(|&[re, im]| C64::new(re, im)).collect())
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MatrixRepr {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<[f64; 2]>,
}

impl FileFormat for ComplexMatrix {
    type Repr = MatrixRepr;

    fn to_repr(&self) -> MatrixRepr {
        MatrixRepr { rows: self.rows(), cols: self.cols(), data: pairs(self.data()) }
    }

    fn from_repr(r: MatrixRepr) -> IoResult<Self> {
        let data = from_pairs(&r.data, "matrix")?;
        Ok(ComplexMatrix::from_vec(r.rows, r.cols, data)?)
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChannelRepr {
    pub dims: Dims,
    pub choi: MatrixRepr,
}

impl FileFormat for BipartiteChannel {
    type Repr = ChannelRepr;

    fn to_repr(&self) -> ChannelRepr {
        ChannelRepr { dims: self.dims(), choi: self.choi().to_repr() }
    }

    fn from_repr(r: ChannelRepr) -> IoResult<Self> {
        Ok(BipartiteChannel::new(r.dims, ComplexMatrix::from_repr(r.choi)?)?)
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClassicalRepr {
    pub dims: Dims,
    /// `p[x][y][a][b]`
    pub p: Vec<Vec<Vec<Vec<f64>>>>,
}

impl FileFormat for ClassicalCorrelation {
    type Repr = ClassicalRepr;

    fn to_repr(&self) -> ClassicalRepr {
        let d = self.dims();
        let p = (0..d.x)
            .map(|x| (0..d.y).map(|y| (0..d.a).map(|a| (0..d.b).map(|b| self.get(x, y, a, b)).collect()).collect()).collect())
            .collect();
        ClassicalRepr { dims: d, p }
    }

    fn from_repr(r: ClassicalRepr) -> IoResult<Self> {
        let d = r.dims;
        let shape_ok = r.p.len() == d.x
            && r.p.iter().all(|py| {
                py.len() == d.y && py.iter().all(|pa| pa.len() == d.a && pa.iter().all(|pb| pb.len() == d.b))
            });
        if !shape_ok {
            return Err(IoError::Schema(format!("p must be nested as [{}][{}][{}][{}]", d.x, d.y, d.a, d.b)));
        }
        let flat: Vec<f64> = r.p.into_iter().flatten().flatten().flatten().collect();
        finite(flat.iter().copied(), "p")?;
        Ok(ClassicalCorrelation::new(d, flat)?)
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BistochasticRepr {
    pub n: usize,
    pub d: usize,
    pub matrix: MatrixRepr,
}

impl FileFormat for BistochasticMatrix {
    type Repr = BistochasticRepr;

    fn to_repr(&self) -> BistochasticRepr {
        BistochasticRepr { n: self.n(), d: self.d(), matrix: self.matrix().to_repr() }
    }

    fn from_repr(r: BistochasticRepr) -> IoResult<Self> {
        Ok(BistochasticMatrix::new(r.n, r.d, ComplexMatrix::from_repr(r.matrix)?)?)
    }
}

/// Blocks nested as `blocks[a][x]`.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BiIsometryRepr {
    pub n: usize,
    pub d_h: usize,
    pub d_k: usize,
    pub blocks: Vec<Vec<MatrixRepr>>,
}

fn square_grid(grid: Vec<Vec<MatrixRepr>>, n: usize, what: &str) -> IoResult<Vec<ComplexMatrix>> {
    if grid.len() != n || grid.iter().any(|row| row.len() != n) {
        return Err(IoError::Schema(format!("{what} must be an {n}x{n} grid of matrices")));
    }
    grid.into_iter().flatten().map(ComplexMatrix::from_repr).collect()
}

fn grid_of(n: usize, items: &[ComplexMatrix]) -> Vec<Vec<MatrixRepr>> {
    items.chunks(n).map(|row| row.iter().map(FileFormat::to_repr).collect()).collect()
}

impl FileFormat for BiIsometry {
    type Repr = BiIsometryRepr;

    fn to_repr(&self) -> BiIsometryRepr {
        BiIsometryRepr { n: self.n(), d_h: self.d_h(), d_k: self.d_k(), blocks: grid_of(self.n(), self.blocks()) }
    }

    fn from_repr(r: BiIsometryRepr) -> IoResult<Self> {
        let blocks = square_grid(r.blocks, r.n, "blocks")?;
        Ok(BiIsometry::new(r.n, r.d_h, r.d_k, blocks)?)
    }
}

impl FileFormat for BiUnitary {
    type Repr = BiIsometryRepr;

    fn to_repr(&self) -> BiIsometryRepr {
        self.as_biisometry().to_repr()
    }

    fn from_repr(r: BiIsometryRepr) -> IoResult<Self> {
        if r.d_h != r.d_k {
            return Err(IoError::Invariant(format!("bi-unitary needs d_h = d_k, got {} and {}", r.d_h, r.d_k)));
        }
        let blocks = square_grid(r.blocks, r.n, "blocks")?;
        Ok(BiUnitary::new(r.n, r.d_h, blocks)?)
    }
}

/// Entries nested as `entries[x][a]`.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MagicRepr {
    pub n: usize,
    pub d: usize,
    pub entries: Vec<Vec<MatrixRepr>>,
}

impl FileFormat for MagicSquare {
    type Repr = MagicRepr;

    fn to_repr(&self) -> MagicRepr {
        MagicRepr { n: self.n(), d: self.d(), entries: grid_of(self.n(), self.entries()) }
    }

    fn from_repr(r: MagicRepr) -> IoResult<Self> {
        let entries = square_grid(r.entries, r.n, "entries")?;
        Ok(MagicSquare::new(r.n, r.d, entries)?)
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TermRepr {
    pub perm: Vec<usize>,
    pub gamma: MatrixRepr,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DecompositionRepr {
    pub n: usize,
    pub d: usize,
    pub terms: Vec<TermRepr>,
}

impl FileFormat for PermDecomposition {
    type Repr = DecompositionRepr;

    fn to_repr(&self) -> DecompositionRepr {
        let terms = self.terms().iter().map(|(perm, gamma)| TermRepr { perm: perm.clone(), gamma: gamma.to_repr() }).collect();
        DecompositionRepr { n: self.n(), d: self.d(), terms }
    }

    fn from_repr(r: DecompositionRepr) -> IoResult<Self> {
        let terms = r
            .terms
            .into_iter()
            .map(|t| Ok((t.perm, ComplexMatrix::from_repr(t.gamma)?)))
            .collect::<IoResult<Vec<_>>>()?;
        Ok(PermDecomposition::new(r.n, r.d, terms)?)
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GraphRepr {
    pub n: usize,
    pub edges: Vec<[usize; 2]>,
}

impl FileFormat for Graph {
    type Repr = GraphRepr;

    fn to_repr(&self) -> GraphRepr {
        GraphRepr { n: self.n(), edges: self.edges().into_iter().map(|(i, j)| [i, j]).collect() }
    }

    fn from_repr(r: GraphRepr) -> IoResult<Self> {
        let edges: Vec<(usize, usize)> = r.edges.iter().map(|&[i, j]| (i, j)).collect();
        Ok(Graph::from_edges(r.n, &edges)?)
    }
}

/// Basis vectors of a subspace as lists of complex pairs.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpaceRepr {
    pub n: usize,
    pub basis: Vec<Vec<[f64; 2]>>,
}

fn space_repr(n: usize, space: &Subspace) -> SpaceRepr {
    SpaceRepr { n, basis: space.basis().iter().map(|b| pairs(b)).collect() }
}

fn space_from(r: &SpaceRepr, ambient: usize) -> IoResult<Subspace> {
    let vectors = r.basis.iter().map(|v| from_pairs(v, "basis vector")).collect::<IoResult<Vec<_>>>()?;
    if vectors.iter().any(|v| v.len() != ambient) {
        return Err(IoError::Schema(format!("basis vectors must have {ambient} entries")));
    }
    Ok(Subspace::from_basis(ambient, vectors)?)
}

impl FileFormat for QuantumGraphSpace {
    type Repr = SpaceRepr;

    fn to_repr(&self) -> SpaceRepr {
        space_repr(self.n(), self.space())
    }

    fn from_repr(r: SpaceRepr) -> IoResult<Self> {
        let space = space_from(&r, r.n * r.n)?;
        Ok(QuantumGraphSpace::new(r.n, space)?)
    }
}

impl FileFormat for PseudoGraph {
    type Repr = SpaceRepr;

    fn to_repr(&self) -> SpaceRepr {
        space_repr(self.n(), self.space())
    }

    fn from_repr(r: SpaceRepr) -> IoResult<Self> {
        let space = space_from(&r, r.n.pow(4))?;
        Ok(PseudoGraph::new(r.n, space)?)
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AdjacencyRepr {
    pub n: usize,
    pub a: MatrixRepr,
}

impl FileFormat for QuantumAdjacency {
    type Repr = AdjacencyRepr;

    fn to_repr(&self) -> AdjacencyRepr {
        AdjacencyRepr { n: self.n(), a: self.matrix().to_repr() }
    }

    fn from_repr(r: AdjacencyRepr) -> IoResult<Self> {
        Ok(QuantumAdjacency::new(r.n, ComplexMatrix::from_repr(r.a)?)?)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Overall {
    Pass,
    Fail,
    Undetermined,
}

impl Overall {
    pub fn of(report: &CheckReport) -> Self {
        if report.overall_pass() {
            Overall::Pass
        } else {
            Overall::Fail
        }
    }

    /// Process exit code: 0 pass, 1 fail, 2 undetermined.
    pub fn exit_code(self) -> i32 {
        match self {
            Overall::Pass => 0,
            Overall::Fail => 1,
            Overall::Undetermined => 2,
        }
    }
}

/// Machine-readable outcome of one command; fields serialise in declaration order.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    pub command: String,
    pub overall: Overall,
    pub items: Vec<CheckItem>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<CheckItem>,
    pub artifacts: Vec<String>,
}

impl Verdict {
    pub fn from_report(command: impl Into<String>, report: CheckReport) -> Self {
        let overall = Overall::of(&report);
        Self { command: command.into(), overall, items: report.items, notes: report.notes, artifacts: vec![] }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("verdicts serialise")
    }
}
