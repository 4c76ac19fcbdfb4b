//! Quantum no-signalling bicorrelations and their operator-matrix, game and quantum-graph
//! counterparts.
//!
//! The crate is organised bottom-up: [`numerics`] supplies dense complex linear algebra,
//! [`channels`] builds and checks bipartite channels on matrix algebras, [`bistochastic`] and
//! [`magic`] handle the operator-matrix descriptions, [`qgraph`] decides graph-game questions
//! and [`aqg`] works with quantum adjacency matrices. [`io`] holds the JSON file formats.

pub mod error;
pub mod numerics;

pub use error::{Error, Result};
pub mod bistochastic;
pub mod channels;
pub mod magic;
pub mod qgraph;
pub mod aqg;
pub mod io;
