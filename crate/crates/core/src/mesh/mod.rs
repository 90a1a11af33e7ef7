//! Simplicial complexes, integer chains, the boundary operator, orientation
//! of top-dimensional simplices, and a plain-text mesh format.

mod chain;
mod complex;
mod io;

pub use chain::{boundary_chain, orient_fundamental, Chain};
pub use complex::{simplex_measure, SimplicialComplex, DEGENERACY_THRESHOLD};
pub use io::MeshFile;

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MeshError {
    #[error("vertex has {found} coordinates, expected {expected}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("invalid simplex {0:?}: repeated or missing vertices")]
    InvalidSimplex(Vec<usize>),
    #[error("vertex index {0} out of range")]
    VertexOutOfRange(usize),
    #[error("degenerate simplex {simplex:?}: volume {volume:e} at diameter {diameter:e}")]
    Degenerate {
        simplex: Vec<usize>,
        volume: f64,
        diameter: f64,
    },
    #[error("chain refers to unknown {dim}-simplex {id}")]
    UnknownSimplex { dim: usize, id: usize },
    #[error("face {face:?} meets {count} top simplices")]
    NonManifold { face: Vec<usize>, count: usize },
    #[error("no consistent orientation (conflict between simplices {simplices:?})")]
    NonOrientable { simplices: Vec<usize> },
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
}
