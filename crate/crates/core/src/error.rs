use thiserror::Error;

use crate::mesh::CellIndex;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MrError {
    #[error("invalid geometry: {0}")]
    Geometry(String),

    #[error("cell {0:?} is outside the level range or the lattice")]
    CellOutOfRange(CellIndex),

    #[error("index set is not a tree: {0}")]
    NotATree(String),

    #[error("tree is not graded: prediction stencil of {0:?} is missing")]
    NotGraded(CellIndex),

    #[error("prediction stencil radius {0} is not supported (expected 1, 2 or 3)")]
    UnsupportedStencil(usize),

    #[error("invalid scheme: {0}")]
    Scheme(String),

    #[error("vacuum state (leading conserved moment {0}) in equilibrium evaluation")]
    Vacuum(f64),

    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    #[error("no exact solution for {0}")]
    NoExactSolution(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("io error: {0}")]
    Io(String),
}

impl From<std::io::Error> for MrError {
    fn from(e: std::io::Error) -> Self {
        MrError::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, MrError>;
