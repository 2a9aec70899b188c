use thiserror::Error;

use crate::grid::CellIndex;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("cell index {index} out of range for a grid of {cells} cells")]
    IndexOutOfRange { index: usize, cells: usize },
    #[error("cells {from} and {to} are not adjacent")]
    NonAdjacentCells { from: CellIndex, to: CellIndex },
    #[error("cell {0} is land")]
    LandCell(CellIndex),
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("invalid parameter: {0}")]
    Parameter(String),
    #[error("observation sequence has zero probability from step {step}")]
    ZeroProbability { step: usize },
    #[error("internal inconsistency: {0}")]
    Inconsistent(String),
    #[error("{0}")]
    Io(String),
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("invalid experiment config: {}", .0.join("; "))]
    Config(Vec<String>),
}

pub type Result<T> = std::result::Result<T, Error>;
