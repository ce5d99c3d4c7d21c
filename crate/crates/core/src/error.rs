use core::fmt;

pub type Result<T> = core::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// A cell coordinate outside the `k`×`k` grid.
    OutOfBounds { row: usize, col: usize, k: usize },
    /// A weight that is not strictly positive and finite.
    InvalidWeight { index: usize, value: f64 },
    /// Two operands disagree on size.
    ShapeMismatch { expected: usize, found: usize },
    /// A mask that is not a simple start→goal path.
    InvalidPath,
    /// The exhaustive oracle refuses grids above its size limit.
    GridTooLarge { k: usize, max: usize },
    /// A configuration value outside its allowed range.
    InvalidConfig(&'static str),
    /// Backward pass given a tape recorded against older parameters.
    StaleTape { tape: u64, params: u64 },
    /// Backward pass given a context produced by a different solver.
    SolverMismatch,
    /// A NaN or infinity appeared in the named quantity.
    NonFinite(&'static str),
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::OutOfBounds { row, col, k } => {
                write!(f, "cell ({row}, {col}) lies outside the {k}x{k} grid")
            }
            Error::InvalidWeight { index, value } => {
                write!(f, "weight #{index} = {value} is not strictly positive and finite")
            }
            Error::ShapeMismatch { expected, found } => {
                write!(f, "shape mismatch: expected {expected} elements, found {found}")
            }
            Error::InvalidPath => f.write_str("mask is not a simple path from start to goal"),
            Error::GridTooLarge { k, max } => {
                write!(f, "grid side {k} exceeds the exhaustive-search limit of {max}")
            }
            Error::InvalidConfig(msg) => write!(f, "invalid configuration: {msg}"),
            Error::StaleTape { tape, params } => write!(
                f,
                "tape recorded at parameter generation {tape}, parameters are at generation {params}"
            ),
            Error::SolverMismatch => {
                f.write_str("forward context was produced by a different solver")
            }
            Error::NonFinite(what) => write!(f, "non-finite value in {what}"),
        }
    }
}

impl core::error::Error for Error {}
