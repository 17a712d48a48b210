use thiserror::Error;

use crate::means::MeanOutput;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("matrix is not square ({rows}x{cols})")]
    NotSquare { rows: usize, cols: usize },

    #[error("matrix is not symmetric: asymmetry {asymmetry:e} exceeds tolerance {tolerance:e}")]
    NotSymmetric { asymmetry: f64, tolerance: f64 },

    #[error("matrix is not positive definite (smallest eigenvalue {min_eigenvalue:e})")]
    NotPositiveDefinite { min_eigenvalue: f64 },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("a tuple needs at least {min} matrices, got {found}")]
    TupleTooSmall { min: usize, found: usize },

    #[error("root order must be at least 2, got {0}")]
    InvalidOrder(u32),

    #[error("permutation degree mismatch: {left} vs {right}")]
    DegreeMismatch { left: usize, right: usize },

    #[error("invalid permutation: {0}")]
    InvalidPermutation(String),

    #[error("unsupported degree {degree} for {what}")]
    UnsupportedDegree { what: &'static str, degree: usize },

    #[error("degree {degree} exceeds the enumeration limit of {limit}")]
    DegreeTooLarge { degree: usize, limit: usize },

    #[error("invalid coset transversal: {0}")]
    InvalidTransversal(String),

    #[error("permutations surviving the equality test do not form a group ({survivors} survivors); check the tolerance")]
    NotAGroup { survivors: usize },

    #[error("expression is not a composition over one permuted inner mean: {0}")]
    MalformedComposition(String),

    #[error("property {0} is not supported for this mean")]
    UnsupportedProperty(&'static str),

    #[error("expression uses input A{index} but the tuple has {arity} matrices")]
    ArityMismatch { index: usize, arity: usize },

    #[error("{mean} did not converge within {iterations} iterations (residual {residual:e})")]
    NoConvergence {
        mean: String,
        iterations: usize,
        residual: f64,
        output: Box<MeanOutput>,
    },
}
