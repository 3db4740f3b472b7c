use std::path::PathBuf;

use thiserror::Error;

use crate::solvers::SolveResult;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch: expected {expected:?}, got {actual:?}")]
    ShapeMismatch {
        expected: (usize, usize),
        actual: (usize, usize),
    },

    #[error("matrix contains a non-finite entry at ({row}, {col})")]
    NonFinite { row: usize, col: usize },

    #[error("invalid dimensions: {0}")]
    InvalidDimensions(String),

    #[error("SVD did not converge on a {rows}x{cols} matrix within {max_iter} iterations")]
    SvdNonConvergence {
        rows: usize,
        cols: usize,
        max_iter: usize,
    },

    #[error("invalid clip specification: {0}")]
    InvalidClipSpec(String),

    #[error("observations carry no clipping threshold")]
    MissingThreshold,

    #[error("invalid observation: {0}")]
    InvalidObservation(String),

    #[error("infeasible observation at ({row}, {col}): value {value} lies outside [{floor}, {ceiling}]")]
    InfeasibleObservation {
        row: usize,
        col: usize,
        value: f64,
        floor: f64,
        ceiling: f64,
    },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("invalid solver config: {0}")]
    InvalidConfig(String),

    #[error("unknown solver variant `{0}`")]
    UnknownVariant(String),

    #[error("no observed entries")]
    EmptyObservations,

    #[error("singular ridge system for {factor} {index} (lambda = 0 with rank-deficient design)")]
    SingularSystem { factor: &'static str, index: usize },

    #[error("solver aborted after {} iterations: {source}", partial.iterations_used)]
    Aborted {
        partial: Box<SolveResult>,
        #[source]
        source: Box<Error>,
    },

    #[error("problem too large for {what}: {size} > {limit}")]
    TooLarge {
        what: &'static str,
        size: usize,
        limit: usize,
    },

    #[error("recovery condition violated; bound undefined ({0})")]
    RecoveryConditionViolated(String),

    #[error("zero matrix has no singular subspace")]
    ZeroMatrix,

    #[error("zero denominator in {0}")]
    ZeroDenominator(&'static str),

    #[error("rank {target} not reached after {attempts} generation attempts")]
    RankNotReached { target: usize, attempts: usize },

    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("all {0} grid configurations failed")]
    GridFailed(usize),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
