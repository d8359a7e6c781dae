use std::path::PathBuf;

use thiserror::Error;

/// Failures while ingesting or validating matrices.
#[derive(Debug, Error)]
pub enum DataError {
    #[error("{path}: empty file")]
    Empty { path: PathBuf },
    #[error("{path}: row {row} has {found} columns, expected {expected}")]
    Ragged {
        path: PathBuf,
        row: usize,
        found: usize,
        expected: usize,
    },
    #[error("{path}: row {row}, column {col}: cannot parse {cell:?} as a number")]
    NotNumeric {
        path: PathBuf,
        row: usize,
        col: usize,
        cell: String,
    },
    #[error("{path}: row {row}, column {col}: non-finite value {cell:?}")]
    NonFinite {
        path: PathBuf,
        row: usize,
        col: usize,
        cell: String,
    },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },
    #[error("invalid matrix: {0}")]
    Shape(String),
    #[error("dataset failed validation: {}", .0.join("; "))]
    Invalid(Vec<String>),
}

#[derive(Debug, Error, PartialEq)]
pub enum GraphError {
    #[error("neighbour count q={q} must satisfy 1 <= q < n={n}")]
    NeighbourCount { q: usize, n: usize },
    #[error("bandwidth sigma must be positive and finite, got {0}")]
    Bandwidth(f64),
}

#[derive(Debug, Error, PartialEq)]
pub enum SolverError {
    #[error("invalid hyperparameters: {0}")]
    Hyperparams(String),
    #[error("W system is singular even after jitter {jitter:e}")]
    Singular { jitter: f64 },
    #[error("iteration {iter}: non-finite value in {matrix} at ({row}, {col})")]
    NonFinite {
        iter: usize,
        matrix: &'static str,
        row: usize,
        col: usize,
    },
    #[error("iteration {iter}: {source}")]
    AtIteration {
        iter: usize,
        #[source]
        source: Box<SolverError>,
    },
    #[error(transparent)]
    Graph(#[from] GraphError),
}

#[derive(Debug, Error, PartialEq)]
pub enum SelectionError {
    #[error("budget {0} is out of range for {1} features")]
    Budget(String, usize),
}

#[derive(Debug, Error, PartialEq)]
pub enum MlknnError {
    #[error("k={k} neighbours requires more than {k} training samples, got {n}")]
    NeighbourCount { k: usize, n: usize },
    #[error("feature count mismatch: model uses {expected}, got {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("selected feature index {index} out of range for {d} features")]
    FeatureIndex { index: usize, d: usize },
    #[error("smoothing must be positive and finite, got {0}")]
    Smoothing(f64),
}

#[derive(Debug, Error, PartialEq)]
pub enum MetricError {
    #[error("shape mismatch: {0:?} vs {1:?}")]
    Shape((usize, usize), (usize, usize)),
    #[error("{0} is undefined: no sample has both relevant and irrelevant labels")]
    Undefined(&'static str),
    #[error("friedman test needs at least 2 methods and 2 settings, got {0}x{1}")]
    FriedmanShape(usize, usize),
    #[error("non-finite score at method {0}, setting {1}")]
    FriedmanNonFinite(usize, usize),
}

/// Crate-level error used by the experiment harness and the CLI.
#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Data(#[from] DataError),
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error(transparent)]
    Selection(#[from] SelectionError),
    #[error(transparent)]
    Mlknn(#[from] MlknnError),
    #[error(transparent)]
    Metric(#[from] MetricError),
    #[error("configuration: {0}")]
    Config(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// True when the failure traces back to the inputs (files, configuration,
    /// parameters) rather than to a numerical or I/O fault during the run.
    pub fn is_input_error(&self) -> bool {
        match self {
            Error::Data(_) | Error::Graph(_) | Error::Selection(_) | Error::Metric(_) => true,
            Error::Config(_) | Error::Json(_) => true,
            Error::Solver(e) => matches!(e, SolverError::Hyperparams(_) | SolverError::Graph(_)),
            Error::Mlknn(e) => !matches!(e, MlknnError::DimensionMismatch { .. }),
            Error::Io { .. } => false,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
