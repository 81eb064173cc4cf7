//! Error type shared by every solver stage.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid state: {0}")]
    InvalidState(String),

    #[error("invalid gas model: gamma = {0} (must be > 1)")]
    InvalidGas(f64),

    #[error("mesh construction: {0}")]
    Mesh(String),

    #[error("tangled mesh: cell {cell} has non-positive area {area:e}")]
    TangledMesh { cell: usize, area: f64 },

    #[error("degenerate geometry in cell {cell}: {reason}")]
    DegenerateCell { cell: usize, reason: String },

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("stencil construction failed for cell {cell}: {reason}")]
    Stencil { cell: usize, reason: String },

    #[error("reconstruction failed for cell {cell}: {reason}")]
    Reconstruction { cell: usize, reason: String },

    #[error("predictor failed in cell {cell}: {reason}")]
    Predictor { cell: usize, reason: String },

    #[error("numerical flux failed: {reason} (left {left:?}, right {right:?})")]
    Flux {
        reason: String,
        left: [f64; 4],
        right: [f64; 4],
    },

    #[error("boundary projection: {0}")]
    Projection(String),

    #[error("linear solver: {0}")]
    Solver(String),

    #[error("positivity failure in cell {cell}: {reason}")]
    Positivity { cell: usize, reason: String },

    #[error("time step underflow: dt = {dt:e}")]
    TimeStep { dt: f64 },

    #[error("configuration: {0}")]
    Config(String),

    #[error("out of range: {0}")]
    Range(String),

    #[error("i/o: {0}")]
    Io(String),

    /// Wraps any other error with the pipeline position where it happened.
    #[error("[stage {stage}, step {step}] {source}")]
    Stage {
        stage: &'static str,
        step: usize,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub fn at_stage(self, stage: &'static str, step: usize) -> Self {
        match self {
            Error::Stage { .. } => self,
            other => Error::Stage {
                stage,
                step,
                source: Box::new(other),
            },
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
