use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("need ≥ 3 nodes, got {0}")]
    TooFewNodes(usize),

    #[error("non-finite coordinate at node {0}")]
    NonFinite(usize),

    #[error("degenerate segment {0}: chord length is zero or below the speed threshold")]
    DegenerateSegment(usize),

    #[error("size mismatch: expected {expected}, got {got}")]
    SizeMismatch { expected: usize, got: usize },

    #[error("metric family mismatch: operation requires {0}")]
    FamilyMismatch(&'static str),

    #[error("invalid metric: {0}")]
    InvalidMetric(String),

    #[error("invalid homotopy: {0}")]
    InvalidHomotopy(String),

    #[error("step index {index} out of range for {steps} steps")]
    StepOutOfRange { index: usize, steps: usize },

    #[error("path has zero energy; time reparameterization is undefined")]
    ZeroEnergy,

    #[error("objective is not differentiable here: {0}")]
    NonSmooth(&'static str),

    #[error("line search failed at the first iteration (check problem scaling)")]
    LineSearchFailed,

    #[error("invalid optimizer configuration: {0}")]
    InvalidConfig(String),

    #[error("parse error in {path}: {msg}")]
    Parse { path: String, msg: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
