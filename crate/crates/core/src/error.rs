use thiserror::Error;

/// Errors produced anywhere in the crate.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("fields live on different grids")]
    GridMismatch,

    #[error("edge values disagree at the vertex (spread {spread:e})")]
    VertexDiscontinuity { spread: f64 },

    /// omega <= alpha^2 / N^2: no bound state exists at all.
    #[error("no bound state: omega = {omega} must exceed alpha^2/N^2 = {bound}")]
    ExistenceBound { omega: f64, bound: f64 },

    /// The offset equation has no solution for this bump count (|alpha / ((2j-N) sqrt(omega))| >= 1).
    #[error("no state with {bumps} bumps: |alpha/((2j-N) sqrt(omega))| = {ratio} is not below 1 (needs omega > {bound})")]
    OffsetDomain { bumps: usize, ratio: f64, bound: f64 },

    #[error("bump count {bumps} is not admissible for alpha = {alpha}, N = {n_edges}")]
    InadmissibleBumpCount { bumps: usize, alpha: f64, n_edges: usize },

    #[error("alpha = 0 has no bump-indexed family; use the Kirchhoff constructors")]
    ZeroAlpha,

    #[error("degenerate configuration: 2j = N")]
    DegenerateConfiguration,

    #[error("Kirchhoff states require alpha = 0 (got {0})")]
    KirchhoffNeedsZeroAlpha(f64),

    #[error("parity mismatch: {0}")]
    ParityMismatch(String),

    #[error("quadratic form is not positive ({0:e}); cannot project onto the natural constraint")]
    NonPositiveQuadraticForm(f64),

    #[error("ground state is not real (max imaginary part {0:e})")]
    NonRealGround(f64),

    #[error("ground state vanishes at node {node}")]
    GroundVanishes { node: usize },

    #[error("no sign change of the VK derivative: {0}")]
    NoSignChange(String),

    #[error("singular linear system at {0}")]
    SingularSystem(String),

    #[error("did not converge after {iterations} iterations (residual {residual:e})")]
    NonConvergence { iterations: usize, residual: f64 },

    #[error("non-finite value in the solution at t = {time}")]
    NonFinite { time: f64 },

    #[error("bump too close to the boundary: {0}")]
    BoundaryProximity(String),

    #[error("i/o: {0}")]
    Io(String),

    #[error("malformed field file: {0}")]
    Format(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Format(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Format(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
