use thiserror::Error;

/// Errors raised by the numerical pipelines.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("state {state:?} lies outside the domain box (center {center:?}, radius {radius})")]
    OutOfDomain {
        state: Vec<f64>,
        center: Vec<f64>,
        radius: f64,
    },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("invalid model parameters: {0}")]
    InvalidParams(String),
    #[error("hyperbolicity check failed at {state:?}: {reason}")]
    HyperbolicityCheckFailed { state: Vec<f64>, reason: String },
    #[error("number of negative eigenvalues varies over the domain ({first} vs {other})")]
    NonUniformSignature { first: usize, other: usize },
    #[error("non-characteristic condition violated: |lambda| = {observed:e} below gap {required:e}")]
    NonCharacteristicViolation { observed: f64, required: f64 },
    #[error("strict hyperbolicity violated: {0}")]
    StrictHyperbolicityViolation(String),
    #[error("eigenvalues closer than {threshold:e} at {state:?}")]
    IllConditioned { state: Vec<f64>, threshold: f64 },
    #[error("trajectory left the domain box at zeta = {zeta}")]
    IntegrationEscape { zeta: f64 },
    #[error("integrator step size underflow at t = {t} (h = {h:e})")]
    ToleranceFailure { t: f64, h: f64 },
    #[error("Newton iteration diverged after {iterations} iterations (residual {residual:e})")]
    NewtonDivergence {
        iterations: usize,
        residual: f64,
        damping: Vec<f64>,
    },
    #[error("state is not on the stable manifold (best residual {residual:e})")]
    NotInManifold { s: Vec<f64>, residual: f64 },
    #[error("trajectory tail too short: {nodes} nodes past zeta = {from}")]
    InsufficientTail { nodes: usize, from: f64 },
    #[error("fixed-point iteration did not converge in {iterations} iterations (last change {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },
    #[error("root finding failed: {0}")]
    RootFindFailure(String),
    #[error("field {family} is not genuinely nonlinear near {state:?}")]
    GnlViolation { family: usize, state: Vec<f64> },
    #[error("mesh refinement budget exhausted ({nodes} nodes)")]
    MeshExhausted { nodes: usize },
    #[error("continuation failed at rung {rung} (epsilon = {epsilon:e}): {reason}")]
    ContinuationFailure {
        rung: usize,
        epsilon: f64,
        reason: String,
    },
    #[error("requested range {requested} exceeds available {available}")]
    RangeExceeded { requested: f64, available: f64 },
    #[error("no local solution: residual stagnated at {residual:e}")]
    NoLocalSolution { residual: f64 },
    #[error("speed {0} cannot be resolved in the fan")]
    UnresolvedSpeed(f64),
    #[error("comparison inconclusive: {0}")]
    ComparisonInconclusive(String),
    #[error("io error: {0}")]
    Io(String),
    #[error("configuration error: {0}")]
    Config(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Config(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
