use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AlgebraError {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("bad register shape: {0}")]
    BadShape(String),
    #[error("operator is not hermitian (residual {0:.3e})")]
    NotHermitian(f64),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GateError {
    #[error("both couplings are zero")]
    ZeroCoupling,
    #[error("gamma = {0} outside (-pi, pi)")]
    GammaOutOfRange(f64),
    #[error("unknown gate '{0}'")]
    UnknownGate(String),
    #[error("missing parameter '{0}'")]
    MissingParam(String),
    #[error("no placement of the trailing CZ reproduces the target")]
    SearchFailed,
    #[error("Dicke index k = {k} out of range for N = {n}")]
    DickeIndex { n: usize, k: usize },
    #[error(transparent)]
    Algebra(#[from] AlgebraError),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimError {
    #[error("step-halving check failed: change {change:.3e} exceeds target {target:.3e}")]
    NotConverged { change: f64, target: f64 },
    #[error("invalid device: {0}")]
    InvalidDevice(String),
    #[error("invalid protocol: {0}")]
    InvalidProtocol(String),
    #[error("invalid sweep: {0}")]
    InvalidSweep(String),
    #[error("no interior maximum: {0}")]
    EdgeOfGrid(String),
    #[error(transparent)]
    Algebra(#[from] AlgebraError),
    #[error(transparent)]
    Gate(#[from] GateError),
}

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("cannot parse {path}: {message}")]
    Parse { path: String, message: String },
    #[error("invalid value for {key}: {message}")]
    Invalid { key: String, message: String },
}
