use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("qubit index {index} out of range for {n_qubits} qubits")]
    QubitOutOfRange { index: usize, n_qubits: usize },

    #[error("gate targets must be distinct (got {0} twice)")]
    DuplicateTarget(usize),

    #[error("{what}: {n} qubits exceeds the limit of {max}")]
    TooManyQubits { what: &'static str, n: usize, max: usize },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("invalid density matrix: {0}")]
    InvalidDensityMatrix(String),

    #[error("Kraus operators are not trace preserving (max deviation {0:e})")]
    NotTracePreserving(f64),

    #[error("sequence has zero variance; normalized covariance is undefined")]
    ZeroVariance,

    #[error("matrix is singular or not positive definite: {0}")]
    Singular(String),

    #[error("data format error: {0}")]
    Format(String),

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}

/// Process exit status for each failure class.
pub mod exit {
    pub const SUCCESS: i32 = 0;
    pub const USAGE: i32 = 1;
    pub const DATA: i32 = 2;
    pub const NUMERICAL: i32 = 3;
}

impl Error {
    /// Usage errors (bad arguments or config) map to 1, unreadable or
    /// missing data to 2, numerical breakdowns to 3.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Format(_) | Error::Io(_) => exit::DATA,
            Error::ZeroVariance
            | Error::Singular(_)
            | Error::NotTracePreserving(_)
            | Error::InvalidDensityMatrix(_) => exit::NUMERICAL,
            Error::QubitOutOfRange { .. }
            | Error::DuplicateTarget(_)
            | Error::TooManyQubits { .. }
            | Error::DimensionMismatch { .. }
            | Error::InvalidArgument(_)
            | Error::Config(_) => exit::USAGE,
        }
    }
}
