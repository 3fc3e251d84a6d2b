use thiserror::Error;

/// Errors raised by the simulator's contract checks.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("length {0} is not a positive power of two")]
    NotPowerOfTwo(usize),

    #[error("matrix is not square ({rows}x{cols})")]
    NotSquare { rows: usize, cols: usize },

    #[error("operator is not Hermitian (defect {defect:.3e})")]
    NotHermitian { defect: f64 },

    #[error("duplicate target qubit {0}")]
    DuplicateTarget(usize),

    #[error("target qubit {qubit} out of range for a {n_qubits}-qubit register")]
    TargetOutOfRange { qubit: usize, n_qubits: usize },

    #[error("state has zero norm")]
    ZeroNorm,

    #[error("{name} = {value} is outside {range}")]
    OutOfRange {
        name: &'static str,
        value: f64,
        range: &'static str,
    },

    #[error("invalid oracle instance: {0}")]
    InvalidOracle(String),

    #[error("invalid driving schedule: {0}")]
    InvalidSchedule(String),

    #[error("segment length m = {m} exceeds the control-register cap {cap}")]
    SegmentCapExceeded { m: usize, cap: usize },

    #[error("projection onto Hamming weight <= {k} is empty")]
    EmptyProjection { k: usize },

    #[error("inconsistent error record: {0}")]
    InconsistentRecord(String),

    #[error("configuration error at `{path}`: {message}")]
    Config { path: String, message: String },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn config(path: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            path: path.into(),
            message: message.into(),
        }
    }
}
