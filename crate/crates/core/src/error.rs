use thiserror::Error;

use crate::qasm::QasmError;

/// Errors raised by circuit construction, simulation and tuning.
#[derive(Debug, Error)]
pub enum Error {
    #[error("gate {index} references qubit {qubit} but the circuit has {n_qubits} qubits")]
    QubitOutOfRange {
        index: usize,
        qubit: usize,
        n_qubits: usize,
    },
    #[error("gate {index} ({gate}) is malformed: {reason}")]
    MalformedGate {
        index: usize,
        gate: String,
        reason: String,
    },
    #[error("invalid circuit: {0}")]
    InvalidCircuit(String),
    #[error("inserted gate {index} cannot be placed: {reason}")]
    Placement { index: usize, reason: String },
    #[error("window on qubit {qubit} [{start}, {end}) has no movable gate")]
    NoMovableGate { qubit: usize, start: u64, end: u64 },
    #[error("gate fraction {0} is outside [0, 1]")]
    FractionOutOfRange(f64),
    #[error("{rounds} rounds of {kind} do not fit in window on qubit {qubit} [{start}, {end})")]
    RoundsOutOfRange {
        kind: String,
        rounds: usize,
        qubit: usize,
        start: u64,
        end: u64,
    },
    #[error("conflicting placement in window on qubit {qubit} [{start}, {end}): {reason}")]
    ConflictingPlacement {
        qubit: usize,
        start: u64,
        end: u64,
        reason: String,
    },
    #[error("{what} needs {n_qubits} qubits, above the limit of {limit}")]
    DimensionOverflow {
        what: &'static str,
        n_qubits: usize,
        limit: usize,
    },
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("expected {expected} parameters, got {got}")]
    ParameterCount { expected: usize, got: usize },
    #[error("realizations must be at least 1")]
    ZeroRealizations,
    #[error("invalid noise model: {0}")]
    InvalidNoise(String),
    #[error("invalid Pauli string {0:?}")]
    InvalidPauli(String),
    #[error("hamiltonian line {line}: {reason}")]
    HamiltonianParse { line: usize, reason: String },
    #[error("objective was not finite at iteration {iteration}")]
    NonFiniteObjective {
        iteration: usize,
        trace: Box<crate::tuner::TuneTrace>,
    },
    #[error("invalid config: {0}")]
    Config(String),
    #[error(transparent)]
    Qasm(#[from] QasmError),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn io(path: impl AsRef<std::path::Path>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.as_ref().display().to_string(),
            source,
        }
    }
}
