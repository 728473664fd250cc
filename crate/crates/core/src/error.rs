use thiserror::Error;

use crate::quantum::QubitId;
use crate::topology::NodeId;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("state is not normalized (squared norm {norm_sqr})")]
    NotNormalized { norm_sqr: f64 },

    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("qubit {0} is not in the register")]
    UnknownQubit(QubitId),

    #[error("qubit {0} appears twice in the same operation")]
    DuplicateQubit(QubitId),

    #[error("register of {requested} qubits exceeds the limit of {limit}")]
    Capacity { requested: usize, limit: usize },

    #[error("register size mismatch: {left} vs {right} qubits")]
    SizeMismatch { left: usize, right: usize },

    #[error("matrix is not unitary (max deviation {deviation:e})")]
    NotUnitary { deviation: f64 },

    #[error("unknown node {0}")]
    UnknownNode(NodeId),

    #[error("protocol violation: {0}")]
    Protocol(String),
}

pub type Result<T> = std::result::Result<T, Error>;
