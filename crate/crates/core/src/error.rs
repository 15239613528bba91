use thiserror::Error;

/// Errors produced anywhere in the solver pipeline.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("register of {qubits} qubits exceeds the dense-matrix cap of {cap}")]
    Capacity { qubits: usize, cap: usize },

    #[error("unsupported configuration: {0}")]
    Unsupported(String),

    #[error("ground state is {multiplicity}-fold degenerate (splitting {splitting:.3e})")]
    DegenerateGroundState { multiplicity: usize, splitting: f64 },

    #[error("empty sector: {0}")]
    EmptySector(String),

    #[error("continued fraction evaluated on a pole at z = {re} + {im}i")]
    PoleHit { re: f64, im: f64 },

    #[error("internal consistency violated: {0}")]
    InternalConsistency(String),

    #[error("divergent quasiparticle weight: 1 - Re dΣ/dω = {0:.3e}")]
    DivergentWeight(f64),

    #[error("tangent system ill-conditioned at t = {time}: residual {residual:.3e}")]
    IllConditionedTangent { time: f64, residual: f64 },

    #[error("invalid config at `{path}`: {message}")]
    Config { path: String, message: String },
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}
