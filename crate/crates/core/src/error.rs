use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Errors produced by the control, feasibility and simulation routines.
///
/// Stage indices carried by the variants are 1-based, matching the order
/// of the backstepping cascade.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("dimension mismatch in {what}: expected {expected}, got {got}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("non-finite value in {what} at stage {stage}")]
    NonFinite { what: &'static str, stage: usize },

    #[error("dynamics blew up at stage {stage}")]
    DynamicsBlowup { stage: usize },

    #[error("simulation aborted at t = {time}: {source}")]
    SimulationAborted {
        time: f64,
        #[source]
        source: Box<Error>,
    },

    #[error("trivial condition violated at stage {stage}: |z(0)| = {z0} is not below p = {p}")]
    TrivialCondition { stage: usize, z0: f64, p: f64 },

    #[error("unknown built-in system `{0}`")]
    UnknownSystem(String),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}
