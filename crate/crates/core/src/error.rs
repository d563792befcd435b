use alloc::string::String;

/// Errors raised by the simulation core.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("dataset is empty")]
    EmptyDataset,

    #[error("invalid parameter `{field}`: {reason}")]
    InvalidParameter { field: &'static str, reason: String },

    #[error("cannot build an adjacent dataset: {0}")]
    AdjacencyImpossible(&'static str),

    #[error("worker {worker} has not been initialized by an outer sync")]
    UninitializedWorker { worker: usize },

    #[error("no job available for inner iteration {iteration}")]
    NoJobAvailable { iteration: usize },

    #[error(
        "no feasible apply slot for job pulled at iteration {pull} after {retries} retries \
         (P > delta + 1; use service-time delay mode)"
    )]
    NoFeasibleSlot { pull: usize, retries: usize },

    #[error("non-finite iterate at iteration {iteration}")]
    NonFinite { iteration: usize },

    #[error("label {label} is not a valid class index (classes = {classes})")]
    InvalidLabel { label: f64, classes: usize },

    #[error("hypothesis violated: {0}")]
    Hypothesis(String),
}

pub type Result<T> = core::result::Result<T, Error>;

pub(crate) fn invalid(field: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        field,
        reason: reason.into(),
    }
}
