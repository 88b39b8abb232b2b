use thiserror::Error;

pub type Result<T, E = PdnError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum PdnError {
    #[error("invalid geometry: {0}")]
    InvalidGeometry(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("invalid config: {0}")]
    InvalidConfig(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("invalid candidate: {0}")]
    InvalidCandidate(String),

    /// A transmittance above one by more than the rounding allowance. This
    /// means the forward model is wrong, so it is never clamped.
    #[error("numerical consistency violated at {frequency_hz} Hz: transmittance {value}")]
    NumericalConsistency { frequency_hz: f64, value: f64 },

    #[error("training diverged at step {step} (last finite loss {last_finite_loss})")]
    TrainingDiverged { step: usize, last_finite_loss: f64 },

    #[error("degenerate data: {0}")]
    DegenerateData(String),

    #[error("format error at byte {offset}: {message}")]
    Format { offset: u64, message: String },

    #[error("checkpoint incompatible: {0}")]
    CheckpointIncompatible(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl PdnError {
    pub(crate) fn format(offset: u64, message: impl Into<String>) -> Self {
        PdnError::Format {
            offset,
            message: message.into(),
        }
    }
}
