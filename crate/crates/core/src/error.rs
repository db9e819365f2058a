use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("unknown attribute `{0}`")]
    UnknownAttribute(String),

    #[error("drone index {0} out of range")]
    UnknownDrone(usize),

    #[error("invalid scenario: {message} (events {events:?})")]
    InvalidScenario { message: String, events: Vec<usize> },

    #[error("episode ended: time {time} + dt {dt} exceeds duration {duration}")]
    EpisodeEnded { time: f64, dt: f64, duration: f64 },

    #[error("step called on a terminal state (step {0})")]
    TerminalState(usize),

    #[error("invalid config field `{field}`: {message}")]
    InvalidConfig { field: String, message: String },

    #[error("unsupported schema `{found}`, expected `{expected}`")]
    Schema { expected: String, found: String },

    #[error("dimension mismatch in {context}: expected {expected}, got {found}")]
    Dimension {
        context: String,
        expected: usize,
        found: usize,
    },

    #[error("non-finite gradient at parameter {0}")]
    NonFiniteGradient(usize),

    #[error("non-finite loss in update phase {phase}: {diagnostics}")]
    NonFiniteLoss { phase: usize, diagnostics: String },

    #[error("rollout failed in worker {worker} at step {step}: {source}")]
    Rollout {
        worker: usize,
        step: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("session closed")]
    SessionClosed,

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {message}")]
    Parse { path: String, message: String },
}

impl Error {
    /// Stable snake_case name of the variant.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::UnknownAttribute(_) => "unknown_attribute",
            Error::UnknownDrone(_) => "unknown_drone",
            Error::InvalidScenario { .. } => "invalid_scenario",
            Error::EpisodeEnded { .. } => "episode_ended",
            Error::TerminalState(_) => "terminal_state",
            Error::InvalidConfig { .. } => "invalid_config",
            Error::Schema { .. } => "schema_mismatch",
            Error::Dimension { .. } => "dimension_mismatch",
            Error::NonFiniteGradient(_) => "non_finite_gradient",
            Error::NonFiniteLoss { .. } => "non_finite_loss",
            Error::Rollout { .. } => "rollout",
            Error::SessionClosed => "session_closed",
            Error::Io { .. } => "io",
            Error::Parse { .. } => "parse",
        }
    }

    pub(crate) fn config(field: &str, message: impl Into<String>) -> Self {
        Error::InvalidConfig {
            field: field.to_string(),
            message: message.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
