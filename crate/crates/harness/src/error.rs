//! Harness-level failures: configuration diagnostics, artifact IO, and
//! ensemble run policies layered over the core numerical errors.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, HarnessError>;

#[derive(Debug, Error)]
pub enum HarnessError {
    /// The configuration file could not be read at all.
    #[error("cannot read config {path}")]
    ConfigIo {
        path: String,
        #[source]
        source: std::io::Error,
    },

    /// The configuration text is not syntactically valid JSON.
    #[error("config {path} is not valid JSON")]
    Parse {
        path: String,
        #[source]
        source: serde_json::Error,
    },

    /// The configuration parsed but a field violates the scenario contract.
    #[error("invalid scenario field `{field}`: {reason}")]
    InvalidScenario { field: String, reason: String },

    /// More than one percent of the requested paths failed to integrate.
    /// Excluding that many silently would bias the ensemble statistics.
    #[error("{failed} of {total} paths failed, exceeding the 1% exclusion budget")]
    TooManyFailedPaths { failed: usize, total: usize },

    /// An output artifact could not be written.
    #[error("cannot write {path}")]
    OutputIo {
        path: String,
        #[source]
        source: std::io::Error,
    },

    /// A numerical failure outside the per-path exclusion policy.
    #[error(transparent)]
    Core(#[from] qpf_core::Error),
}

impl HarnessError {
    /// Process exit code: 3 for configuration problems, 2 for anything
    /// that failed after a valid scenario started running.
    pub fn exit_code(&self) -> u8 {
        match self {
            HarnessError::ConfigIo { .. }
            | HarnessError::Parse { .. }
            | HarnessError::InvalidScenario { .. } => 3,
            _ => 2,
        }
    }
}

pub(crate) fn invalid(field: impl Into<String>, reason: impl Into<String>) -> HarnessError {
    HarnessError::InvalidScenario {
        field: field.into(),
        reason: reason.into(),
    }
}
