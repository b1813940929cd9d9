//! Error type and process exit codes.

use symreg_core::data::DataError;
use symreg_core::dynsys::DynError;
use symreg_core::engine::EngineError;
use symreg_core::guidance::GuideError;

/// Process exit codes.
pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_IO: i32 = 3;
pub const EXIT_INTERNAL: i32 = 4;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    /// Bad flags, configuration or input data.
    #[error("{0}")]
    Usage(String),
    #[error("{context}: {source}")]
    Io {
        context: String,
        #[source]
        source: std::io::Error,
    },
    /// A result violated an invariant the library guarantees.
    #[error("internal error: {0}")]
    Internal(String),
}

impl CliError {
    pub fn usage(msg: impl Into<String>) -> Self {
        CliError::Usage(msg.into())
    }

    pub fn io(context: impl Into<String>, source: std::io::Error) -> Self {
        CliError::Io {
            context: context.into(),
            source,
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Io { .. } => EXIT_IO,
            CliError::Internal(_) => EXIT_INTERNAL,
        }
    }
}

impl From<DataError> for CliError {
    fn from(e: DataError) -> Self {
        match e {
            DataError::Csv(c) if c.is_io_error() => {
                CliError::io("reading CSV", std::io::Error::other(c))
            }
            other => CliError::Usage(other.to_string()),
        }
    }
}

impl From<EngineError> for CliError {
    fn from(e: EngineError) -> Self {
        match e {
            EngineError::InvalidConfig(_)
            | EngineError::InvalidProbability(_)
            | EngineError::Guide(_) => CliError::Usage(e.to_string()),
            EngineError::Io(io) => CliError::io("writing results", io),
            other => CliError::Internal(other.to_string()),
        }
    }
}

impl From<GuideError> for CliError {
    fn from(e: GuideError) -> Self {
        CliError::Usage(e.to_string())
    }
}

impl From<DynError> for CliError {
    fn from(e: DynError) -> Self {
        match e {
            DynError::Io(io) => CliError::io("writing results", io),
            DynError::Engine(inner) => inner.into(),
            DynError::Data(inner) => inner.into(),
            other => CliError::Usage(other.to_string()),
        }
    }
}
