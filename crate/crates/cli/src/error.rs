use std::path::PathBuf;

use thiserror::Error;

/// Process exit codes.
pub const EXIT_OTHER: u8 = 1;
pub const EXIT_CONFIG: u8 = 2;
pub const EXIT_NUMERICAL: u8 = 3;

#[derive(Debug, Error)]
pub enum CliError {
    /// Unreadable, malformed or invalid configuration. `source_label` names
    /// the config file (or the built-in defaults).
    #[error("config error in {source_label}: {message}")]
    Config { source_label: String, message: String },

    #[error("{context}: {source}")]
    Model {
        context: String,
        #[source]
        source: rabi_xuv::Error,
    },

    #[error("input {path}: {message}")]
    Input { path: PathBuf, message: String },

    #[error("{context}: {source}")]
    Io {
        context: String,
        #[source]
        source: std::io::Error,
    },

    #[error("serialization: {0}")]
    Serialize(String),
}

impl CliError {
    pub fn config(label: &str, message: impl Into<String>) -> Self {
        CliError::Config {
            source_label: label.to_string(),
            message: message.into(),
        }
    }

    pub fn model(context: impl Into<String>, source: rabi_xuv::Error) -> Self {
        CliError::Model {
            context: context.into(),
            source,
        }
    }

    pub fn io(context: impl Into<String>, source: std::io::Error) -> Self {
        CliError::Io {
            context: context.into(),
            source,
        }
    }

    pub fn exit_code(&self) -> u8 {
        use rabi_xuv::Error as E;
        match self {
            CliError::Config { .. } | CliError::Input { .. } => EXIT_CONFIG,
            CliError::Model { source, .. } => match source {
                E::InvalidParameter { .. }
                | E::UnknownUnit(_)
                | E::UnsupportedEnvelope
                | E::NonUniformGrid { .. }
                | E::StepSize(_)
                | E::OutsideWindow { .. }
                | E::Checkpoint(_) => EXIT_CONFIG,
                E::ZeroDipole(_)
                | E::NoSignChange { .. }
                | E::Analysis(_)
                | E::NormDrift { .. }
                | E::Quadrature { .. }
                | E::ZeroInput => EXIT_NUMERICAL,
            },
            CliError::Io { .. } | CliError::Serialize(_) => EXIT_OTHER,
        }
    }
}

/// Wrap a library error with what was being computed.
pub(crate) fn model_ctx(context: &str) -> impl Fn(rabi_xuv::Error) -> CliError + '_ {
    move |e| CliError::model(context, e)
}
