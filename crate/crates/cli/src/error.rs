use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("cannot read {0}")]
    Io(String),

    #[error("malformed spec: {0}")]
    Parse(String),

    #[error("{path}: {reason}")]
    Invalid { path: String, reason: String },

    #[error("{path}: {source}")]
    Core {
        path: String,
        #[source]
        source: twosided::Error,
    },

    #[error("this command needs a {expected} spec, got a {found} spec")]
    WrongKind {
        expected: &'static str,
        found: &'static str,
    },

    #[error("the duality template failed its round trip")]
    Duality,
}

impl CliError {
    pub fn invalid(path: impl Into<String>, reason: impl Into<String>) -> Self {
        CliError::Invalid {
            path: path.into(),
            reason: reason.into(),
        }
    }

    pub fn core(path: impl Into<String>, source: twosided::Error) -> Self {
        CliError::Core {
            path: path.into(),
            source,
        }
    }

    /// 0 ok, 1 other, 2 parse, 3 validation, 4 infeasible, 5 budget or resource.
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Io(_) | CliError::Duality => 1,
            CliError::Parse(_) => 2,
            CliError::Invalid { .. } | CliError::WrongKind { .. } => 3,
            CliError::Core { source, .. } => match source.root() {
                twosided::Error::Infeasible { .. } => 4,
                twosided::Error::Budget(_) | twosided::Error::Resource(_) => 5,
                _ => 3,
            },
        }
    }
}
