use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("numerical failure: {0}")]
    Numerical(collbreak::Error),

    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("kernel `{0}` failed validation")]
    Validation(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Numerical(_) => 3,
            CliError::Io { .. } | CliError::Validation(_) => 1,
        }
    }
}

impl From<collbreak::Error> for CliError {
    fn from(e: collbreak::Error) -> Self {
        use collbreak::Error as E;
        match e {
            E::InvalidGrid(_)
            | E::ResamplingExhausted { .. }
            | E::UnknownKernel(_)
            | E::Unsupported(_)
            | E::InvalidConfig(_)
            | E::ReferenceRange { .. }
            | E::ReferenceUnavailable(_) => CliError::Config(e.to_string()),
            _ => CliError::Numerical(e),
        }
    }
}
