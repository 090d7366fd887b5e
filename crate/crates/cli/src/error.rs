use thiserror::Error;

/// Failures surfaced by the command line, each with a fixed exit code.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("invalid config `{key}`: {message}")]
    Config { key: String, message: String },

    #[error("{0}")]
    Usage(String),

    #[error("i/o error: {0}")]
    Io(String),

    #[error("malformed data at line {line}: {message}")]
    Format { line: usize, message: String },

    #[error("analysis failed: {0}")]
    Analysis(String),

    /// The reader of stdout went away; not a failure of the command.
    #[error("output closed")]
    OutputClosed,
}

impl CliError {
    pub fn config(key: impl Into<String>, message: impl std::fmt::Display) -> Self {
        CliError::Config {
            key: key.into(),
            message: message.to_string(),
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config { .. } | CliError::Usage(_) => 2,
            CliError::Io(_) => 3,
            CliError::Format { .. } => 4,
            CliError::Analysis(_) => 5,
            CliError::OutputClosed => 0,
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        if e.kind() == std::io::ErrorKind::BrokenPipe {
            return CliError::OutputClosed;
        }
        CliError::Io(e.to_string())
    }
}

impl From<precool::Error> for CliError {
    fn from(e: precool::Error) -> Self {
        use precool::Error as E;
        match e {
            E::Format { line, message } => CliError::Format { line, message },
            E::Io(m) => CliError::Io(m),
            E::OutOfRange { .. } | E::DegenerateFit(_) | E::NotConverged => {
                CliError::Analysis(e.to_string())
            }
            E::Domain(_) | E::StepTooCoarse { .. } => CliError::Usage(e.to_string()),
        }
    }
}

/// Attaches a config key to core validation errors.
pub(crate) trait KeyContext<T> {
    fn key(self, key: &str) -> Result<T, CliError>;
}

impl<T> KeyContext<T> for precool::Result<T> {
    fn key(self, key: &str) -> Result<T, CliError> {
        self.map_err(|e| CliError::config(key, e))
    }
}
