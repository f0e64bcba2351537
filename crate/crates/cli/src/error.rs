use std::path::PathBuf;

pub type Result<T, E = CliError> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{0}")]
    Format(String),
    #[error("{0}")]
    Length(String),
    #[error("{0}")]
    Consistency(String),
    #[error("{0}")]
    Config(String),
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Data(String),
    #[error("{0}")]
    Range(String),
    #[error(transparent)]
    Core(#[from] dwsnn_core::Error),
}

impl CliError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Self::Io {
            path: path.into(),
            source,
        }
    }

    /// Short machine-greppable tag printed as `error[class]: ...`.
    pub fn class(&self) -> &'static str {
        use dwsnn_core::Error as E;
        match self {
            Self::Io { .. } => "io",
            Self::Format(_) => "format",
            Self::Length(_) => "length",
            Self::Consistency(_) => "consistency",
            Self::Config(_) => "config",
            Self::Usage(_) => "usage",
            Self::Data(_) => "data",
            Self::Range(_) => "range",
            Self::Core(e) => match e {
                E::NonIdentifiable(_) => "non-identifiable",
                E::InvalidModel(_) => "model",
                E::OutOfRange { .. } => "range",
                E::Config(_) | E::MissingAnchor => "config",
                E::NonFinite(_) => "numeric",
                _ => "internal",
            },
        }
    }
}
