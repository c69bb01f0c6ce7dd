use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("{0}")]
    Core(#[from] vismem::Error),
    #[error("metric error: {0}")]
    Metric(String),
    #[error("{0}")]
    Usage(String),
    #[error("check failed: {0}")]
    Check(String),
}

impl CliError {
    /// Process exit code: 3 config, 4 I/O and file formats, 5 metrics, 1 otherwise.
    pub fn exit_code(&self) -> u8 {
        use vismem::Error as E;
        match self {
            CliError::Config(_) => 3,
            CliError::Metric(_) => 5,
            CliError::Usage(_) => 2,
            CliError::Check(_) => 1,
            CliError::Core(e) => match e {
                E::Io(_)
                | E::BadMagic { .. }
                | E::UnsupportedVersion(_)
                | E::Truncated { .. }
                | E::TrailingBytes(_)
                | E::MissingFile { .. }
                | E::DimMismatch { .. }
                | E::Manifest { .. }
                | E::Decode { .. }
                | E::Parse(_) => 4,
                E::UndefinedMetric(_) => 5,
                E::Config(_) => 3,
                _ => 1,
            },
        }
    }
}
