use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration: {0}")]
    Config(String),
    #[error("cannot parse scenario: {0}")]
    Toml(#[from] toml::de::Error),
    #[error("{context}: {source}")]
    Input { context: String, source: wpk::Error },
    #[error(transparent)]
    Core(#[from] wpk::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error("numerical validity: {0}")]
    Numerical(String),
    #[error("{0} verification check(s) failed")]
    Verify(usize),
}

impl CliError {
    /// 1 for failed verification, 3 for results that cannot be trusted,
    /// 2 for everything the user can fix in the invocation or inputs.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Verify(_) => 1,
            CliError::Numerical(_) => 3,
            CliError::Core(e) => match e {
                wpk::Error::Underresolved(_)
                | wpk::Error::FlowBlowup(_)
                | wpk::Error::NonFinite(_)
                | wpk::Error::StepUnderflow(_) => 3,
                _ => 2,
            },
            _ => 2,
        }
    }
}

pub type Result<T> = std::result::Result<T, CliError>;
