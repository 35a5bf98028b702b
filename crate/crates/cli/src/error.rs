use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),

    #[error("numerical failure: {0}")]
    Numerical(seirv_core::Error),

    #[error(transparent)]
    Other(#[from] anyhow::Error),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Numerical(_) => 3,
            CliError::Other(_) => 1,
        }
    }
}

impl From<seirv_core::Error> for CliError {
    fn from(e: seirv_core::Error) -> Self {
        match e {
            e if e.is_numerical() => CliError::Numerical(e),
            seirv_core::Error::Domain(msg) => CliError::Config(msg),
            e => CliError::Other(e.into()),
        }
    }
}
