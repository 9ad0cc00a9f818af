use std::path::Path;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    /// Bad flags, config, data files or parameters. Exit code 1.
    #[error("{0}")]
    Input(String),
    /// A search or fit did not converge. Exit code 2.
    #[error("{0}")]
    NoConvergence(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Input(_) => 1,
            CliError::NoConvergence(_) => 2,
        }
    }

    pub fn io(path: &Path, err: std::io::Error) -> Self {
        CliError::Input(format!("{}: {err}", path.display()))
    }
}

pub type CliResult<T> = Result<T, CliError>;

/// Tags a core error with the config field it came from.
pub fn at<T>(field: &str, r: qpm_core::Result<T>) -> CliResult<T> {
    r.map_err(|e| CliError::Input(format!("{field}: {e}")))
}
