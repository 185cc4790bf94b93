use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    /// Schema or value problem in the configuration; exit code 2.
    #[error("config error at `{key}`: {msg}")]
    Config { key: String, msg: String },

    /// Failure inside a library module; exit code 1.
    #[error("{0}")]
    Runtime(String),
}

impl CliError {
    pub fn config(key: impl Into<String>, msg: impl Into<String>) -> Self {
        CliError::Config { key: key.into(), msg: msg.into() }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config { .. } => 2,
            CliError::Runtime(_) => 1,
        }
    }
}

impl From<electropann::Error> for CliError {
    fn from(e: electropann::Error) -> Self {
        CliError::Runtime(e.to_string())
    }
}

impl From<electropann_fem::FemError> for CliError {
    fn from(e: electropann_fem::FemError) -> Self {
        CliError::Runtime(e.to_string())
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Runtime(e.to_string())
    }
}
