use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid graph: {0}")]
    Graph(String),
    #[error("parse error: {0}")]
    Parse(String),
    #[error("solver failure: {0}")]
    Solver(String),
    #[error("genericity violation: {0}")]
    Genericity(String),
    #[error("ill-defined level: {0}")]
    IllDefined(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Process exit code used by the command-line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Graph(_) | Error::Parse(_) => 2,
            Error::Solver(_) => 3,
            Error::Genericity(_) => 4,
            Error::IllDefined(_) => 5,
        }
    }
}
