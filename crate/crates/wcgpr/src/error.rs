use thiserror::Error;

/// Errors surfaced by the library.
#[derive(Debug, Error)]
pub enum Error {
    /// A shape, length or parameter precondition was violated.
    #[error("structural error: {0}")]
    Structure(String),

    /// Data carried the right shape but violated a numerical structure
    /// invariant (Hermitian/symmetry/conjugate-stack) beyond tolerance.
    #[error("numerical structure violated: {0}")]
    NumericalStructure(String),

    /// A factorization failed even after jitter escalation.
    #[error("singular matrix: {0}")]
    Singular(String),

    /// An error tagged with the processing stage it occurred in.
    #[error("stage `{stage}`: {source}")]
    Stage {
        stage: String,
        #[source]
        source: Box<Error>,
    },

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("config parse error: {0}")]
    Config(#[from] serde_json::Error),
}

impl Error {
    pub fn structure(msg: impl Into<String>) -> Self {
        Error::Structure(msg.into())
    }

    pub fn numerical(msg: impl Into<String>) -> Self {
        Error::NumericalStructure(msg.into())
    }

    pub fn singular(msg: impl Into<String>) -> Self {
        Error::Singular(msg.into())
    }

    /// Wrap an error with the name of the stage that produced it.
    pub fn in_stage(self, stage: impl Into<String>) -> Self {
        Error::Stage {
            stage: stage.into(),
            source: Box::new(self),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
