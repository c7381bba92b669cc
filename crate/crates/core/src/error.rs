use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    Argument(String),

    #[error("state outside model domain: {0}")]
    Domain(String),

    /// A matrix that had to be inverted or factorized was singular.
    /// `dump` carries the offending matrix for diagnosis.
    #[error("numerical failure: {message}\n{dump}")]
    Numerical { message: String, dump: String },

    #[error("degenerate belief: all particle weights vanished")]
    DegenerateBelief,

    #[error("quadrature family `{0}` is not supported")]
    UnsupportedFamily(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn numerical(message: impl Into<String>, matrix: &nalgebra::DMatrix<f64>) -> Self {
        Error::Numerical {
            message: message.into(),
            dump: format!("{matrix:.6e}"),
        }
    }
}
