use thiserror::Error;

/// Errors raised by the toolkit.
#[derive(Debug, Error)]
pub enum Error {
    /// Input outside the mathematical domain of an operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// A quadrature or Monte Carlo step failed its own accuracy control.
    #[error("numerical error in {context}: {detail}")]
    Numerical { context: String, detail: String },

    /// Kernel table queried beyond its radial range.
    #[error("radius {radius} exceeds kernel table r_max = {r_max}; rebuild the table with r_max >= {radius}")]
    Range { radius: f64, r_max: f64 },

    /// Mesh or run configuration that cannot deliver the requested accuracy.
    #[error("configuration error: {0}")]
    Config(String),

    /// API misuse such as mismatched grids.
    #[error("usage error: {0}")]
    Usage(String),

    /// Malformed text input (tables, paths, configs).
    #[error("parse error at line {line}: {detail}")]
    Parse { line: usize, detail: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn numerical(context: impl Into<String>, detail: impl Into<String>) -> Self {
        Error::Numerical {
            context: context.into(),
            detail: detail.into(),
        }
    }
}
