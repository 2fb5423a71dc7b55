use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// An argument lies outside the domain an operation is defined on.
    #[error("domain error: {0}")]
    Domain(String),

    #[error("shape mismatch: expected {expected:?}, got {actual:?}")]
    Shape { expected: [usize; 3], actual: [usize; 3] },

    /// The least-squares Gram matrix is numerically singular. `first` and
    /// `second` index the most collinear pair of columns, `second > first`.
    #[error(
        "degenerate geometry: columns {first} and {second} are nearly collinear \
         (condition estimate {condition:e})"
    )]
    DegenerateGeometry { first: usize, second: usize, condition: f64 },

    #[error("{0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub(crate) fn domain<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Domain(msg.into()))
}
