use alloc::string::String;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("{what}: argument {value} is outside the domain")]
    Domain { what: &'static str, value: f64 },

    /// A numerical routine could not reach its accuracy target. `achieved`
    /// carries the error estimate it did reach (NaN when unknown).
    #[error("{what} (achieved error estimate {achieved:e})")]
    Accuracy { what: &'static str, achieved: f64 },

    #[error("invalid input: {0}")]
    Validation(String),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("degenerate scenario: {0}")]
    Degenerate(String),

    #[error("singular matrix: {0}")]
    Singular(&'static str),

    #[error("no threshold in range")]
    NoThresholdInRange,
}
