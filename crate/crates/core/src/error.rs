use thiserror::Error;

/// Errors produced by the library.
#[derive(Debug, Error)]
pub enum Error {
    /// Inconsistent grid, parameters or configuration.
    #[error("configuration error: {0}")]
    Config(String),

    /// A field violates one of its structural invariants.
    #[error("invariant violation: {0}")]
    Invariant(String),

    /// A shell index or exponent lies outside the admissible range.
    #[error("range error: {0}")]
    Range(String),

    /// A ratio was requested whose denominator vanishes.
    #[error("undefined ratio: {0}")]
    UndefinedRatio(String),

    /// The time step violates the CFL bound.
    #[error("time step {dt} exceeds the CFL bound; admissible dt <= {admissible}")]
    StepSize { dt: f64, admissible: f64 },

    /// The integration produced non-finite values.
    #[error("numerical divergence; last good time t = {last_good_time}")]
    Divergence { last_good_time: f64 },

    /// Argument outside the domain of a closed-form expression.
    #[error("domain error: {0}")]
    Domain(String),

    /// Least-squares fit could not be performed.
    #[error("fit error: {0}")]
    Fit(String),

    /// Malformed input file.
    #[error("format error: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
