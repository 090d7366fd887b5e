use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// An argument is outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// A requested noise-power reduction lies below what any mode temperature
    /// can produce with the given receiver.
    #[error("ΔP = {value_db:.6} dB is outside the reachable range; the floor is {floor_db:.6} dB")]
    OutOfRange { value_db: f64, floor_db: f64 },

    #[error("time step {dt_s:e} s is too coarse; at most {required_dt_s:e} s is required")]
    StepTooCoarse { dt_s: f64, required_dt_s: f64 },

    #[error("degenerate fit: {0}")]
    DegenerateFit(String),

    #[error("fit did not converge")]
    NotConverged,

    #[error("malformed data at line {line}: {message}")]
    Format { line: usize, message: String },

    #[error("i/o error: {0}")]
    Io(String),
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

/// Fails with a domain error unless `value` is finite and non-negative.
pub(crate) fn ensure_non_negative(name: &str, value: f64) -> Result<()> {
    if value.is_finite() && value >= 0.0 {
        Ok(())
    } else {
        Err(Error::domain(format!("{name} must be finite and >= 0, got {value}")))
    }
}

/// Fails with a domain error unless `value` is finite and strictly positive.
pub(crate) fn ensure_positive(name: &str, value: f64) -> Result<()> {
    if value.is_finite() && value > 0.0 {
        Ok(())
    } else {
        Err(Error::domain(format!("{name} must be finite and > 0, got {value}")))
    }
}
