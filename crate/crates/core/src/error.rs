use thiserror::Error;

/// Errors raised by the toolkit.
#[derive(Debug, Error)]
pub enum Error {
    /// A constructor was handed values that violate the type's invariants.
    #[error("invalid {what}: {reason}")]
    Invalid { what: &'static str, reason: String },

    /// A frequency fell outside the range a dispersion branch is allowed to extrapolate to.
    #[error("{branch} branch evaluated at {omega:e} rad/s, outside the allowed range {lo:e}..{hi:e} rad/s")]
    OutOfRange {
        branch: &'static str,
        omega: f64,
        lo: f64,
        hi: f64,
    },

    /// A numerical routine could not produce a meaningful result.
    #[error("{op}: {reason}")]
    Numeric { op: &'static str, reason: String },

    #[error("shape mismatch in {op}: {reason}")]
    Shape { op: &'static str, reason: String },

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn invalid(what: &'static str, reason: impl Into<String>) -> Self {
        Error::Invalid {
            what,
            reason: reason.into(),
        }
    }

    pub(crate) fn numeric(op: &'static str, reason: impl Into<String>) -> Self {
        Error::Numeric {
            op,
            reason: reason.into(),
        }
    }

    pub(crate) fn shape(op: &'static str, reason: impl Into<String>) -> Self {
        Error::Shape {
            op,
            reason: reason.into(),
        }
    }

    /// True for errors that originate from reading or writing files.
    pub fn is_io(&self) -> bool {
        matches!(self, Error::Io(_))
            || matches!(self, Error::Csv(e) if e.is_io_error())
            || matches!(self, Error::Json(e) if e.is_io())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
