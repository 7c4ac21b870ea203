use thiserror::Error;

/// Errors raised by the numerical routines of this crate.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("quadrature did not converge in {context}: estimate {estimate:e}, error bound {error:e}")]
    NonConvergence {
        context: &'static str,
        estimate: f64,
        error: f64,
    },

    #[error("divergent integrand in {context}: {detail}")]
    Divergent {
        context: &'static str,
        detail: String,
    },

    #[error("numerical overflow in {context} after {samples} samples")]
    Overflow { context: &'static str, samples: u64 },
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        name,
        reason: reason.into(),
    }
}
