use thiserror::Error;

use crate::expr::{DomainError, ParseError};

/// Crate-wide error type.
///
/// Variants are grouped by how the CLI maps them to exit codes: input and
/// validation problems (exit 2) versus numerical domain problems encountered
/// while evaluating fields at a point (exit 3).
#[derive(Debug, Error)]
pub enum Error {
    #[error("{context}: {source}")]
    Parse {
        context: String,
        #[source]
        source: ParseError,
    },

    #[error("{context}: {source}")]
    Domain {
        context: String,
        #[source]
        source: DomainError,
    },

    #[error("metric is not positive definite at {point:?}: leading {order}x{order} minor is not positive")]
    NotPositiveDefinite { point: Vec<f64>, order: usize },

    #[error("b^2 = {bsq:.3e} at {point:?}: the conformal exponent k = ln(4/b^2) requires b^2 > 0")]
    BetaDegenerate { point: Vec<f64>, bsq: f64 },

    #[error("direction outside the conic domain at {point:?}: beta = {beta:.3e} <= {eps_beta:.1e} * alpha = {alpha:.3e}")]
    ConicDomain {
        point: Vec<f64>,
        alpha: f64,
        beta: f64,
        eps_beta: f64,
    },

    #[error("singular phi-machinery: {what} vanishes at s = {s:.6e}")]
    SingularPhi { what: &'static str, s: f64 },

    #[error("exponent m = {m} is not allowed: m must differ from 0 and -1 by more than 1e-12")]
    InvalidExponent { m: f64 },

    #[error("dimension mismatch: {what}")]
    DimensionMismatch { what: String },

    #[error("{0}")]
    Validation(String),

    #[error("sampling produced no admissible direction after {attempts} attempts at sample {sample}")]
    EmptySample { sample: usize, attempts: usize },

    #[error("sample {sample} at x = {point:?} failed: {source}")]
    SampleFailed {
        sample: usize,
        point: Vec<f64>,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Attach field-level context to an expression error.
    pub(crate) fn parse_in(context: impl Into<String>, source: ParseError) -> Self {
        Error::Parse {
            context: context.into(),
            source,
        }
    }

    pub(crate) fn domain_in(context: impl Into<String>, source: DomainError) -> Self {
        Error::Domain {
            context: context.into(),
            source,
        }
    }

    /// True for errors that arise from evaluating fields at a concrete point,
    /// as opposed to malformed input.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::Domain { .. }
                | Error::NotPositiveDefinite { .. }
                | Error::BetaDegenerate { .. }
                | Error::ConicDomain { .. }
                | Error::SingularPhi { .. }
                | Error::EmptySample { .. }
                | Error::SampleFailed { .. }
        )
    }
}
