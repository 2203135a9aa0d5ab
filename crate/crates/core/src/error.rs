//! Typed diagnostics for every failure path of the differentiation API.
//!
//! Errors always name the operator and backend they originate from, plus
//! whatever shape or primitive detail is available at the failure site.
//! There is no silent fallback between error categories: an unsupported
//! operator never degrades into a shape error and vice versa.

use crate::fallback::Op;
use thiserror::Error;

/// Result alias used throughout the crate.
pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// The backend (including its fallback chain) cannot realize the operator.
    #[error("operator `{op}` is unsupported on backend `{backend}`: {reason}")]
    UnsupportedOperator {
        op: Op,
        backend: String,
        reason: String,
    },

    /// An input, output, seed or context does not have the declared shape.
    #[error("shape mismatch in `{op}` on backend `{backend}`: {what}: expected {expected}, got {got}")]
    ShapeMismatch {
        op: Op,
        backend: String,
        what: String,
        expected: usize,
        got: usize,
    },

    /// A Preparation was used with a different operator, backend or signature
    /// than it was built for.
    #[error("preparation mismatch in `{op}` on backend `{backend}`: {detail}")]
    PreparationMismatch {
        op: Op,
        backend: String,
        detail: String,
    },

    /// The function (or a perturbed evaluation of it) produced NaN or Inf.
    #[error("non-finite result in `{op}` on backend `{backend}`: {detail}")]
    NonFiniteResult {
        op: Op,
        backend: String,
        detail: String,
    },

    /// The function applied a primitive the backend has no rule for.
    #[error("unsupported primitive `{primitive}` on backend `{backend}` while executing `{op}`")]
    UnsupportedPrimitive {
        op: Op,
        backend: String,
        primitive: &'static str,
    },

    /// A recorded tape was replayed at an input where a comparison guard
    /// resolves differently than it did at recording time.
    #[error("trace escape in `{op}` on backend `{backend}`: {detail}")]
    TraceEscape {
        op: Op,
        backend: String,
        detail: String,
    },
}

impl Error {
    pub fn shape(op: Op, backend: &str, what: &str, expected: usize, got: usize) -> Self {
        Error::ShapeMismatch {
            op,
            backend: backend.to_string(),
            what: what.to_string(),
            expected,
            got,
        }
    }

    pub fn unsupported(op: Op, backend: &str, reason: impl Into<String>) -> Self {
        Error::UnsupportedOperator {
            op,
            backend: backend.to_string(),
            reason: reason.into(),
        }
    }

    pub fn prep_mismatch(op: Op, backend: &str, detail: impl Into<String>) -> Self {
        Error::PreparationMismatch {
            op,
            backend: backend.to_string(),
            detail: detail.into(),
        }
    }

    pub fn non_finite(op: Op, backend: &str, detail: impl Into<String>) -> Self {
        Error::NonFiniteResult {
            op,
            backend: backend.to_string(),
            detail: detail.into(),
        }
    }
}
