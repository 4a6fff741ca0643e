//! Error taxonomy shared across the crate.

use thiserror::Error;

/// Errors produced by the numerical layers.
///
/// `Domain` marks invalid inputs to an individual operation, `Validation`
/// marks violated parameter-set invariants, `NonConvergence` carries the
/// partial result of a quadrature whose refinement estimate never reached the
/// requested tolerance, and `Numerical` marks integrity failures detected at
/// runtime (trace drift, failed precision escalation, ...).
#[derive(Debug, Error)]
pub enum CoreError {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid {field}: {constraint}")]
    Validation { field: String, constraint: String },

    #[error(
        "quadrature did not converge: refinement error {error_estimate:.3e} \
         exceeds rel_tol {rel_tol:.3e} (partial result attached)"
    )]
    NonConvergence {
        partial: Box<crate::spectrum::SpectrumResult>,
        error_estimate: f64,
        rel_tol: f64,
    },

    #[error("numerical integrity failure: {0}")]
    Numerical(String),
}

impl CoreError {
    pub fn domain(msg: impl Into<String>) -> Self {
        CoreError::Domain(msg.into())
    }

    pub fn validation(field: impl Into<String>, constraint: impl Into<String>) -> Self {
        CoreError::Validation {
            field: field.into(),
            constraint: constraint.into(),
        }
    }

    pub fn numerical(msg: impl Into<String>) -> Self {
        CoreError::Numerical(msg.into())
    }
}
