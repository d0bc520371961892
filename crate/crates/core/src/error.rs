// SPDX-License-Identifier: Apache-2.0

use thiserror::Error;

/// Errors raised by the estimators, calculators and harness.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    Parameter(String),
    #[error("out of range: {0}")]
    Range(String),
    #[error("invalid state: {0}")]
    State(String),
    #[error("outside domain: {0}")]
    Domain(String),
    #[error("contract violation: {0}")]
    Contract(String),
    #[error("usage: {0}")]
    Usage(String),
    #[error("line {line}: {message}")]
    Data { line: usize, message: String },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn parameter(msg: impl Into<String>) -> Error {
    Error::Parameter(msg.into())
}

pub(crate) fn range(msg: impl Into<String>) -> Error {
    Error::Range(msg.into())
}

pub(crate) fn domain(msg: impl Into<String>) -> Error {
    Error::Domain(msg.into())
}

/// Checks that a stream value lies in the unit interval.
pub(crate) fn check_unit(x: f64) -> Result<()> {
    if (0.0..=1.0).contains(&x) {
        Ok(())
    } else {
        Err(range(format!("update {x} is outside [0, 1]")))
    }
}
