//! Brute-force reference implementations for testing `wica`.
//!
//! Nothing here shares code with the library it checks: inputs are plain
//! nested `Vec`s, sums run in naive loop order, and random data comes from a
//! private generator.

pub mod assignment;
pub mod calibration;
pub mod diff;
pub mod linalg;
pub mod quadrature;
pub mod sampler;
pub mod stats;

use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum OracleError {
    #[error("problem too large for exhaustive search: {0}")]
    TooLarge(String),
    #[error("non-finite function value at coordinate {0}")]
    NonFinite(usize),
    #[error("quadrature did not converge: refinement changed result by {0:e}")]
    NotConverged(f64),
    #[error("invalid input: {0}")]
    Invalid(String),
}

pub type Matrix = Vec<Vec<f64>>;
