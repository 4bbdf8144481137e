//! Stackelberg signaling: the encoder commits first and the decoder answers
//! with the posterior mean.
//!
//! [`scalar`] handles scalar Gauss-Markov sources over scalar channels through
//! the distortion recursion and its lower-bound cost. [`vector`] solves the
//! matrix dynamic program for vector sources under linear innovation encoders.
//! Both synthesize a [`LinearInnovationPolicy`] that can be simulated.

mod linear;
pub mod scalar;
pub mod vector;

use thiserror::Error;

pub use linear::LinearInnovationPolicy;

use crate::linalg::LinalgError;
use crate::model::ModelError;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum StackelbergError {
    #[error("wrong game: {0}")]
    WrongGame(String),
    #[error("invalid argument: {0}")]
    Argument(String),
    #[error("optimizer did not converge (best projected gradient {best_gradient:e})")]
    NoConvergence {
        best_gradient: f64,
        /// Projected-gradient norm per iteration of every start.
        trace: Vec<Vec<f64>>,
    },
    #[error("{0} must be diagonal")]
    NonDiagonal(&'static str),
    #[error("degenerate problem: {0}")]
    Degenerate(String),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error(transparent)]
    Model(#[from] ModelError),
}
