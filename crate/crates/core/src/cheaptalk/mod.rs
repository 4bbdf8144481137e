//! Scalar and multi-dimensional cheap talk.
//!
//! Quantized equilibria are computed by alternating the two exact best
//! responses: the decoder plays the conditional mean of each bin, and each
//! boundary moves to the point where the encoder is indifferent between the two
//! neighbouring actions, `a_i = (u_i + u_{i+1}) / 2 + b`.

mod multidim;
mod quantizer;
mod repeated;

use thiserror::Error;

pub use multidim::{stackelberg_cheaptalk, verify_multidim_pair, RevealingSolution};
pub use quantizer::{
    max_bins, solve_multistart, solve_quantized, verify_equilibrium, Collapse,
    EquilibriumCertificate, QuantizerDecoder, QuantizerEncoder, QuantizerPolicy, SolveOptions,
    SolveOutcome,
};
pub use repeated::{group_into_classes, solve_repeated_iid, RepeatedEquilibrium, StageCostClasses};

use crate::model::ModelError;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CheapTalkError {
    #[error("invalid argument: {0}")]
    Argument(String),
    #[error("policy does not cover the source support: {0}")]
    Coverage(String),
    #[error("bias is zero; the number of bins is unbounded")]
    Unbounded,
    #[error("source support is unbounded")]
    UnboundedSupport,
    #[error("cheap-talk solver called on a game with a channel")]
    WrongGame,
    #[error("stage {stage} failed verification: {detail}")]
    Verification { stage: usize, detail: String },
    #[error(transparent)]
    Model(#[from] ModelError),
}
