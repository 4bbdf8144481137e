//! Equilibrium computation for multi-stage quadratic cheap-talk and Gaussian
//! signaling games.
//!
//! The crate is organized around a single game description ([`GameSpec`]) and
//! a set of solvers that consume it:
//!
//! - [`cheaptalk`]: quantized equilibria of scalar cheap
//!   talk, their certificates, the repeated i.i.d. product construction, the
//!   multi-dimensional half-distance test and the fully revealing leader-follower
//!   solution.
//! - [`nash`]: best-response dynamics inside the affine policy class for
//!   Gaussian signaling, plus the closed-form two-stage informativeness regimes.
//! - [`stackelberg::scalar`]: distortion recursion, lower-bound cost and power
//!   allocation for scalar Gauss-Markov sources, with informativeness thresholds.
//! - [`stackelberg::vector`]: the backward matrix dynamic program for vector
//!   sources under linear innovation encoders.
//! - [`montecarlo`]: seeded, chunk-parallel cost estimation used to cross-check
//!   every analytic cost above.
//!
//! Monte Carlo and multi-start work runs on rayon when the `parallel` feature is
//! enabled (the default) and falls back to a sequential loop otherwise; results
//! are bit-identical either way.

pub mod cheaptalk;
pub mod exec;
pub mod linalg;
pub mod model;
pub mod montecarlo;
pub mod nash;
pub mod policy;
pub mod rng;
pub mod selftest;
pub mod stackelberg;

pub use exec::Execution;
pub use model::{
    eval_decoder_cost, eval_encoder_cost, ChannelModel, GameSpec, GaussMarkovSource,
    GriddedDensity, ModelError, ScalarSource, Source, Trajectory,
};
pub use policy::{sample_trajectory, Decoder, Encoder, TrajectorySampler};
