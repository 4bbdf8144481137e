//! Nash equilibria of Gaussian signaling games within the affine policy class.
//!
//! Against an affine encoder the decoder's best response is the linear MMSE
//! estimator, and against an affine decoder the encoder's best response is
//! affine again, so alternating exact best responses never leaves the class.
//! Encoder best responses are closed-form for horizons up to two.

mod classify;
mod joint;
mod profile;

use nalgebra::DMatrix;
use thiserror::Error;

pub use classify::{classify_two_stage, Regime, RegimeThresholds, TwoStageRegime};
pub use profile::{AffinePolicyProfile, DecoderStage, EncoderStage};

use crate::exec::{self, Execution};
use crate::linalg;
use crate::model::{ChannelModel, GameSpec, GaussMarkovSource, ModelError};
use crate::rng::SampleRng;
use joint::JointModel;

/// Encoder slopes above this magnitude count as signaling.
pub const INFORMATIVE_TOL: f64 = 1e-7;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NashError {
    #[error("not a Gaussian signaling game: {0}")]
    WrongGame(String),
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("encoder best response is implemented for horizons up to 2 (got {0})")]
    HorizonTooLong(usize),
    #[error("stage {stage}: output covariance is singular")]
    Singular { stage: usize },
    #[error("stage {stage}: encoder cost is not strictly convex (Hessian not positive definite)")]
    UnboundedBelow { stage: usize },
    #[error("no fixed point after {iterations} iterations (last change {last_change:e})")]
    Diverged {
        iterations: usize,
        last_change: f64,
        /// Largest coefficient change of every iteration.
        trace: Vec<f64>,
    },
    #[error("parameters fall outside every regime guard (lambda {lambda}, q0 {q0}, q1 {q1})")]
    UncoveredRegime { lambda: f64, q0: f64, q1: f64 },
    #[error(transparent)]
    Model(#[from] ModelError),
}

fn signaling_parts(spec: &GameSpec) -> Result<(&GaussMarkovSource, &ChannelModel), NashError> {
    spec.validate()?;
    let source = spec
        .gauss_markov()
        .ok_or_else(|| NashError::WrongGame("source must be Gauss-Markov".into()))?;
    let channel = spec
        .channel
        .as_ref()
        .ok_or_else(|| NashError::WrongGame("a channel is required".into()))?;
    Ok((source, channel))
}

fn dims(spec: &GameSpec) -> Result<(usize, usize), NashError> {
    let (s, c) = signaling_parts(spec)?;
    Ok((s.dim(), c.dim()))
}

/// Linear MMSE decoder `u_k = E[m_k | y_0..y_k]` against an affine encoder.
pub fn decoder_best_response(
    encoder: &[EncoderStage],
    spec: &GameSpec,
) -> Result<Vec<DecoderStage>, NashError> {
    let (source, channel) = signaling_parts(spec)?;
    let (n, p) = (source.dim(), channel.dim());
    AffinePolicyProfile {
        encoder: encoder.to_vec(),
        decoder: (0..spec.horizon).map(|k| DecoderStage::zeros(k, n, p)).collect(),
    }
    .validate(spec.horizon, n, p)?;
    let joint = JointModel::new(spec, source, channel, encoder);
    (0..spec.horizon)
        .map(|k| {
            let ys = joint.outputs_through(k);
            let cov_y = linalg::symmetrize(&joint.cov(&ys, &ys));
            let cov_my = joint.cov(&joint.m[k], &ys);
            let chol = cov_y.cholesky().ok_or(NashError::Singular { stage: k })?;
            // D = Cov(m, Y) Cov(Y)^{-1}
            let gain = chol.solve(&cov_my.transpose()).transpose();
            let e = &joint.m[k].mean - &gain * &ys.mean;
            let d = (0..=k)
                .map(|i| gain.columns(i * p, p).into_owned())
                .collect();
            Ok(DecoderStage { d, e })
        })
        .collect()
}

fn positive_definite_inverse(h: DMatrix<f64>, stage: usize) -> Result<DMatrix<f64>, NashError> {
    linalg::symmetrize(&h)
        .cholesky()
        .map(|c| c.inverse())
        .ok_or(NashError::UnboundedBelow { stage })
}

/// Exact encoder best response to an affine decoder, by backward induction.
pub fn encoder_best_response(
    decoder: &[DecoderStage],
    spec: &GameSpec,
) -> Result<Vec<EncoderStage>, NashError> {
    let (source, channel) = signaling_parts(spec)?;
    let (n, p) = (source.dim(), channel.dim());
    let horizon = spec.horizon;
    if horizon > 2 {
        return Err(NashError::HorizonTooLong(horizon));
    }
    AffinePolicyProfile {
        encoder: (0..horizon).map(|k| EncoderStage::zeros(k, n, p)).collect(),
        decoder: decoder.to_vec(),
    }
    .validate(horizon, n, p)?;
    let lambda_i = DMatrix::<f64>::identity(p, p) * spec.lambda;
    let b = &spec.bias;

    // Last stage: x = R Dᵀ (m - Σ_{i<last} D_i y_i - E - b).
    let last = horizon - 1;
    let d_last = &decoder[last].d[last];
    let r = positive_definite_inverse(d_last.transpose() * d_last + &lambda_i, last)?;
    let r_dt = &r * d_last.transpose();
    let e_b_last = &decoder[last].e + b;
    let mut last_stage = EncoderStage::zeros(last, n, p);
    last_stage.a[last] = r_dt.clone();
    for i in 0..last {
        last_stage.b[i] = -&r_dt * &decoder[last].d[i];
    }
    last_stage.c = -&r_dt * &e_b_last;
    if horizon == 1 {
        return Ok(vec![last_stage]);
    }

    // Stage 0 adds the minimized stage-1 cost eᵀ S e, S = I - D11 R D11ᵀ,
    // where e = G m0 + v0 - D10 (x0 + w0) - E1 - b.
    let beta = spec.stage_weight(1) / spec.stage_weight(0);
    let s = DMatrix::<f64>::identity(n, n) - d_last * &r_dt;
    let d00 = &decoder[0].d[0];
    let d10 = &decoder[1].d[0];
    let g = &source.transition;
    let h = d00.transpose() * d00 + &lambda_i + d10.transpose() * &s * d10 * beta;
    let h_inv = positive_definite_inverse(h, 0)?;
    let e_b0 = &decoder[0].e + b;
    let first = EncoderStage {
        a: vec![&h_inv * (d00.transpose() + d10.transpose() * &s * g * beta)],
        b: Vec::new(),
        c: -&h_inv * (d00.transpose() * &e_b0 + d10.transpose() * &s * &e_b_last * beta),
    };
    Ok(vec![first, last_stage])
}

/// Exact `(J_e, J_d)` of an affine profile.
pub fn expected_costs(profile: &AffinePolicyProfile, spec: &GameSpec) -> Result<(f64, f64), NashError> {
    let (source, channel) = signaling_parts(spec)?;
    profile.validate(spec.horizon, source.dim(), channel.dim())?;
    let joint = JointModel::new(spec, source, channel, &profile.encoder);
    Ok(joint.costs(spec, &profile.decoder))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IterationOptions {
    pub max_iters: usize,
    /// Fixed point when the largest coefficient change falls below this.
    pub tol: f64,
    /// Weight on the new best response, in (0, 1].
    pub damping: f64,
}

impl Default for IterationOptions {
    fn default() -> Self {
        IterationOptions {
            max_iters: 10_000,
            tol: 1e-12,
            damping: 0.5,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NashSolution {
    pub profile: AffinePolicyProfile,
    pub j_e: f64,
    pub j_d: f64,
    pub informative: bool,
    pub iterations: usize,
    /// Largest change the decoder's own best response would make.
    pub decoder_residual: f64,
    /// Largest change the encoder's own best response would make.
    pub encoder_residual: f64,
}

fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

fn blend(old: &[f64], new: &[f64], theta: f64) -> Vec<f64> {
    old.iter().zip(new).map(|(o, n)| o + theta * (n - o)).collect()
}

/// Damped alternation of decoder and encoder best responses.
pub fn best_response_iteration(
    spec: &GameSpec,
    init: &AffinePolicyProfile,
    opts: &IterationOptions,
) -> Result<NashSolution, NashError> {
    let (n, p) = dims(spec)?;
    if spec.horizon > 2 {
        return Err(NashError::HorizonTooLong(spec.horizon));
    }
    init.validate(spec.horizon, n, p)?;
    if !(opts.damping > 0.0 && opts.damping <= 1.0) {
        return Err(NashError::Shape(format!(
            "damping must lie in (0, 1] (got {})",
            opts.damping
        )));
    }
    let mut profile = init.clone();
    let mut trace = Vec::new();
    for iter in 1..=opts.max_iters {
        let mut next = profile.clone();
        next.decoder = decoder_best_response(&profile.encoder, spec)?;
        let dec_new = next.decoder_params();
        let dec_old = profile.decoder_params();
        next.set_decoder_params(&blend(&dec_old, &dec_new, opts.damping));
        let enc_new = AffinePolicyProfile {
            encoder: encoder_best_response(&next.decoder, spec)?,
            decoder: Vec::new(),
        }
        .encoder_params();
        let enc_old = profile.encoder_params();
        next.set_encoder_params(&blend(&enc_old, &enc_new, opts.damping));
        let change = max_abs_diff(&dec_old, &dec_new).max(max_abs_diff(&enc_old, &enc_new));
        trace.push(change);
        profile = next;
        if change < opts.tol {
            return finish(spec, profile, iter);
        }
    }
    Err(NashError::Diverged {
        iterations: opts.max_iters,
        last_change: trace.last().copied().unwrap_or(f64::NAN),
        trace,
    })
}

/// Residuals of both one-sided best responses at `profile`.
pub fn best_response_residuals(
    spec: &GameSpec,
    profile: &AffinePolicyProfile,
) -> Result<(f64, f64), NashError> {
    let mut dec = profile.clone();
    dec.decoder = decoder_best_response(&profile.encoder, spec)?;
    let mut enc = profile.clone();
    enc.encoder = encoder_best_response(&profile.decoder, spec)?;
    Ok((
        max_abs_diff(&dec.decoder_params(), &profile.decoder_params()),
        max_abs_diff(&enc.encoder_params(), &profile.encoder_params()),
    ))
}

fn finish(spec: &GameSpec, profile: AffinePolicyProfile, iterations: usize) -> Result<NashSolution, NashError> {
    let (decoder_residual, encoder_residual) = best_response_residuals(spec, &profile)?;
    let (j_e, j_d) = expected_costs(&profile, spec)?;
    Ok(NashSolution {
        informative: profile.max_encoder_slope() > INFORMATIVE_TOL,
        profile,
        j_e,
        j_d,
        iterations,
        decoder_residual,
        encoder_residual,
    })
}

/// Random profile with entries uniform in `[-scale, scale]`.
pub fn random_profile(horizon: usize, n: usize, p: usize, scale: f64, rng: &mut SampleRng) -> AffinePolicyProfile {
    let mut profile = AffinePolicyProfile::zeros(horizon, n, p);
    let enc: Vec<f64> = (0..profile.encoder_params().len())
        .map(|_| scale * (2.0 * rng.uniform() - 1.0))
        .collect();
    let dec: Vec<f64> = (0..profile.decoder_params().len())
        .map(|_| scale * (2.0 * rng.uniform() - 1.0))
        .collect();
    profile.set_encoder_params(&enc);
    profile.set_decoder_params(&dec);
    profile
}

/// Run [`best_response_iteration`] from `starts` seeded random profiles.
/// Results are in start order.
pub fn multistart_iteration(
    spec: &GameSpec,
    starts: usize,
    seed: u64,
    opts: &IterationOptions,
    execution: Execution,
) -> Result<Vec<Result<NashSolution, NashError>>, NashError> {
    let (n, p) = dims(spec)?;
    Ok(exec::map_indexed(execution, starts, starts.max(1), |s| {
        let mut rng = SampleRng::new(seed, s as u64);
        let init = random_profile(spec.horizon, n, p, 2.0, &mut rng);
        best_response_iteration(spec, &init, opts)
    }))
}

/// Stage-`k` decoder gain matrix on `(y_0..y_k)` as one block row.
pub fn decoder_gain(stage: &DecoderStage) -> DMatrix<f64> {
    let n = stage.e.len();
    let p = stage.d.first().map_or(0, |d| d.ncols());
    let mut out = DMatrix::zeros(n, p * stage.d.len());
    for (i, d) in stage.d.iter().enumerate() {
        out.columns_mut(i * p, p).copy_from(d);
    }
    out
}
