//! Scalar Gauss-Markov sources over scalar Gaussian channels.
//!
//! With transmit powers `P_k = E[x_k²]`, the decoder's error is bounded below
//! by the distortion recursion
//! `Δ_k = (σ²_V + g² Δ_{k-1}) / (1 + P_k / σ²_W)`, and linear innovation
//! encoders attain the bound. The encoder therefore minimizes
//! `Σ β^k (Δ_k + λ P_k + b²)` over `P ≥ 0`.

use nalgebra::DMatrix;

use super::{LinearInnovationPolicy, StackelbergError};
use crate::model::GameSpec;

/// Scalar model parameters over the game horizon.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarParams {
    pub g: f64,
    /// Prior variances `σ²_M(k)`.
    pub sigma_m: Vec<f64>,
    /// Process-noise variances of the transitions `k -> k+1`.
    pub sigma_v: Vec<f64>,
    pub sigma_w: Vec<f64>,
    pub b: f64,
    pub lambda: f64,
    pub weights: Vec<f64>,
}

impl ScalarParams {
    pub fn from_spec(spec: &GameSpec) -> Result<Self, StackelbergError> {
        spec.validate()?;
        let source = spec
            .gauss_markov()
            .ok_or_else(|| StackelbergError::WrongGame("source must be Gauss-Markov".into()))?;
        let channel = spec
            .channel
            .as_ref()
            .ok_or_else(|| StackelbergError::WrongGame("a channel is required".into()))?;
        if source.dim() != 1 || channel.dim() != 1 {
            return Err(StackelbergError::WrongGame(format!(
                "scalar source and channel required (n = {}, p = {})",
                source.dim(),
                channel.dim()
            )));
        }
        let n = spec.horizon;
        Ok(ScalarParams {
            g: source.transition[(0, 0)],
            sigma_m: source.stage_covariances(n).iter().map(|c| c[(0, 0)]).collect(),
            sigma_v: (0..n).map(|k| source.process_noise(k)[(0, 0)]).collect(),
            sigma_w: (0..n).map(|k| channel.noise(k)[(0, 0)]).collect(),
            b: spec.bias[0],
            lambda: spec.lambda,
            weights: (0..n).map(|k| spec.stage_weight(k)).collect(),
        })
    }

    pub fn horizon(&self) -> usize {
        self.sigma_m.len()
    }
}

/// Per-stage distortion bounds and information quantities.
#[derive(Debug, Clone, PartialEq)]
pub struct DistortionTrace {
    pub delta: Vec<f64>,
    /// Pre-channel innovation variance `σ²_V + g² Δ_{k-1}` (`σ²_M0` at stage 0).
    pub delta_tilde: Vec<f64>,
    /// `½ log2(1 + P_k / σ²_W)`
    pub c_hat: Vec<f64>,
    /// Information about `m_k` already carried by earlier outputs.
    pub c_tilde: Vec<f64>,
    /// `C_k = C̃_k + Ĉ_k`, so that `Δ_k = σ²_M(k) 2^{-2 C_k}`.
    pub c: Vec<f64>,
    pub sigma_m: Vec<f64>,
}

fn check_powers(power: &[f64], horizon: usize) -> Result<(), StackelbergError> {
    if power.len() != horizon {
        return Err(StackelbergError::Argument(format!(
            "{} powers for horizon {horizon}",
            power.len()
        )));
    }
    if let Some(p) = power.iter().find(|p| !(p.is_finite() && **p >= 0.0)) {
        return Err(StackelbergError::Argument(format!("power {p} is not a finite nonnegative number")));
    }
    Ok(())
}

fn half_log2_ratio(num: f64, den: f64) -> f64 {
    if num == den {
        0.0
    } else {
        0.5 * (num / den).log2()
    }
}

fn trace_from(power: &[f64], sp: &ScalarParams) -> DistortionTrace {
    let n = sp.horizon();
    let mut t = DistortionTrace {
        delta: Vec::with_capacity(n),
        delta_tilde: Vec::with_capacity(n),
        c_hat: Vec::with_capacity(n),
        c_tilde: Vec::with_capacity(n),
        c: Vec::with_capacity(n),
        sigma_m: sp.sigma_m.clone(),
    };
    for k in 0..n {
        let prior = if k == 0 {
            sp.sigma_m[0]
        } else {
            sp.sigma_v[k - 1] + sp.g * sp.g * t.delta[k - 1]
        };
        let snr = power[k] / sp.sigma_w[k];
        let c_hat = 0.5 * snr.ln_1p() / std::f64::consts::LN_2;
        let c_tilde = if k == 0 { 0.0 } else { half_log2_ratio(sp.sigma_m[k], prior) };
        t.delta_tilde.push(prior);
        t.delta.push(prior / (1.0 + snr));
        t.c_hat.push(c_hat);
        t.c_tilde.push(c_tilde);
        t.c.push(c_tilde + c_hat);
    }
    t
}

/// Distortion bounds induced by the power allocation `power`.
pub fn distortion_recursion(power: &[f64], spec: &GameSpec) -> Result<DistortionTrace, StackelbergError> {
    let sp = ScalarParams::from_spec(spec)?;
    check_powers(power, sp.horizon())?;
    Ok(trace_from(power, &sp))
}

fn cost_from(power: &[f64], sp: &ScalarParams, trace: &DistortionTrace) -> f64 {
    (0..sp.horizon())
        .map(|k| sp.weights[k] * (trace.delta[k] + sp.lambda * power[k] + sp.b * sp.b))
        .sum()
}

/// `Σ β^k (Δ_k + λ P_k + b²)`.
pub fn lower_bound_cost(power: &[f64], spec: &GameSpec) -> Result<f64, StackelbergError> {
    let sp = ScalarParams::from_spec(spec)?;
    check_powers(power, sp.horizon())?;
    Ok(cost_from(power, &sp, &trace_from(power, &sp)))
}

/// Gradient of the lower-bound cost by a backward adjoint sweep.
fn gradient_adjoint(power: &[f64], sp: &ScalarParams, trace: &DistortionTrace) -> Vec<f64> {
    let n = sp.horizon();
    let mut grad = vec![0.0; n];
    // mu_l = dJ/dΔ_l including every later stage reached through Δ_l
    let mut mu = 0.0;
    for l in (0..n).rev() {
        mu = if l + 1 < n {
            sp.weights[l] + mu * sp.g * sp.g / (1.0 + power[l + 1] / sp.sigma_w[l + 1])
        } else {
            sp.weights[l]
        };
        let f = 1.0 + power[l] / sp.sigma_w[l];
        grad[l] = sp.weights[l] * sp.lambda - mu * trace.delta_tilde[l] / (sp.sigma_w[l] * f * f);
    }
    grad
}

/// Analytic gradient `∂J/∂P_k`.
pub fn lower_bound_gradient(power: &[f64], spec: &GameSpec) -> Result<Vec<f64>, StackelbergError> {
    let sp = ScalarParams::from_spec(spec)?;
    check_powers(power, sp.horizon())?;
    Ok(gradient_adjoint(power, &sp, &trace_from(power, &sp)))
}

/// The same gradient from the forward partials `∂Δ_l/∂P_k`.
pub fn lower_bound_gradient_forward(power: &[f64], spec: &GameSpec) -> Result<Vec<f64>, StackelbergError> {
    let sp = ScalarParams::from_spec(spec)?;
    check_powers(power, sp.horizon())?;
    let trace = trace_from(power, &sp);
    let n = sp.horizon();
    Ok((0..n)
        .map(|k| {
            let mut total = sp.weights[k] * sp.lambda;
            let mut d_prev = 0.0;
            for l in k..n {
                let f = 1.0 + power[l] / sp.sigma_w[l];
                let dp = if l == k { 1.0 } else { 0.0 };
                let d = sp.g * sp.g / f * d_prev - dp / sp.sigma_w[l] * trace.delta_tilde[l] / (f * f);
                total += sp.weights[l] * d;
                d_prev = d;
            }
            total
        })
        .collect())
}

/// `max_k (σ²_M(k)/σ²_W(k)) Σ_{i<N-k} g^{2i}` over the game horizon.
pub fn informativeness_threshold(spec: &GameSpec) -> Result<f64, StackelbergError> {
    let sp = ScalarParams::from_spec(spec)?;
    Ok(threshold_with_ratio(&sp, sp.g * sp.g))
}

fn threshold_with_ratio(sp: &ScalarParams, ratio: f64) -> f64 {
    let n = sp.horizon();
    (0..n)
        .map(|k| {
            let geometric: f64 = (0..n - k).map(|i| ratio.powi(i as i32)).sum();
            sp.sigma_m[k] / sp.sigma_w[k] * geometric
        })
        .fold(f64::NEG_INFINITY, f64::max)
}

/// Power level at and above which all-zero power minimizes the lower bound of
/// this particular spec; discounting shrinks the geometric sums to powers of
/// `β g²`.
pub fn zero_power_threshold(spec: &GameSpec) -> Result<f64, StackelbergError> {
    let sp = ScalarParams::from_spec(spec)?;
    let beta = spec.discount.unwrap_or(1.0);
    Ok(threshold_with_ratio(&sp, beta * sp.g * sp.g))
}

/// Infinite-horizon discounted threshold `sup_k (σ²_M(k)/σ²_W(k)) / (1 - β g²)`.
///
/// Returns `None` when `β g² >= 1`. Noise lists repeat their last entry
/// forever, so the supremum is taken over the listed stages plus the limit of
/// the variance sequence.
pub fn discounted_threshold(spec: &GameSpec) -> Result<Option<f64>, StackelbergError> {
    spec.validate()?;
    let beta = spec
        .discount
        .ok_or_else(|| StackelbergError::Argument("discount factor is not set".into()))?;
    let source = spec
        .gauss_markov()
        .ok_or_else(|| StackelbergError::WrongGame("source must be Gauss-Markov".into()))?;
    let channel = spec
        .channel
        .as_ref()
        .ok_or_else(|| StackelbergError::WrongGame("a channel is required".into()))?;
    if source.dim() != 1 || channel.dim() != 1 {
        return Err(StackelbergError::WrongGame("scalar source and channel required".into()));
    }
    let g = source.transition[(0, 0)];
    let g2 = g * g;
    if beta * g2 >= 1.0 {
        return Ok(None);
    }
    let factor = 1.0 / (1.0 - beta * g2);
    // past this stage both noise lists sit on their last entry
    let settled = source.noise_cov.len().max(channel.noise_cov.len());
    let mut var = source.initial_cov[(0, 0)];
    let mut sup: f64 = 0.0;
    for k in 0..=settled {
        sup = sup.max(var / channel.noise(k)[(0, 0)]);
        var = g2 * var + source.process_noise(k)[(0, 0)];
    }
    let v = source.process_noise(settled)[(0, 0)];
    let w = channel.noise(settled)[(0, 0)];
    let tail = if g2 < 1.0 {
        // monotone approach to the stationary variance
        v / (1.0 - g2) / w
    } else if v > 0.0 || (g2 > 1.0 && var > 0.0) {
        f64::INFINITY
    } else {
        var / w
    };
    Ok(Some(sup.max(tail) * factor))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PowerOptions {
    pub p_max: f64,
    /// Stop when the projected gradient's largest entry is below this.
    pub grad_tol: f64,
    pub max_iters: usize,
}

impl Default for PowerOptions {
    fn default() -> Self {
        PowerOptions {
            p_max: 1e6,
            grad_tol: 1e-10,
            max_iters: 2000,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StackelbergScalarSolution {
    pub power: Vec<f64>,
    pub trace: DistortionTrace,
    /// Encoder cost attained by the synthesized policies.
    pub j_lower: f64,
    /// Matching decoder cost `Σ β^k Δ_k`.
    pub j_d: f64,
    pub informative: bool,
    /// Some power sits on the `p_max` cap, which happens when `λ = 0`.
    pub capped: bool,
    /// Threshold that triggered the exact zero-power answer.
    pub threshold: f64,
    pub encoder_gains: Vec<f64>,
    pub decoder_gains: Vec<f64>,
    pub iterations: usize,
    pub projected_gradient: f64,
    transition: f64,
    sigma_w: Vec<f64>,
}

impl StackelbergScalarSolution {
    /// Linear innovation encoder and MMSE decoder attaining `j_lower`.
    pub fn policy(&self) -> LinearInnovationPolicy {
        let one = |x: f64| DMatrix::from_element(1, 1, x);
        LinearInnovationPolicy::new(
            one(self.transition),
            self.encoder_gains.iter().map(|&a| one(a)).collect(),
            &self.trace.delta_tilde.iter().map(|&s| one(s)).collect::<Vec<_>>(),
            &self.sigma_w.iter().map(|&w| one(w)).collect::<Vec<_>>(),
        )
        .expect("channel noise is positive")
    }
}

fn projected_gradient(x: &[f64], g: &[f64], p_max: f64) -> f64 {
    x.iter()
        .zip(g)
        .map(|(&xi, &gi)| ((xi - gi).clamp(0.0, p_max) - xi).abs())
        .fold(0.0, f64::max)
}

struct Run {
    x: Vec<f64>,
    f: f64,
    pg: f64,
    iterations: usize,
    history: Vec<f64>,
}

/// Projected BFGS on the box `[0, p_max]^N` with backtracking line search.
fn projected_bfgs(x0: Vec<f64>, sp: &ScalarParams, opts: &PowerOptions) -> Run {
    let n = x0.len();
    let eval = |x: &[f64]| {
        let t = trace_from(x, sp);
        (cost_from(x, sp, &t), gradient_adjoint(x, sp, &t))
    };
    let mut x = x0;
    let (mut f, mut g) = eval(&x);
    let mut h = DMatrix::<f64>::identity(n, n);
    let mut history = Vec::new();
    let mut iterations = 0;
    loop {
        let pg = projected_gradient(&x, &g, opts.p_max);
        history.push(pg);
        if pg < opts.grad_tol || iterations >= opts.max_iters {
            return Run { x, f, pg, iterations, history };
        }
        iterations += 1;
        // variables held at a bound by the gradient
        let active: Vec<bool> = (0..n)
            .map(|i| (x[i] <= 0.0 && g[i] > 0.0) || (x[i] >= opts.p_max && g[i] < 0.0))
            .collect();
        let mut d = vec![0.0; n];
        for i in (0..n).filter(|&i| !active[i]) {
            d[i] = -(0..n).filter(|&j| !active[j]).map(|j| h[(i, j)] * g[j]).sum::<f64>();
        }
        let mut slope: f64 = d.iter().zip(&g).map(|(a, b)| a * b).sum();
        if !(slope < 0.0) {
            h = DMatrix::identity(n, n);
            for i in 0..n {
                d[i] = if active[i] { 0.0 } else { -g[i] };
            }
            slope = d.iter().zip(&g).map(|(a, b)| a * b).sum();
        }
        // backtracking on the projected path
        let mut alpha = 1.0;
        let mut accepted = None;
        for _ in 0..80 {
            let trial: Vec<f64> = (0..n).map(|i| (x[i] + alpha * d[i]).clamp(0.0, opts.p_max)).collect();
            let (ft, gt) = eval(&trial);
            let decrease: f64 = g.iter().zip(trial.iter().zip(&x)).map(|(gi, (t, xi))| gi * (t - xi)).sum();
            let armijo = ft <= f + 1e-4 * decrease;
            // below rounding resolution of f, accept steps that shrink the gradient
            let flat = (ft - f).abs() <= 1e-14 * f.abs().max(1.0)
                && projected_gradient(&trial, &gt, opts.p_max) < projected_gradient(&x, &g, opts.p_max);
            if armijo || flat {
                accepted = Some((trial, ft, gt));
                break;
            }
            alpha *= 0.5;
        }
        let _ = slope;
        let Some((xn, fnew, gn)) = accepted else {
            let pg = projected_gradient(&x, &g, opts.p_max);
            return Run { x, f, pg, iterations, history };
        };
        let s: Vec<f64> = xn.iter().zip(&x).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = gn.iter().zip(&g).map(|(a, b)| a - b).collect();
        let sy: f64 = s.iter().zip(&y).map(|(a, b)| a * b).sum();
        let s_norm = s.iter().map(|v| v * v).sum::<f64>().sqrt();
        let y_norm = y.iter().map(|v| v * v).sum::<f64>().sqrt();
        if sy > 1e-12 * s_norm * y_norm {
            let sv = nalgebra::DVector::from_vec(s);
            let yv = nalgebra::DVector::from_vec(y);
            let rho = 1.0 / sy;
            let eye = DMatrix::<f64>::identity(n, n);
            let left = &eye - &sv * yv.transpose() * rho;
            let right = &eye - &yv * sv.transpose() * rho;
            h = &left * &h * &right + &sv * sv.transpose() * rho;
        }
        x = xn;
        f = fnew;
        g = gn;
    }
}

fn synthesize(
    power: Vec<f64>,
    sp: &ScalarParams,
    threshold: f64,
    iterations: usize,
    projected_gradient: f64,
    p_max: f64,
) -> StackelbergScalarSolution {
    let trace = trace_from(&power, sp);
    let j_lower = cost_from(&power, sp, &trace);
    let j_d = (0..sp.horizon()).map(|k| sp.weights[k] * trace.delta[k]).sum();
    let encoder_gains: Vec<f64> = power
        .iter()
        .zip(&trace.delta_tilde)
        .map(|(&p, &s)| if p > 0.0 && s > 0.0 { (p / s).sqrt() } else { 0.0 })
        .collect();
    let decoder_gains = encoder_gains
        .iter()
        .zip(&trace.delta_tilde)
        .zip(&sp.sigma_w)
        .map(|((&a, &s), &w)| a * s / (a * a * s + w))
        .collect();
    StackelbergScalarSolution {
        informative: power.iter().any(|&p| p > 0.0),
        capped: power.iter().any(|&p| p >= p_max),
        power,
        trace,
        j_lower,
        j_d,
        threshold,
        encoder_gains,
        decoder_gains,
        iterations,
        projected_gradient,
        transition: sp.g,
        sigma_w: sp.sigma_w.clone(),
    }
}

/// Minimize the lower-bound cost over nonnegative powers and synthesize the
/// linear policies that attain it.
///
/// At or above the zero-power threshold the answer is `P = 0` exactly.
/// Otherwise projected BFGS runs from all-zero power and from prior-matched
/// power `P_k = σ²_M(k)` and the lower final cost wins.
pub fn optimize_power(spec: &GameSpec, opts: &PowerOptions) -> Result<StackelbergScalarSolution, StackelbergError> {
    let sp = ScalarParams::from_spec(spec)?;
    if !(opts.p_max > 0.0) {
        return Err(StackelbergError::Argument("p_max must be positive".into()));
    }
    let threshold = zero_power_threshold(spec)?;
    let n = sp.horizon();
    if sp.lambda >= threshold {
        return Ok(synthesize(vec![0.0; n], &sp, threshold, 0, 0.0, opts.p_max));
    }
    if sp.lambda == 0.0 {
        // every distortion keeps falling with power, so the cap binds
        return Ok(synthesize(vec![opts.p_max; n], &sp, threshold, 0, 0.0, opts.p_max));
    }
    let starts = [
        vec![0.0; n],
        sp.sigma_m.iter().map(|&s| s.min(opts.p_max)).collect::<Vec<_>>(),
    ];
    let runs: Vec<Run> = starts
        .into_iter()
        .map(|x0| projected_bfgs(x0, &sp, opts))
        .collect();
    let best = runs
        .iter()
        .filter(|r| r.pg < opts.grad_tol)
        .min_by(|a, b| a.f.total_cmp(&b.f));
    match best {
        Some(r) => Ok(synthesize(r.x.clone(), &sp, threshold, r.iterations, r.pg, opts.p_max)),
        None => Err(StackelbergError::NoConvergence {
            best_gradient: runs.iter().map(|r| r.pg).fold(f64::INFINITY, f64::min),
            trace: runs.into_iter().map(|r| r.history).collect(),
        }),
    }
}
