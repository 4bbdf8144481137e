//! Game description shared by every solver: sources, channels, the game
//! specification itself, realized trajectories and the two cost functionals.

use nalgebra::{DMatrix, DVector};
use statrs::function::erf::{erfc, erfc_inv};
use thiserror::Error;

use crate::linalg;

const SYMMETRY_TOL: f64 = 1e-12;
const PSD_TOL: f64 = 1e-10;
const NORMALIZATION_TOL: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("invalid source: {0}")]
    InvalidSource(String),
    #[error("invalid channel: {0}")]
    InvalidChannel(String),
    #[error("invalid game: {0}")]
    InvalidGame(String),
    #[error("shape mismatch: {0}")]
    Shape(String),
}

/// Piecewise-linear density on an ascending grid.
///
/// Probabilities and moments are exact integrals of the linear interpolant,
/// which coincides with the trapezoidal rule on the grid nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct GriddedDensity {
    grid: Vec<f64>,
    density: Vec<f64>,
    cumulative: Vec<f64>,
}

impl GriddedDensity {
    pub fn new(grid: Vec<f64>, density: Vec<f64>) -> Result<Self, ModelError> {
        if grid.len() < 2 || grid.len() != density.len() {
            return Err(ModelError::InvalidSource(format!(
                "gridded density needs matching grid/density of length >= 2 (got {} and {})",
                grid.len(),
                density.len()
            )));
        }
        if grid.windows(2).any(|w| !(w[1] > w[0])) || grid.iter().any(|g| !g.is_finite()) {
            return Err(ModelError::InvalidSource(
                "grid must be finite and strictly ascending".into(),
            ));
        }
        if density.iter().any(|d| !(d.is_finite() && *d >= 0.0)) {
            return Err(ModelError::InvalidSource(
                "density values must be finite and nonnegative".into(),
            ));
        }
        let cumulative = cumulative_trapezoid(&grid, &density);
        let total = *cumulative.last().unwrap();
        if (total - 1.0).abs() > NORMALIZATION_TOL {
            return Err(ModelError::InvalidSource(format!(
                "density integrates to {total}, expected 1"
            )));
        }
        Ok(GriddedDensity {
            grid,
            density,
            cumulative,
        })
    }

    /// Rescale arbitrary nonnegative weights so the trapezoidal integral is 1.
    pub fn normalized(grid: Vec<f64>, weights: Vec<f64>) -> Result<Self, ModelError> {
        if grid.len() < 2 || grid.len() != weights.len() {
            return Err(ModelError::InvalidSource(
                "grid and weights must match and have length >= 2".into(),
            ));
        }
        let total = *cumulative_trapezoid(&grid, &weights).last().unwrap();
        if !(total > 0.0) {
            return Err(ModelError::InvalidSource("weights have zero mass".into()));
        }
        let density = weights.iter().map(|w| w / total).collect();
        GriddedDensity::new(grid, density)
    }

    pub fn grid(&self) -> &[f64] {
        &self.grid
    }

    pub fn density(&self) -> &[f64] {
        &self.density
    }

    fn moments(&self, lo: f64, hi: f64) -> [f64; 3] {
        let mut acc = [0.0; 3];
        let first = *self.grid.first().unwrap();
        let last = *self.grid.last().unwrap();
        let lo = lo.max(first);
        let hi = hi.min(last);
        if !(hi > lo) {
            return acc;
        }
        for i in 0..self.grid.len() - 1 {
            let (x0, x1) = (self.grid[i], self.grid[i + 1]);
            let a = lo.max(x0);
            let b = hi.min(x1);
            if b <= a {
                continue;
            }
            // density = c0 + s * x on this cell
            let s = (self.density[i + 1] - self.density[i]) / (x1 - x0);
            let c0 = self.density[i] - s * x0;
            for (j, slot) in acc.iter_mut().enumerate() {
                let p = j as i32;
                let anti = |x: f64| {
                    c0 * x.powi(p + 1) / (p + 1) as f64 + s * x.powi(p + 2) / (p + 2) as f64
                };
                *slot += anti(b) - anti(a);
            }
        }
        acc
    }

    fn cdf(&self, x: f64) -> f64 {
        let first = *self.grid.first().unwrap();
        let last = *self.grid.last().unwrap();
        if x <= first {
            return 0.0;
        }
        if x >= last {
            return 1.0;
        }
        let cum = &self.cumulative;
        let i = self.grid.partition_point(|&g| g <= x) - 1;
        let t = x - self.grid[i];
        let s = (self.density[i + 1] - self.density[i]) / (self.grid[i + 1] - self.grid[i]);
        cum[i] + self.density[i] * t + 0.5 * s * t * t
    }

    fn quantile(&self, p: f64) -> f64 {
        let cum = &self.cumulative;
        let total = *cum.last().unwrap();
        let target = p.clamp(0.0, 1.0) * total;
        let n = self.grid.len();
        let mut i = cum.partition_point(|&c| c < target).saturating_sub(1);
        if i >= n - 1 {
            i = n - 2;
        }
        let r = target - cum[i];
        let width = self.grid[i + 1] - self.grid[i];
        let s = (self.density[i + 1] - self.density[i]) / width;
        let p0 = self.density[i];
        // solve s/2 t^2 + p0 t = r for t in [0, width]
        let disc = (p0 * p0 + 2.0 * s * r).max(0.0);
        let denom = p0 + disc.sqrt();
        let t = if denom > 0.0 { 2.0 * r / denom } else { 0.0 };
        self.grid[i] + t.clamp(0.0, width)
    }
}

fn cumulative_trapezoid(grid: &[f64], density: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(grid.len());
    let mut acc = 0.0;
    out.push(0.0);
    for i in 0..grid.len() - 1 {
        acc += 0.5 * (density[i] + density[i + 1]) * (grid[i + 1] - grid[i]);
        out.push(acc);
    }
    out
}

/// A scalar source distribution, used for cheap-talk games.
#[derive(Debug, Clone, PartialEq)]
pub enum ScalarSource {
    Uniform { low: f64, high: f64 },
    Gaussian { mean: f64, variance: f64 },
    Gridded(GriddedDensity),
}

fn std_normal_cdf(z: f64) -> f64 {
    0.5 * erfc(-z / std::f64::consts::SQRT_2)
}

fn std_normal_pdf(z: f64) -> f64 {
    if z.is_infinite() {
        return 0.0;
    }
    (-0.5 * z * z).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

impl ScalarSource {
    pub fn uniform(low: f64, high: f64) -> Result<Self, ModelError> {
        let s = ScalarSource::Uniform { low, high };
        s.validate()?;
        Ok(s)
    }

    pub fn gaussian(mean: f64, variance: f64) -> Result<Self, ModelError> {
        let s = ScalarSource::Gaussian { mean, variance };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        match self {
            ScalarSource::Uniform { low, high } => {
                if !(low.is_finite() && high.is_finite() && low < high) {
                    return Err(ModelError::InvalidSource(format!(
                        "uniform source needs low < high (got {low}, {high})"
                    )));
                }
            }
            ScalarSource::Gaussian { mean, variance } => {
                if !(mean.is_finite() && variance.is_finite() && *variance > 0.0) {
                    return Err(ModelError::InvalidSource(format!(
                        "gaussian source needs variance > 0 (got {variance})"
                    )));
                }
            }
            ScalarSource::Gridded(g) => {
                GriddedDensity::new(g.grid.clone(), g.density.clone())?;
            }
        }
        Ok(())
    }

    /// Closed support interval; infinite ends for the Gaussian.
    pub fn support(&self) -> (f64, f64) {
        match self {
            ScalarSource::Uniform { low, high } => (*low, *high),
            ScalarSource::Gaussian { .. } => (f64::NEG_INFINITY, f64::INFINITY),
            ScalarSource::Gridded(g) => (g.grid[0], *g.grid.last().unwrap()),
        }
    }

    pub fn is_bounded(&self) -> bool {
        let (lo, hi) = self.support();
        lo.is_finite() && hi.is_finite()
    }

    /// `[P(lo < m <= hi), E[m; lo < m <= hi], E[m^2; lo < m <= hi]]`.
    pub fn partial_moments(&self, lo: f64, hi: f64) -> [f64; 3] {
        match self {
            ScalarSource::Uniform { low, high } => {
                let a = lo.max(*low);
                let b = hi.min(*high);
                if !(b > a) {
                    return [0.0; 3];
                }
                let w = 1.0 / (high - low);
                [
                    (b - a) * w,
                    (b * b - a * a) * 0.5 * w,
                    (b * b * b - a * a * a) / 3.0 * w,
                ]
            }
            ScalarSource::Gaussian { mean, variance } => {
                if !(hi > lo) {
                    return [0.0; 3];
                }
                let sd = variance.sqrt();
                let za = (lo - mean) / sd;
                let zb = (hi - mean) / sd;
                let m0 = std_normal_cdf(zb) - std_normal_cdf(za);
                let (pa, pb) = (std_normal_pdf(za), std_normal_pdf(zb));
                let za_pa = if za.is_finite() { za * pa } else { 0.0 };
                let zb_pb = if zb.is_finite() { zb * pb } else { 0.0 };
                let m1 = mean * m0 + sd * (pa - pb);
                let m2 = mean * mean * m0
                    + 2.0 * mean * sd * (pa - pb)
                    + variance * (m0 + za_pa - zb_pb);
                [m0, m1, m2]
            }
            ScalarSource::Gridded(g) => g.moments(lo, hi),
        }
    }

    pub fn mean(&self) -> f64 {
        let (lo, hi) = self.support();
        let m = self.partial_moments(lo, hi);
        m[1] / m[0]
    }

    pub fn variance(&self) -> f64 {
        let (lo, hi) = self.support();
        let m = self.partial_moments(lo, hi);
        let mean = m[1] / m[0];
        m[2] / m[0] - mean * mean
    }

    pub fn cdf(&self, x: f64) -> f64 {
        match self {
            ScalarSource::Uniform { low, high } => ((x - low) / (high - low)).clamp(0.0, 1.0),
            ScalarSource::Gaussian { mean, variance } => {
                std_normal_cdf((x - mean) / variance.sqrt())
            }
            ScalarSource::Gridded(g) => g.cdf(x),
        }
    }

    pub fn quantile(&self, p: f64) -> f64 {
        match self {
            ScalarSource::Uniform { low, high } => low + p.clamp(0.0, 1.0) * (high - low),
            ScalarSource::Gaussian { mean, variance } => {
                if p <= 0.0 {
                    f64::NEG_INFINITY
                } else if p >= 1.0 {
                    f64::INFINITY
                } else {
                    mean - variance.sqrt() * std::f64::consts::SQRT_2 * erfc_inv(2.0 * p)
                }
            }
            ScalarSource::Gridded(g) => g.quantile(p),
        }
    }
}

/// Vector Gauss-Markov source `m_{k+1} = G m_k + v_k`, `m_0 ~ N(0, Σ_M0)`.
///
/// Process-noise covariances are listed per transition; past the end of the
/// list the last entry repeats (an empty list means no process noise).
#[derive(Debug, Clone, PartialEq)]
pub struct GaussMarkovSource {
    pub transition: DMatrix<f64>,
    pub initial_cov: DMatrix<f64>,
    pub noise_cov: Vec<DMatrix<f64>>,
}

impl GaussMarkovSource {
    pub fn new(
        transition: DMatrix<f64>,
        initial_cov: DMatrix<f64>,
        noise_cov: Vec<DMatrix<f64>>,
    ) -> Result<Self, ModelError> {
        let s = GaussMarkovSource {
            transition,
            initial_cov,
            noise_cov,
        };
        s.validate()?;
        Ok(s)
    }

    /// Scalar source with transition `g`, initial variance and per-transition
    /// noise variances.
    pub fn scalar(g: f64, initial_var: f64, noise_var: &[f64]) -> Result<Self, ModelError> {
        GaussMarkovSource::new(
            DMatrix::from_element(1, 1, g),
            DMatrix::from_element(1, 1, initial_var),
            noise_var.iter().map(|&v| DMatrix::from_element(1, 1, v)).collect(),
        )
    }

    pub fn dim(&self) -> usize {
        self.transition.nrows()
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        let n = self.transition.nrows();
        if n == 0 || !self.transition.is_square() {
            return Err(ModelError::InvalidSource(
                "transition must be a non-empty square matrix".into(),
            ));
        }
        check_cov(&self.initial_cov, n, "initial covariance", ModelError::InvalidSource)?;
        for (k, c) in self.noise_cov.iter().enumerate() {
            check_cov(c, n, &format!("process noise {k}"), ModelError::InvalidSource)?;
        }
        Ok(())
    }

    /// Process-noise covariance of the transition `k -> k+1`.
    pub fn process_noise(&self, k: usize) -> DMatrix<f64> {
        match self.noise_cov.len() {
            0 => DMatrix::zeros(self.dim(), self.dim()),
            len => self.noise_cov[k.min(len - 1)].clone(),
        }
    }

    /// Prior covariances `Σ_M(0..horizon)`.
    pub fn stage_covariances(&self, horizon: usize) -> Vec<DMatrix<f64>> {
        let mut out = Vec::with_capacity(horizon);
        let mut cov = self.initial_cov.clone();
        for k in 0..horizon {
            out.push(cov.clone());
            cov = &self.transition * &cov * self.transition.transpose() + self.process_noise(k);
        }
        out
    }
}

fn check_cov(
    m: &DMatrix<f64>,
    n: usize,
    what: &str,
    err: fn(String) -> ModelError,
) -> Result<(), ModelError> {
    if m.shape() != (n, n) {
        return Err(err(format!("{what} must be {n}x{n}, got {:?}", m.shape())));
    }
    let scale = m.amax().max(1.0);
    if !linalg::is_symmetric(m, SYMMETRY_TOL * scale) {
        return Err(err(format!("{what} is not symmetric")));
    }
    if linalg::min_eigenvalue(m) < -PSD_TOL * scale {
        return Err(err(format!("{what} is not positive semidefinite")));
    }
    Ok(())
}

/// Additive Gaussian channel `y_k = x_k + w_k`; per-stage noise covariances,
/// the last entry repeating past the end of the list.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelModel {
    pub noise_cov: Vec<DMatrix<f64>>,
}

impl ChannelModel {
    pub fn new(noise_cov: Vec<DMatrix<f64>>) -> Result<Self, ModelError> {
        let c = ChannelModel { noise_cov };
        c.validate()?;
        Ok(c)
    }

    pub fn scalar(noise_var: &[f64]) -> Result<Self, ModelError> {
        ChannelModel::new(
            noise_var.iter().map(|&v| DMatrix::from_element(1, 1, v)).collect(),
        )
    }

    pub fn dim(&self) -> usize {
        self.noise_cov[0].nrows()
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        let Some(first) = self.noise_cov.first() else {
            return Err(ModelError::InvalidChannel("no noise covariance given".into()));
        };
        let p = first.nrows();
        for (k, c) in self.noise_cov.iter().enumerate() {
            check_cov(c, p, &format!("channel noise {k}"), ModelError::InvalidChannel)?;
            if linalg::min_eigenvalue(c) <= 0.0 {
                return Err(ModelError::InvalidChannel(format!(
                    "channel noise {k} is not positive definite"
                )));
            }
        }
        Ok(())
    }

    pub fn noise(&self, k: usize) -> &DMatrix<f64> {
        &self.noise_cov[k.min(self.noise_cov.len() - 1)]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Source {
    /// i.i.d. draws from a scalar distribution at every stage.
    Scalar(ScalarSource),
    GaussMarkov(GaussMarkovSource),
}

impl Source {
    pub fn dim(&self) -> usize {
        match self {
            Source::Scalar(_) => 1,
            Source::GaussMarkov(g) => g.dim(),
        }
    }
}

/// Complete description of one game instance.
#[derive(Debug, Clone, PartialEq)]
pub struct GameSpec {
    pub horizon: usize,
    pub bias: DVector<f64>,
    /// Power multiplier; only charged when a channel is present.
    pub lambda: f64,
    pub discount: Option<f64>,
    pub source: Source,
    /// `None` means cheap talk over a noiseless link.
    pub channel: Option<ChannelModel>,
}

impl GameSpec {
    /// Cheap-talk game (no channel, no power term).
    pub fn cheap_talk(horizon: usize, bias: Vec<f64>, source: Source) -> Result<Self, ModelError> {
        let spec = GameSpec {
            horizon,
            bias: DVector::from_vec(bias),
            lambda: 0.0,
            discount: None,
            source,
            channel: None,
        };
        spec.validate()?;
        Ok(spec)
    }

    /// Gaussian signaling game over an additive Gaussian channel.
    pub fn signaling(
        horizon: usize,
        bias: Vec<f64>,
        lambda: f64,
        source: GaussMarkovSource,
        channel: ChannelModel,
    ) -> Result<Self, ModelError> {
        let spec = GameSpec {
            horizon,
            bias: DVector::from_vec(bias),
            lambda,
            discount: None,
            source: Source::GaussMarkov(source),
            channel: Some(channel),
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn with_discount(mut self, beta: f64) -> Result<Self, ModelError> {
        self.discount = Some(beta);
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        if self.horizon == 0 {
            return Err(ModelError::InvalidGame("horizon must be at least 1".into()));
        }
        if self.bias.len() != self.source.dim() {
            return Err(ModelError::InvalidGame(format!(
                "bias has length {}, source dimension is {}",
                self.bias.len(),
                self.source.dim()
            )));
        }
        if !(self.lambda.is_finite() && self.lambda >= 0.0) {
            return Err(ModelError::InvalidGame(format!(
                "lambda must be finite and >= 0 (got {})",
                self.lambda
            )));
        }
        if let Some(beta) = self.discount {
            if !(beta > 0.0 && beta < 1.0) {
                return Err(ModelError::InvalidGame(format!(
                    "discount must lie in (0,1) (got {beta})"
                )));
            }
        }
        match &self.source {
            Source::Scalar(s) => s.validate()?,
            Source::GaussMarkov(g) => g.validate()?,
        }
        if let Some(c) = &self.channel {
            c.validate()?;
        }
        Ok(())
    }

    pub fn source_dim(&self) -> usize {
        self.source.dim()
    }

    /// Weight `β^k` of stage `k` (1 when undiscounted).
    pub fn stage_weight(&self, k: usize) -> f64 {
        self.discount.map_or(1.0, |b| b.powi(k as i32))
    }

    pub fn is_signaling(&self) -> bool {
        self.channel.is_some()
    }

    pub fn gauss_markov(&self) -> Option<&GaussMarkovSource> {
        match &self.source {
            Source::GaussMarkov(g) => Some(g),
            Source::Scalar(_) => None,
        }
    }
}

/// One realized play of the game.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Trajectory {
    pub m: Vec<DVector<f64>>,
    pub x: Vec<DVector<f64>>,
    pub y: Vec<DVector<f64>>,
    pub u: Vec<DVector<f64>>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.m.len()
    }

    pub fn is_empty(&self) -> bool {
        self.m.is_empty()
    }

    fn check(&self, spec: &GameSpec) -> Result<(), ModelError> {
        let n = spec.horizon;
        if self.m.len() != n || self.x.len() != n || self.y.len() != n || self.u.len() != n {
            return Err(ModelError::Shape(format!(
                "trajectory lengths ({}, {}, {}, {}) differ from horizon {n}",
                self.m.len(),
                self.x.len(),
                self.y.len(),
                self.u.len()
            )));
        }
        let d = spec.source_dim();
        for k in 0..n {
            if self.m[k].len() != d || self.u[k].len() != d {
                return Err(ModelError::Shape(format!(
                    "stage {k}: source/action dimension must be {d}"
                )));
            }
        }
        Ok(())
    }
}

/// `Σ_k β^k (‖m_k − u_k − b‖² + λ‖x_k‖²)`; the power term only applies when
/// the game has a channel.
pub fn eval_encoder_cost(traj: &Trajectory, spec: &GameSpec) -> Result<f64, ModelError> {
    traj.check(spec)?;
    let lambda = if spec.is_signaling() { spec.lambda } else { 0.0 };
    let mut total = 0.0;
    for k in 0..spec.horizon {
        let err = &traj.m[k] - &traj.u[k] - &spec.bias;
        let mut stage = err.norm_squared();
        if lambda != 0.0 {
            stage += lambda * traj.x[k].norm_squared();
        }
        total += spec.stage_weight(k) * stage;
    }
    Ok(total)
}

/// `Σ_k β^k ‖m_k − u_k‖²`.
pub fn eval_decoder_cost(traj: &Trajectory, spec: &GameSpec) -> Result<f64, ModelError> {
    traj.check(spec)?;
    Ok((0..spec.horizon)
        .map(|k| spec.stage_weight(k) * (&traj.m[k] - &traj.u[k]).norm_squared())
        .sum())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn v(x: f64) -> DVector<f64> {
        DVector::from_element(1, x)
    }

    fn scalar_signaling(horizon: usize, b: f64, lambda: f64) -> GameSpec {
        GameSpec::signaling(
            horizon,
            vec![b],
            lambda,
            GaussMarkovSource::scalar(1.0, 1.0, &[1.0]).unwrap(),
            ChannelModel::scalar(&[1.0]).unwrap(),
        )
        .unwrap()
    }

    fn traj(m: &[f64], x: &[f64], u: &[f64]) -> Trajectory {
        Trajectory {
            m: m.iter().map(|&a| v(a)).collect(),
            x: x.iter().map(|&a| v(a)).collect(),
            y: x.iter().map(|&a| v(a)).collect(),
            u: u.iter().map(|&a| v(a)).collect(),
        }
    }

    #[test]
    fn encoder_cost_examples() {
        let spec = scalar_signaling(1, 0.0, 1.0);
        assert_eq!(eval_encoder_cost(&traj(&[1.0], &[0.0], &[1.0]), &spec).unwrap(), 0.0);

        let spec = scalar_signaling(1, 0.5, 0.25);
        let c = eval_encoder_cost(&traj(&[1.0], &[2.0], &[0.0]), &spec).unwrap();
        assert!((c - 1.25).abs() < 1e-15);

        // stage costs 1 and 2 with beta = 0.5
        let spec = scalar_signaling(2, 0.0, 0.0).with_discount(0.5).unwrap();
        let c = eval_encoder_cost(&traj(&[1.0, 2.0_f64.sqrt()], &[0.0, 0.0], &[0.0, 0.0]), &spec)
            .unwrap();
        assert!((c - 2.0).abs() < 1e-15);
    }

    #[test]
    fn cheap_talk_drops_power_term() {
        let spec = GameSpec::cheap_talk(
            1,
            vec![0.0],
            Source::Scalar(ScalarSource::uniform(0.0, 1.0).unwrap()),
        )
        .unwrap();
        let c = eval_encoder_cost(&traj(&[1.0], &[5.0], &[1.0]), &spec).unwrap();
        assert_eq!(c, 0.0);
    }

    #[test]
    fn decoder_cost_examples() {
        let spec = scalar_signaling(1, 0.3, 1.0);
        assert_eq!(eval_decoder_cost(&traj(&[2.0], &[0.0], &[2.0]), &spec).unwrap(), 0.0);
        assert_eq!(eval_decoder_cost(&traj(&[2.0], &[0.0], &[0.0]), &spec).unwrap(), 4.0);
        let spec = scalar_signaling(2, 0.3, 1.0);
        let c = eval_decoder_cost(&traj(&[1.0, -1.0], &[0.0, 0.0], &[0.0, 0.0]), &spec).unwrap();
        assert_eq!(c, 2.0);
    }

    #[test]
    fn costs_reject_wrong_shapes() {
        let spec = scalar_signaling(2, 0.0, 1.0);
        let t = traj(&[1.0], &[0.0], &[1.0]);
        assert!(matches!(eval_encoder_cost(&t, &spec), Err(ModelError::Shape(_))));
        assert!(matches!(eval_decoder_cost(&t, &spec), Err(ModelError::Shape(_))));
    }

    #[test]
    fn gridded_density_normalization_is_checked() {
        assert!(GriddedDensity::new(vec![0.0, 1.0], vec![1.0, 1.0]).is_ok());
        assert!(GriddedDensity::new(vec![0.0, 1.0], vec![1.0, 2.0]).is_err());
        assert!(GriddedDensity::new(vec![0.0, 0.0], vec![1.0, 1.0]).is_err());
        let g = GriddedDensity::normalized(vec![0.0, 0.5, 2.0], vec![3.0, 1.0, 7.0]).unwrap();
        let s = ScalarSource::Gridded(g);
        let (lo, hi) = s.support();
        assert!((s.partial_moments(lo, hi)[0] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn gridded_moments_match_uniform() {
        let g = ScalarSource::Gridded(
            GriddedDensity::new(vec![0.0, 0.25, 0.5, 1.0], vec![1.0; 4]).unwrap(),
        );
        let u = ScalarSource::uniform(0.0, 1.0).unwrap();
        for (a, b) in [(0.0, 1.0), (0.1, 0.7), (0.3, 0.31), (-1.0, 0.4)] {
            let mg = g.partial_moments(a, b);
            let mu = u.partial_moments(a, b);
            for j in 0..3 {
                assert!((mg[j] - mu[j]).abs() < 1e-14, "{a} {b} {j}");
            }
        }
        for p in [0.0, 0.1, 0.5, 0.77, 1.0] {
            assert!((g.quantile(p) - p).abs() < 1e-12);
            assert!((g.cdf(p) - p).abs() < 1e-12);
        }
    }

    #[test]
    fn gridded_quantile_inverts_cdf_on_sloped_cells() {
        let g = ScalarSource::Gridded(
            GriddedDensity::normalized(vec![0.0, 1.0, 3.0], vec![0.0, 2.0, 0.5]).unwrap(),
        );
        for p in [0.01, 0.2, 0.5, 0.9, 0.999] {
            assert!((g.cdf(g.quantile(p)) - p).abs() < 1e-12);
        }
    }

    #[test]
    fn gaussian_moments_by_quadrature() {
        let s = ScalarSource::gaussian(0.7, 2.5).unwrap();
        let sd = 2.5f64.sqrt();
        let (a, b) = (-0.3, 2.1);
        let n = 200_000;
        let h = (b - a) / n as f64;
        let mut q = [0.0; 3];
        for i in 0..n {
            let x = a + (i as f64 + 0.5) * h;
            let p = std_normal_pdf((x - 0.7) / sd) / sd;
            q[0] += p * h;
            q[1] += x * p * h;
            q[2] += x * x * p * h;
        }
        let m = s.partial_moments(a, b);
        for j in 0..3 {
            assert!((m[j] - q[j]).abs() < 1e-9);
        }
        assert!((s.mean() - 0.7).abs() < 1e-12);
        assert!((s.variance() - 2.5).abs() < 1e-10);
        assert!((s.quantile(s.cdf(1.3)) - 1.3).abs() < 1e-9);
    }

    #[test]
    fn covariance_propagation() {
        let g = GaussMarkovSource::scalar(1.0, 1.0, &[1.0]).unwrap();
        let covs = g.stage_covariances(3);
        assert_eq!(covs[0][(0, 0)], 1.0);
        assert_eq!(covs[1][(0, 0)], 2.0);
        assert_eq!(covs[2][(0, 0)], 3.0);
    }

    #[test]
    fn invalid_covariances_are_rejected() {
        let bad = DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.4, 1.0]);
        assert!(GaussMarkovSource::new(DMatrix::identity(2, 2), bad, vec![]).is_err());
        let indefinite = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]);
        assert!(GaussMarkovSource::new(DMatrix::identity(2, 2), indefinite, vec![]).is_err());
        assert!(ChannelModel::scalar(&[0.0]).is_err());
    }

    #[test]
    fn spec_validation() {
        let src = Source::Scalar(ScalarSource::uniform(0.0, 1.0).unwrap());
        assert!(GameSpec::cheap_talk(0, vec![0.1], src.clone()).is_err());
        assert!(GameSpec::cheap_talk(1, vec![0.1, 0.2], src.clone()).is_err());
        let spec = GameSpec::cheap_talk(1, vec![0.1], src).unwrap();
        assert!(spec.clone().with_discount(1.0).is_err());
        assert!(spec.with_discount(0.9).is_ok());
    }
}
