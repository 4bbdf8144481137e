//! Backward dynamic program for vector Gauss-Markov sources under linear
//! innovation encoders.
//!
//! Writing the stage-`k` encoder as `A = Σ_W^{1/2} H Σ̃^{-1/2}`, the error
//! after the channel is `S (I + HᵀH)^{-1} S` with `S = Σ̃^{1/2}` and the power
//! is `tr(Hᵀ Σ_W H)`. Given the cost-to-go weight `K_{k+1}`, the stage problem
//!
//! ```text
//! min_H  tr(M (I + HᵀH)^{-1}) + w tr(Hᵀ λΣ_W H),   M = S (GᵀK_{k+1}G + w I) S
//! ```
//!
//! is solved by `H = Π ζ Uᵀ`, pairing the strongest eigenmodes of `M` with the
//! quietest eigenmodes of `λΣ_W`. The value is `tr(K_k Σ̃_k) + tr(L_k)`.
//! Because `M` depends on the innovation covariances, backward sweeps alternate
//! with forward covariance sweeps until both settle.
//!
//! `G`, `Σ_M0` and every `Σ_V` must be diagonal so that `M` stays diagonal and
//! `U` is a permutation. `Σ_W` may be any positive definite matrix.

use nalgebra::{DMatrix, DVector};

use super::{LinearInnovationPolicy, StackelbergError};
use crate::linalg;
use crate::model::GameSpec;

/// How the normalized gains `ζ` are chosen on each matched mode.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ZetaRule {
    /// Minimizer of the penalized stage cost:
    /// `ζ² = max(0, sqrt(ν / (w τ)) - 1)`.
    #[default]
    Penalized,
    /// Unit normalized budget per channel mode: `ζ² = 1 / τ`.
    UnitBudget,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DpOptions {
    pub rule: ZetaRule,
    /// Largest change of `ζ` and `Σ̃` between sweeps at convergence.
    pub tol: f64,
    pub max_sweeps: usize,
    /// Relative eigenvalue cutoff of the pseudo-inverse square root.
    pub pinv_cutoff: f64,
}

impl Default for DpOptions {
    fn default() -> Self {
        DpOptions {
            rule: ZetaRule::Penalized,
            tol: 1e-12,
            max_sweeps: 100_000,
            pinv_cutoff: 1e-14,
        }
    }
}

/// Every quantity of one backward step.
#[derive(Debug, Clone, PartialEq)]
pub struct DpStage {
    pub weight: f64,
    /// Innovation covariance `Σ̃_k` the step was built around.
    pub sigma_tilde: DMatrix<f64>,
    /// `GᵀK_{k+1}G + w I`
    pub q: DMatrix<f64>,
    /// `Σ̃^{1/2} Q Σ̃^{1/2}`
    pub m: DMatrix<f64>,
    /// Eigenvalues of `M`, descending.
    pub nu: DVector<f64>,
    /// Eigenvectors of `M` in the order of `nu`.
    pub u: DMatrix<f64>,
    /// Eigenvalues of `λΣ_W`, ascending.
    pub tau: DVector<f64>,
    pub pi: DMatrix<f64>,
    /// `p×n`, nonzero only on its leading diagonal.
    pub zeta: DMatrix<f64>,
    /// `1 / (1 + ζ_j²)` per mode of `M` (1 on unmatched modes).
    pub shrink: DVector<f64>,
    pub k: DMatrix<f64>,
    pub l: DMatrix<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DpSolution {
    pub stages: Vec<DpStage>,
    pub rule: ZetaRule,
    pub sweeps: usize,
    pub last_change: f64,
    /// Encoder gains `A*_k`.
    pub gains: Vec<DMatrix<f64>>,
    /// Stages whose `Σ̃` was singular, so the gain used a pseudo-inverse.
    pub warnings: Vec<String>,
    transition: DMatrix<f64>,
    noise: Vec<DMatrix<f64>>,
    process_noise: Vec<DMatrix<f64>>,
    lambda: f64,
    bias_sq: f64,
}

struct VectorParams {
    g: DMatrix<f64>,
    sigma_m0: DMatrix<f64>,
    sigma_v: Vec<DMatrix<f64>>,
    sigma_w: Vec<DMatrix<f64>>,
    weights: Vec<f64>,
    lambda: f64,
    bias: DVector<f64>,
}

impl VectorParams {
    fn from_spec(spec: &GameSpec) -> Result<Self, StackelbergError> {
        spec.validate()?;
        let source = spec
            .gauss_markov()
            .ok_or_else(|| StackelbergError::WrongGame("source must be Gauss-Markov".into()))?;
        let channel = spec
            .channel
            .as_ref()
            .ok_or_else(|| StackelbergError::WrongGame("a channel is required".into()))?;
        if spec.lambda == 0.0 {
            return Err(StackelbergError::Degenerate(
                "lambda = 0 makes power free and the gains unbounded".into(),
            ));
        }
        if !linalg::is_diagonal(&source.transition, 0.0) {
            return Err(StackelbergError::NonDiagonal("transition G"));
        }
        if !linalg::is_diagonal(&source.initial_cov, 0.0) {
            return Err(StackelbergError::NonDiagonal("initial covariance"));
        }
        let n = spec.horizon;
        let sigma_v: Vec<_> = (0..n).map(|k| source.process_noise(k)).collect();
        if sigma_v.iter().any(|v| !linalg::is_diagonal(v, 0.0)) {
            return Err(StackelbergError::NonDiagonal("process noise"));
        }
        Ok(VectorParams {
            g: source.transition.clone(),
            sigma_m0: source.initial_cov.clone(),
            sigma_v,
            sigma_w: (0..n).map(|k| channel.noise(k).clone()).collect(),
            weights: (0..n).map(|k| spec.stage_weight(k)).collect(),
            lambda: spec.lambda,
            bias: spec.bias.clone(),
        })
    }

    fn horizon(&self) -> usize {
        self.weights.len()
    }

    fn dim(&self) -> usize {
        self.g.nrows()
    }
}

/// Descending order of a diagonal, ties broken by index.
fn descending_modes(m: &DMatrix<f64>) -> (DVector<f64>, DMatrix<f64>) {
    let n = m.nrows();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| m[(b, b)].total_cmp(&m[(a, a)]));
    let nu = DVector::from_fn(n, |i, _| m[(order[i], order[i])]);
    let u = DMatrix::from_fn(n, n, |r, c| if r == order[c] { 1.0 } else { 0.0 });
    (nu, u)
}

fn zeta_squared(rule: ZetaRule, nu: f64, tau: f64, weight: f64) -> f64 {
    match rule {
        ZetaRule::Penalized => ((nu / (weight * tau)).sqrt() - 1.0).max(0.0),
        ZetaRule::UnitBudget => 1.0 / tau,
    }
}

/// One backward sweep around the innovation covariances `sigma_tilde`.
fn backward_sweep(vp: &VectorParams, sigma_tilde: &[DMatrix<f64>], rule: ZetaRule) -> Vec<DpStage> {
    let n = vp.dim();
    let horizon = vp.horizon();
    let mut k_next = DMatrix::<f64>::zeros(n, n);
    let mut l_next = DMatrix::<f64>::zeros(n, n);
    let mut stages = Vec::with_capacity(horizon);
    for k in (0..horizon).rev() {
        let w = vp.weights[k];
        let q = vp.g.transpose() * &k_next * &vp.g + DMatrix::identity(n, n) * w;
        let s = linalg::sym_sqrt(&sigma_tilde[k]);
        let m = &s * &q * &s;
        let (nu, u) = descending_modes(&m);
        let eig = linalg::sym_eigen(&(&vp.sigma_w[k] * vp.lambda));
        let p = eig.values.len();
        let mut zeta = DMatrix::zeros(p, n);
        let mut shrink = DVector::from_element(n, 1.0);
        for j in 0..p.min(n) {
            let z2 = zeta_squared(rule, nu[j], eig.values[j], w);
            zeta[(j, j)] = z2.sqrt();
            shrink[j] = 1.0 / (1.0 + z2);
        }
        let k_cur = &q * &u * DMatrix::from_diagonal(&shrink) * u.transpose();
        let power = DMatrix::from_diagonal(&DVector::from_fn(n, |j, _| {
            if j < p {
                eig.values[j] * zeta[(j, j)] * zeta[(j, j)]
            } else {
                0.0
            }
        }));
        let l_cur = &k_next * &vp.sigma_v[k]
            + &l_next
            + &u * power * u.transpose() * w
            + &vp.bias * vp.bias.transpose() * w;
        k_next = k_cur.clone();
        l_next = l_cur.clone();
        stages.push(DpStage {
            weight: w,
            sigma_tilde: sigma_tilde[k].clone(),
            q,
            m,
            nu,
            u,
            tau: eig.values,
            pi: eig.vectors,
            zeta,
            shrink,
            k: k_cur,
            l: l_cur,
        });
    }
    stages.reverse();
    stages
}

/// Innovation covariances reached by holding each stage's normalized gain.
fn forward_sweep(vp: &VectorParams, stages: &[DpStage]) -> Vec<DMatrix<f64>> {
    let mut out = Vec::with_capacity(stages.len());
    let mut cur = vp.sigma_m0.clone();
    for (k, st) in stages.iter().enumerate() {
        out.push(cur.clone());
        let s = linalg::sym_sqrt(&cur);
        let post = &s * &st.u * DMatrix::from_diagonal(&st.shrink) * st.u.transpose() * &s;
        cur = &vp.g * post * vp.g.transpose() + &vp.sigma_v[k];
    }
    out
}

fn max_change(a: &[DMatrix<f64>], b: &[DMatrix<f64>]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).amax()).fold(0.0, f64::max)
}

/// Encoder gains `A*_k = Σ_W^{1/2} Π ζ Uᵀ Σ̃^{-1/2}` of a converged sweep.
pub fn forward_synthesis(solution: &DpSolution, pinv_cutoff: f64) -> (Vec<DMatrix<f64>>, Vec<String>) {
    let mut warnings = Vec::new();
    let gains = solution
        .stages
        .iter()
        .enumerate()
        .map(|(k, st)| {
            let scale = st.sigma_tilde.amax().max(f64::MIN_POSITIVE);
            let cutoff = pinv_cutoff * scale;
            if linalg::min_eigenvalue(&st.sigma_tilde) <= cutoff {
                warnings.push(format!("stage {k}: singular innovation covariance, pseudo-inverse used"));
            }
            let inv_root = linalg::sym_inv_sqrt(&st.sigma_tilde, cutoff);
            linalg::sym_sqrt(&solution.noise[k]) * &st.pi * &st.zeta * st.u.transpose() * inv_root
        })
        .collect();
    (gains, warnings)
}

/// Solve the dynamic program by alternating backward and forward sweeps,
/// starting from the silent trajectory (`Σ̃_k` equal to the priors).
pub fn backward_dp(spec: &GameSpec, opts: &DpOptions) -> Result<DpSolution, StackelbergError> {
    let vp = VectorParams::from_spec(spec)?;
    let source = spec.gauss_markov().expect("checked above");
    let mut sigma_tilde = source.stage_covariances(vp.horizon());
    let mut zeta: Option<Vec<DMatrix<f64>>> = None;
    let mut history = Vec::new();
    for sweep in 1..=opts.max_sweeps {
        let stages = backward_sweep(&vp, &sigma_tilde, opts.rule);
        let next_sigma = forward_sweep(&vp, &stages);
        let next_zeta: Vec<_> = stages.iter().map(|s| s.zeta.clone()).collect();
        let change = match &zeta {
            Some(z) => max_change(z, &next_zeta).max(max_change(&sigma_tilde, &next_sigma)),
            None => f64::INFINITY,
        };
        history.push(change);
        let settled = change < opts.tol;
        zeta = Some(next_zeta);
        if settled {
            // rebuild around the final covariances so K, L and Σ̃ agree
            let stages = backward_sweep(&vp, &next_sigma, opts.rule);
            let mut sol = DpSolution {
                stages,
                rule: opts.rule,
                sweeps: sweep,
                last_change: change,
                gains: Vec::new(),
                warnings: Vec::new(),
                transition: vp.g.clone(),
                noise: vp.sigma_w.clone(),
                process_noise: vp.sigma_v.clone(),
                lambda: vp.lambda,
                bias_sq: vp.bias.norm_squared(),
            };
            let (gains, warnings) = forward_synthesis(&sol, opts.pinv_cutoff);
            sol.gains = gains;
            sol.warnings = warnings;
            return Ok(sol);
        }
        sigma_tilde = next_sigma;
    }
    Err(StackelbergError::NoConvergence {
        best_gradient: history.iter().copied().fold(f64::INFINITY, f64::min),
        trace: vec![history],
    })
}

/// Per-channel-mode comparison of a pairing against the sorted one.
fn paired_cost(nu: f64, tau: f64, w: f64, rule: ZetaRule) -> f64 {
    let z2 = zeta_squared(rule, nu, tau, w);
    nu / (1.0 + z2) + w * tau * z2
}

fn permutations(n: usize) -> Vec<Vec<usize>> {
    // Heap's algorithm
    let mut out = Vec::new();
    let mut a: Vec<usize> = (0..n).collect();
    let mut c = vec![0; n];
    out.push(a.clone());
    let mut i = 0;
    while i < n {
        if c[i] < i {
            if i % 2 == 0 {
                a.swap(0, i);
            } else {
                a.swap(c[i], i);
            }
            out.push(a.clone());
            c[i] += 1;
            i = 0;
        } else {
            c[i] = 0;
            i += 1;
        }
    }
    out
}

/// Structural checks of a solution.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DpInvariants {
    /// Terminal `K_N` and `L_N` are zero by construction; both vanish.
    pub terminal_zero: bool,
    pub k_off_diagonal: f64,
    /// Off-diagonal mass of `Πᵀ λΣ_W Π`.
    pub noise_off_diagonal: f64,
    /// Off-diagonal mass of `Uᵀ M U`.
    pub m_off_diagonal: f64,
    pub k_asymmetry: f64,
}

impl DpSolution {
    pub fn horizon(&self) -> usize {
        self.stages.len()
    }

    /// `tr(K_0 Σ̃_0 + L_0)`
    pub fn value(&self) -> f64 {
        let s = &self.stages[0];
        (&s.k * &s.sigma_tilde + &s.l).trace()
    }

    /// `P_k = tr(A_k Σ̃_k A_kᵀ)`
    pub fn powers(&self) -> Vec<f64> {
        self.gains
            .iter()
            .zip(&self.stages)
            .map(|(a, s)| (a * &s.sigma_tilde * a.transpose()).trace())
            .collect()
    }

    /// Posterior error covariances implied by the synthesized gains.
    pub fn error_covariances(&self) -> Result<Vec<DMatrix<f64>>, StackelbergError> {
        self.gains
            .iter()
            .zip(&self.stages)
            .zip(&self.noise)
            .map(|((a, s), w)| {
                let st = &s.sigma_tilde;
                let cov_y = linalg::symmetrize(&(a * st * a.transpose() + w));
                let inv = linalg::spd_inverse(&cov_y)?;
                Ok(linalg::symmetrize(&(st - st * a.transpose() * inv * a * st)))
            })
            .collect()
    }

    /// Encoder cost `Σ w_k (tr Σ_k + λ P_k + ‖b‖²)` evaluated directly.
    pub fn direct_cost(&self) -> Result<f64, StackelbergError> {
        let errs = self.error_covariances()?;
        let powers = self.powers();
        Ok(self
            .stages
            .iter()
            .enumerate()
            .map(|(k, s)| s.weight * (errs[k].trace() + self.lambda * powers[k] + self.bias_sq))
            .sum())
    }

    pub fn policy(&self) -> Result<LinearInnovationPolicy, StackelbergError> {
        let sigma: Vec<_> = self.stages.iter().map(|s| s.sigma_tilde.clone()).collect();
        Ok(LinearInnovationPolicy::new(
            self.transition.clone(),
            self.gains.clone(),
            &sigma,
            &self.noise,
        )?)
    }

    /// `|V_k(Σ̃_k) - (stage cost + V_{k+1}(Σ̃_{k+1}))|` per stage, with the
    /// stage cost and next covariance computed from the synthesized gains.
    pub fn bellman_residuals(&self) -> Result<Vec<f64>, StackelbergError> {
        let errs = self.error_covariances()?;
        let powers = self.powers();
        let n = self.transition.nrows();
        Ok((0..self.horizon())
            .map(|k| {
                let s = &self.stages[k];
                let lhs = (&s.k * &s.sigma_tilde + &s.l).trace();
                let cost = s.weight * (errs[k].trace() + self.lambda * powers[k] + self.bias_sq);
                let next = &self.transition * &errs[k] * self.transition.transpose() + &self.process_noise[k];
                let future = match self.stages.get(k + 1) {
                    Some(t) => (&t.k * next + &t.l).trace(),
                    None => (DMatrix::<f64>::zeros(n, n) * next).trace(),
                };
                (lhs - cost - future).abs()
            })
            .collect())
    }

    fn stage_objective(st: &DpStage, zeta: &DMatrix<f64>, noise: &DMatrix<f64>, lambda: f64) -> f64 {
        let n = st.m.nrows();
        let h = &st.pi * zeta * st.u.transpose();
        let inner = DMatrix::identity(n, n) + h.transpose() * &h;
        let inv = inner.try_inverse().expect("I + HᵀH is positive definite");
        (&st.m * inv).trace() + st.weight * (h.transpose() * noise * lambda * &h).trace()
    }

    /// Smallest change of the penalized stage objective when any single entry
    /// of `ζ` moves by `±step`. Nonnegative at an optimum.
    pub fn zeta_probe(&self, step: f64) -> f64 {
        let mut worst = f64::INFINITY;
        for (k, st) in self.stages.iter().enumerate() {
            let base = Self::stage_objective(st, &st.zeta, &self.noise[k], self.lambda);
            for r in 0..st.zeta.nrows() {
                for c in 0..st.zeta.ncols() {
                    for sign in [-1.0, 1.0] {
                        let mut z = st.zeta.clone();
                        z[(r, c)] += sign * step;
                        let f = Self::stage_objective(st, &z, &self.noise[k], self.lambda);
                        worst = worst.min(f - base);
                    }
                }
            }
        }
        worst
    }

    /// Largest saving any other assignment of source modes to channel modes
    /// would achieve over the sorted pairing (`<= 0` when the sorted pairing
    /// is optimal). `None` when `n > 7`.
    pub fn pairing_probe(&self) -> Option<f64> {
        let n = self.transition.nrows();
        if n > 7 {
            return None;
        }
        let perms = permutations(n);
        let mut worst = f64::NEG_INFINITY;
        for st in &self.stages {
            let p = st.tau.len();
            let cost = |order: &[usize]| -> f64 {
                (0..n)
                    .map(|j| {
                        let nu = st.nu[order[j]];
                        if j < p {
                            paired_cost(nu, st.tau[j], st.weight, self.rule)
                        } else {
                            nu
                        }
                    })
                    .sum()
            };
            let sorted: Vec<usize> = (0..n).collect();
            let base = cost(&sorted);
            let best = perms.iter().map(|o| cost(o)).fold(f64::INFINITY, f64::min);
            worst = worst.max(base - best);
        }
        Some(worst)
    }

    pub fn invariants(&self) -> DpInvariants {
        let mut inv = DpInvariants {
            terminal_zero: true,
            k_off_diagonal: 0.0,
            noise_off_diagonal: 0.0,
            m_off_diagonal: 0.0,
            k_asymmetry: 0.0,
        };
        for (k, st) in self.stages.iter().enumerate() {
            inv.k_off_diagonal = inv.k_off_diagonal.max(linalg::off_diagonal_mass(&st.k));
            inv.k_asymmetry = inv.k_asymmetry.max((&st.k - st.k.transpose()).amax());
            let rotated = st.pi.transpose() * &self.noise[k] * self.lambda * &st.pi;
            inv.noise_off_diagonal = inv.noise_off_diagonal.max(linalg::off_diagonal_mass(&rotated));
            let mm = st.u.transpose() * &st.m * &st.u;
            inv.m_off_diagonal = inv.m_off_diagonal.max(linalg::off_diagonal_mass(&mm));
        }
        // the last stage sees K_N = L_N = 0: its L carries no future term
        if let Some(last) = self.stages.last() {
            let n = last.q.nrows();
            let expected_q = DMatrix::<f64>::identity(n, n) * last.weight;
            inv.terminal_zero = (&last.q - expected_q).amax() == 0.0;
        }
        inv
    }
}

/// `K_k` and `L_k` for a single channel mode under the unit-budget rule.
#[derive(Debug, Clone, PartialEq)]
pub struct ClosedFormStage {
    pub k: DMatrix<f64>,
    pub l: DMatrix<f64>,
}

/// Closed-form recursion for a scalar channel that always carries source
/// mode `signal_mode`:
/// `K_k = Q_k diag(1, .., τ/(1+τ), .., 1)` and
/// `L_k = K_{k+1} Σ_V + L_{k+1} + w e_s e_sᵀ + w b bᵀ`.
pub fn scalar_channel_closed_form(
    spec: &GameSpec,
    signal_mode: usize,
) -> Result<Vec<ClosedFormStage>, StackelbergError> {
    let vp = VectorParams::from_spec(spec)?;
    let n = vp.dim();
    if vp.sigma_w[0].nrows() != 1 {
        return Err(StackelbergError::WrongGame("closed form needs a scalar channel".into()));
    }
    if signal_mode >= n {
        return Err(StackelbergError::Argument(format!(
            "signal mode {signal_mode} out of range for dimension {n}"
        )));
    }
    let mut k_next = DMatrix::<f64>::zeros(n, n);
    let mut l_next = DMatrix::<f64>::zeros(n, n);
    let mut out = Vec::with_capacity(vp.horizon());
    for k in (0..vp.horizon()).rev() {
        let w = vp.weights[k];
        let tau = vp.lambda * vp.sigma_w[k][(0, 0)];
        let q = vp.g.transpose() * &k_next * &vp.g + DMatrix::identity(n, n) * w;
        let mut d = DVector::from_element(n, 1.0);
        d[signal_mode] = tau / (1.0 + tau);
        let k_cur = q * DMatrix::from_diagonal(&d);
        let mut e = DMatrix::zeros(n, n);
        e[(signal_mode, signal_mode)] = w;
        let l_cur = &k_next * &vp.sigma_v[k] + &l_next + e + &vp.bias * vp.bias.transpose() * w;
        k_next = k_cur.clone();
        l_next = l_cur.clone();
        out.push(ClosedFormStage { k: k_cur, l: l_cur });
    }
    out.reverse();
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{ChannelModel, GaussMarkovSource};
    use crate::stackelberg::scalar::{optimize_power, PowerOptions};

    fn diag(v: &[f64]) -> DMatrix<f64> {
        DMatrix::from_diagonal(&DVector::from_column_slice(v))
    }

    fn two_mode_spec(horizon: usize, lambda: f64) -> GameSpec {
        let src = GaussMarkovSource::new(diag(&[0.9, 0.5]), diag(&[4.0, 1.0]), vec![diag(&[1.0, 0.2])]).unwrap();
        GameSpec::signaling(
            horizon,
            vec![0.1, -0.2],
            lambda,
            src,
            ChannelModel::new(vec![DMatrix::from_element(1, 1, 1.0)]).unwrap(),
        )
        .unwrap()
    }

    #[test]
    fn unit_budget_matches_closed_form() {
        let spec = two_mode_spec(4, 1.0);
        let sol = backward_dp(&spec, &DpOptions { rule: ZetaRule::UnitBudget, ..Default::default() }).unwrap();
        let closed = scalar_channel_closed_form(&spec, 0).unwrap();
        for (st, cf) in sol.stages.iter().zip(&closed) {
            // mode 0 stays the strongest here
            assert_eq!(st.u[(0, 0)], 1.0);
            assert!((&st.k - &cf.k).amax() < 1e-10);
            assert!((&st.l - &cf.l).amax() < 1e-10);
        }
    }

    #[test]
    fn scalar_source_matches_power_allocation() {
        let src = GaussMarkovSource::scalar(0.9, 1.0, &[0.5]).unwrap();
        let spec = GameSpec::signaling(3, vec![0.1], 0.3, src, ChannelModel::scalar(&[1.0]).unwrap()).unwrap();
        let dp = backward_dp(&spec, &DpOptions::default()).unwrap();
        let sc = optimize_power(&spec, &PowerOptions::default()).unwrap();
        for (a, b) in dp.powers().iter().zip(&sc.power) {
            assert!((a - b).abs() < 1e-6, "{a} vs {b}");
        }
        for (st, p) in dp.stages.iter().zip(&sc.power) {
            let z = st.zeta[(0, 0)];
            assert!((z * z - p / 1.0).abs() < 1e-6);
        }
        assert!((dp.value() - sc.j_lower).abs() < 1e-6);
    }

    #[test]
    fn solution_is_consistent() {
        let spec = two_mode_spec(5, 0.4).with_discount(0.9).unwrap();
        let sol = backward_dp(&spec, &DpOptions::default()).unwrap();
        assert!(sol.warnings.is_empty());
        for r in sol.bellman_residuals().unwrap() {
            assert!(r < 1e-9, "{r}");
        }
        assert!((sol.value() - sol.direct_cost().unwrap()).abs() < 1e-9);
        assert!(sol.zeta_probe(1e-3) >= -1e-12);
        assert!(sol.pairing_probe().unwrap() <= 1e-12);
        let inv = sol.invariants();
        assert!(inv.terminal_zero);
        assert_eq!(inv.k_off_diagonal, 0.0);
        assert_eq!(inv.m_off_diagonal, 0.0);
    }

    #[test]
    fn correlated_channel_noise() {
        let src = GaussMarkovSource::new(diag(&[0.8, 0.6, 0.3]), diag(&[3.0, 2.0, 1.0]), vec![diag(&[0.5, 0.4, 0.1])])
            .unwrap();
        let w = DMatrix::from_row_slice(2, 2, &[1.0, 0.4, 0.4, 2.0]);
        let spec = GameSpec::signaling(3, vec![0.0; 3], 0.2, src, ChannelModel::new(vec![w]).unwrap()).unwrap();
        let sol = backward_dp(&spec, &DpOptions::default()).unwrap();
        assert!(sol.invariants().noise_off_diagonal < 1e-12);
        assert!((sol.value() - sol.direct_cost().unwrap()).abs() < 1e-9);
        assert!(sol.zeta_probe(1e-3) >= -1e-12);
    }

    #[test]
    fn rejects_bad_inputs() {
        let spec = two_mode_spec(2, 0.0);
        assert!(matches!(backward_dp(&spec, &DpOptions::default()), Err(StackelbergError::Degenerate(_))));
        let src = GaussMarkovSource::new(
            DMatrix::from_row_slice(2, 2, &[0.9, 0.1, 0.0, 0.5]),
            diag(&[1.0, 1.0]),
            vec![diag(&[1.0, 1.0])],
        )
        .unwrap();
        let spec = GameSpec::signaling(2, vec![0.0; 2], 1.0, src, ChannelModel::new(vec![diag(&[1.0])]).unwrap()).unwrap();
        assert_eq!(
            backward_dp(&spec, &DpOptions::default()).unwrap_err(),
            StackelbergError::NonDiagonal("transition G")
        );
    }

    #[test]
    fn heap_permutations_are_complete() {
        let mut p = permutations(4);
        assert_eq!(p.len(), 24);
        p.sort();
        p.dedup();
        assert_eq!(p.len(), 24);
    }
}
