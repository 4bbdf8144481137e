use nalgebra::DVector;

use super::CheapTalkError;
use crate::exec::{self, Execution};
use crate::model::ScalarSource;
use crate::policy::{Decoder, Encoder};
use crate::rng::SampleRng;

/// Minimum probability mass a bin must keep during iteration.
const MIN_BIN_MASS: f64 = 1e-300;

/// Distinct fixed points closer than this (max action distance) are merged.
const DISTINCT_TOL: f64 = 1e-6;

/// Interval partition of the source support plus one action per bin.
///
/// Bin `i` is `(a_{i-1}, a_i]`, with the support ends in place of `a_{-1}` and
/// `a_{K-1}`; a point exactly on a boundary belongs to the left bin.
#[derive(Debug, Clone, PartialEq)]
pub struct QuantizerPolicy {
    boundaries: Vec<f64>,
    actions: Vec<f64>,
}

impl QuantizerPolicy {
    pub fn new(boundaries: Vec<f64>, actions: Vec<f64>) -> Result<Self, CheapTalkError> {
        if actions.len() != boundaries.len() + 1 {
            return Err(CheapTalkError::Argument(format!(
                "{} boundaries need {} actions, got {}",
                boundaries.len(),
                boundaries.len() + 1,
                actions.len()
            )));
        }
        if boundaries.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(CheapTalkError::Argument(
                "boundaries must be strictly ascending".into(),
            ));
        }
        if boundaries.iter().chain(&actions).any(|v| !v.is_finite()) {
            return Err(CheapTalkError::Argument("non-finite entry".into()));
        }
        Ok(QuantizerPolicy {
            boundaries,
            actions,
        })
    }

    /// Single bin; the decoder plays the prior mean.
    pub fn babbling(source: &ScalarSource) -> Self {
        QuantizerPolicy {
            boundaries: Vec::new(),
            actions: vec![source.mean()],
        }
    }

    pub fn boundaries(&self) -> &[f64] {
        &self.boundaries
    }

    pub fn actions(&self) -> &[f64] {
        &self.actions
    }

    pub fn bins(&self) -> usize {
        self.actions.len()
    }

    pub fn bin_of(&self, m: f64) -> usize {
        self.boundaries.partition_point(|&a| a < m)
    }

    pub fn action_for(&self, m: f64) -> f64 {
        self.actions[self.bin_of(m)]
    }

    /// Smallest gap between consecutive actions (infinite for one bin).
    pub fn min_action_gap(&self) -> f64 {
        self.actions
            .windows(2)
            .map(|w| w[1] - w[0])
            .fold(f64::INFINITY, f64::min)
    }
}

/// Residuals of the two best-response conditions for a candidate policy.
#[derive(Debug, Clone, PartialEq)]
pub struct EquilibriumCertificate {
    /// `max_i |u_i - E[m | bin i]|`
    pub centroid_residual: f64,
    /// `max_i |a_i - ((u_i + u_{i+1})/2 + b)|`
    pub indifference_residual: f64,
    /// Consecutive actions differ by more than `2|b|`.
    pub separation_ok: bool,
    pub min_gap: f64,
    pub j_e: f64,
    pub j_d: f64,
    pub tol: f64,
}

impl EquilibriumCertificate {
    pub fn passes(&self) -> bool {
        self.centroid_residual <= self.tol
            && self.indifference_residual <= self.tol
            && self.separation_ok
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolveOptions {
    /// Stop when the largest boundary update is below this.
    pub tol: f64,
    pub max_iters: usize,
    pub certificate_tol: f64,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions {
            tol: 1e-10,
            max_iters: 1_000_000,
            certificate_tol: 1e-8,
        }
    }
}

/// Why an iteration produced no equilibrium.
#[derive(Debug, Clone, PartialEq)]
pub struct Collapse {
    pub reason: String,
    pub iterations: usize,
    pub last_update: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum SolveOutcome {
    Found {
        policy: QuantizerPolicy,
        certificate: EquilibriumCertificate,
        iterations: usize,
    },
    NoSolution(Collapse),
}

impl SolveOutcome {
    pub fn policy(&self) -> Option<&QuantizerPolicy> {
        match self {
            SolveOutcome::Found { policy, .. } => Some(policy),
            SolveOutcome::NoSolution(_) => None,
        }
    }

    pub fn is_found(&self) -> bool {
        matches!(self, SolveOutcome::Found { .. })
    }
}

/// Probability mass and first moment of every bin.
fn bin_moments(source: &ScalarSource, boundaries: &[f64]) -> Vec<[f64; 3]> {
    let (lo, hi) = source.support();
    let mut edges = Vec::with_capacity(boundaries.len() + 2);
    edges.push(lo);
    edges.extend_from_slice(boundaries);
    edges.push(hi);
    edges
        .windows(2)
        .map(|w| source.partial_moments(w[0], w[1]))
        .collect()
}

fn centroids(source: &ScalarSource, boundaries: &[f64]) -> Option<Vec<f64>> {
    bin_moments(source, boundaries)
        .into_iter()
        .map(|m| (m[0] > MIN_BIN_MASS).then(|| m[1] / m[0]))
        .collect()
}

fn indifference_points(actions: &[f64], b: f64) -> Vec<f64> {
    actions.windows(2).map(|w| 0.5 * (w[0] + w[1]) + b).collect()
}

fn inside_support(source: &ScalarSource, boundaries: &[f64]) -> bool {
    let (lo, hi) = source.support();
    boundaries.windows(2).all(|w| w[1] > w[0])
        && boundaries.first().is_none_or(|&a| a > lo)
        && boundaries.last().is_none_or(|&a| a < hi)
}

/// Keep iterating a converged point while the updates still shrink, so the
/// reported fixed point sits at rounding level rather than at `tol`.
fn polish(source: &ScalarSource, b: f64, boundaries: &mut Vec<f64>, mut last_update: f64) {
    for _ in 0..10_000 {
        let Some(actions) = centroids(source, boundaries) else {
            return;
        };
        let next = indifference_points(&actions, b);
        if !inside_support(source, &next) {
            return;
        }
        let update = next
            .iter()
            .zip(boundaries.iter())
            .map(|(a, c)| (a - c).abs())
            .fold(0.0, f64::max);
        if update >= last_update {
            return;
        }
        *boundaries = next;
        last_update = update;
        if update == 0.0 {
            return;
        }
    }
}

fn solve_from(
    source: &ScalarSource,
    b: f64,
    mut boundaries: Vec<f64>,
    opts: &SolveOptions,
) -> SolveOutcome {
    let mut last_update = f64::INFINITY;
    for iter in 1..=opts.max_iters {
        let Some(actions) = centroids(source, &boundaries) else {
            return SolveOutcome::NoSolution(Collapse {
                reason: "a bin lost all probability mass".into(),
                iterations: iter,
                last_update,
            });
        };
        let next = indifference_points(&actions, b);
        if !inside_support(source, &next) {
            return SolveOutcome::NoSolution(Collapse {
                reason: "boundaries crossed or left the support".into(),
                iterations: iter,
                last_update,
            });
        }
        last_update = next
            .iter()
            .zip(&boundaries)
            .map(|(a, c)| (a - c).abs())
            .fold(0.0, f64::max);
        boundaries = next;
        if last_update < opts.tol {
            polish(source, b, &mut boundaries, last_update);
            let Some(actions) = centroids(source, &boundaries) else {
                break;
            };
            let policy = QuantizerPolicy {
                boundaries,
                actions,
            };
            let certificate = certify(&policy, source, b, opts.certificate_tol);
            if !certificate.passes() {
                return SolveOutcome::NoSolution(Collapse {
                    reason: format!(
                        "converged point fails certification (centroid {:e}, indifference {:e}, separation {})",
                        certificate.centroid_residual,
                        certificate.indifference_residual,
                        certificate.separation_ok
                    ),
                    iterations: iter,
                    last_update,
                });
            }
            return SolveOutcome::Found {
                policy,
                certificate,
                iterations: iter,
            };
        }
    }
    SolveOutcome::NoSolution(Collapse {
        reason: format!("no convergence within {} iterations", opts.max_iters),
        iterations: opts.max_iters,
        last_update,
    })
}

fn check_bins(k: usize) -> Result<(), CheapTalkError> {
    if k < 1 {
        return Err(CheapTalkError::Argument("bin count must be at least 1".into()));
    }
    Ok(())
}

/// Quantized equilibrium with `k` bins reached from equal-mass boundaries.
pub fn solve_quantized(
    source: &ScalarSource,
    b: f64,
    k: usize,
    opts: &SolveOptions,
) -> Result<SolveOutcome, CheapTalkError> {
    check_bins(k)?;
    source.validate()?;
    let init = (1..k).map(|i| source.quantile(i as f64 / k as f64)).collect();
    Ok(solve_from(source, b, init, opts))
}

/// Distinct `k`-bin equilibria found from `starts` initializations.
///
/// Start 0 is the equal-mass partition; the others are seeded random
/// partitions. Results keep the order of the start that first reached them.
pub fn solve_multistart(
    source: &ScalarSource,
    b: f64,
    k: usize,
    starts: usize,
    seed: u64,
    opts: &SolveOptions,
    execution: Execution,
) -> Result<Vec<QuantizerPolicy>, CheapTalkError> {
    check_bins(k)?;
    source.validate()?;
    let outcomes = exec::map_indexed(execution, starts.max(1), starts.max(1), |s| {
        let init: Vec<f64> = if s == 0 {
            (1..k).map(|i| source.quantile(i as f64 / k as f64)).collect()
        } else {
            let mut rng = SampleRng::new(seed, s as u64);
            let mut p: Vec<f64> = (1..k).map(|_| rng.uniform()).collect();
            p.sort_by(f64::total_cmp);
            p.into_iter().map(|q| source.quantile(q)).collect()
        };
        solve_from(source, b, init, opts)
    });
    let mut distinct: Vec<QuantizerPolicy> = Vec::new();
    for outcome in outcomes {
        if let SolveOutcome::Found { policy, .. } = outcome {
            let seen = distinct.iter().any(|d| {
                d.actions
                    .iter()
                    .zip(&policy.actions)
                    .all(|(x, y)| (x - y).abs() <= DISTINCT_TOL)
            });
            if !seen {
                distinct.push(policy);
            }
        }
    }
    Ok(distinct)
}

fn certify(policy: &QuantizerPolicy, source: &ScalarSource, b: f64, tol: f64) -> EquilibriumCertificate {
    let moments = bin_moments(source, &policy.boundaries);
    let mut centroid_residual: f64 = 0.0;
    let mut j_e = 0.0;
    let mut j_d = 0.0;
    for (m, &u) in moments.iter().zip(&policy.actions) {
        if m[0] > 0.0 {
            centroid_residual = centroid_residual.max((u - m[1] / m[0]).abs());
        }
        // E[(m - c)^2; bin] = M2 - 2 c M1 + c^2 M0
        let sq = |c: f64| m[2] - 2.0 * c * m[1] + c * c * m[0];
        j_e += sq(u + b);
        j_d += sq(u);
    }
    let indifference_residual = indifference_points(&policy.actions, b)
        .iter()
        .zip(&policy.boundaries)
        .map(|(p, a)| (p - a).abs())
        .fold(0.0, f64::max);
    let min_gap = policy.min_action_gap();
    EquilibriumCertificate {
        centroid_residual,
        indifference_residual,
        separation_ok: min_gap > 2.0 * b.abs(),
        min_gap,
        j_e,
        j_d,
        tol,
    }
}

/// Check a candidate policy against both best-response conditions and report
/// its expected costs.
pub fn verify_equilibrium(
    policy: &QuantizerPolicy,
    source: &ScalarSource,
    b: f64,
    tol: f64,
) -> Result<EquilibriumCertificate, CheapTalkError> {
    source.validate()?;
    if !inside_support(source, &policy.boundaries) {
        return Err(CheapTalkError::Coverage(
            "every boundary must lie strictly inside the support".into(),
        ));
    }
    if let Some(i) = bin_moments(source, &policy.boundaries)
        .iter()
        .position(|m| !(m[0] > 0.0))
    {
        return Err(CheapTalkError::Coverage(format!("bin {i} has zero probability")));
    }
    Ok(certify(policy, source, b, tol))
}

/// Largest bin count admitting an equilibrium, searched upward to
/// `ceil(L / 2|b|) + 1` for support length `L`.
pub fn max_bins(source: &ScalarSource, b: f64, opts: &SolveOptions) -> Result<usize, CheapTalkError> {
    if b == 0.0 {
        return Err(CheapTalkError::Unbounded);
    }
    if !source.is_bounded() {
        return Err(CheapTalkError::UnboundedSupport);
    }
    let (lo, hi) = source.support();
    let ceiling = ((hi - lo) / (2.0 * b.abs())).ceil() as usize + 1;
    let mut best = 1;
    for k in 2..=ceiling {
        if solve_quantized(source, b, k, opts)?.is_found() {
            best = k;
        }
    }
    Ok(best)
}

/// Encoder that transmits the bin index of each stage's quantizer.
#[derive(Debug, Clone)]
pub struct QuantizerEncoder {
    pub stages: Vec<QuantizerPolicy>,
}

impl Encoder for QuantizerEncoder {
    fn encode(&self, stage: usize, sources: &[DVector<f64>], _: &[DVector<f64>]) -> DVector<f64> {
        DVector::from_element(1, self.stages[stage].bin_of(sources[stage][0]) as f64)
    }
}

/// Decoder that maps a received bin index to that bin's action.
#[derive(Debug, Clone)]
pub struct QuantizerDecoder {
    pub stages: Vec<QuantizerPolicy>,
}

impl Decoder for QuantizerDecoder {
    fn decode(&self, stage: usize, outputs: &[DVector<f64>]) -> DVector<f64> {
        let policy = &self.stages[stage];
        let idx = (outputs[stage][0].round().max(0.0) as usize).min(policy.bins() - 1);
        DVector::from_element(1, policy.actions[idx])
    }
}
