//! Seeded Monte Carlo estimation of encoder and decoder costs.
//!
//! Samples are grouped into fixed-size blocks. Each block is accumulated
//! sequentially and the block summaries are merged in block order, so the
//! estimate depends only on `(seed, samples)`: neither the parallel task count
//! nor the execution mode changes a single bit of the result.

use thiserror::Error;

use crate::exec::{self, Execution};
use crate::model::{eval_decoder_cost, eval_encoder_cost, GameSpec, ModelError, Trajectory};
use crate::policy::{Decoder, Encoder, TrajectorySampler};

/// Samples per reduction block.
pub const BLOCK: usize = 1024;

/// Half-width of the acceptance band, in standard errors.
pub const SE_BAND: f64 = 3.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimError {
    #[error("at least 2 samples are required (got {0})")]
    TooFewSamples(usize),
    #[error(transparent)]
    Model(#[from] ModelError),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McOptions {
    pub samples: usize,
    pub seed: u64,
    /// Parallel task hint; does not affect results.
    pub chunks: usize,
    pub execution: Execution,
}

impl McOptions {
    pub fn new(samples: usize, seed: u64) -> Self {
        McOptions {
            samples,
            seed,
            chunks: 64,
            execution: Execution::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CostEstimate {
    pub mean_je: f64,
    pub mean_jd: f64,
    pub se_je: f64,
    pub se_jd: f64,
    pub samples: usize,
    pub seed: u64,
}

/// Means and standard errors of an arbitrary vector statistic.
#[derive(Debug, Clone, PartialEq)]
pub struct StatEstimate {
    pub mean: Vec<f64>,
    pub se: Vec<f64>,
    pub samples: usize,
}

/// Running mean / sum of squared deviations, merged with Chan's formula.
#[derive(Debug, Clone)]
struct Moments {
    count: f64,
    mean: Vec<f64>,
    m2: Vec<f64>,
}

impl Moments {
    fn new(dim: usize) -> Self {
        Moments {
            count: 0.0,
            mean: vec![0.0; dim],
            m2: vec![0.0; dim],
        }
    }

    fn push(&mut self, x: &[f64]) {
        self.count += 1.0;
        for i in 0..self.mean.len() {
            let delta = x[i] - self.mean[i];
            self.mean[i] += delta / self.count;
            self.m2[i] += delta * (x[i] - self.mean[i]);
        }
    }

    fn merge(&mut self, other: &Moments) {
        if other.count == 0.0 {
            return;
        }
        let total = self.count + other.count;
        for i in 0..self.mean.len() {
            let delta = other.mean[i] - self.mean[i];
            self.mean[i] += delta * other.count / total;
            self.m2[i] += other.m2[i] + delta * delta * self.count * other.count / total;
        }
        self.count = total;
    }

    fn standard_errors(&self) -> Vec<f64> {
        let n = self.count;
        self.m2.iter().map(|m2| (m2 / (n - 1.0) / n).sqrt()).collect()
    }
}

/// Estimate `E[f(trajectory)]` component-wise, with standard errors.
pub fn estimate_statistics<F>(
    spec: &GameSpec,
    encoder: &dyn Encoder,
    decoder: &dyn Decoder,
    opts: &McOptions,
    dim: usize,
    statistic: F,
) -> Result<StatEstimate, SimError>
where
    F: Fn(&Trajectory) -> Result<Vec<f64>, ModelError> + Sync + Send,
{
    if opts.samples < 2 {
        return Err(SimError::TooFewSamples(opts.samples));
    }
    let sampler = TrajectorySampler::new(spec)?;
    let blocks = opts.samples.div_ceil(BLOCK);
    let partials = exec::map_indexed(opts.execution, blocks, opts.chunks, |b| {
        let start = b * BLOCK;
        let end = (start + BLOCK).min(opts.samples);
        let mut acc = Moments::new(dim);
        for i in start..end {
            let traj = sampler.sample(encoder, decoder, opts.seed, i as u64)?;
            acc.push(&statistic(&traj)?);
        }
        Ok::<_, ModelError>(acc)
    });
    let mut total = Moments::new(dim);
    for part in partials {
        total.merge(&part?);
    }
    Ok(StatEstimate {
        se: total.standard_errors(),
        mean: total.mean,
        samples: opts.samples,
    })
}

/// Average encoder and decoder cost over independent trajectories.
pub fn estimate(
    spec: &GameSpec,
    encoder: &dyn Encoder,
    decoder: &dyn Decoder,
    opts: &McOptions,
) -> Result<CostEstimate, SimError> {
    let stats = estimate_statistics(spec, encoder, decoder, opts, 2, |t| {
        Ok(vec![eval_encoder_cost(t, spec)?, eval_decoder_cost(t, spec)?])
    })?;
    Ok(CostEstimate {
        mean_je: stats.mean[0],
        mean_jd: stats.mean[1],
        se_je: stats.se[0],
        se_jd: stats.se[1],
        samples: opts.samples,
        seed: opts.seed,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TheoryComparison {
    pub z_je: f64,
    pub z_jd: f64,
    pub pass_je: bool,
    pub pass_jd: bool,
}

impl TheoryComparison {
    pub fn passed(&self) -> bool {
        self.pass_je && self.pass_jd
    }
}

/// `|mean - theory| / se`; zero when both the gap and the error vanish.
pub fn z_score(mean: f64, se: f64, theory: f64) -> f64 {
    let gap = (mean - theory).abs();
    if gap == 0.0 {
        0.0
    } else if se == 0.0 {
        f64::INFINITY
    } else {
        gap / se
    }
}

/// Pass iff each mean lies within [`SE_BAND`] standard errors of theory.
pub fn compare_to_theory(est: &CostEstimate, theory_je: f64, theory_jd: f64) -> TheoryComparison {
    let z_je = z_score(est.mean_je, est.se_je, theory_je);
    let z_jd = z_score(est.mean_jd, est.se_jd, theory_jd);
    TheoryComparison {
        z_je,
        z_jd,
        pass_je: z_je <= SE_BAND,
        pass_jd: z_jd <= SE_BAND,
    }
}
