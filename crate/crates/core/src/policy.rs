//! Policy interfaces and trajectory sampling.
//!
//! At stage `k` the encoder sees `m_[0,k]` and the fed-back channel outputs
//! `y_[0,k-1]`; the decoder sees `y_[0,k]`. Policies are deterministic maps of
//! those information sets.

use nalgebra::{DMatrix, DVector};

use crate::linalg;
use crate::model::{GameSpec, ModelError, ScalarSource, Source, Trajectory};
use crate::rng::SampleRng;

pub trait Encoder: Send + Sync {
    /// `sources` holds `m_0..=m_k`, `outputs` holds `y_0..y_{k-1}`.
    fn encode(&self, stage: usize, sources: &[DVector<f64>], outputs: &[DVector<f64>])
        -> DVector<f64>;
}

pub trait Decoder: Send + Sync {
    /// `outputs` holds `y_0..=y_k`.
    fn decode(&self, stage: usize, outputs: &[DVector<f64>]) -> DVector<f64>;
}

/// Sends a constant zero vector of the given dimension.
#[derive(Debug, Clone)]
pub struct ZeroEncoder {
    pub dim: usize,
}

impl Encoder for ZeroEncoder {
    fn encode(&self, _: usize, _: &[DVector<f64>], _: &[DVector<f64>]) -> DVector<f64> {
        DVector::zeros(self.dim)
    }
}

/// Sends the current source realization unchanged.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct IdentityEncoder;

impl Encoder for IdentityEncoder {
    fn encode(&self, stage: usize, sources: &[DVector<f64>], _: &[DVector<f64>]) -> DVector<f64> {
        sources[stage].clone()
    }
}

/// Ignores the channel and plays a fixed action per stage (the prior mean for
/// a babbling decoder).
#[derive(Debug, Clone)]
pub struct ConstantDecoder {
    pub actions: Vec<DVector<f64>>,
}

impl ConstantDecoder {
    /// Prior-mean actions for every stage of `spec`.
    pub fn prior_mean(spec: &GameSpec) -> Self {
        let action = match &spec.source {
            Source::Scalar(s) => DVector::from_element(1, s.mean()),
            Source::GaussMarkov(g) => DVector::zeros(g.dim()),
        };
        ConstantDecoder {
            actions: vec![action; spec.horizon],
        }
    }
}

impl Decoder for ConstantDecoder {
    fn decode(&self, stage: usize, _: &[DVector<f64>]) -> DVector<f64> {
        self.actions[stage].clone()
    }
}

/// Plays the current channel output as the action.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct IdentityDecoder;

impl Decoder for IdentityDecoder {
    fn decode(&self, stage: usize, outputs: &[DVector<f64>]) -> DVector<f64> {
        outputs[stage].clone()
    }
}

enum SourcePlan {
    Scalar(ScalarSource),
    GaussMarkov {
        transition: DMatrix<f64>,
        initial_root: DMatrix<f64>,
        noise_roots: Vec<DMatrix<f64>>,
    },
}

/// Precomputed noise factors for repeated sampling of one game.
pub struct TrajectorySampler {
    horizon: usize,
    source_dim: usize,
    source: SourcePlan,
    channel_roots: Option<Vec<DMatrix<f64>>>,
}

impl TrajectorySampler {
    pub fn new(spec: &GameSpec) -> Result<Self, ModelError> {
        spec.validate()?;
        let source = match &spec.source {
            Source::Scalar(s) => SourcePlan::Scalar(s.clone()),
            Source::GaussMarkov(g) => SourcePlan::GaussMarkov {
                transition: g.transition.clone(),
                initial_root: linalg::sym_sqrt(&g.initial_cov),
                noise_roots: (0..spec.horizon.saturating_sub(1))
                    .map(|k| linalg::sym_sqrt(&g.process_noise(k)))
                    .collect(),
            },
        };
        let channel_roots = spec.channel.as_ref().map(|c| {
            (0..spec.horizon)
                .map(|k| linalg::sym_sqrt(c.noise(k)))
                .collect()
        });
        Ok(TrajectorySampler {
            horizon: spec.horizon,
            source_dim: spec.source_dim(),
            source,
            channel_roots,
        })
    }

    /// Draw trajectory number `index` of the stream family `seed`.
    pub fn sample(
        &self,
        encoder: &dyn Encoder,
        decoder: &dyn Decoder,
        seed: u64,
        index: u64,
    ) -> Result<Trajectory, ModelError> {
        let mut rng = SampleRng::new(seed, index);
        let n = self.horizon;
        let mut traj = Trajectory {
            m: Vec::with_capacity(n),
            x: Vec::with_capacity(n),
            y: Vec::with_capacity(n),
            u: Vec::with_capacity(n),
        };
        for k in 0..n {
            rng.enter_stage(k);
            let m = self.draw_source(k, traj.m.last(), &mut rng);
            traj.m.push(m);
            let x = encoder.encode(k, &traj.m, &traj.y);
            let y = match &self.channel_roots {
                Some(roots) => {
                    let root = &roots[k];
                    if x.len() != root.nrows() {
                        return Err(ModelError::Shape(format!(
                            "stage {k}: encoder output has dimension {}, channel expects {}",
                            x.len(),
                            root.nrows()
                        )));
                    }
                    let z = normal_vector(&mut rng, x.len());
                    &x + root * z
                }
                None => x.clone(),
            };
            traj.x.push(x);
            traj.y.push(y);
            let u = decoder.decode(k, &traj.y);
            if u.len() != self.source_dim {
                return Err(ModelError::Shape(format!(
                    "stage {k}: decoder action has dimension {}, source has {}",
                    u.len(),
                    self.source_dim
                )));
            }
            traj.u.push(u);
        }
        Ok(traj)
    }

    fn draw_source(
        &self,
        k: usize,
        previous: Option<&DVector<f64>>,
        rng: &mut SampleRng,
    ) -> DVector<f64> {
        match &self.source {
            SourcePlan::Scalar(s) => {
                let value = match s {
                    ScalarSource::Gaussian { mean, variance } => {
                        mean + variance.sqrt() * rng.standard_normal()
                    }
                    other => other.quantile(rng.uniform()),
                };
                DVector::from_element(1, value)
            }
            SourcePlan::GaussMarkov {
                transition,
                initial_root,
                noise_roots,
            } => {
                let z = normal_vector(rng, self.source_dim);
                match previous {
                    None => initial_root * z,
                    Some(prev) => transition * prev + &noise_roots[k - 1] * z,
                }
            }
        }
    }
}

fn normal_vector(rng: &mut SampleRng, dim: usize) -> DVector<f64> {
    DVector::from_fn(dim, |_, _| rng.standard_normal())
}

/// One trajectory under `(encoder, decoder)`; identical seeds give identical
/// trajectories.
pub fn sample_trajectory(
    spec: &GameSpec,
    encoder: &dyn Encoder,
    decoder: &dyn Decoder,
    seed: u64,
) -> Result<Trajectory, ModelError> {
    TrajectorySampler::new(spec)?.sample(encoder, decoder, seed, 0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{ChannelModel, GaussMarkovSource};

    fn gm_spec(channel: bool) -> GameSpec {
        let src = GaussMarkovSource::scalar(0.9, 1.0, &[0.5]).unwrap();
        if channel {
            GameSpec::signaling(4, vec![0.2], 0.5, src, ChannelModel::scalar(&[1.0]).unwrap())
                .unwrap()
        } else {
            GameSpec::cheap_talk(4, vec![0.2], Source::GaussMarkov(src)).unwrap()
        }
    }

    #[test]
    fn zero_policies_give_zero_signals() {
        let spec = gm_spec(true);
        let t = sample_trajectory(&spec, &ZeroEncoder { dim: 1 }, &ConstantDecoder::prior_mean(&spec), 3)
            .unwrap();
        assert!(t.x.iter().all(|x| x[0] == 0.0));
        assert!(t.u.iter().all(|u| u[0] == 0.0));
    }

    #[test]
    fn identity_over_noiseless_link_reconstructs() {
        let spec = gm_spec(false);
        let t = sample_trajectory(&spec, &IdentityEncoder, &IdentityDecoder, 9).unwrap();
        assert_eq!(t.m, t.u);
        assert_eq!(t.x, t.y);
    }

    #[test]
    fn same_seed_same_trajectory() {
        let spec = gm_spec(true);
        let a = sample_trajectory(&spec, &IdentityEncoder, &IdentityDecoder, 42).unwrap();
        let b = sample_trajectory(&spec, &IdentityEncoder, &IdentityDecoder, 42).unwrap();
        let c = sample_trajectory(&spec, &IdentityEncoder, &IdentityDecoder, 43).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn dimension_mismatch_is_reported() {
        let spec = gm_spec(true);
        let err = sample_trajectory(&spec, &ZeroEncoder { dim: 2 }, &IdentityDecoder, 1);
        assert!(matches!(err, Err(ModelError::Shape(_))));
    }
}
