//! Every game variable under affine policies is an affine function of the
//! independent zero-mean primitives `z = (m_0, v_0..v_{N-2}, w_0..w_{N-1})`,
//! so all moments follow from `Cov(z)`.

use nalgebra::{DMatrix, DVector};

use super::profile::{DecoderStage, EncoderStage};
use crate::model::{ChannelModel, GameSpec, GaussMarkovSource};

/// `mean + lin · z`.
#[derive(Debug, Clone)]
pub(crate) struct AffineVar {
    pub mean: DVector<f64>,
    pub lin: DMatrix<f64>,
}

impl AffineVar {
    fn zeros(dim: usize, nz: usize) -> Self {
        AffineVar {
            mean: DVector::zeros(dim),
            lin: DMatrix::zeros(dim, nz),
        }
    }

    fn add_mapped(&mut self, map: &DMatrix<f64>, other: &AffineVar) {
        self.mean += map * &other.mean;
        self.lin += map * &other.lin;
    }

    fn sub(&self, other: &AffineVar) -> AffineVar {
        AffineVar {
            mean: &self.mean - &other.mean,
            lin: &self.lin - &other.lin,
        }
    }

    fn stack(parts: &[&AffineVar]) -> AffineVar {
        let rows: usize = parts.iter().map(|p| p.mean.len()).sum();
        let nz = parts[0].lin.ncols();
        let mut out = AffineVar::zeros(rows, nz);
        let mut r = 0;
        for p in parts {
            let d = p.mean.len();
            out.mean.rows_mut(r, d).copy_from(&p.mean);
            out.lin.rows_mut(r, d).copy_from(&p.lin);
            r += d;
        }
        out
    }
}

pub(crate) struct JointModel {
    pub cov_z: DMatrix<f64>,
    pub m: Vec<AffineVar>,
    pub x: Vec<AffineVar>,
    pub y: Vec<AffineVar>,
}

impl JointModel {
    /// Source and channel variables induced by an affine encoder.
    pub fn new(
        spec: &GameSpec,
        source: &GaussMarkovSource,
        channel: &ChannelModel,
        encoder: &[EncoderStage],
    ) -> Self {
        let horizon = spec.horizon;
        let n = source.dim();
        let p = channel.dim();
        let nz = n * horizon + p * horizon;
        let w_offset = n * horizon;

        let mut cov_z = DMatrix::zeros(nz, nz);
        cov_z.view_mut((0, 0), (n, n)).copy_from(&source.initial_cov);
        for k in 0..horizon.saturating_sub(1) {
            let o = n * (k + 1);
            cov_z.view_mut((o, o), (n, n)).copy_from(&source.process_noise(k));
        }
        for k in 0..horizon {
            let o = w_offset + p * k;
            cov_z.view_mut((o, o), (p, p)).copy_from(channel.noise(k));
        }

        let mut m: Vec<AffineVar> = Vec::with_capacity(horizon);
        let mut x: Vec<AffineVar> = Vec::with_capacity(horizon);
        let mut y: Vec<AffineVar> = Vec::with_capacity(horizon);
        for k in 0..horizon {
            let mut mk = AffineVar::zeros(n, nz);
            if k == 0 {
                mk.lin.view_mut((0, 0), (n, n)).fill_with_identity();
            } else {
                mk.add_mapped(&source.transition, &m[k - 1]);
                mk.lin
                    .view_mut((0, n * k), (n, n))
                    .fill_with_identity();
            }
            m.push(mk);

            let enc = &encoder[k];
            let mut xk = AffineVar::zeros(p, nz);
            xk.mean += &enc.c;
            for (i, a) in enc.a.iter().enumerate() {
                xk.add_mapped(a, &m[i]);
            }
            for (i, b) in enc.b.iter().enumerate() {
                xk.add_mapped(b, &y[i]);
            }
            let mut yk = xk.clone();
            yk.lin
                .view_mut((0, w_offset + p * k), (p, p))
                .fill_with_identity();
            x.push(xk);
            y.push(yk);
        }
        JointModel { cov_z, m, x, y }
    }

    pub fn cov(&self, a: &AffineVar, b: &AffineVar) -> DMatrix<f64> {
        &a.lin * &self.cov_z * b.lin.transpose()
    }

    pub fn second_moment(&self, a: &AffineVar) -> f64 {
        a.mean.norm_squared() + (&a.lin * &self.cov_z * a.lin.transpose()).trace()
    }

    /// Stacked outputs `(y_0, .., y_k)`.
    pub fn outputs_through(&self, k: usize) -> AffineVar {
        let parts: Vec<&AffineVar> = self.y[..=k].iter().collect();
        AffineVar::stack(&parts)
    }

    /// Decoder actions under an affine decoder.
    pub fn actions(&self, decoder: &[DecoderStage]) -> Vec<AffineVar> {
        decoder
            .iter()
            .map(|dec| {
                let mut u = AffineVar::zeros(dec.e.len(), self.cov_z.ncols());
                u.mean += &dec.e;
                for (i, d) in dec.d.iter().enumerate() {
                    u.add_mapped(d, &self.y[i]);
                }
                u
            })
            .collect()
    }

    /// Exact `(J_e, J_d)` of the profile.
    pub fn costs(&self, spec: &GameSpec, decoder: &[DecoderStage]) -> (f64, f64) {
        let u = self.actions(decoder);
        let (mut je, mut jd) = (0.0, 0.0);
        for k in 0..spec.horizon {
            let w = spec.stage_weight(k);
            let mut err = self.m[k].sub(&u[k]);
            jd += w * self.second_moment(&err);
            err.mean -= &spec.bias;
            je += w * (self.second_moment(&err) + spec.lambda * self.second_moment(&self.x[k]));
        }
        (je, jd)
    }
}
