use nalgebra::{DMatrix, DVector};

use super::NashError;
use crate::policy::{Decoder, Encoder};

/// Stage-`k` encoder `x_k = Σ_{i≤k} A_i m_i + Σ_{i<k} B_i y_i + C`.
#[derive(Debug, Clone, PartialEq)]
pub struct EncoderStage {
    /// `k+1` matrices, `p×n`.
    pub a: Vec<DMatrix<f64>>,
    /// `k` matrices, `p×p`.
    pub b: Vec<DMatrix<f64>>,
    pub c: DVector<f64>,
}

/// Stage-`k` decoder `u_k = Σ_{i≤k} D_i y_i + E`.
#[derive(Debug, Clone, PartialEq)]
pub struct DecoderStage {
    /// `k+1` matrices, `n×p`.
    pub d: Vec<DMatrix<f64>>,
    pub e: DVector<f64>,
}

impl EncoderStage {
    pub fn zeros(stage: usize, n: usize, p: usize) -> Self {
        EncoderStage {
            a: vec![DMatrix::zeros(p, n); stage + 1],
            b: vec![DMatrix::zeros(p, p); stage],
            c: DVector::zeros(p),
        }
    }

    fn values(&self) -> impl Iterator<Item = &f64> {
        self.a
            .iter()
            .flat_map(|m| m.iter())
            .chain(self.b.iter().flat_map(|m| m.iter()))
            .chain(self.c.iter())
    }

    fn values_mut(&mut self) -> impl Iterator<Item = &mut f64> {
        self.a
            .iter_mut()
            .flat_map(|m| m.iter_mut())
            .chain(self.b.iter_mut().flat_map(|m| m.iter_mut()))
            .chain(self.c.iter_mut())
    }
}

impl DecoderStage {
    pub fn zeros(stage: usize, n: usize, p: usize) -> Self {
        DecoderStage {
            d: vec![DMatrix::zeros(n, p); stage + 1],
            e: DVector::zeros(n),
        }
    }

    fn values(&self) -> impl Iterator<Item = &f64> {
        self.d.iter().flat_map(|m| m.iter()).chain(self.e.iter())
    }

    fn values_mut(&mut self) -> impl Iterator<Item = &mut f64> {
        self.d
            .iter_mut()
            .flat_map(|m| m.iter_mut())
            .chain(self.e.iter_mut())
    }
}

/// Affine encoder and decoder over full histories, one entry per stage.
#[derive(Debug, Clone, PartialEq)]
pub struct AffinePolicyProfile {
    pub encoder: Vec<EncoderStage>,
    pub decoder: Vec<DecoderStage>,
}

impl AffinePolicyProfile {
    /// The babbling profile: every coefficient zero.
    pub fn zeros(horizon: usize, n: usize, p: usize) -> Self {
        AffinePolicyProfile {
            encoder: (0..horizon).map(|k| EncoderStage::zeros(k, n, p)).collect(),
            decoder: (0..horizon).map(|k| DecoderStage::zeros(k, n, p)).collect(),
        }
    }

    /// Encoder that sends `scale · m_k` and a decoder that plays `y_k`.
    pub fn memoryless(horizon: usize, n: usize, scale: f64) -> Self {
        let mut p = AffinePolicyProfile::zeros(horizon, n, n);
        for k in 0..horizon {
            p.encoder[k].a[k] = DMatrix::identity(n, n) * scale;
            p.decoder[k].d[k] = DMatrix::identity(n, n);
        }
        p
    }

    pub fn horizon(&self) -> usize {
        self.encoder.len()
    }

    /// Check index ranges and matrix shapes against `(horizon, n, p)`.
    pub fn validate(&self, horizon: usize, n: usize, p: usize) -> Result<(), NashError> {
        if self.encoder.len() != horizon || self.decoder.len() != horizon {
            return Err(NashError::Shape(format!(
                "profile has {} encoder and {} decoder stages, horizon is {horizon}",
                self.encoder.len(),
                self.decoder.len()
            )));
        }
        let shape_err = |what: &str, k: usize| {
            NashError::Shape(format!("stage {k}: {what} has the wrong number or shape of entries"))
        };
        for k in 0..horizon {
            let enc = &self.encoder[k];
            if enc.a.len() != k + 1 || enc.a.iter().any(|m| m.shape() != (p, n)) {
                return Err(shape_err("A", k));
            }
            if enc.b.len() != k || enc.b.iter().any(|m| m.shape() != (p, p)) {
                return Err(shape_err("B", k));
            }
            if enc.c.len() != p {
                return Err(shape_err("C", k));
            }
            let dec = &self.decoder[k];
            if dec.d.len() != k + 1 || dec.d.iter().any(|m| m.shape() != (n, p)) {
                return Err(shape_err("D", k));
            }
            if dec.e.len() != n {
                return Err(shape_err("E", k));
            }
        }
        Ok(())
    }

    /// Encoder coefficients flattened stage by stage (A, then B, then C).
    pub fn encoder_params(&self) -> Vec<f64> {
        self.encoder.iter().flat_map(|s| s.values()).copied().collect()
    }

    pub fn decoder_params(&self) -> Vec<f64> {
        self.decoder.iter().flat_map(|s| s.values()).copied().collect()
    }

    /// Inverse of [`encoder_params`](Self::encoder_params).
    pub fn set_encoder_params(&mut self, params: &[f64]) {
        for (slot, v) in self.encoder.iter_mut().flat_map(|s| s.values_mut()).zip(params) {
            *slot = *v;
        }
    }

    pub fn set_decoder_params(&mut self, params: &[f64]) {
        for (slot, v) in self.decoder.iter_mut().flat_map(|s| s.values_mut()).zip(params) {
            *slot = *v;
        }
    }

    /// Largest encoder slope magnitude over all `A` entries.
    pub fn max_encoder_slope(&self) -> f64 {
        self.encoder
            .iter()
            .flat_map(|s| s.a.iter())
            .map(|m| m.amax())
            .fold(0.0, f64::max)
    }
}

impl Encoder for AffinePolicyProfile {
    fn encode(&self, stage: usize, sources: &[DVector<f64>], outputs: &[DVector<f64>]) -> DVector<f64> {
        let s = &self.encoder[stage];
        let mut x = s.c.clone();
        for (a, m) in s.a.iter().zip(sources) {
            x += a * m;
        }
        for (b, y) in s.b.iter().zip(outputs) {
            x += b * y;
        }
        x
    }
}

impl Decoder for AffinePolicyProfile {
    fn decode(&self, stage: usize, outputs: &[DVector<f64>]) -> DVector<f64> {
        let s = &self.decoder[stage];
        let mut u = s.e.clone();
        for (d, y) in s.d.iter().zip(outputs) {
            u += d * y;
        }
        u
    }
}
