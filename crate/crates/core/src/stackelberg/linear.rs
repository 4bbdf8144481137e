use nalgebra::{DMatrix, DVector};

use crate::linalg::{self, LinalgError};
use crate::policy::{Decoder, Encoder};

/// Linear innovation encoder `x_k = A_k (m_k - m̂_k)` together with its
/// MMSE decoder `u_k = m̂_k + F_k y_k`.
///
/// `m̂_k = E[m_k | y_0..y_{k-1}]` is rebuilt from the fed-back outputs with
/// `m̂_0 = 0` and `m̂_{k+1} = G u_k`, so encoder and decoder agree on it.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearInnovationPolicy {
    transition: DMatrix<f64>,
    gains: Vec<DMatrix<f64>>,
    filters: Vec<DMatrix<f64>>,
}

impl LinearInnovationPolicy {
    /// `sigma_tilde[k]` is the innovation covariance the gains were designed
    /// for and `noise[k]` the channel noise covariance.
    pub fn new(
        transition: DMatrix<f64>,
        gains: Vec<DMatrix<f64>>,
        sigma_tilde: &[DMatrix<f64>],
        noise: &[DMatrix<f64>],
    ) -> Result<Self, LinalgError> {
        if sigma_tilde.len() != gains.len() || noise.len() != gains.len() {
            return Err(LinalgError::Shape(format!(
                "{} gains, {} covariances, {} noise matrices",
                gains.len(),
                sigma_tilde.len(),
                noise.len()
            )));
        }
        let filters = gains
            .iter()
            .zip(sigma_tilde)
            .zip(noise)
            .map(|((a, s), w)| {
                let cov_y = linalg::symmetrize(&(a * s * a.transpose() + w));
                let inv = linalg::spd_inverse(&cov_y)?;
                Ok(s * a.transpose() * inv)
            })
            .collect::<Result<Vec<_>, LinalgError>>()?;
        Ok(LinearInnovationPolicy {
            transition,
            gains,
            filters,
        })
    }

    pub fn gains(&self) -> &[DMatrix<f64>] {
        &self.gains
    }

    /// MMSE filter gains `F_k = Σ̃_k A_kᵀ (A_k Σ̃_k A_kᵀ + Σ_W)^{-1}`.
    pub fn filters(&self) -> &[DMatrix<f64>] {
        &self.filters
    }

    fn prediction(&self, stage: usize, outputs: &[DVector<f64>]) -> DVector<f64> {
        let mut pred = DVector::zeros(self.transition.nrows());
        for j in 0..stage {
            let u = &pred + &self.filters[j] * &outputs[j];
            pred = &self.transition * u;
        }
        pred
    }
}

impl Encoder for LinearInnovationPolicy {
    fn encode(&self, stage: usize, sources: &[DVector<f64>], outputs: &[DVector<f64>]) -> DVector<f64> {
        let pred = self.prediction(stage, outputs);
        &self.gains[stage] * (&sources[stage] - pred)
    }
}

impl Decoder for LinearInnovationPolicy {
    fn decode(&self, stage: usize, outputs: &[DVector<f64>]) -> DVector<f64> {
        self.prediction(stage, outputs) + &self.filters[stage] * &outputs[stage]
    }
}
