use super::NashError;
use crate::model::GameSpec;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Regime {
    /// Power is too expensive at both stages.
    NoInformativeAffine,
    /// The second-stage message is not used.
    SecondMessageUnused,
    /// Informativeness depends on the bias window.
    ConditionallyInformative,
}

/// The λ bounds evaluated for one instance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RegimeThresholds {
    /// `(g²+1) σ²_M0 / σ²_W0`
    pub q0: f64,
    /// `σ²_M1 / σ²_W1`
    pub q1: f64,
    pub sigma_m1: f64,
    /// Open window ends; `None` when `σ²_M1 < 4b²`.
    pub window: Option<(f64, f64)>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TwoStageRegime {
    pub regime: Regime,
    /// `None` where the regime does not settle the question.
    pub informative: Option<bool>,
    pub thresholds: RegimeThresholds,
    /// λ (or `σ²_M1` against `4b²`) sits exactly on one of the bounds.
    pub at_boundary: bool,
}

/// Informativeness of affine Nash equilibria of the scalar two-stage game.
pub fn classify_two_stage(spec: &GameSpec) -> Result<TwoStageRegime, NashError> {
    spec.validate()?;
    let source = spec
        .gauss_markov()
        .ok_or_else(|| NashError::WrongGame("source must be Gauss-Markov".into()))?;
    let channel = spec
        .channel
        .as_ref()
        .ok_or_else(|| NashError::WrongGame("a channel is required".into()))?;
    if spec.horizon != 2 || source.dim() != 1 || channel.dim() != 1 {
        return Err(NashError::Shape(format!(
            "needs a scalar two-stage game (horizon {}, n {}, p {})",
            spec.horizon,
            source.dim(),
            channel.dim()
        )));
    }
    let g = source.transition[(0, 0)];
    let m0 = source.initial_cov[(0, 0)];
    let v0 = source.process_noise(0)[(0, 0)];
    let w0 = channel.noise(0)[(0, 0)];
    let w1 = channel.noise(1)[(0, 0)];
    let b = spec.bias[0];
    let lambda = spec.lambda;

    let m1 = g * g * m0 + v0;
    let q0 = (g * g + 1.0) * m0 / w0;
    let q1 = m1 / w1;
    let window = (m1 >= 4.0 * b * b).then(|| {
        let root = m1.sqrt() * (m1 - 4.0 * b * b).sqrt();
        (
            (m1 - 2.0 * b * b - root) / (2.0 * w1),
            (m1 - 2.0 * b * b + root) / (2.0 * w1),
        )
    });
    let thresholds = RegimeThresholds {
        q0,
        q1,
        sigma_m1: m1,
        window,
    };
    let mut at_boundary = lambda == q0 || lambda == q1;

    let (regime, informative) = if lambda > q0.max(q1) {
        (Regime::NoInformativeAffine, Some(false))
    } else if q1 < lambda && lambda <= q0 {
        (Regime::SecondMessageUnused, None)
    } else if q0 < lambda && lambda <= q1 {
        at_boundary |= m1 == 4.0 * b * b;
        let informative = match window {
            Some((lo, hi)) => {
                at_boundary |= lambda == lo || lambda == hi;
                lo.max(q0) < lambda && lambda < hi
            }
            None => false,
        };
        (Regime::ConditionallyInformative, Some(informative))
    } else {
        return Err(NashError::UncoveredRegime { lambda, q0, q1 });
    };
    Ok(TwoStageRegime {
        regime,
        informative,
        thresholds,
        at_boundary,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{ChannelModel, GaussMarkovSource};

    fn spec(g: f64, m0: f64, v0: f64, w: [f64; 2], b: f64, lambda: f64) -> GameSpec {
        GameSpec::signaling(
            2,
            vec![b],
            lambda,
            GaussMarkovSource::scalar(g, m0, &[v0]).unwrap(),
            ChannelModel::scalar(&w).unwrap(),
        )
        .unwrap()
    }

    #[test]
    fn expensive_power_is_silent() {
        let r = classify_two_stage(&spec(1.0, 1.0, 1.0, [1.0, 1.0], 0.2, 3.0)).unwrap();
        assert_eq!(r.regime, Regime::NoInformativeAffine);
        assert_eq!(r.informative, Some(false));
        assert_eq!((r.thresholds.q0, r.thresholds.q1), (2.0, 2.0));
    }

    #[test]
    fn large_bias_blocks_information() {
        let r = classify_two_stage(&spec(0.0, 1.0, 1.0, [2.0, 1.0], 0.6, 0.75)).unwrap();
        assert_eq!(r.regime, Regime::ConditionallyInformative);
        assert_eq!(r.informative, Some(false));
        assert!(r.thresholds.window.is_none());
    }

    #[test]
    fn zero_bias_window_is_full() {
        let r = classify_two_stage(&spec(0.0, 1.0, 1.0, [2.0, 1.0], 0.0, 0.75)).unwrap();
        assert_eq!(r.informative, Some(true));
        assert_eq!(r.thresholds.window, Some((0.0, 1.0)));
    }

    #[test]
    fn second_message_unused() {
        // q0 = 2, q1 = 0.5
        let r = classify_two_stage(&spec(1.0, 1.0, 0.0, [1.0, 2.0], 0.0, 1.0)).unwrap();
        assert_eq!(r.regime, Regime::SecondMessageUnused);
        assert_eq!(r.informative, None);
    }

    #[test]
    fn low_lambda_is_uncovered() {
        let r = classify_two_stage(&spec(1.0, 1.0, 1.0, [1.0, 1.0], 0.0, 0.5));
        assert!(matches!(r, Err(NashError::UncoveredRegime { .. })));
    }

    #[test]
    fn equality_sets_boundary_flag() {
        let r = classify_two_stage(&spec(0.0, 1.0, 1.0, [2.0, 1.0], 0.0, 1.0)).unwrap();
        assert!(r.at_boundary);
        assert_eq!(r.informative, Some(false));
    }
}
