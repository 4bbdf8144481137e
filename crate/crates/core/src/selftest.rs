//! Quick invariant checks across every solver, run by `siggame selftest`.

use nalgebra::{DMatrix, DVector};

use crate::cheaptalk::{self, SolveOptions, SolveOutcome};
use crate::linalg;
use crate::model::{ChannelModel, GameSpec, GaussMarkovSource, ScalarSource, Source};
use crate::montecarlo::{self, McOptions};
use crate::nash::{self, IterationOptions, Regime};
use crate::policy::{ConstantDecoder, ZeroEncoder};
use crate::rng::SampleRng;
use crate::stackelberg::{scalar, vector};

#[derive(Debug, Clone, PartialEq)]
pub struct SelfCheck {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

fn check(name: &'static str, outcome: Result<(bool, String), String>) -> SelfCheck {
    match outcome {
        Ok((passed, detail)) => SelfCheck { name, passed, detail },
        Err(detail) => SelfCheck {
            name,
            passed: false,
            detail,
        },
    }
}

fn scalar_gm(horizon: usize, g: f64, m0: f64, v: f64, w: f64, b: f64, lambda: f64) -> Result<GameSpec, String> {
    GameSpec::signaling(
        horizon,
        vec![b],
        lambda,
        GaussMarkovSource::scalar(g, m0, &[v]).map_err(|e| e.to_string())?,
        ChannelModel::scalar(&[w]).map_err(|e| e.to_string())?,
    )
    .map_err(|e| e.to_string())
}

fn cheaptalk_uniform() -> Result<(bool, String), String> {
    let src = ScalarSource::uniform(0.0, 1.0).map_err(|e| e.to_string())?;
    let opts = SolveOptions::default();
    let two = cheaptalk::solve_quantized(&src, 0.1, 2, &opts).map_err(|e| e.to_string())?;
    let three = cheaptalk::solve_quantized(&src, 0.1, 3, &opts).map_err(|e| e.to_string())?;
    let SolveOutcome::Found { policy, certificate, .. } = two else {
        return Ok((false, "no 2-bin equilibrium".into()));
    };
    let ok = (policy.boundaries()[0] - 0.7).abs() < 1e-6
        && certificate.passes()
        && !three.is_found()
        && policy.min_action_gap() > 0.2;
    Ok((ok, format!("boundary {}", policy.boundaries()[0])))
}

fn multidim_pair() -> Result<(bool, String), String> {
    let b = DVector::from_column_slice(&[0.1, 0.0]);
    let near = cheaptalk::verify_multidim_pair(&DVector::zeros(2), &DVector::from_column_slice(&[0.1, 0.0]), &b)
        .map_err(|e| e.to_string())?;
    let far = cheaptalk::verify_multidim_pair(&DVector::zeros(2), &DVector::from_column_slice(&[0.3, 0.0]), &b)
        .map_err(|e| e.to_string())?;
    Ok((!near && far, format!("near {near}, far {far}")))
}

fn nash_two_stage() -> Result<(bool, String), String> {
    let spec = scalar_gm(2, 1.0, 1.0, 1.0, 1.0, 0.2, 3.0)?;
    let regime = nash::classify_two_stage(&spec).map_err(|e| e.to_string())?;
    let sol = nash::best_response_iteration(
        &spec,
        &nash::AffinePolicyProfile::memoryless(2, 1, 1.0),
        &IterationOptions::default(),
    )
    .map_err(|e| e.to_string())?;
    let ok = regime.regime == Regime::NoInformativeAffine
        && !sol.informative
        && sol.decoder_residual < 1e-9
        && sol.encoder_residual < 1e-9;
    Ok((ok, format!("iterations {}", sol.iterations)))
}

fn scalar_thresholds() -> Result<(bool, String), String> {
    let finite = scalar::informativeness_threshold(&scalar_gm(2, 1.0, 1.0, 1.0, 1.0, 0.0, 1.0)?)
        .map_err(|e| e.to_string())?;
    let discounted = scalar::discounted_threshold(
        &scalar_gm(1, 0.5, 1.0, 0.75, 1.0, 0.0, 1.0)?
            .with_discount(0.5)
            .map_err(|e| e.to_string())?,
    )
    .map_err(|e| e.to_string())?;
    let ok = (finite - 2.0).abs() < 1e-12 && discounted.is_some_and(|t| (t - 8.0 / 7.0).abs() < 1e-12);
    Ok((ok, format!("lambda_star {finite}, discounted {discounted:?}")))
}

fn scalar_power() -> Result<(bool, String), String> {
    let spec = scalar_gm(1, 1.0, 1.0, 1.0, 1.0, 0.1, 0.25)?;
    let sol = scalar::optimize_power(&spec, &scalar::PowerOptions::default()).map_err(|e| e.to_string())?;
    let ok = (sol.power[0] - 1.0).abs() < 1e-6 && (sol.j_lower - 0.76).abs() < 1e-6;
    Ok((ok, format!("P {}, J {}", sol.power[0], sol.j_lower)))
}

fn vector_dp() -> Result<(bool, String), String> {
    let diag = |v: &[f64]| DMatrix::from_diagonal(&DVector::from_column_slice(v));
    let src = GaussMarkovSource::new(diag(&[0.9, 0.7, 0.4]), diag(&[3.0, 2.0, 1.0]), vec![diag(&[0.5, 0.3, 0.2])])
        .map_err(|e| e.to_string())?;
    let channel = ChannelModel::new(vec![diag(&[1.0, 2.0])]).map_err(|e| e.to_string())?;
    let spec = GameSpec::signaling(4, vec![0.1, 0.0, -0.1], 0.3, src, channel).map_err(|e| e.to_string())?;
    let sol = vector::backward_dp(&spec, &vector::DpOptions::default()).map_err(|e| e.to_string())?;
    let inv = sol.invariants();
    let bellman = sol
        .bellman_residuals()
        .map_err(|e| e.to_string())?
        .into_iter()
        .fold(0.0, f64::max);
    let ok = inv.terminal_zero
        && inv.k_off_diagonal < 1e-10
        && inv.m_off_diagonal < 1e-10
        && inv.noise_off_diagonal < 1e-10
        && bellman < 1e-8
        && sol.zeta_probe(1e-3) >= -1e-12;
    Ok((ok, format!("V_0 {}, bellman {bellman:e}", sol.value())))
}

fn inversion_lemma() -> Result<(bool, String), String> {
    let mut rng = SampleRng::new(7, 0);
    let mut worst: f64 = 0.0;
    for _ in 0..20 {
        let mut draw = |r, c| DMatrix::from_fn(r, c, |_, _| 0.5 * rng.standard_normal());
        let u = draw(4, 4);
        let v = draw(4, 4);
        let w = DMatrix::<f64>::identity(4, 4) + draw(4, 4) * 0.2;
        let res = linalg::inversion_lemma_residual(&u, &w, &v).map_err(|e| e.to_string())?;
        if res.is_finite() {
            worst = worst.max(res);
        }
    }
    Ok((worst < 1e-8, format!("worst residual {worst:e}")))
}

fn babbling_monte_carlo() -> Result<(bool, String), String> {
    let spec = GameSpec::cheap_talk(
        1,
        vec![0.5],
        Source::Scalar(ScalarSource::gaussian(0.0, 1.0).map_err(|e| e.to_string())?),
    )
    .map_err(|e| e.to_string())?;
    let est = montecarlo::estimate(
        &spec,
        &ZeroEncoder { dim: 1 },
        &ConstantDecoder::prior_mean(&spec),
        &McOptions::new(20_000, 11),
    )
    .map_err(|e| e.to_string())?;
    let cmp = montecarlo::compare_to_theory(&est, 1.25, 1.0);
    Ok((cmp.passed(), format!("z_je {:.2}, z_jd {:.2}", cmp.z_je, cmp.z_jd)))
}

/// Run every check; the suite passes when each entry passes.
pub fn run_all() -> Vec<SelfCheck> {
    vec![
        check("cheaptalk_uniform_two_bins", cheaptalk_uniform()),
        check("cheaptalk_multidim_pair", multidim_pair()),
        check("nash_two_stage_silent", nash_two_stage()),
        check("stackelberg_thresholds", scalar_thresholds()),
        check("stackelberg_power", scalar_power()),
        check("vector_dp_invariants", vector_dp()),
        check("inversion_lemma", inversion_lemma()),
        check("montecarlo_babbling", babbling_monte_carlo()),
    ]
}
