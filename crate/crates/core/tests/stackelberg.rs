use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use siggame_core::linalg;
use siggame_core::montecarlo::{compare_to_theory, estimate, McOptions};
use siggame_core::rng::SampleRng;
use siggame_core::stackelberg::scalar::{
    distortion_recursion, lower_bound_cost, lower_bound_gradient, optimize_power, PowerOptions,
};
use siggame_core::stackelberg::vector::{backward_dp, DpOptions};
use siggame_core::{ChannelModel, GameSpec, GaussMarkovSource};

fn scalar_spec(horizon: usize, g: f64, m0: f64, v: f64, w: f64, b: f64, lambda: f64) -> GameSpec {
    GameSpec::signaling(
        horizon,
        vec![b],
        lambda,
        GaussMarkovSource::scalar(g, m0, &[v]).unwrap(),
        ChannelModel::scalar(&[w]).unwrap(),
    )
    .unwrap()
}

fn diag(v: &[f64]) -> DMatrix<f64> {
    DMatrix::from_diagonal(&DVector::from_column_slice(v))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn distortion_never_exceeds_prior(
        g in -1.5f64..1.5,
        m0 in 0.1f64..5.0,
        v in 0.0f64..2.0,
        w in 0.1f64..3.0,
        power in prop::collection::vec(0.0f64..20.0, 1..6),
    ) {
        let spec = scalar_spec(power.len(), g, m0, v, w, 0.0, 1.0);
        let t = distortion_recursion(&power, &spec).unwrap();
        for k in 0..power.len() {
            prop_assert!(t.delta[k] >= 0.0);
            prop_assert!(t.delta[k] <= t.sigma_m[k] * (1.0 + 1e-12));
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn more_power_never_hurts_without_penalty(
        power in prop::collection::vec(0.0f64..10.0, 3),
        k in 0usize..3,
        extra in 0.0f64..5.0,
    ) {
        let spec = scalar_spec(3, 0.9, 1.0, 0.5, 1.0, 0.2, 0.0);
        let mut more = power.clone();
        more[k] += extra;
        prop_assert!(lower_bound_cost(&more, &spec).unwrap() <= lower_bound_cost(&power, &spec).unwrap() + 1e-14);
    }
}

#[test]
fn interior_optimum_gradient_matches_finite_differences() {
    let spec = scalar_spec(4, 0.95, 1.0, 0.6, 0.8, 0.1, 0.2);
    let sol = optimize_power(&spec, &PowerOptions::default()).unwrap();
    assert!(sol.power.iter().all(|&p| p > 0.0));
    // probe off the optimum too, where the gradient is not tiny
    let probe: Vec<f64> = sol.power.iter().map(|p| p * 1.3).collect();
    let grad = lower_bound_gradient(&probe, &spec).unwrap();
    for k in 0..4 {
        let h = 1e-6 * probe[k];
        let mut up = probe.clone();
        let mut dn = probe.clone();
        up[k] += h;
        dn[k] -= h;
        let fd = (lower_bound_cost(&up, &spec).unwrap() - lower_bound_cost(&dn, &spec).unwrap()) / (2.0 * h);
        assert!((grad[k] - fd).abs() <= 1e-5 * fd.abs(), "stage {k}: {} vs {fd}", grad[k]);
    }
}

#[test]
fn synthesized_policy_attains_the_bound() {
    let spec = scalar_spec(3, 0.8, 1.0, 0.5, 1.0, 0.2, 0.3);
    let sol = optimize_power(&spec, &PowerOptions::default()).unwrap();
    let policy = sol.policy();
    let est = estimate(&spec, &policy, &policy, &McOptions::new(100_000, 21)).unwrap();
    let cmp = compare_to_theory(&est, sol.j_lower, sol.j_d);
    assert!(cmp.passed(), "{cmp:?}");
}

#[test]
fn printed_mmse_error_matches_normalized_form() {
    let mut rng = SampleRng::new(5, 0);
    for _ in 0..50 {
        let root = DMatrix::from_fn(3, 3, |_, _| rng.standard_normal());
        let sigma = &root * root.transpose() + DMatrix::identity(3, 3) * 0.1;
        let h = DMatrix::from_fn(2, 3, |_, _| rng.standard_normal());
        let wroot = DMatrix::from_fn(2, 2, |_, _| rng.standard_normal());
        let sigma_w = &wroot * wroot.transpose() + DMatrix::identity(2, 2) * 0.5;
        let s = linalg::sym_sqrt(&sigma);
        let a = linalg::sym_sqrt(&sigma_w) * &h * linalg::sym_inv_sqrt(&sigma, 1e-14);
        let cov_y = &a * &sigma * a.transpose() + &sigma_w;
        let printed = &sigma - &sigma * a.transpose() * cov_y.try_inverse().unwrap() * &a * &sigma;
        let normalized = &s * (DMatrix::identity(3, 3) + h.transpose() * &h).try_inverse().unwrap() * &s;
        assert!((printed - normalized).amax() < 1e-10);
    }
}

#[test]
fn scalar_dp_value_equals_bound_at_its_powers() {
    let spec = scalar_spec(5, 0.9, 2.0, 0.4, 1.0, 0.2, 0.25).with_discount(0.95).unwrap();
    let dp = backward_dp(&spec, &DpOptions::default()).unwrap();
    let bound = lower_bound_cost(&dp.powers(), &spec).unwrap();
    assert!((dp.value() - bound).abs() < 1e-9);
}

#[test]
fn silent_when_power_is_expensive() {
    let src = GaussMarkovSource::new(diag(&[0.5, 0.2]), diag(&[1.0, 0.5]), vec![diag(&[0.2, 0.1])]).unwrap();
    let spec = GameSpec::signaling(3, vec![0.1, 0.1], 100.0, src, ChannelModel::new(vec![diag(&[1.0])]).unwrap())
        .unwrap();
    let dp = backward_dp(&spec, &DpOptions::default()).unwrap();
    let priors = spec.gauss_markov().unwrap().stage_covariances(3);
    let expected: f64 = priors.iter().map(|p| p.trace() + 0.02).sum();
    assert!(dp.gains.iter().all(|a| a.amax() == 0.0));
    assert!((dp.value() - expected).abs() < 1e-12);
}

#[test]
fn single_stage_zeta_matches_grid_search() {
    // λσ²_W = 1 and ν = σ²_M
    let spec = GameSpec::signaling(
        1,
        vec![0.0],
        1.0,
        GaussMarkovSource::scalar(1.0, 4.0, &[0.0]).unwrap(),
        ChannelModel::scalar(&[1.0]).unwrap(),
    )
    .unwrap();
    let dp = backward_dp(&spec, &DpOptions::default()).unwrap();
    let z2 = dp.stages[0].zeta[(0, 0)].powi(2);
    let grid = (0..=40_000)
        .map(|i| i as f64 * 1e-4)
        .min_by(|a, b| (4.0 / (1.0 + a) + a).total_cmp(&(4.0 / (1.0 + b) + b)))
        .unwrap();
    assert!((z2 - 1.0).abs() < 1e-12);
    assert!((grid - z2).abs() <= 1e-4);
}

#[test]
fn vector_value_matches_simulation() {
    let src = GaussMarkovSource::new(diag(&[0.9, 0.6, 0.3]), diag(&[2.0, 1.0, 0.5]), vec![diag(&[0.5, 0.3, 0.2])])
        .unwrap();
    let spec = GameSpec::signaling(
        3,
        vec![0.1, -0.1, 0.0],
        0.3,
        src,
        ChannelModel::new(vec![diag(&[1.0, 0.5])]).unwrap(),
    )
    .unwrap();
    let dp = backward_dp(&spec, &DpOptions::default()).unwrap();
    let policy = dp.policy().unwrap();
    let est = estimate(&spec, &policy, &policy, &McOptions::new(100_000, 8)).unwrap();
    let jd = dp.error_covariances().unwrap().iter().map(|e| e.trace()).sum();
    assert!(compare_to_theory(&est, dp.value(), jd).passed());
}
