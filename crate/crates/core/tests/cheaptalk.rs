use proptest::prelude::*;
use siggame_core::cheaptalk::{
    max_bins, solve_quantized, solve_repeated_iid, stackelberg_cheaptalk, verify_equilibrium, SolveOptions,
    SolveOutcome,
};
use siggame_core::montecarlo::{compare_to_theory, estimate, McOptions};
use siggame_core::{GameSpec, GaussMarkovSource, GriddedDensity, ScalarSource, Source};

/// Grid search for the two-bin uniform equilibrium: centroid actions on each
/// side and the boundary where the biased encoder is indifferent.
fn grid_oracle(b: f64, step: f64) -> (f64, f64, f64) {
    let n = (1.0 / step).round() as usize;
    (1..n)
        .map(|i| i as f64 * step)
        .map(|a| {
            let (u1, u2) = (a / 2.0, (1.0 + a) / 2.0);
            (a, u1, u2, (a - (u1 + u2) / 2.0 - b).abs())
        })
        .min_by(|x, y| x.3.total_cmp(&y.3))
        .map(|(a, u1, u2, _)| (a, u1, u2))
        .unwrap()
}

#[test]
fn uniform_two_bins_match_grid_oracle() {
    let src = ScalarSource::uniform(0.0, 1.0).unwrap();
    let (a, u1, u2) = grid_oracle(0.1, 1e-3);
    let out = solve_quantized(&src, 0.1, 2, &SolveOptions::default()).unwrap();
    let policy = out.policy().expect("two bins exist");
    assert!((policy.boundaries()[0] - a).abs() < 1e-6);
    assert!((policy.actions()[0] - u1).abs() < 1e-6);
    assert!((policy.actions()[1] - u2).abs() < 1e-6);
    assert!(!solve_quantized(&src, 0.1, 3, &SolveOptions::default()).unwrap().is_found());
    assert_eq!(max_bins(&src, 0.1, &SolveOptions::default()).unwrap(), 2);
}

fn gridded(weights: &[f64]) -> ScalarSource {
    let n = weights.len();
    let grid = (0..n).map(|i| i as f64 / (n - 1) as f64).collect();
    ScalarSource::Gridded(GriddedDensity::normalized(grid, weights.to_vec()).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(96))]

    #[test]
    fn solved_equilibria_keep_actions_apart(
        weights in prop::collection::vec(0.05f64..2.0, 8..40),
        b in 0.01f64..0.3,
        k in 2usize..5,
    ) {
        let src = gridded(&weights);
        if let SolveOutcome::Found { policy, certificate, .. } = solve_quantized(&src, b, k, &SolveOptions::default()).unwrap() {
            prop_assert!(certificate.passes());
            prop_assert!(policy.min_action_gap() > 2.0 * b);
            let again = verify_equilibrium(&policy, &src, b, 1e-8).unwrap();
            prop_assert!(again.passes());
        }
    }

    #[test]
    fn negative_bias_mirrors_positive(b in 0.02f64..0.2) {
        let src = ScalarSource::uniform(0.0, 1.0).unwrap();
        let pos = solve_quantized(&src, b, 2, &SolveOptions::default()).unwrap();
        let neg = solve_quantized(&src, -b, 2, &SolveOptions::default()).unwrap();
        if let (Some(p), Some(n)) = (pos.policy(), neg.policy()) {
            prop_assert!((p.boundaries()[0] - (1.0 - n.boundaries()[0])).abs() < 1e-8);
        }
    }
}

#[test]
fn repeated_game_repeats_the_stage_quantizer() {
    let src = ScalarSource::uniform(0.0, 1.0).unwrap();
    let eq = solve_repeated_iid(&src, 0.05, 3, None, None, &SolveOptions::default()).unwrap();
    assert_eq!(eq.stages.len(), 3);
    assert!(eq.stages.windows(2).all(|w| w[0] == w[1]));
    assert!(eq.certificates.iter().all(|c| c.passes()));
    let stage = &eq.certificates[0];
    assert!((eq.j_e - 3.0 * stage.j_e).abs() < 1e-12);
}

#[test]
fn revealing_policies_cost_only_the_bias() {
    let src = GaussMarkovSource::scalar(0.9, 1.0, &[0.4]).unwrap();
    let spec = GameSpec::cheap_talk(4, vec![0.3], Source::GaussMarkov(src)).unwrap();
    let sol = stackelberg_cheaptalk(&spec).unwrap();
    assert!((sol.j_e - 4.0 * 0.09).abs() < 1e-15);
    let est = estimate(&spec, &sol.encoder, &sol.decoder, &McOptions::new(20_000, 3)).unwrap();
    assert!(compare_to_theory(&est, sol.j_e, 0.0).passed());
}
