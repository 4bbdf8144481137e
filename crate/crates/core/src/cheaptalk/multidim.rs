use nalgebra::DVector;

use super::CheapTalkError;
use crate::model::GameSpec;
use crate::policy::{IdentityDecoder, IdentityEncoder};

/// Whether two decoder actions can coexist in an equilibrium under bias `b`.
///
/// With `d = u_beta - u_alpha`, the projection of `b` onto `d` must not exceed
/// half of `‖d‖`. Evaluated as `2|b·d| <= ‖d‖²` to avoid a division.
pub fn verify_multidim_pair(
    u_alpha: &DVector<f64>,
    u_beta: &DVector<f64>,
    b: &DVector<f64>,
) -> Result<bool, CheapTalkError> {
    if u_alpha.len() != b.len() || u_beta.len() != b.len() {
        return Err(CheapTalkError::Argument(format!(
            "dimensions differ: u_alpha {}, u_beta {}, b {}",
            u_alpha.len(),
            u_beta.len(),
            b.len()
        )));
    }
    let d = u_beta - u_alpha;
    let dd = d.norm_squared();
    if dd == 0.0 {
        return Err(CheapTalkError::Argument("actions coincide".into()));
    }
    Ok(2.0 * b.dot(&d).abs() <= dd)
}

/// Fully revealing leader-follower outcome of a cheap-talk game.
#[derive(Debug, Clone, PartialEq)]
pub struct RevealingSolution {
    pub encoder: IdentityEncoder,
    pub decoder: IdentityDecoder,
    pub j_e: f64,
    pub j_d: f64,
}

/// The encoder reveals the source and the decoder plays it back, so only the
/// bias is paid at every stage.
pub fn stackelberg_cheaptalk(spec: &GameSpec) -> Result<RevealingSolution, CheapTalkError> {
    spec.validate()?;
    if spec.is_signaling() {
        return Err(CheapTalkError::WrongGame);
    }
    let per_stage = spec.bias.norm_squared();
    let j_e = (0..spec.horizon).map(|k| spec.stage_weight(k) * per_stage).sum();
    Ok(RevealingSolution {
        encoder: IdentityEncoder,
        decoder: IdentityDecoder,
        j_e,
        j_d: 0.0,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{ChannelModel, GaussMarkovSource, ScalarSource, Source};
    use nalgebra::{DMatrix, Rotation2};
    use proptest::prelude::*;

    fn v(x: &[f64]) -> DVector<f64> {
        DVector::from_column_slice(x)
    }

    #[test]
    fn pair_examples() {
        let b = v(&[1.0, 0.0]);
        assert!(verify_multidim_pair(&v(&[0.0, 0.0]), &v(&[3.0, 0.0]), &b).unwrap());
        assert!(!verify_multidim_pair(&v(&[0.0, 0.0]), &v(&[1.0, 0.0]), &b).unwrap());
        assert!(verify_multidim_pair(&v(&[0.2, 0.1]), &v(&[0.2, 0.3]), &v(&[0.0, 0.0])).unwrap());
    }

    #[test]
    fn pair_errors() {
        let b = v(&[1.0, 0.0]);
        assert!(verify_multidim_pair(&v(&[1.0, 1.0]), &v(&[1.0, 1.0]), &b).is_err());
        assert!(verify_multidim_pair(&v(&[1.0]), &v(&[1.0, 1.0]), &b).is_err());
    }

    #[test]
    fn revealing_costs() {
        let scalar = |h, b| {
            GameSpec::cheap_talk(
                h,
                vec![b],
                Source::Scalar(ScalarSource::gaussian(0.0, 1.0).unwrap()),
            )
            .unwrap()
        };
        let s = stackelberg_cheaptalk(&scalar(3, 0.5)).unwrap();
        assert!((s.j_e - 0.75).abs() < 1e-15);
        assert_eq!(s.j_d, 0.0);
        assert_eq!(stackelberg_cheaptalk(&scalar(1, 0.0)).unwrap().j_e, 0.0);

        let gm = GaussMarkovSource::new(
            DMatrix::identity(2, 2),
            DMatrix::identity(2, 2),
            vec![],
        )
        .unwrap();
        let spec = GameSpec::cheap_talk(2, vec![1.0, 1.0], Source::GaussMarkov(gm.clone())).unwrap();
        assert_eq!(stackelberg_cheaptalk(&spec).unwrap().j_e, 4.0);

        let sig = GameSpec::signaling(
            2,
            vec![1.0, 1.0],
            1.0,
            gm,
            ChannelModel::new(vec![DMatrix::identity(2, 2)]).unwrap(),
        )
        .unwrap();
        assert_eq!(stackelberg_cheaptalk(&sig), Err(CheapTalkError::WrongGame));
    }

    proptest! {
        #[test]
        fn pair_test_is_rotation_invariant(
            a in prop::array::uniform2(-3.0f64..3.0),
            c in prop::array::uniform2(-3.0f64..3.0),
            b in prop::array::uniform2(-2.0f64..2.0),
            angle in 0.0f64..std::f64::consts::TAU,
        ) {
            let (ua, ub, bv) = (v(&a), v(&c), v(&b));
            let d = &ub - &ua;
            let margin = d.norm_squared() - 2.0 * bv.dot(&d).abs();
            prop_assume!(d.norm() > 1e-3 && margin.abs() > 1e-9);
            let r = Rotation2::new(angle);
            let rot = |x: &DVector<f64>| {
                let y = r * nalgebra::Vector2::new(x[0], x[1]);
                v(&[y[0], y[1]])
            };
            prop_assert_eq!(
                verify_multidim_pair(&ua, &ub, &bv).unwrap(),
                verify_multidim_pair(&rot(&ua), &rot(&ub), &rot(&bv)).unwrap()
            );
        }
    }
}
