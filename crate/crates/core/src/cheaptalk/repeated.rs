use super::quantizer::{
    max_bins, solve_quantized, verify_equilibrium, EquilibriumCertificate, QuantizerPolicy,
    SolveOptions, SolveOutcome,
};
use super::CheapTalkError;
use crate::model::ScalarSource;

/// Partition of transmitted symbols by their continuation encoder cost.
#[derive(Debug, Clone, PartialEq)]
pub struct StageCostClasses {
    /// Index of the first symbol of each class.
    pub representatives: Vec<usize>,
    /// Class id of every symbol.
    pub class_of: Vec<usize>,
    /// Continuation cost of each class representative.
    pub values: Vec<f64>,
}

impl StageCostClasses {
    pub fn len(&self) -> usize {
        self.representatives.len()
    }

    pub fn is_empty(&self) -> bool {
        self.representatives.is_empty()
    }

    pub fn members(&self, class: usize) -> impl Iterator<Item = usize> + '_ {
        self.class_of
            .iter()
            .enumerate()
            .filter(move |(_, &c)| c == class)
            .map(|(i, _)| i)
    }
}

/// Group symbols whose continuation costs lie within `tol` of a class
/// representative. Symbols are scanned in order and join the first matching
/// class, so the result is deterministic.
pub fn group_into_classes(values: &[f64], tol: f64) -> StageCostClasses {
    let mut classes = StageCostClasses {
        representatives: Vec::new(),
        class_of: Vec::with_capacity(values.len()),
        values: Vec::new(),
    };
    for (i, &v) in values.iter().enumerate() {
        match classes.values.iter().position(|&r| (r - v).abs() <= tol) {
            Some(c) => classes.class_of.push(c),
            None => {
                classes.class_of.push(classes.values.len());
                classes.representatives.push(i);
                classes.values.push(v);
            }
        }
    }
    classes
}

/// Product equilibrium of the repeated i.i.d. game.
#[derive(Debug, Clone, PartialEq)]
pub struct RepeatedEquilibrium {
    pub stages: Vec<QuantizerPolicy>,
    pub certificates: Vec<EquilibriumCertificate>,
    /// Classes of the stage-0 symbols by continuation cost.
    pub classes: StageCostClasses,
    pub j_e: f64,
    pub j_d: f64,
}

/// Tolerance used to group continuation costs into classes.
const CLASS_TOL: f64 = 1e-9;

/// Play the same stage quantizer at every stage of an `horizon`-stage i.i.d.
/// game and verify the result.
///
/// `bins` defaults to the largest bin count with an equilibrium, which needs a
/// bounded support and nonzero bias.
pub fn solve_repeated_iid(
    source: &ScalarSource,
    b: f64,
    horizon: usize,
    bins: Option<usize>,
    discount: Option<f64>,
    opts: &SolveOptions,
) -> Result<RepeatedEquilibrium, CheapTalkError> {
    if horizon == 0 {
        return Err(CheapTalkError::Argument("horizon must be at least 1".into()));
    }
    if let Some(beta) = discount {
        if !(beta > 0.0 && beta < 1.0) {
            return Err(CheapTalkError::Argument(format!(
                "discount must lie in (0,1) (got {beta})"
            )));
        }
    }
    let k = match bins {
        Some(k) => k,
        None => max_bins(source, b, opts)?,
    };
    let policy = match solve_quantized(source, b, k, opts)? {
        SolveOutcome::Found { policy, .. } => policy,
        SolveOutcome::NoSolution(c) => {
            return Err(CheapTalkError::Argument(format!(
                "no {k}-bin stage equilibrium: {}",
                c.reason
            )))
        }
    };
    let weight = |s: usize| discount.map_or(1.0, |beta| beta.powi(s as i32));

    let mut certificates = Vec::with_capacity(horizon);
    let (mut j_e, mut j_d) = (0.0, 0.0);
    for stage in 0..horizon {
        let cert = verify_equilibrium(&policy, source, b, opts.certificate_tol)?;
        if !cert.passes() {
            return Err(CheapTalkError::Verification {
                stage,
                detail: format!(
                    "centroid {:e}, indifference {:e}, min gap {}",
                    cert.centroid_residual, cert.indifference_residual, cert.min_gap
                ),
            });
        }
        j_e += weight(stage) * cert.j_e;
        j_d += weight(stage) * cert.j_d;
        certificates.push(cert);
    }

    // Later stages do not depend on the stage-0 symbol, so every symbol carries
    // the same continuation cost.
    let continuation: f64 = (1..horizon).map(|s| weight(s) * certificates[s].j_e).sum();
    let classes = group_into_classes(&vec![continuation; policy.bins()], CLASS_TOL);
    for class in 0..classes.len() {
        let actions: Vec<f64> = classes.members(class).map(|i| policy.actions()[i]).collect();
        for w in actions.windows(2) {
            if !(w[1] - w[0] > 2.0 * b.abs()) {
                return Err(CheapTalkError::Verification {
                    stage: 0,
                    detail: format!(
                        "actions {} and {} in one class are closer than 2|b|",
                        w[0], w[1]
                    ),
                });
            }
        }
    }

    Ok(RepeatedEquilibrium {
        stages: vec![policy; horizon],
        certificates,
        classes,
        j_e,
        j_d,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit() -> ScalarSource {
        ScalarSource::uniform(0.0, 1.0).unwrap()
    }

    #[test]
    fn two_stage_uniform_product() {
        let opts = SolveOptions::default();
        let r = solve_repeated_iid(&unit(), 0.1, 2, None, None, &opts).unwrap();
        assert_eq!(r.stages.len(), 2);
        assert_eq!(r.stages[0].bins(), 2);
        assert_eq!(r.classes.len(), 1);
        let single = solve_quantized(&unit(), 0.1, 2, &opts).unwrap();
        let SolveOutcome::Found { certificate, .. } = single else {
            panic!()
        };
        assert!((r.j_e - 2.0 * certificate.j_e).abs() < 1e-12);
    }

    #[test]
    fn one_stage_matches_single_solve() {
        let opts = SolveOptions::default();
        let r = solve_repeated_iid(&unit(), 0.05, 1, Some(3), None, &opts).unwrap();
        let single = solve_quantized(&unit(), 0.05, 3, &opts).unwrap();
        assert_eq!(Some(&r.stages[0]), single.policy());
    }

    #[test]
    fn babbling_both_stages() {
        let src = ScalarSource::gaussian(1.0, 2.0).unwrap();
        let r = solve_repeated_iid(&src, 0.4, 2, Some(1), None, &SolveOptions::default()).unwrap();
        assert!((r.j_d - 4.0).abs() < 1e-12);
    }

    #[test]
    fn discount_weights_stages() {
        let opts = SolveOptions::default();
        let r = solve_repeated_iid(&unit(), 0.1, 3, Some(2), Some(0.5), &opts).unwrap();
        let stage = r.certificates[0].j_e;
        assert!((r.j_e - 1.75 * stage).abs() < 1e-12);
    }

    #[test]
    fn classes_group_by_tolerance() {
        let c = group_into_classes(&[1.0, 1.0 + 1e-12, 2.0, 1.0, 2.0 + 5e-10], 1e-9);
        assert_eq!(c.class_of, vec![0, 0, 1, 0, 1]);
        assert_eq!(c.representatives, vec![0, 2]);
        assert_eq!(c.members(1).collect::<Vec<_>>(), vec![2, 4]);
    }

    #[test]
    fn missing_equilibrium_is_reported() {
        let r = solve_repeated_iid(&unit(), 0.1, 2, Some(3), None, &SolveOptions::default());
        assert!(matches!(r, Err(CheapTalkError::Argument(_))));
    }
}
