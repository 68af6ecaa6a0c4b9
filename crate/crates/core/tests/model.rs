mod common;

use common::{assert_close, axiom_violations};
use pdm_core::generate::{random_instance, RandomConfig};
use pdm_core::model::{
    aggregate_welfare, midpoint_outcome, public_bundle, Bundle, Outcome, PdmInstance, UtilityClass, UtilitySpec,
    WelfareFunction,
};
use pdm_core::{build_phi, evaluate_utility, reduce_instance, welfare, Error};
use proptest::prelude::*;

#[test]
fn evaluate_examples() {
    let lin = UtilitySpec::Linear { weights: vec![2.0, 1.0] };
    assert_eq!(evaluate_utility(&lin, &Bundle::issues(vec![0.5, 1.0])).unwrap(), 2.0);
    let leo = UtilitySpec::Leontief { weights: vec![1.0, 2.0] };
    assert_eq!(leo.evaluate(&[1.0, 1.0]).unwrap(), 0.5);
    let ces = UtilitySpec::Ces { weights: vec![1.0, 1.0], rho: 0.5 };
    assert_close(ces.evaluate(&[1.0, 1.0]).unwrap(), 4.0, 1e-12, "ces");
    let cd = UtilitySpec::CobbDouglas { weights: vec![1.0, 3.0] };
    // (2^1 * 16^3)^(1/4) = 2^(13/4)
    assert_close(cd.evaluate(&[2.0, 16.0]).unwrap(), 2f64.powf(3.25), 1e-12, "cobb-douglas");
    for spec in [lin, leo, ces, cd] {
        assert_eq!(spec.evaluate(&[0.0, 0.0]).unwrap(), 0.0);
    }
}

#[test]
fn zero_weights_are_skipped() {
    let leo = UtilitySpec::Leontief { weights: vec![0.0, 2.0] };
    assert_eq!(leo.evaluate(&[0.0, 1.0]).unwrap(), 0.5);
    let cd = UtilitySpec::CobbDouglas { weights: vec![0.0, 1.0] };
    assert_eq!(cd.evaluate(&[0.0, 0.3]).unwrap(), 0.3);
    let cd2 = UtilitySpec::CobbDouglas { weights: vec![1.0, 1.0] };
    assert_eq!(cd2.evaluate(&[0.0, 0.3]).unwrap(), 0.0);
}

#[test]
fn evaluate_errors() {
    let lin = UtilitySpec::Linear { weights: vec![2.0, 1.0] };
    assert!(matches!(lin.evaluate(&[1.0]), Err(Error::DimensionMismatch { .. })));
    let flat = UtilitySpec::Linear { weights: vec![0.0, 0.0] };
    assert!(matches!(flat.evaluate(&[1.0, 1.0]), Err(Error::AllZeroWeights)));
    assert!(UtilityClass::Ces.spec(vec![1.0], None).is_err());
    assert!(UtilityClass::Ces.spec(vec![1.0], Some(0.0)).is_err());
    assert!(UtilityClass::Ces.spec(vec![1.0], Some(1.5)).is_err());
    assert!(UtilityClass::Ces.spec(vec![1.0], Some(-3.0)).is_ok());
}

#[test]
fn public_bundle_examples() {
    let spec = UtilitySpec::Linear { weights: vec![1.0, 1.0] };
    let pdm = PdmInstance::new(vec![vec![0, 1]], vec![1.0], vec![spec.clone()]).unwrap();
    let z = Outcome::new(vec![[0.3, 0.7], [0.4, 0.6]]).unwrap();
    assert_eq!(public_bundle(&pdm, &z, 0).quantities, vec![0.3, 0.6]);

    let pdm0 = PdmInstance::new(vec![vec![0, 0]], vec![1.0], vec![spec]).unwrap();
    let ones = Outcome::new(vec![[1.0, 0.0], [1.0, 0.0]]).unwrap();
    assert_eq!(public_bundle(&pdm0, &ones, 0).quantities, vec![1.0, 1.0]);

    let phi = build_phi(4, 1.0, UtilityClass::Linear, None).unwrap();
    let mid = midpoint_outcome(&phi);
    for i in 0..4 {
        assert_eq!(public_bundle(&phi, &mid, i).quantities, vec![0.5; 4]);
    }
}

#[test]
fn outcome_validity() {
    assert!(Outcome::new(vec![[0.6, 0.4 + 1e-13]]).is_ok());
    assert!(Outcome::new(vec![[0.6, 0.5]]).is_err());
    assert!(Outcome::new(vec![[-0.1, 0.5]]).is_err());
    assert_eq!(midpoint_outcome(&build_phi(3, 1.0, UtilityClass::Linear, None).unwrap()).z, vec![[0.5, 0.5]; 3]);
}

#[test]
fn phi_welfare_examples() {
    let eps = 0.01;
    for n in [3, 5, 10] {
        let phi = build_phi(n, 1.0 + eps, UtilityClass::Linear, None).unwrap();
        let all0 = Outcome::from_side0(&vec![1.0; n]);
        let all1 = Outcome::from_side0(&vec![0.0; n]);
        assert_close(welfare(&phi, &all0, WelfareFunction::Nash).unwrap(), 1.0 + eps, 1e-12, "all side 0");
        assert_close(welfare(&phi, &all1, WelfareFunction::Nash).unwrap(), (n - 1) as f64, 1e-12, "all side 1");
        let unit = build_phi(n, 1.0, UtilityClass::Linear, None).unwrap();
        let mid = welfare(&unit, &midpoint_outcome(&unit), WelfareFunction::Nash).unwrap();
        assert_close(mid, n as f64 / 2.0, 1e-12, "midpoint");
    }
}

#[test]
fn welfare_symmetric_case() {
    let c = 0.7;
    let u = vec![c; 4];
    let b = vec![1.0; 4];
    assert_close(aggregate_welfare(&u, &b, WelfareFunction::Nash), c, 1e-15, "nash");
    assert_close(aggregate_welfare(&u, &b, WelfareFunction::Utilitarian) / 4.0, c, 1e-15, "utilitarian");
    assert_eq!(aggregate_welfare(&u, &b, WelfareFunction::Egalitarian), c);
    assert_eq!(aggregate_welfare(&[1.0, 0.0], &[1.0, 1.0], WelfareFunction::Nash), 0.0);
}

#[test]
fn build_phi_shape() {
    let phi = build_phi(3, 1.1, UtilityClass::Linear, None).unwrap();
    assert_eq!((phi.n, phi.m), (3, 3));
    assert_eq!(phi.preferred, vec![vec![0, 1, 1], vec![1, 0, 1], vec![1, 1, 0]]);
    assert_eq!(phi.budgets, vec![1.0; 3]);
    let rows: Vec<Vec<f64>> = phi.utilities.iter().map(|u| u.weights().unwrap().to_vec()).collect();
    assert_eq!(rows, vec![vec![1.1, 1.0, 1.0], vec![1.0, 1.1, 1.0], vec![1.0, 1.0, 1.1]]);

    let two = build_phi(2, 1.0, UtilityClass::Leontief, None).unwrap();
    assert_eq!((two.n, two.m), (2, 2));
    assert!((0..2).all(|j| two.preferred[0][j] != two.preferred[1][j]));

    assert!(build_phi(1, 1.0, UtilityClass::Linear, None).is_err());
    assert!(build_phi(3, 1.0, UtilityClass::Ces, None).is_err());
    assert!(build_phi(3, 1.0, UtilityClass::Ces, Some(2.0)).is_err());
}

#[test]
fn instance_validation() {
    let spec = UtilitySpec::Linear { weights: vec![1.0] };
    assert!(PdmInstance::new(vec![vec![2]], vec![1.0], vec![spec.clone()]).is_err());
    assert!(PdmInstance::new(vec![vec![0]], vec![0.0], vec![spec.clone()]).is_err());
    assert!(PdmInstance::new(vec![vec![0]], vec![1.0], vec![]).is_err());
    assert!(PdmInstance::new(vec![], vec![], vec![]).is_err());
}

fn spec_strategy(dim: usize) -> impl Strategy<Value = UtilitySpec> {
    let weights = prop::collection::vec(prop_oneof![3 => 0.1f64..2.0, 1 => Just(0.0)], dim)
        .prop_map(|mut w| {
            if w.iter().all(|x| *x == 0.0) {
                w[0] = 1.0;
            }
            w
        });
    let rho = prop::sample::select(vec![-2.0, -1.0, -0.5, 0.25, 0.5, 0.75, 1.0]);
    (0usize..4, weights, rho).prop_map(|(c, w, rho)| match c {
        0 => UtilitySpec::Linear { weights: w },
        1 => UtilitySpec::Leontief { weights: w },
        2 => UtilitySpec::CobbDouglas { weights: w },
        _ => UtilitySpec::Ces { weights: w, rho },
    })
}

fn point(dim: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(prop_oneof![4 => 0.0f64..2.0, 1 => Just(0.0)], dim)
}

proptest! {
    #[test]
    fn base_classes_satisfy_axioms(
        spec in spec_strategy(3),
        x in point(3), y in point(3), bump in point(3),
        lam in 0.0f64..3.0, mix in 0.0f64..1.0,
    ) {
        let bad = axiom_violations(&spec, &x, &y, lam, mix, &bump, 1e-9);
        prop_assert!(bad.is_empty(), "{:?} violated by {:?}", bad, spec);
    }

    #[test]
    fn reduced_specs_satisfy_axioms(seed in 0u64..10_000, draws in prop::collection::vec(0.0f64..1.5, 64), lam in 0.0f64..3.0, mix in 0.0f64..1.0) {
        let pdm = random_instance(seed, &RandomConfig::default());
        let f = reduce_instance(&pdm);
        let d = f.good_count();
        let take = |off: usize| (0..d).map(|l| draws[(off + l) % draws.len()]).collect::<Vec<f64>>();
        let (x, y, bump) = (take(0), take(17), take(41));
        for spec in &f.utilities {
            let bad = axiom_violations(spec, &x, &y, lam, mix, &bump, 1e-9);
            prop_assert!(bad.is_empty(), "{:?} violated by {:?}", bad, spec);
        }
    }

    #[test]
    fn nash_reorder_and_scale(u in prop::collection::vec(0.01f64..5.0, 1..6), lam in 0.01f64..10.0, seed in 0u64..100) {
        let b: Vec<f64> = (0..u.len()).map(|i| 0.5 + ((seed + i as u64) % 4) as f64 * 0.5).collect();
        let nw = aggregate_welfare(&u, &b, WelfareFunction::Nash);
        let mut pairs: Vec<(f64, f64)> = u.iter().copied().zip(b.iter().copied()).collect();
        pairs.reverse();
        pairs.rotate_left(seed as usize % u.len());
        let (u2, b2): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
        prop_assert!((aggregate_welfare(&u2, &b2, WelfareFunction::Nash) - nw).abs() <= 1e-12 * nw);
        let scaled: Vec<f64> = u.iter().map(|v| lam * v).collect();
        prop_assert!((aggregate_welfare(&scaled, &b, WelfareFunction::Nash) - lam * nw).abs() <= 1e-12 * lam * nw);
    }

    #[test]
    fn midpoint_is_half_optimal_against_samples(seed in 0u64..10_000, t in prop::collection::vec(0.0f64..=1.0, 4)) {
        let pdm = random_instance(seed, &RandomConfig::default());
        let z = Outcome::from_side0(&t[..pdm.m]);
        let mid = welfare(&pdm, &midpoint_outcome(&pdm), WelfareFunction::Nash).unwrap();
        let other = welfare(&pdm, &z, WelfareFunction::Nash).unwrap();
        prop_assert!(2.0 * mid >= other * (1.0 - 1e-12));
    }
}
