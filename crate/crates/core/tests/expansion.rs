mod common;

use std::collections::BTreeSet;

use common::assert_close;
use pdm_core::expansion::{outcome_from_reduced_equilibrium, PairwiseIndex};
use pdm_core::generate::{random_instance, RandomConfig};
use pdm_core::io::{fisher_from_json, fisher_to_json};
use pdm_core::model::{aggregate_welfare, dot, public_bundle, Bundle, Outcome, PdmInstance, UtilityClass, UtilitySpec, WelfareFunction};
use pdm_core::{build_phi, lift_bundle, project_bundle, project_prices, reduce_instance, welfare, GoodId, PriceSystem};
use proptest::prelude::*;

fn linear(m: usize) -> UtilitySpec {
    UtilitySpec::Linear { weights: vec![1.0; m] }
}

fn five_on_one_issue() -> PdmInstance {
    let pref = vec![vec![0], vec![0], vec![0], vec![1], vec![1]];
    PdmInstance::new(pref, vec![1.0; 5], vec![linear(1); 5]).unwrap()
}

#[test]
fn five_agents_one_issue() {
    let f = reduce_instance(&five_on_one_issue());
    let got: BTreeSet<GoodId> = f.goods.iter().copied().collect();
    let want: BTreeSet<GoodId> = [(0, 3), (1, 3), (2, 3), (0, 4), (1, 4), (2, 4)]
        .into_iter()
        .map(|(i, k)| GoodId::Pairwise(i, k, 0))
        .collect();
    assert_eq!(got, want);
}

#[test]
fn good_counts() {
    let two = PdmInstance::new(vec![vec![0], vec![1]], vec![1.0; 2], vec![linear(1); 2]).unwrap();
    assert_eq!(reduce_instance(&two).good_count(), 1);
    let agree = PdmInstance::new(vec![vec![1, 0], vec![1, 1], vec![1, 0]], vec![1.0; 3], vec![linear(2); 3]).unwrap();
    let f = reduce_instance(&agree);
    assert_eq!(f.good_count(), 2);
    assert!(f.goods.iter().all(|g| matches!(g, GoodId::Pairwise(_, _, 1))));
    for n in 2..7 {
        let phi = build_phi(n, 1.0, UtilityClass::CobbDouglas, None).unwrap();
        assert_eq!(reduce_instance(&phi).good_count(), n * (n - 1));
    }
}

#[test]
fn pairwise_ids_are_symmetric() {
    assert_eq!(GoodId::pairwise(3, 1, 2), GoodId::pairwise(1, 3, 2));
    assert_eq!(GoodId::pairwise(3, 1, 2), GoodId::Pairwise(1, 3, 2));
    let idx = PairwiseIndex::new(&five_on_one_issue());
    assert_eq!(idx.index_of(4, 2, 0), idx.index_of(2, 4, 0));
    assert_eq!(idx.index_of(0, 1, 0), None);
}

#[test]
fn lift_examples() {
    let two = PdmInstance::new(vec![vec![0], vec![1]], vec![1.0; 2], vec![linear(1); 2]).unwrap();
    assert_eq!(lift_bundle(&two, 0, &Bundle::issues(vec![0.5])).quantities, vec![0.5]);

    let phi = build_phi(3, 1.0, UtilityClass::Linear, None).unwrap();
    let idx = PairwiseIndex::new(&phi);
    let y = lift_bundle(&phi, 0, &Bundle::issues(vec![0.2, 0.3, 0.4])).quantities;
    let at = |i, k, j| y[idx.index_of(i, k, j).unwrap()];
    assert_eq!((at(0, 1, 0), at(0, 2, 0), at(0, 1, 1), at(0, 2, 2)), (0.2, 0.2, 0.3, 0.4));
    assert_eq!((at(1, 2, 1), at(1, 2, 2)), (0.0, 0.0));
    let zero = lift_bundle(&phi, 1, &Bundle::issues(vec![0.0; 3])).quantities;
    assert!(zero.iter().all(|v| *v == 0.0));
}

#[test]
fn project_examples() {
    let pdm = five_on_one_issue();
    let idx = PairwiseIndex::new(&pdm);
    let mut y = vec![0.0; idx.good_count()];
    y[idx.index_of(0, 3, 0).unwrap()] = 0.7;
    y[idx.index_of(0, 4, 0).unwrap()] = 0.6;
    assert_eq!(project_bundle(&pdm, 0, &Bundle::goods(y)).quantities, vec![0.6]);
    let zero = project_bundle(&pdm, 2, &Bundle::goods(vec![0.0; idx.good_count()])).quantities;
    assert_eq!(zero, vec![0.0]);
}

#[test]
fn lift_then_project_is_identity_but_not_conversely() {
    let pdm = five_on_one_issue();
    let y = Bundle::issues(vec![0.37]);
    assert_eq!(project_bundle(&pdm, 3, &lift_bundle(&pdm, 3, &y)).quantities, y.quantities);
    let idx = PairwiseIndex::new(&pdm);
    let mut g = vec![0.0; idx.good_count()];
    g[idx.index_of(0, 3, 0).unwrap()] = 0.7;
    g[idx.index_of(0, 4, 0).unwrap()] = 0.6;
    let back = lift_bundle(&pdm, 0, &project_bundle(&pdm, 0, &Bundle::goods(g.clone())));
    assert_ne!(back.quantities, g);
}

#[test]
fn price_projection_examples() {
    let two = PdmInstance::new(vec![vec![0], vec![1]], vec![1.0; 2], vec![linear(1); 2]).unwrap();
    assert_eq!(project_prices(&two, &[2.0]), PriceSystem::Personalized(vec![vec![2.0], vec![2.0]]));

    let pdm = five_on_one_issue();
    let idx = PairwiseIndex::new(&pdm);
    let mut p = vec![0.0; idx.good_count()];
    p[idx.index_of(0, 3, 0).unwrap()] = 0.3;
    p[idx.index_of(0, 4, 0).unwrap()] = 0.5;
    let PriceSystem::Personalized(rows) = project_prices(&pdm, &p) else { unreachable!() };
    assert_close(rows[0][0], 0.8, 1e-15, "agent 0");
    assert_eq!(rows[1][0], 0.0);

    let zeros = idx.project_prices(&vec![0.0; idx.good_count()]);
    assert!(zeros.iter().flatten().all(|v| *v == 0.0));
}

#[test]
fn unanimous_issue_handling() {
    let pdm = PdmInstance::new(vec![vec![1, 0], vec![1, 1]], vec![1.0; 2], vec![linear(2); 2]).unwrap();
    let idx = PairwiseIndex::new(&pdm);
    assert_eq!(idx.unanimous, vec![(0, 1)]);
    assert_eq!(idx.project_prices(&[0.9])[0][0], 0.0);
    let alloc = vec![vec![0.25], vec![0.75]];
    let z = outcome_from_reduced_equilibrium(&pdm, &alloc, 1e-9);
    assert_eq!(z.z[0], [0.0, 1.0]);
    assert_eq!(z.z[1], [0.25, 0.75]);
}

#[test]
fn outcome_reconstruction_examples() {
    let two = PdmInstance::new(vec![vec![0], vec![1]], vec![1.0; 2], vec![linear(1); 2]).unwrap();
    let z = outcome_from_reduced_equilibrium(&two, &[vec![0.5], vec![0.5]], 1e-9);
    assert_eq!(z.z, vec![[0.5, 0.5]]);

    // Two side-0 agents at 0.3, one side-1 agent at 0.7.
    let pdm = PdmInstance::new(vec![vec![0], vec![0], vec![1]], vec![1.0; 3], vec![linear(1); 3]).unwrap();
    let idx = PairwiseIndex::new(&pdm);
    let mut alloc = vec![vec![0.0; idx.good_count()]; 3];
    for i in 0..3 {
        let q = if i == 2 { 0.7 } else { 0.3 };
        alloc[i] = idx.lift(i, &[q]);
    }
    let z = outcome_from_reduced_equilibrium(&pdm, &alloc, 1e-9);
    assert_close(z.z[0][0], 0.3, 1e-15, "side 0");
    assert_close(z.z[0][1], 0.7, 1e-15, "side 1");
}

#[test]
fn leontief_agents_collapse() {
    let pdm = PdmInstance::new(
        vec![vec![0, 1], vec![1, 0], vec![1, 1]],
        vec![1.0; 3],
        vec![
            UtilitySpec::Leontief { weights: vec![1.0, 2.0] },
            linear(2),
            UtilitySpec::CobbDouglas { weights: vec![1.0, 1.0] },
        ],
    )
    .unwrap();
    let f = reduce_instance(&pdm);
    assert!(matches!(f.utilities[0], UtilitySpec::Leontief { .. }));
    assert!(matches!(f.utilities[1], UtilitySpec::NestedLeontief { .. }));
    let y = [0.4, 0.9];
    let lifted = lift_bundle(&pdm, 0, &Bundle::issues(y.to_vec()));
    assert_close(f.utilities[0].evaluate(&lifted.quantities).unwrap(), pdm.utilities[0].evaluate(&y).unwrap(), 1e-15, "collapsed");
}

#[test]
fn reduced_market_json_round_trip() {
    let pdm = random_instance(7, &RandomConfig::default());
    let f = reduce_instance(&pdm);
    let back = fisher_from_json(&fisher_to_json(&f)).unwrap();
    assert_eq!(back, f);
}

fn prices_for(len: usize, raw: &[f64]) -> Vec<f64> {
    (0..len).map(|l| raw[l % raw.len()]).collect()
}

proptest! {
    #[test]
    fn r_maps_identities(seed in 0u64..100_000, ys in prop::collection::vec(0.0f64..1.5, 4), goods in prop::collection::vec(0.0f64..1.5, 97), raw in prop::collection::vec(0.0f64..2.0, 89)) {
        let pdm = random_instance(seed, &RandomConfig::default());
        let f = reduce_instance(&pdm);
        let idx = PairwiseIndex::new(&pdm);
        let p = prices_for(f.good_count(), &raw);
        let personal = idx.project_prices(&p);
        for i in 0..pdm.n {
            let y = &ys[..pdm.m];
            let lifted = idx.lift(i, y);
            prop_assert_eq!(idx.project(i, &lifted), y.to_vec());
            let (a, b) = (f.utilities[i].evaluate(&lifted).unwrap(), pdm.utilities[i].evaluate(y).unwrap());
            prop_assert!((a - b).abs() <= 1e-12 * (1.0 + b), "utility {} vs {}", a, b);
            prop_assert!((dot(&lifted, &p) - dot(y, &personal[i])).abs() <= 1e-12 * (1.0 + dot(y, &personal[i])));
            let g = prices_for(f.good_count(), &goods);
            let down = idx.project(i, &g);
            prop_assert!(dot(&down, &personal[i]) <= dot(&g, &p) + 1e-12);
        }
    }

    #[test]
    fn welfare_correspondence(seed in 0u64..100_000, t in prop::collection::vec(0.0f64..=1.0, 4)) {
        let pdm = random_instance(seed, &RandomConfig::default());
        let f = reduce_instance(&pdm);
        let idx = PairwiseIndex::new(&pdm);
        let z = Outcome::from_side0(&t[..pdm.m]);
        let u: Vec<f64> = (0..pdm.n)
            .map(|i| f.utilities[i].evaluate(&idx.lift(i, &public_bundle(&pdm, &z, i).quantities)).unwrap())
            .collect();
        for psi in [WelfareFunction::Nash, WelfareFunction::Utilitarian, WelfareFunction::Egalitarian] {
            let direct = welfare(&pdm, &z, psi).unwrap();
            let reduced = aggregate_welfare(&u, &f.budgets, psi);
            prop_assert!((direct - reduced).abs() <= 1e-12 * (1.0 + direct.abs()));
        }
    }

    #[test]
    fn good_count_formula(seed in 0u64..100_000) {
        let pdm = random_instance(seed, &RandomConfig { contested_only: false, ..RandomConfig::default() });
        let expected: usize = (0..pdm.m).map(|j| pdm.side(j, 0).len() * pdm.side(j, 1).len()).sum();
        prop_assert_eq!(reduce_instance(&pdm).good_count(), expected);
    }
}
