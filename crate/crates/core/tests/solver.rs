mod common;

use common::{assert_close, maximize_1d, nw_at, nw_lipschitz_on_segment};
use pdm_core::checkers::{check_me, check_pme};
use pdm_core::expansion::PairwiseIndex;
use pdm_core::generate::{random_instance, RandomConfig};
use pdm_core::model::{midpoint_outcome, PdmInstance, UtilityClass, UtilitySpec, WelfareFunction};
use pdm_core::solver::brute_force_with_cap;
use pdm_core::{
    brute_force_max_welfare, build_phi, reduce_instance, solve_fisher_eg, solve_pdm_nash, welfare, Error,
    FisherInstance, PriceSystem,
};
use proptest::prelude::*;

const TOL: f64 = 1e-6;

fn lin1() -> UtilitySpec {
    UtilitySpec::Linear { weights: vec![1.0] }
}

fn per_good(p: &PriceSystem) -> &[f64] {
    match p {
        PriceSystem::PerGood(p) => p,
        other => panic!("expected per-good prices, got {other:?}"),
    }
}

#[test]
fn two_agents_one_issue() {
    let pdm = PdmInstance::new(vec![vec![0], vec![1]], vec![1.0, 1.0], vec![lin1(), lin1()]).unwrap();
    let res = solve_pdm_nash(&pdm, TOL).unwrap();
    let (x, best) = maximize_1d(|x| (x * (1.0 - x)).sqrt(), 0.0, 1.0);
    let z = res.outcome.unwrap();
    assert_close(z.z[0][0], x, 1e-6, "z0");
    assert_close(res.objective, best, 1e-9, "NW");
    assert_close(res.objective, 0.5, 1e-9, "NW closed form");
}

#[test]
fn unequal_budgets() {
    let pdm = PdmInstance::new(vec![vec![0], vec![1]], vec![2.0, 1.0], vec![lin1(), lin1()]).unwrap();
    let res = solve_pdm_nash(&pdm, TOL).unwrap();
    let (x, _) = maximize_1d(|x| 2.0 * x.ln() + (1.0 - x).ln(), 1e-12, 1.0 - 1e-12);
    let z = res.outcome.unwrap();
    assert_close(z.z[0][0], x, 1e-6, "against line search");
    assert_close(z.z[0][0], 2.0 / 3.0, 1e-6, "stationary point");
}

#[test]
fn single_agent_gets_her_way() {
    let spec = UtilitySpec::CobbDouglas { weights: vec![1.0, 2.0, 0.5] };
    let pdm = PdmInstance::new(vec![vec![0, 1, 1]], vec![1.0], vec![spec]).unwrap();
    let z = solve_pdm_nash(&pdm, TOL).unwrap().outcome.unwrap();
    assert_eq!(z.z, vec![[1.0, 0.0], [0.0, 1.0], [0.0, 1.0]]);
}

#[test]
fn phi3_linear_against_grid() {
    let pdm = build_phi(3, 1.0, UtilityClass::Linear, None).unwrap();
    let res = solve_pdm_nash(&pdm, TOL).unwrap();
    let (zb, vb) = brute_force_max_welfare(&pdm, WelfareFunction::Nash, 100).unwrap();
    let t: Vec<f64> = res.outcome.as_ref().unwrap().z.iter().map(|p| p[0]).collect();
    let tb: Vec<f64> = zb.z.iter().map(|p| p[0]).collect();
    let slack = nw_lipschitz_on_segment(&pdm, &t, &tb) / 100.0;
    assert!(res.objective >= vb - TOL * (1.0 + vb), "{} < {}", res.objective, vb);
    assert!(res.objective <= vb + slack + 1e-9);
    // The oracle lands on the all-side-1 corner, worth n - 1.
    assert_close(vb, 2.0, 1e-12, "grid value");
}

#[test]
fn brute_force_examples() {
    let pdm = PdmInstance::new(vec![vec![0], vec![1]], vec![1.0, 1.0], vec![lin1(), lin1()]).unwrap();
    let (z, v) = brute_force_max_welfare(&pdm, WelfareFunction::Nash, 100).unwrap();
    assert_eq!(z.z, vec![[0.5, 0.5]]);
    assert_close(v, 0.5, 1e-15, "value");

    let phi = build_phi(4, 1.1, UtilityClass::Linear, None).unwrap();
    let (_, v) = brute_force_max_welfare(&phi, WelfareFunction::Nash, 50).unwrap();
    assert!(v >= 3.0 - 1e-12);

    let err = brute_force_with_cap(&phi, WelfareFunction::Nash, 50, 1000).unwrap_err();
    assert!(matches!(err, Error::GridTooLarge { .. }));
}

#[test]
fn fisher_one_good() {
    let f = FisherInstance::plain(1, vec![1.0, 1.0], vec![lin1(), lin1()]).unwrap();
    let res = solve_fisher_eg(&f, TOL).unwrap();
    assert_close(res.allocation[0][0], 0.5, 1e-6, "x1");
    assert_close(res.allocation[1][0], 0.5, 1e-6, "x2");
    assert_close(per_good(&res.prices)[0], 2.0, 1e-6, "price");
    assert!(check_me(&f, &res.allocation, per_good(&res.prices), TOL).unwrap().verdict);

    let pdm = PdmInstance::new(vec![vec![0], vec![1]], vec![1.0, 1.0], vec![lin1(), lin1()]).unwrap();
    let r = solve_fisher_eg(&reduce_instance(&pdm), TOL).unwrap();
    assert_close(r.allocation[0][0], 0.5, 1e-6, "reduced x1");
    assert_close(per_good(&r.prices)[0], 2.0, 1e-6, "reduced price");
    assert_eq!(r.outcome.unwrap().z.len(), 1);
}

#[test]
fn fisher_uninterested_agent() {
    // Agent 0 only wants good 0; agent 1 wants both.
    let f = FisherInstance::plain(
        2,
        vec![1.0, 1.0],
        vec![UtilitySpec::Linear { weights: vec![1.0, 0.0] }, UtilitySpec::Linear { weights: vec![1.0, 1.0] }],
    )
    .unwrap();
    let res = solve_fisher_eg(&f, TOL).unwrap();
    let p = per_good(&res.prices);
    assert!(check_me(&f, &res.allocation, p, 10.0 * TOL).unwrap().verdict);
    assert_close(res.allocation[1][1], 1.0, 1e-6, "agent 1 takes good 1");
    assert_close(p.iter().sum::<f64>(), 2.0, 1e-5, "money conservation");
}

#[test]
fn excluded_agents_are_flagged() {
    // Construction only checks dimensions; the solver drops the all-zero agent.
    let f = FisherInstance::plain(
        2,
        vec![1.0, 1.0],
        vec![UtilitySpec::Linear { weights: vec![0.0, 0.0] }, UtilitySpec::Linear { weights: vec![1.0, 1.0] }],
    )
    .unwrap();
    let res = solve_fisher_eg(&f, TOL).unwrap();
    assert_eq!(res.excluded_agents, vec![0]);
    assert_close(res.allocation[1][0], 1.0, 1e-6, "x");
}

#[test]
fn phi_ces_solution_is_certified() {
    let pdm = build_phi(3, 1.0, UtilityClass::Ces, Some(0.5)).unwrap();
    let res = solve_pdm_nash(&pdm, TOL).unwrap();
    let PriceSystem::Personalized(p) = &res.prices else { panic!() };
    assert!(check_pme(&pdm, &res.allocation, p, 1e-5).unwrap().verdict);
    assert_close(res.objective, welfare(&pdm, res.outcome.as_ref().unwrap(), WelfareFunction::Nash).unwrap(), 1e-12, "objective");
}

fn cfg() -> ProptestConfig {
    ProptestConfig { cases: 48, ..ProptestConfig::default() }
}

proptest! {
    #![proptest_config(cfg())]

    #[test]
    fn eg_solution_passes_check_me(seed in 0u64..100_000) {
        let pdm = random_instance(seed, &RandomConfig::default());
        let f = reduce_instance(&pdm);
        let res = solve_fisher_eg(&f, TOL).unwrap();
        let p = per_good(&res.prices);
        let report = check_me(&f, &res.allocation, p, 10.0 * TOL).unwrap();
        prop_assert!(report.verdict, "{:?}", report.failures().collect::<Vec<_>>());
        let sold_out = (0..f.good_count()).all(|l| (res.allocation.iter().map(|x| x[l]).sum::<f64>() - 1.0).abs() < 1e-6);
        if sold_out {
            prop_assert!((p.iter().sum::<f64>() - f.budgets.iter().sum::<f64>()).abs() <= 1e-4);
        }
    }

    #[test]
    fn reduction_commutes_with_solving(seed in 0u64..100_000) {
        let pdm = random_instance(seed, &RandomConfig::default());
        let direct = solve_pdm_nash(&pdm, TOL).unwrap();
        let reduced = solve_fisher_eg(&reduce_instance(&pdm), TOL).unwrap();
        prop_assert!((direct.objective - reduced.objective).abs() <= 10.0 * TOL * (1.0 + direct.objective));
        let z = direct.outcome.unwrap();
        prop_assert!((direct.objective - welfare(&pdm, &z, WelfareFunction::Nash).unwrap()).abs() <= 1e-12);
    }

    #[test]
    fn pdm_solution_is_a_pme(seed in 0u64..100_000) {
        let pdm = random_instance(seed, &RandomConfig::default());
        let res = solve_pdm_nash(&pdm, TOL).unwrap();
        let PriceSystem::Personalized(p) = &res.prices else { panic!() };
        let report = check_pme(&pdm, &res.allocation, p, 1e-5).unwrap();
        prop_assert!(report.verdict, "{:?}", report.failures().collect::<Vec<_>>());
        // Pairwise prices project back onto the personalized ones.
        let idx = PairwiseIndex::new(&pdm);
        let back = idx.project_prices(res.pairwise_prices.as_ref().unwrap());
        for i in 0..pdm.n {
            for j in 0..pdm.m {
                prop_assert!((back[i][j] - p[i][j]).abs() <= 1e-9 * (1.0 + p[i][j]));
            }
        }
    }

    #[test]
    fn midpoint_bound(seed in 0u64..100_000) {
        let pdm = random_instance(seed, &RandomConfig::default());
        let opt = solve_pdm_nash(&pdm, TOL).unwrap().objective;
        let mid = welfare(&pdm, &midpoint_outcome(&pdm), WelfareFunction::Nash).unwrap();
        prop_assert!(opt <= 2.0 * mid + TOL);
    }

    #[test]
    fn solver_beats_small_grids(seed in 0u64..100_000) {
        let pdm = random_instance(seed, &RandomConfig::sized(3, 2));
        let res = solve_pdm_nash(&pdm, TOL).unwrap();
        let (zb, vb) = brute_force_max_welfare(&pdm, WelfareFunction::Nash, 40).unwrap();
        prop_assert!(res.objective >= vb - TOL * (1.0 + vb), "{} < {}", res.objective, vb);
        let t: Vec<f64> = res.outcome.as_ref().unwrap().z.iter().map(|p| p[0]).collect();
        let tb: Vec<f64> = zb.z.iter().map(|p| p[0]).collect();
        let slack = nw_lipschitz_on_segment(&pdm, &t, &tb) / 40.0;
        prop_assert!(res.objective <= vb + slack + 1e-9, "{} > {} + {}", res.objective, vb, slack);
        prop_assert!(nw_at(&pdm, &t) >= vb - TOL * (1.0 + vb));
    }
}
