//! Reduce a PDM to a Fisher market over pairwise goods and move bundles and
//! prices between the two.

use pdm_core::expansion::PairwiseIndex;
use pdm_core::generate::{random_instance, RandomConfig};
use pdm_core::model::dot;
use pdm_core::reduce_instance;

fn main() {
    let pdm = random_instance(17, &RandomConfig::sized(3, 2));
    println!("preferred sides: {:?}", pdm.preferred);
    let fisher = reduce_instance(&pdm);
    let idx = PairwiseIndex::new(&pdm);
    println!("{} pairwise goods:", fisher.good_count());
    for (l, (i, k, j)) in idx.goods.iter().enumerate() {
        println!("  good {l}: agents {i} and {k} on issue {j}");
    }

    let agent = 0;
    let y = vec![0.6; pdm.m];
    let lifted = idx.lift(agent, &y);
    println!("agent {agent}: y = {y:?} lifts to {lifted:?}, projects back to {:?}", idx.project(agent, &lifted));
    println!(
        "utility {:.4} on issues, {:.4} on goods",
        pdm.utilities[agent].evaluate(&y).unwrap(),
        fisher.utilities[agent].evaluate(&lifted).unwrap()
    );

    let p: Vec<f64> = (0..fisher.good_count()).map(|l| 0.5 + 0.25 * l as f64).collect();
    let personal = idx.project_prices(&p);
    println!("personalized prices {personal:?}");
    println!("cost {:.4} on goods, {:.4} on issues", dot(&lifted, &p), dot(&y, &personal[agent]));
}
