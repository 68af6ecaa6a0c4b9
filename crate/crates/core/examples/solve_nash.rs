//! Maximum Nash welfare outcome, solved directly and through the reduced
//! Fisher market, against a brute-force grid.

use pdm_core::generate::{random_instance, RandomConfig};
use pdm_core::model::midpoint_outcome;
use pdm_core::{brute_force_max_welfare, reduce_instance, solve_fisher_eg, solve_pdm_nash, welfare, WelfareFunction};

fn main() -> pdm_core::Result<()> {
    let pdm = random_instance(0, &RandomConfig::sized(3, 2));
    let direct = solve_pdm_nash(&pdm, 1e-9)?;
    let reduced = solve_fisher_eg(&reduce_instance(&pdm), 1e-9)?;
    let via_market = welfare(&pdm, reduced.outcome.as_ref().unwrap(), WelfareFunction::Nash)?;
    let (grid_z, grid_nw) = brute_force_max_welfare(&pdm, WelfareFunction::Nash, 200)?;
    let mid = welfare(&pdm, &midpoint_outcome(&pdm), WelfareFunction::Nash)?;

    println!("direct   NW {:.9} at {:?}", direct.objective, direct.outcome.as_ref().unwrap().z);
    println!("reduced  NW {via_market:.9} at {:?}", reduced.outcome.as_ref().unwrap().z);
    println!("grid     NW {grid_nw:.9} at {:?}", grid_z.z);
    println!("midpoint NW {mid:.9}, optimum/midpoint {:.4}", direct.objective / mid);
    println!("Fisher prices {:?}", reduced.prices);
    Ok(())
}
