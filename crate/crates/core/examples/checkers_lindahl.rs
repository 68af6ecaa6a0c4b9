//! Certify a PME from the reduced market, then the matching Lindahl
//! equilibrium, and watch a perturbed certificate fail.

use pdm_core::checkers::lindahl_prices;
use pdm_core::expansion::PairwiseIndex;
use pdm_core::generate::{random_instance, RandomConfig};
use pdm_core::{check_lindahl, check_pme, reduce_instance, solve_fisher_eg, PriceSystem};

fn main() -> pdm_core::Result<()> {
    let pdm = random_instance(5, &RandomConfig::default());
    let res = solve_fisher_eg(&reduce_instance(&pdm), 1e-9)?;
    let PriceSystem::PerGood(p) = &res.prices else { unreachable!() };
    let idx = PairwiseIndex::new(&pdm);
    let bundles: Vec<Vec<f64>> = (0..pdm.n).map(|i| idx.project(i, &res.allocation[i])).collect();
    let personal = idx.project_prices(p);

    let pme = check_pme(&pdm, &bundles, &personal, 1e-5)?;
    println!("PME: {}", pme.verdict);
    let z = pme.witness.clone().unwrap();
    println!("witness {:.4?}", z.z);
    let lindahl = check_lindahl(&pdm, &z, &lindahl_prices(&pdm, &personal), 1e-4)?;
    println!("Lindahl: {}", lindahl.verdict);

    // Overselling one agent's bundle breaks feasibility of the witness.
    let mut bad = bundles.clone();
    bad[0][0] += 0.3;
    let report = check_pme(&pdm, &bad, &personal, 1e-5)?;
    println!("perturbed PME: {}", report.verdict);
    for c in report.failures() {
        println!("  {}: residual {:.3e} > {:.1e}", c.name, c.residual, c.threshold);
    }
    Ok(())
}
