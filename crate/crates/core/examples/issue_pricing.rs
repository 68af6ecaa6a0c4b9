//! Issue-pricing equilibria on the Φ(n, w) family and how far they fall
//! short of the best outcome.

use pdm_core::checkers::issue_pricing_outcome;
use pdm_core::experiments::{run_experiment, Experiment, ExperimentParams};
use pdm_core::{build_phi, check_ime, welfare, UtilityClass, WelfareFunction};

fn main() -> pdm_core::Result<()> {
    let n = 5;
    let phi = build_phi(n, 1.01, UtilityClass::Linear, None)?;
    // Each agent spends her whole budget on her own issue at unit prices.
    let y: Vec<Vec<f64>> = (0..n).map(|i| (0..n).map(|j| if i == j { 1.0 } else { 0.0 }).collect()).collect();
    let report = check_ime(&phi, &y, &vec![1.0; n], 1e-9)?;
    let z = issue_pricing_outcome(&phi, &y);
    println!("IME certified: {}, NW {:.4}", report.verdict, welfare(&phi, &z, WelfareFunction::Nash)?);

    let params = ExperimentParams::default();
    for exp in [Experiment::Thm32, Experiment::Thm34, Experiment::Thm35] {
        for n in [3, 5, 10] {
            let r = run_experiment(exp, n, &params)?;
            println!("{} n={n:<3} optimum/IME {:.4}  bound {:.4}  pass {}", exp.id(), r.ratio, r.bound, r.pass);
        }
    }
    Ok(())
}
