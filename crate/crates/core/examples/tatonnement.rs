//! Price tâtonnement on a reduced market and its lifted run on the PDM.

use pdm_core::generate::{random_instance, RandomConfig};
use pdm_core::tatonnement::Noise;
use pdm_core::{reduce_instance, run_fisher_tatonnement, run_lifted_tatonnement, TatonnementConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let pdm = random_instance(2, &RandomConfig::sized(4, 3));
    let fisher = reduce_instance(&pdm);

    let cfg = TatonnementConfig { delta: 0.05, thin: 50, ..TatonnementConfig::default() };
    let trace = run_fisher_tatonnement(&fisher, &cfg)?;
    println!("converged {} after {} iterations", trace.converged, trace.iterations);
    println!("prices {:.3?}", trace.final_prices);
    trace.write_csv(std::io::stdout().lock())?;

    let noisy = TatonnementConfig { delta: 0.1, noise: Noise::Gaussian { variance: 0.01 }, seed: 1, ..cfg };
    let trace = run_fisher_tatonnement(&fisher, &noisy)?;
    println!("with noise: converged {} after {} iterations", trace.converged, trace.iterations);

    let lifted = run_lifted_tatonnement(&pdm, &TatonnementConfig::default())?;
    println!("lifted run: PME at 3δ {}, outcome {:.3?}", lifted.pme_report.verdict, lifted.outcome.z);
    Ok(())
}
