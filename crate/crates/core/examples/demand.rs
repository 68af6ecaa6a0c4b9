//! Budget-constrained demand for each utility class at one price vector.

use pdm_core::{demand, DemandRequest, UtilitySpec};

fn main() -> pdm_core::Result<()> {
    let prices = [1.0, 0.5, 2.0];
    let budget = 1.0;
    let specs = [
        UtilitySpec::Linear { weights: vec![1.0, 1.0, 1.0] },
        UtilitySpec::Leontief { weights: vec![1.0, 2.0, 1.0] },
        UtilitySpec::CobbDouglas { weights: vec![1.0, 2.0, 1.0] },
        UtilitySpec::Ces { weights: vec![1.0, 1.0, 1.0], rho: 0.5 },
    ];
    for spec in &specs {
        let x = demand(&DemandRequest::new(spec, budget, &prices))?;
        let spent: f64 = x.iter().zip(&prices).map(|(a, p)| a * p).sum();
        println!("{:<12} x = {x:.4?}  spent {spent:.4}  u = {:.4}", spec.class_name(), spec.evaluate(&x)?);
    }

    // A desired good priced at zero is capped instead of unbounded.
    let free = [0.0, 1.0];
    let spec = UtilitySpec::CobbDouglas { weights: vec![1.0, 1.0] };
    println!("capped: {:?}", demand(&DemandRequest::new(&spec, budget, &free))?);
    println!("uncapped: {:?}", demand(&DemandRequest::new(&spec, budget, &free).uncapped()).map_err(|e| e.to_string()));
    Ok(())
}
