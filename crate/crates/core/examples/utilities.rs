//! Evaluate the utility classes and Nash welfare of a small decision.

use pdm_core::model::{agent_utilities, midpoint_outcome};
use pdm_core::{welfare, Outcome, PdmInstance, UtilitySpec, WelfareFunction};

fn main() -> pdm_core::Result<()> {
    let x = [0.5, 2.0];
    let specs = [
        UtilitySpec::Linear { weights: vec![1.0, 2.0] },
        UtilitySpec::Leontief { weights: vec![1.0, 2.0] },
        UtilitySpec::CobbDouglas { weights: vec![1.0, 1.0] },
        UtilitySpec::Ces { weights: vec![1.0, 1.0], rho: 0.5 },
        UtilitySpec::Ces { weights: vec![1.0, 1.0], rho: -1.0 },
    ];
    for spec in &specs {
        println!("{:<12} u({x:?}) = {:.4}", spec.class_name(), spec.evaluate(&x)?);
    }

    // Two agents split on both issues.
    let pdm = PdmInstance::new(
        vec![vec![0, 1], vec![1, 0]],
        vec![1.0, 1.0],
        vec![UtilitySpec::Linear { weights: vec![2.0, 1.0] }, UtilitySpec::CobbDouglas { weights: vec![1.0, 1.0] }],
    )?;
    for outcome in [midpoint_outcome(&pdm), Outcome::from_side0(&[1.0, 0.0]), Outcome::from_side0(&[0.7, 0.4])] {
        let u = agent_utilities(&pdm, &outcome)?;
        let nw = welfare(&pdm, &outcome, WelfareFunction::Nash)?;
        println!("z = {:?}: utilities {u:.3?}, NW {nw:.4}", outcome.z);
    }
    Ok(())
}
