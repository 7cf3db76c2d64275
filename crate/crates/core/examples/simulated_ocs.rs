// Operating characteristics by simulation, with confidence radii, for a
// design too large for the forward equations.

use brar::approx::PpsMethod;
use brar::oc::{exact_ocs, simulate_ocs, OcMode};
use brar::trial::TrialDesign;
use brar::Error;

pub fn run_example() -> brar::Result<()> {
    let mut design = TrialDesign::eset(50, 50, PpsMethod::Exact);
    design.max_patients = 300;
    match exact_ocs(&design, &[0.5; 3], 0.975) {
        Err(Error::Infeasible { estimated, cap }) => println!("exact refused: ~{estimated} states > {cap}"),
        other => println!("exact: {other:?}"),
    }
    let r = simulate_ocs(&design, &[0.5, 0.5, 0.65], 0.975, 400, 3)?;
    let OcMode::Simulated { radius, epasa_se, .. } = r.mode else { unreachable!() };
    println!(
        "power {:.3} +/- {radius:.3}, EPASA {:.1} (se {epasa_se:.1}), E[N] {:.1}",
        r.power, r.epasa, r.expected_sample_size
    );
    Ok(())
}

fn main() -> brar::Result<()> {
    run_example()
}
