// Exact operating characteristics from the forward equations, for a
// two-arm design with one interim analysis.

use brar::oc::{estimate_states, exact_ocs};
use brar::trial::{AnalysisSchedule, TrialDesign};

pub fn run_example() -> brar::Result<()> {
    let mut design = TrialDesign::sbrar(2, 30, 0.95);
    design.analyses = AnalysisSchedule::Points { points: vec![15] };
    println!("at most {} states per layer", estimate_states(&design));
    for p in [[0.5, 0.5], [0.3, 0.6]] {
        let r = exact_ocs(&design, &p, 0.95)?;
        println!(
            "p = {p:?}: rejection {:.4}, power {:.4}, E[N] {:.2}, EPASA {:.2}, VPASA {:.2}",
            r.rejection_rate, r.power, r.expected_sample_size, r.epasa, r.vpasa
        );
    }
    Ok(())
}

fn main() -> brar::Result<()> {
    run_example()
}
