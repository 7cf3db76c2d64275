// One simulated three-arm trial with burn-in, blocks, interim analyses and
// arm dropping, then an audit that replays its recorded outcomes.

use brar::approx::PpsMethod;
use brar::trial::{audit, simulate_trial, TrialDesign};

pub fn run_example() -> brar::Result<()> {
    let mut design = TrialDesign::eset(20, 40, PpsMethod::Exact);
    design.max_patients = 240;
    let rec = simulate_trial(&design, &[0.3, 0.45, 0.6], 11)?;
    for a in &rec.analyses {
        println!(
            "after {:3} patients: superiority {:?} dropped {:?} -> {:?}",
            a.patients,
            a.superiority.iter().map(|p| (p * 1e3).round() / 1e3).collect::<Vec<_>>(),
            a.newly_dropped,
            a.decision
        );
    }
    println!("stopped at {}, allocated {:?}, claim {:?}", rec.stopped_at, rec.allocated(3), rec.rejection);
    assert!(audit(&design, &rec)?);
    Ok(())
}

fn main() -> brar::Result<()> {
    run_example()
}
