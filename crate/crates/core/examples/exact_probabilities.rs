// Exact posterior probabilities of superiority: the two-arm closed form, a
// multi-arm single probability, and every arm's probability along a path of
// patient outcomes updated one patient at a time.

use brar::exact::{pps_single, pps_two_arm, run_path, Increment, SubsetTable, TrialState};

pub fn run_example() -> brar::Result<()> {
    // Beta(2, 1) against Beta(1, 1)
    let p = pps_two_arm((1, 1), (2, 1))?;
    println!("two arms, one success on the focal arm: {p:.6}");
    assert!((p - 2.0 / 3.0).abs() < 1e-12);

    let q = pps_single((5, 3), &[4, 4, 2, 6])?;
    println!("three arms, focal Beta(5, 3): {q:.6}");

    // success on arm 0, failure on arm 1, success on arm 2, ...
    let priors = TrialState::uniform(3)?;
    let path: Vec<Increment> = (0..12).map(|i| Increment::new(i % 3, (i % 2) as u8)).collect();
    let probs = run_path(&priors, &path)?;
    for (i, p) in probs.iter().enumerate().step_by(4) {
        println!("after {i:2} patients: {:.4} {:.4} {:.4}", p[0], p[1], p[2]);
    }

    // the same table can be driven directly
    let mut table = SubsetTable::from_state(&priors)?;
    for &inc in &path {
        table.apply_increment(inc)?;
    }
    let last = probs.last().expect("non-empty path output");
    assert!(table.singletons().iter().zip(last).all(|(a, b)| (a - b).abs() < 1e-12));
    Ok(())
}

fn main() -> brar::Result<()> {
    run_example()
}
