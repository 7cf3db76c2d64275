// The three approximations set against the exact value at one state.

use brar::approx::{pps_gaussian, pps_numeric_integration_with_error, pps_repeated_sampling, rs_error_bound};
use brar::exact::{superiority_probs, TrialState};

pub fn run_example() -> brar::Result<()> {
    let state = TrialState::new(vec![12, 4, 9, 7, 6, 10])?;
    let exact = superiority_probs(&state)?;
    for j in 0..state.arms() {
        let ga = pps_gaussian(&state, j)?;
        let rs = pps_repeated_sampling(&state, j, 10_000, 7)?;
        let ni = pps_numeric_integration_with_error(&state, j, 1e-9)?;
        println!(
            "arm {j}: exact {:.6}  ga {ga:.6}  rs {rs:.4}  ni {:.9} (+/- {:.1e})",
            exact[j], ni.value, ni.error
        );
        assert!((ni.value - exact[j]).abs() < 1e-7);
    }
    println!("mean absolute RS error with 10^4 draws is at most {:.3e}", rs_error_bound(10_000));

    // a lopsided two-arm state where the normal approximation is poor
    let lopsided = TrialState::new(vec![86, 9, 8, 1])?;
    let gap = (pps_gaussian(&lopsided, 0)? - superiority_probs(&lopsided)?[0]).abs();
    println!("GA error at Beta(86, 9) vs Beta(8, 1): {gap:.4}");
    Ok(())
}

fn main() -> brar::Result<()> {
    run_example()
}
