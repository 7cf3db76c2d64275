// Critical values controlling the type I error at one null rate and over
// the whole null.

use brar::oc::{calibrate_pp, calibrate_ux, exact_ocs, UxOptions, DEFAULT_STATE_CAP};
use brar::trial::TrialDesign;

pub fn run_example() -> brar::Result<()> {
    let design = TrialDesign::sbrar(2, 20, 0.95);
    let pp = calibrate_pp(&design, 0.6, 0.05, DEFAULT_STATE_CAP)?;
    println!("PP(0.6): c = {:.6}, type I error {:.4}", pp.threshold, pp.type_i_error);
    if let Some((lower, err)) = pp.next_lower {
        println!("  the next statistic down, {lower:.6}, would give {err:.4}");
    }
    let check = exact_ocs(&design, &[0.6, 0.6], pp.threshold)?;
    assert!((check.rejection_rate - pp.type_i_error).abs() < 1e-12);

    let opts = UxOptions { step: 0.05, refine_step: 0.01, ..UxOptions::default() };
    let ux = calibrate_ux(&design, 0.05, opts)?;
    println!("UX: c = {:.6}, hardest null rate {:.2}", ux.threshold, ux.argmax_p);
    assert!(ux.threshold >= pp.threshold);
    Ok(())
}

fn main() -> brar::Result<()> {
    run_example()
}
