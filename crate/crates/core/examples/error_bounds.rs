// Analytical accuracy of Monte-Carlo estimates: the repeated-sampling error
// of one probability and the confidence radius of a simulated rate.

use brar::approx::{ks_confidence_radius, rs_error_bound, rs_mean_abs_error};

pub fn run_example() -> brar::Result<()> {
    for k in [100u64, 1_000, 10_000, 100_000] {
        println!(
            "K = {k:>6}: bound {:.3e}, error at P = 0.5 {:.3e}, at P = 0.05 {:.3e}",
            rs_error_bound(k),
            rs_mean_abs_error(0.5, k),
            rs_mean_abs_error(0.05, k)
        );
    }
    // replications needed for a +/- 0.01 radius on a type I error near 5%
    let k = (1..).map(|i| i * 1000).find(|&k| ks_confidence_radius(k, 0.05, 0.05) <= 0.01).expect("finite");
    println!("{k} replications give radius {:.4}", ks_confidence_radius(k, 0.05, 0.05));
    println!("10^5 replications at q = 1/2: radius {:.4}", ks_confidence_radius(100_000, 0.5, 0.05));
    Ok(())
}

fn main() -> brar::Result<()> {
    run_example()
}
