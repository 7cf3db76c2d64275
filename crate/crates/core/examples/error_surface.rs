// Worst and mean approximation error over every outcome split for fixed
// numbers of patients per arm.

use brar::figures::error_surface_cell;

pub fn run_example() -> brar::Result<()> {
    for (n0, n1) in [(10, 10), (40, 5), (93, 7)] {
        let r = error_surface_cell(n0, n1, 10_000)?;
        println!(
            "{n0:3} vs {n1:3} patients: GA max {:.4} at {}, GA mean {:.2e}, RS mean {:.2e}",
            r.ga_max_abs_error, r.ga_worst_state, r.ga_mean_abs_error, r.rs_mean_abs_error
        );
    }
    Ok(())
}

fn main() -> brar::Result<()> {
    run_example()
}
