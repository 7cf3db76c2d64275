// Timing the backends and fitting the runtime model from the timings.

use brar::approx::PpsMethod;
use brar::bench::{run_bench, BenchCase, BenchConfig, RuntimeModel};
use brar::recommend::Backend;

pub fn run_example() -> brar::Result<()> {
    let mut cases = vec![
        BenchCase::SingleProbability {
            arms: 2,
            patients: vec![100, 400],
            methods: vec![PpsMethod::Exact, PpsMethod::gaussian(), PpsMethod::repeated_sampling(2_000, 1)],
        },
        BenchCase::Update {
            arms: 3,
            patients: vec![20],
            methods: vec![PpsMethod::gaussian(), PpsMethod::repeated_sampling(2_000, 1)],
        },
    ];
    cases.extend((2..=5).map(|k| BenchCase::ExactPath { arms: k, patients: vec![20] }));
    let rows = run_bench(&BenchConfig { repetitions: 3, cases })?;
    for r in &rows {
        println!("{:<18} {:<5} k={} n={:<4} median {:.2e} s", r.case, r.method, r.arms, r.patients, r.median_seconds);
    }
    let model = RuntimeModel::fit(&rows)?;
    let fit = model.exact_fit()?;
    println!("ln f_exact(k) ~ {:.3} k + {:.2} (R^2 {:.3})", fit.slope, fit.intercept, fit.r_squared);
    let t = model.predict(Backend::Exact, 720, 3, 0, 1, 0)?;
    println!("predicted exact cost of a 720-patient three-arm trial: {t:.2e} s");
    Ok(())
}

fn main() -> brar::Result<()> {
    run_example()
}
