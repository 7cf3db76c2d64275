// Picking a backend from the number of arms, the analysis schedule and the
// priority between accuracy and speed.

use brar::approx::PpsMethod;
use brar::recommend::{format_backends, recommend, Classification, Priority};
use brar::trial::TrialDesign;

pub fn run_example() -> brar::Result<()> {
    let c = Classification::default();
    for (b0, b) in [(0, 1), (100, 100)] {
        let design = TrialDesign::eset(b0, b, PpsMethod::Exact);
        let (freq, burn) = c.classify(&design);
        for p in [Priority::Acc, Priority::Mix, Priority::Comp] {
            let r = recommend(design.arms, freq, burn, p)?;
            println!("B={b0:3} b={b:3} ({freq:?}, {burn:?}) {p:?}: {}", format_backends(&r));
        }
    }
    Ok(())
}

fn main() -> brar::Result<()> {
    run_example()
}
