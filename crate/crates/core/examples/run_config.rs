// Loading a run configuration and running what it describes.

use brar::config::RunConfig;
use brar::oc::exact_ocs;

const CONFIG: &str = r#"{
    "design": {
        "arms": 2,
        "max_patients": 24,
        "analyses": {"kind": "points", "points": [12]},
        "superiority_threshold": 0.95,
        "allocation": {"kind": "probabilities", "method": {"method": "exact"}},
        "test_method": {"method": "exact"}
    },
    "scenarios": [[0.5, 0.5], [0.2, 0.7]]
}"#;

pub fn run_example() -> brar::Result<()> {
    let cfg = RunConfig::from_json(CONFIG)?;
    let design = cfg.require_design()?;
    for p in cfg.require_scenarios()? {
        let r = exact_ocs(design, p, design.superiority_threshold)?;
        println!("{p:?}: rejection {:.4}, power {:.4}", r.rejection_rate, r.power);
    }
    assert!(RunConfig::from_json(r#"{"scenario": []}"#).is_err());
    Ok(())
}

fn main() -> brar::Result<()> {
    run_example()
}
