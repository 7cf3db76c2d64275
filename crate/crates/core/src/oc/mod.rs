//! Operating characteristics of trial designs: exactly through forward
//! equations over trial states, or by simulation with confidence radii.

mod calibrate;
mod forward;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::approx::ks_confidence_radius;
use crate::error::{Error, Result};
use crate::seed::derive_seed;
use crate::trial::{simulate_trial, unique_extreme, Claim, Decision, TrialDesign, TrialHistoryRecord};

pub use calibrate::{calibrate_pp, calibrate_ux, PpCalibration, UxCalibration, UxOptions};
pub use forward::{estimate_states, forward_distribution, StateDistribution, TerminalState, DEFAULT_STATE_CAP};

/// Confidence level used for simulated radii.
pub const DEFAULT_DELTA: f64 = 0.05;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum OcMode {
    Exact,
    Simulated {
        replications: u64,
        /// Radius for the binary characteristics at confidence `1 - delta`.
        radius: f64,
        delta: f64,
        epasa_se: f64,
        vpasa_se: f64,
    },
}

/// Operating characteristics of a design at one response-probability vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OcReport {
    pub true_p: Vec<f64>,
    pub threshold: f64,
    /// Arm whose allocation EPASA and VPASA count.
    pub superior_arm: usize,
    /// Probability of any rejection; the type I error under a null vector.
    pub rejection_rate: f64,
    /// Probability of a rejection identifying the true best or worst arm.
    pub power: f64,
    pub futility_rate: f64,
    pub expected_sample_size: f64,
    pub epasa: f64,
    pub vpasa: f64,
    pub mode: OcMode,
}

impl OcReport {
    /// Rejection rate when every arm has the same response probability.
    pub fn type_i_error(&self) -> Option<f64> {
        self.true_p.windows(2).all(|w| w[0] == w[1]).then_some(self.rejection_rate)
    }
}

/// Arm credited by EPASA: the unique best arm, else arm 0.
pub fn superior_arm(true_p: &[f64]) -> usize {
    unique_extreme(true_p, true).unwrap_or(0)
}

/// Patients on `arm` plus, when the trial stopped claiming `arm` best, the
/// patients who would have followed.
pub fn credited_allocation(allocated_to_arm: u32, stopped_at: u32, n: u32, decision: Decision, arm: usize) -> f64 {
    let credit = match decision {
        Decision::Reject(Claim { best: Some(b), .. }) if b == arm => n - stopped_at,
        _ => 0,
    };
    (allocated_to_arm + credit) as f64
}

/// Exact operating characteristics via the forward equations, with all
/// rejection thresholds set to `c`.
pub fn exact_ocs(design: &TrialDesign, true_p: &[f64], c: f64) -> Result<OcReport> {
    exact_ocs_with_cap(design, true_p, c, DEFAULT_STATE_CAP)
}

pub fn exact_ocs_with_cap(design: &TrialDesign, true_p: &[f64], c: f64, cap: u64) -> Result<OcReport> {
    let dist = forward_distribution(design, true_p, Some(c), cap)?;
    let arm = superior_arm(true_p);
    let priors = design.priors();
    let n = design.max_patients;
    let (mut rej, mut pow, mut fut, mut ess, mut m1, mut m2) = (0.0, 0.0, 0.0, 0.0, 0.0, 0.0);
    for t in &dist.terminal {
        let (a, b) = t.state.arm(arm);
        let (a0, b0) = priors.arm(arm);
        let x = credited_allocation(a + b - a0 - b0, t.stopped_at, n, t.decision, arm);
        match t.decision {
            Decision::Reject(claim) => {
                rej += t.mass;
                if claim.is_correct(true_p) {
                    pow += t.mass;
                }
            }
            Decision::Futility => fut += t.mass,
            Decision::Continue => {}
        }
        ess += t.mass * t.stopped_at as f64;
        m1 += t.mass * x;
        m2 += t.mass * x * x;
    }
    Ok(OcReport {
        true_p: true_p.to_vec(),
        threshold: c,
        superior_arm: arm,
        rejection_rate: rej,
        power: pow,
        futility_rate: fut,
        expected_sample_size: ess,
        epasa: m1,
        vpasa: (m2 - m1 * m1).max(0.0),
        mode: OcMode::Exact,
    })
}

/// Per-replication summary of a simulated trial.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicationSummary {
    pub replication: u64,
    pub seed: u64,
    pub stopped_at: u32,
    pub allocated: Vec<u32>,
    pub successes: Vec<u32>,
    pub decision: Decision,
    /// Superiority statistics at the last analysis performed.
    pub last_superiority: Vec<f64>,
}

impl ReplicationSummary {
    fn from_record(replication: u64, arms: usize, r: &TrialHistoryRecord) -> Self {
        let decision = match (r.rejection, r.futility) {
            (Some(c), _) => Decision::Reject(c),
            (None, true) => Decision::Futility,
            _ => Decision::Continue,
        };
        Self {
            replication,
            seed: r.seed,
            stopped_at: r.stopped_at,
            allocated: r.allocated(arms),
            successes: r.successes(arms),
            decision,
            last_superiority: r.analyses.last().map(|a| a.superiority.clone()).unwrap_or_default(),
        }
    }
}

/// Replication `r` of a run keyed by `master_seed` uses seed `derive_seed(master_seed, [r])`.
pub fn replication_seed(master_seed: u64, r: u64) -> u64 {
    derive_seed(master_seed, &[r])
}

/// Simulate `replications` trials in parallel; the output order and content
/// do not depend on the thread count.
pub fn simulate_replications(
    design: &TrialDesign,
    true_p: &[f64],
    replications: u64,
    master_seed: u64,
) -> Result<Vec<ReplicationSummary>> {
    design.validate()?;
    (0..replications)
        .into_par_iter()
        .map(|r| {
            let rec = simulate_trial(design, true_p, replication_seed(master_seed, r))?;
            Ok(ReplicationSummary::from_record(r, design.arms, &rec))
        })
        .collect()
}

/// Operating characteristics averaged over simulated replications.
pub fn summarize(design: &TrialDesign, true_p: &[f64], c: f64, reps: &[ReplicationSummary]) -> Result<OcReport> {
    if reps.is_empty() {
        return Err(Error::InsufficientData("no replications to summarize".into()));
    }
    let k = reps.len() as f64;
    let arm = superior_arm(true_p);
    let n = design.max_patients;
    let xs: Vec<f64> = reps
        .iter()
        .map(|r| credited_allocation(r.allocated[arm], r.stopped_at, n, r.decision, arm))
        .collect();
    let frac = |f: &dyn Fn(&ReplicationSummary) -> bool| reps.iter().filter(|r| f(r)).count() as f64 / k;
    let mean = xs.iter().sum::<f64>() / k;
    let dev2: Vec<f64> = xs.iter().map(|x| (x - mean).powi(2)).collect();
    let var = dev2.iter().sum::<f64>() / k;
    let epasa_se = (var / k).sqrt();
    let m4 = dev2.iter().map(|d| d * d).sum::<f64>() / k;
    let vpasa_se = ((m4 - var * var).max(0.0) / k).sqrt();
    Ok(OcReport {
        true_p: true_p.to_vec(),
        threshold: c,
        superior_arm: arm,
        rejection_rate: frac(&|r| matches!(r.decision, Decision::Reject(_))),
        power: frac(&|r| matches!(r.decision, Decision::Reject(cl) if cl.is_correct(true_p))),
        futility_rate: frac(&|r| r.decision == Decision::Futility),
        expected_sample_size: reps.iter().map(|r| r.stopped_at as f64).sum::<f64>() / k,
        epasa: mean,
        vpasa: var,
        mode: OcMode::Simulated {
            replications: reps.len() as u64,
            radius: ks_confidence_radius(reps.len() as u64, 0.5, DEFAULT_DELTA),
            delta: DEFAULT_DELTA,
            epasa_se,
            vpasa_se,
        },
    })
}

/// Simulated operating characteristics with all thresholds set to `c`.
pub fn simulate_ocs(design: &TrialDesign, true_p: &[f64], c: f64, replications: u64, master_seed: u64) -> Result<OcReport> {
    if replications == 0 {
        return Err(Error::InsufficientData("at least one replication is needed".into()));
    }
    let design = design.clone().with_threshold(c);
    let reps = simulate_replications(&design, true_p, replications, master_seed)?;
    summarize(&design, true_p, c, &reps)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn never_rejecting_threshold() {
        let d = TrialDesign::sbrar(2, 6, 0.9);
        let r = exact_ocs(&d, &[0.5, 0.5], 1.0).unwrap();
        assert_eq!(r.rejection_rate, 0.0);
        assert_eq!(r.type_i_error(), Some(0.0));
        assert_abs_diff_eq!(r.epasa, 3.0, epsilon = 1e-12);
    }

    #[test]
    fn simulated_matches_exact() {
        let d = TrialDesign::sbrar(2, 20, 0.9);
        let exact = exact_ocs(&d, &[0.5, 0.5], 0.9).unwrap();
        let sim = simulate_ocs(&d, &[0.5, 0.5], 0.9, 20_000, 7).unwrap();
        let OcMode::Simulated { radius, .. } = sim.mode else { panic!() };
        assert!((sim.rejection_rate - exact.rejection_rate).abs() < 4.0 * radius);
        assert!((sim.epasa - exact.epasa).abs() < 0.2);
        assert_eq!(sim, simulate_ocs(&d, &[0.5, 0.5], 0.9, 20_000, 7).unwrap());
    }

    #[test]
    fn radius_at_paper_scale() {
        assert_abs_diff_eq!(ks_confidence_radius(100_000, 0.5, DEFAULT_DELTA), 0.0043, epsilon = 0.02 * 0.0043);
        assert!(simulate_ocs(&TrialDesign::sbrar(2, 4, 0.9), &[0.5, 0.5], 0.9, 0, 1).is_err());
    }
}
