//! Response-adaptive trial designs and their simulation.
//!
//! A trial allocates `arms * burn_in` patients round-robin, then blocks of
//! `block_size` patients with allocation probabilities frozen at each block
//! start. Analyses may stop the trial for a best and/or worst arm claim, drop
//! arms, or stop for futility once every arm is dropped.

mod design;
mod rules;
mod simulate;

pub use design::{Allocation, AnalysisSchedule, DropRule, TrialDesign, Tuning};
pub use rules::{
    allocated_counts, allocation_probs, decide, deciding_statistic, evaluate_tests, posterior_draw_allocation,
    sbrar_probs, test_statistics, tuned_probs, unique_extreme, AnalysisOutcome, Claim, Decision,
};
pub(crate) use rules::restrict;
pub use simulate::{audit, replay, simulate_trial, AllocationRecord, PatientRecord, TrialHistoryRecord};
