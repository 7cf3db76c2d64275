//! Exact posterior probabilities of superiority for integer Beta posteriors.
//!
//! The subset table stores, for every non-empty subset of arms, the
//! probability that the arm formed by summing the subset's parameters beats
//! all remaining arms. One parameter increment updates every entry in
//! `O(k 2^k)` work, so a whole trial costs time linear in its length.

mod state;
mod table;
mod two_arm;

pub use state::{Increment, TrialState, MAX_ARMS};
pub use table::{inferiority_pps, pps_single, run_path, superiority_probs, uniform_superiority, SubsetTable};
pub use two_arm::pps_two_arm;
