use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest supported arm count; subsets are stored as `u32` bitmasks and a
/// table holds `2^k` entries.
pub const MAX_ARMS: usize = 20;

/// Per-arm Beta posterior parameters `(a_0, b_0, a_1, b_1, ...)`.
///
/// Entry `2j` is the first parameter of arm `j` (prior plus successes) and
/// entry `2j + 1` the second (prior plus failures). All entries are at least 1.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "Vec<u32>", into = "Vec<u32>")]
pub struct TrialState {
    params: Vec<u32>,
}

/// Growth of one Beta parameter by one: `slot` 0 is the first parameter of
/// `arm`, `slot` 1 the second.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Increment {
    pub arm: usize,
    pub slot: u8,
}

impl Increment {
    pub fn new(arm: usize, slot: u8) -> Self {
        debug_assert!(slot < 2);
        Self { arm, slot }
    }

    /// The same increment applied to the parameter-swapped state.
    pub fn swapped(self) -> Self {
        Self { arm: self.arm, slot: 1 - self.slot }
    }
}

impl TryFrom<Vec<u32>> for TrialState {
    type Error = Error;

    fn try_from(params: Vec<u32>) -> Result<Self> {
        Self::new(params)
    }
}

impl From<TrialState> for Vec<u32> {
    fn from(s: TrialState) -> Self {
        s.params
    }
}

impl TrialState {
    pub fn new(params: Vec<u32>) -> Result<Self> {
        if params.len() < 4 || params.len() % 2 != 0 {
            return Err(Error::Domain(format!(
                "state needs 2k entries with k >= 2, got {}",
                params.len()
            )));
        }
        if params.len() / 2 > MAX_ARMS {
            return Err(Error::Domain(format!("at most {MAX_ARMS} arms are supported")));
        }
        if let Some(pos) = params.iter().position(|&v| v == 0) {
            return Err(Error::Domain(format!("state entry {pos} is 0; Beta parameters must be >= 1")));
        }
        Ok(Self { params })
    }

    /// All-ones state: independent uniform priors on `k` arms.
    pub fn uniform(k: usize) -> Result<Self> {
        Self::new(vec![1; 2 * k])
    }

    /// Prior parameters plus observed successes and failures per arm.
    pub fn from_counts(prior: &TrialState, successes: &[u32], failures: &[u32]) -> Result<Self> {
        let k = prior.arms();
        if successes.len() != k || failures.len() != k {
            return Err(Error::Domain("count vectors must have one entry per arm".into()));
        }
        let params = (0..k)
            .flat_map(|j| {
                let (a, b) = prior.arm(j);
                [a + successes[j], b + failures[j]]
            })
            .collect();
        Self::new(params)
    }

    pub fn arms(&self) -> usize {
        self.params.len() / 2
    }

    pub fn params(&self) -> &[u32] {
        &self.params
    }

    pub fn arm(&self, j: usize) -> (u32, u32) {
        (self.params[2 * j], self.params[2 * j + 1])
    }

    pub fn get(&self, arm: usize, slot: u8) -> u32 {
        self.params[2 * arm + slot as usize]
    }

    pub fn increment(&mut self, inc: Increment) {
        self.params[2 * inc.arm + inc.slot as usize] += 1;
    }

    pub fn incremented(&self, inc: Increment) -> Self {
        let mut s = self.clone();
        s.increment(inc);
        s
    }

    /// Each arm's two parameters exchanged: the posterior of `1 - p_j`.
    pub fn swapped(&self) -> Self {
        let params = self.params.chunks(2).flat_map(|c| [c[1], c[0]]).collect();
        Self { params }
    }

    /// Sum of all parameters.
    pub fn total(&self) -> u64 {
        self.params.iter().map(|&v| v as u64).sum()
    }

    /// Posterior mean of arm `j`.
    pub fn mean(&self, j: usize) -> f64 {
        let (a, b) = self.arm(j);
        a as f64 / (a + b) as f64
    }

    /// Posterior variance of arm `j`.
    pub fn variance(&self, j: usize) -> f64 {
        let (a, b) = self.arm(j);
        crate::special::beta_variance(a as f64, b as f64)
    }

    /// A path of increments leading from `self` to `target`, or `None` if
    /// `target` is not reachable (some entry is smaller).
    pub fn path_to(&self, target: &TrialState) -> Option<Vec<Increment>> {
        if target.params.len() != self.params.len() {
            return None;
        }
        let mut path = Vec::new();
        for (l, (&from, &to)) in self.params.iter().zip(&target.params).enumerate() {
            if to < from {
                return None;
            }
            let inc = Increment::new(l / 2, (l % 2) as u8);
            path.extend(std::iter::repeat_n(inc, (to - from) as usize));
        }
        Some(path)
    }
}
