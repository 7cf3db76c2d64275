use std::sync::Arc;

use crate::error::{Error, Result};
use crate::special::LogBetaCache;

use super::state::{Increment, TrialState};

/// Steps between singleton-sum checks.
const DRIFT_CHECK_INTERVAL: u32 = 64;
/// Deviation beyond which the table is rebuilt from the all-ones state.
const DRIFT_REBUILD: f64 = 1e-6;
const DRIFT_WARN: f64 = 1e-9;

/// Superiority probabilities of every merged-arm subset at one state.
///
/// For a non-empty subset `S` of arms (a bitmask), `P(x; S)` is the
/// probability that an arm with parameters summed over `S` beats every arm
/// outside `S`. Singletons are the posterior probabilities of superiority and
/// the full set is 1 by convention.
#[derive(Debug, Clone)]
pub struct SubsetTable {
    k: usize,
    probs: Vec<f64>,
    // per-mask parameter sums and ln B of those sums
    sum_first: Vec<u32>,
    sum_second: Vec<u32>,
    ln_beta: Vec<f64>,
    // proper non-empty masks sorted by size
    order: Arc<[u32]>,
    state: TrialState,
    cache: Arc<LogBetaCache>,
    since_check: u32,
}

/// `P(Beta(j, j) > max of i independent uniforms)` in closed form.
pub fn uniform_superiority(i: u32, j: u32) -> f64 {
    let cache = LogBetaCache::shared_ref();
    let i_f = i as f64;
    let mut acc = 0.0;
    for jp in 1..j {
        let jf = jp as f64;
        let plus = (cache.get(i + jp, jp + 2) - cache.get(jp, jp + 1)).exp() / jf;
        let minus = (cache.get(i + jp, jp + 1) - cache.get(jp, jp)).exp() / jf;
        acc += plus - minus;
    }
    1.0 / (i_f + 1.0) + i_f * acc
}

impl SubsetTable {
    /// Table at the all-ones state for `k` arms.
    pub fn uniform(k: usize) -> Result<Self> {
        Self::uniform_with_cache(k, LogBetaCache::shared())
    }

    pub fn uniform_with_cache(k: usize, cache: Arc<LogBetaCache>) -> Result<Self> {
        let state = TrialState::uniform(k)?;
        let size = 1usize << k;
        let full = (size - 1) as u32;
        let mut probs = vec![0.0; size];
        let mut sum_first = vec![0u32; size];
        let mut sum_second = vec![0u32; size];
        let mut ln_beta = vec![0.0; size];
        for mask in 1..size {
            let l = (mask as u32).count_ones();
            probs[mask] = if mask as u32 == full { 1.0 } else { uniform_superiority(k as u32 - l, l) };
            sum_first[mask] = l;
            sum_second[mask] = l;
            ln_beta[mask] = cache.get(l, l);
        }
        let mut order: Vec<u32> = (1..full).collect();
        order.sort_by_key(|m| m.count_ones());
        Ok(Self {
            k,
            probs,
            sum_first,
            sum_second,
            ln_beta,
            order: order.into(),
            state,
            cache,
            since_check: 0,
        })
    }

    /// Table at `state`, reached from the all-ones state by a dummy path.
    pub fn from_state(state: &TrialState) -> Result<Self> {
        Self::from_state_with_cache(state, LogBetaCache::shared())
    }

    pub fn from_state_with_cache(state: &TrialState, cache: Arc<LogBetaCache>) -> Result<Self> {
        let mut table = Self::uniform_with_cache(state.arms(), cache)?;
        let path = table.state.path_to(state).expect("every valid state is reachable from all ones");
        for inc in path {
            table.step(inc);
        }
        table.check_drift()?;
        Ok(table)
    }

    pub fn arms(&self) -> usize {
        self.k
    }

    pub fn state(&self) -> &TrialState {
        &self.state
    }

    /// `P(x; S)` for a non-empty subset bitmask.
    pub fn prob(&self, mask: u32) -> f64 {
        self.probs[mask as usize]
    }

    /// Posterior probability that arm `j` is the best.
    pub fn singleton(&self, j: usize) -> f64 {
        self.probs[1 << j]
    }

    pub fn singletons(&self) -> Vec<f64> {
        (0..self.k).map(|j| self.singleton(j)).collect()
    }

    /// Advance the table to `state + inc`.
    pub fn apply_increment(&mut self, inc: Increment) -> Result<()> {
        if inc.arm >= self.k || inc.slot > 1 {
            return Err(Error::Domain(format!("increment {inc:?} out of range for {} arms", self.k)));
        }
        self.step(inc);
        self.since_check += 1;
        if self.since_check >= DRIFT_CHECK_INTERVAL {
            self.since_check = 0;
            if self.singleton_drift() > DRIFT_REBUILD {
                log::warn!("subset table drifted by {:e}; rebuilding", self.singleton_drift());
                *self = Self::from_state_with_cache(&self.state.clone(), self.cache.clone())?;
            } else if self.singleton_drift() > DRIFT_WARN {
                log::debug!("subset table drift {:e}", self.singleton_drift());
            }
        }
        Ok(())
    }

    /// `|sum_j P(x; {j}) - 1|`.
    pub fn singleton_drift(&self) -> f64 {
        ((0..self.k).map(|j| self.singleton(j)).sum::<f64>() - 1.0).abs()
    }

    fn check_drift(&self) -> Result<()> {
        let drift = self.singleton_drift();
        if drift > DRIFT_REBUILD {
            return Err(Error::Drift(drift));
        }
        Ok(())
    }

    fn step(&mut self, inc: Increment) {
        let j = inc.arm;
        let bit = 1u32 << j;
        let full = (1u32 << self.k) - 1;
        let first = inc.slot == 0;
        let x_js = self.state.get(j, inc.slot) as f64;

        // Each update reads only strictly larger subsets, which are written
        // later in this size-ordered pass, so in-place is sound.
        for &mask in self.order.iter() {
            let m = mask as usize;
            let delta = if mask & bit != 0 {
                let denom = if first { self.sum_first[m] } else { self.sum_second[m] } as f64;
                let mut acc = 0.0;
                let mut rest = full & !mask;
                while rest != 0 {
                    let single = rest & rest.wrapping_neg();
                    let union = (mask | single) as usize;
                    let ln_b = self.ln_beta[union] - self.ln_beta[single as usize] - self.ln_beta[m];
                    acc += ln_b.exp() * self.probs[union];
                    rest &= rest - 1;
                }
                let v = acc / denom;
                if first {
                    v
                } else {
                    -v
                }
            } else {
                let union = (mask | bit) as usize;
                let ln_b = self.ln_beta[union] - self.ln_beta[bit as usize] - self.ln_beta[m];
                let v = ln_b.exp() * self.probs[union] / x_js;
                if first {
                    -v
                } else {
                    v
                }
            };
            self.probs[m] += delta;
        }

        for mask in (1..=full).filter(|m| m & bit != 0) {
            let m = mask as usize;
            if first {
                self.sum_first[m] += 1;
            } else {
                self.sum_second[m] += 1;
            }
            self.ln_beta[m] = self.cache.get(self.sum_first[m], self.sum_second[m]);
        }
        self.state.increment(inc);
    }
}

/// Singleton probabilities at the prior state and after every increment of
/// `path`; the result has `path.len() + 1` entries.
pub fn run_path(priors: &TrialState, path: &[Increment]) -> Result<Vec<Vec<f64>>> {
    let mut table = SubsetTable::from_state(priors)?;
    let mut out = Vec::with_capacity(path.len() + 1);
    out.push(table.singletons());
    for &inc in path {
        table.apply_increment(inc)?;
        out.push(table.singletons());
    }
    Ok(out)
}

/// Posterior probability that an arm with parameters `focal` beats every
/// opponent; `opponents` holds two parameters per opponent arm.
pub fn pps_single(focal: (u32, u32), opponents: &[u32]) -> Result<f64> {
    if opponents.len() < 2 || opponents.len() % 2 != 0 {
        return Err(Error::Domain("pps_single: opponents need two parameters each".into()));
    }
    if opponents.len() == 2 {
        return super::pps_two_arm((opponents[0], opponents[1]), focal);
    }
    let mut params = vec![focal.0, focal.1];
    params.extend_from_slice(opponents);
    let state = TrialState::new(params)?;
    Ok(SubsetTable::from_state(&state)?.singleton(0))
}

/// Posterior probabilities of superiority of every arm at `state`.
pub fn superiority_probs(state: &TrialState) -> Result<Vec<f64>> {
    if state.arms() == 2 {
        let (a, b) = (state.arm(0), state.arm(1));
        let p0 = super::two_arm::pps_two_arm_with(LogBetaCache::shared_ref(), b, a);
        return Ok(vec![p0, 1.0 - p0]);
    }
    Ok(SubsetTable::from_state(state)?.singletons())
}

/// Posterior probability that arm `j` is the worst, via the superiority of
/// `1 - p_j` on the parameter-swapped state.
pub fn inferiority_pps(state: &TrialState, j: usize) -> Result<f64> {
    if j >= state.arms() {
        return Err(Error::Domain(format!("arm {j} out of range")));
    }
    Ok(superiority_probs(&state.swapped())?[j])
}
