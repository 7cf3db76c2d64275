use std::collections::{BTreeMap, HashMap};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exact::{Increment, TrialState};
use crate::trial::{allocation_probs, decide, deciding_statistic, restrict, test_statistics, Decision, TrialDesign};

/// Default bound on the number of states the forward equations may visit.
pub const DEFAULT_STATE_CAP: u64 = 50_000_000;

/// One terminal state of the trial with its probability.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TerminalState {
    pub state: TrialState,
    /// Bit `j` set when arm `j` was dropped.
    pub dropped: u32,
    pub stopped_at: u32,
    /// `Continue` for a trial that ran to the end without a claim.
    pub decision: Decision,
    pub mass: f64,
}

/// Law of the trial's terminal states.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateDistribution {
    pub patients: u32,
    pub terminal: Vec<TerminalState>,
}

impl StateDistribution {
    pub fn total_mass(&self) -> f64 {
        self.terminal.iter().map(|t| t.mass).sum()
    }

    /// Probability of a trial ending with `pred` true.
    pub fn mass_where(&self, pred: impl Fn(&TerminalState) -> bool) -> f64 {
        self.terminal.iter().filter(|t| pred(t)).map(|t| t.mass).sum()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
struct ActiveKey {
    state: TrialState,
    dropped: u32,
    law: Vec<u64>,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
struct TerminalKey {
    state: TrialState,
    dropped: u32,
    stopped_at: u32,
    decision: Decision,
}

fn mask_to_vec(mask: u32, k: usize) -> Vec<bool> {
    (0..k).map(|j| mask >> j & 1 == 1).collect()
}

fn law_bits(p: &[f64]) -> Vec<u64> {
    p.iter().map(|v| v.to_bits()).collect()
}

fn law_from_bits(b: &[u64]) -> Vec<f64> {
    b.iter().map(|&v| f64::from_bits(v)).collect()
}

fn ln_choose(n: f64, r: f64) -> f64 {
    use statrs::function::gamma::ln_gamma;
    ln_gamma(n + 1.0) - ln_gamma(r + 1.0) - ln_gamma(n - r + 1.0)
}

/// Upper bound on the states of one layer: count vectors over `2k` outcome
/// categories, times drop masks when arms can be dropped.
pub fn estimate_states(design: &TrialDesign) -> u64 {
    let k = design.arms as f64;
    let n = design.max_patients as f64;
    let mut ln = ln_choose(n + 2.0 * k - 1.0, 2.0 * k - 1.0);
    if design.drop_rule.is_some() {
        ln += k * std::f64::consts::LN_2;
    }
    if ln > 60.0 {
        u64::MAX
    } else {
        ln.exp().round() as u64
    }
}

/// Forward equations over the trial's states with all thresholds set to `c`
/// (`None` keeps the design's own).
pub fn forward_distribution(design: &TrialDesign, true_p: &[f64], c: Option<f64>, cap: u64) -> Result<StateDistribution> {
    let design = match c {
        Some(c) => design.clone().with_threshold(c),
        None => design.clone(),
    };
    Ok(forward(&design, true_p, cap, false)?.0)
}

/// Deciding statistic and arriving mass at every analysis reached.
pub(crate) type Visits = Vec<(f64, f64)>;

pub(crate) fn forward(design: &TrialDesign, true_p: &[f64], cap: u64, collect: bool) -> Result<(StateDistribution, Visits)> {
    design.validate()?;
    let k = design.arms;
    if true_p.len() != k || true_p.iter().any(|p| !(0.0..=1.0).contains(p)) {
        return Err(Error::Domain(format!("need {k} response probabilities in [0, 1]")));
    }
    if !design.is_deterministic() {
        return Err(Error::InvalidDesign(
            "exact operating characteristics need deterministic probability methods; use simulation".into(),
        ));
    }
    let estimated = estimate_states(design);
    if estimated > cap {
        return Err(Error::Infeasible { estimated, cap });
    }
    let n = design.max_patients;
    let burn = design.burn_in_patients();
    let points = design.analysis_points();
    let mut events: Vec<u32> = design.block_starts().chain(points.iter().copied()).chain([n]).collect();
    if burn < n {
        events.push(burn);
    }
    events.sort_unstable();
    events.dedup();

    let priors = design.priors();
    let mut active: BTreeMap<ActiveKey, f64> = BTreeMap::new();
    active.insert(ActiveKey { state: priors, dropped: 0, law: vec![] }, 1.0);
    let mut terminal: BTreeMap<TerminalKey, f64> = BTreeMap::new();
    let mut visits = Vec::new();
    let mut start = 0u32;

    for &end in events.iter().filter(|&&e| e > 0) {
        let is_block_start = |i: u32| i >= burn && (i - burn) % design.block_size == 0;
        // fresh allocation laws at block starts
        if start >= burn && is_block_start(start) {
            let laws: Vec<Result<Vec<f64>>> = active
                .keys()
                .collect::<Vec<_>>()
                .par_iter()
                .map(|key| allocation_probs(design, &key.state, &mask_to_vec(key.dropped, k)))
                .collect();
            let mut next = BTreeMap::new();
            for ((key, mass), law) in std::mem::take(&mut active).into_iter().zip(laws) {
                let key = ActiveKey { law: law_bits(&law?), ..key };
                *next.entry(key).or_insert(0.0) += mass;
            }
            active = next;
        }

        let sources: Vec<(ActiveKey, f64)> = std::mem::take(&mut active).into_iter().collect();
        let results: Vec<BTreeMap<TrialState, f64>> = sources
            .par_iter()
            .map(|(key, mass)| advance(key, *mass, start, end, burn, k, true_p))
            .collect();
        let mut reached: BTreeMap<(TrialState, u32, Vec<u64>), f64> = BTreeMap::new();
        for ((key, _), out) in sources.iter().zip(results) {
            for (state, m) in out {
                *reached.entry((state, key.dropped, key.law.clone())).or_insert(0.0) += m;
            }
            if reached.len() as u64 > cap {
                return Err(Error::Infeasible { estimated: reached.len() as u64, cap });
            }
        }

        if points.binary_search(&end).is_ok() {
            let final_analysis = end == n;
            let todo: Vec<(TrialState, u32)> = {
                let mut v: Vec<_> = reached.keys().map(|(s, d, _)| (s.clone(), *d)).collect();
                v.dedup();
                v
            };
            let decided: Vec<Result<(Decision, Vec<usize>, f64)>> = todo
                .par_iter()
                .map(|(s, d)| analyse(design, s, &mask_to_vec(*d, k), final_analysis))
                .collect();
            let mut cache: HashMap<(TrialState, u32), (Decision, Vec<usize>, f64)> = HashMap::new();
            for (key, r) in todo.into_iter().zip(decided) {
                cache.insert(key, r?);
            }
            for ((state, dropped, law), mass) in reached {
                let (decision, newly, stat) = &cache[&(state.clone(), dropped)];
                if collect {
                    visits.push((*stat, mass));
                }
                let dropped = newly.iter().fold(dropped, |m, &j| m | 1 << j);
                if *decision != Decision::Continue || final_analysis {
                    let key = TerminalKey { state, dropped, stopped_at: end, decision: *decision };
                    *terminal.entry(key).or_insert(0.0) += mass;
                    continue;
                }
                let law = if newly.is_empty() || law.is_empty() {
                    law
                } else {
                    law_bits(&restrict(law_from_bits(&law), &mask_to_vec(dropped, k)))
                };
                *active.entry(ActiveKey { state, dropped, law }).or_insert(0.0) += mass;
            }
        } else {
            for ((state, dropped, law), mass) in reached {
                if end == n {
                    let key = TerminalKey { state, dropped, stopped_at: end, decision: Decision::Continue };
                    *terminal.entry(key).or_insert(0.0) += mass;
                } else {
                    *active.entry(ActiveKey { state, dropped, law }).or_insert(0.0) += mass;
                }
            }
        }
        start = end;
    }
    if n == 0 {
        for (key, mass) in active {
            let t = TerminalKey { state: key.state, dropped: 0, stopped_at: 0, decision: Decision::Continue };
            terminal.insert(t, mass);
        }
    }
    let terminal = terminal
        .into_iter()
        .map(|(key, mass)| TerminalState {
            state: key.state,
            dropped: key.dropped,
            stopped_at: key.stopped_at,
            decision: key.decision,
            mass,
        })
        .collect();
    Ok((StateDistribution { patients: n, terminal }, visits))
}

fn analyse(design: &TrialDesign, state: &TrialState, dropped: &[bool], final_analysis: bool) -> Result<(Decision, Vec<usize>, f64)> {
    let sup = test_statistics(state, &design.test_method)?;
    let inf = if final_analysis && design.inferiority_threshold.is_some() {
        Some(test_statistics(&state.swapped(), &design.test_method)?)
    } else {
        None
    };
    let (decision, newly) = decide(design, state, &sup, inf.as_deref(), dropped, final_analysis)?;
    Ok((decision, newly, deciding_statistic(&sup, inf.as_deref(), dropped)))
}

/// Mass over states after patients `start..end` from one source state.
fn advance(key: &ActiveKey, mass: f64, start: u32, end: u32, burn: u32, k: usize, true_p: &[f64]) -> BTreeMap<TrialState, f64> {
    let law = law_from_bits(&key.law);
    let mut cur: BTreeMap<TrialState, f64> = BTreeMap::new();
    cur.insert(key.state.clone(), mass);
    let mut fixed = vec![0.0; k];
    for i in start..end {
        let probs: &[f64] = if i < burn {
            fixed.iter_mut().for_each(|v| *v = 0.0);
            fixed[i as usize % k] = 1.0;
            &fixed
        } else {
            &law
        };
        let mut next = BTreeMap::new();
        for (s, m) in &cur {
            for (j, &pj) in probs.iter().enumerate() {
                if pj <= 0.0 {
                    continue;
                }
                for (slot, q) in [(0u8, true_p[j]), (1u8, 1.0 - true_p[j])] {
                    if q > 0.0 {
                        *next.entry(s.incremented(Increment::new(j, slot))).or_insert(0.0) += m * pj * q;
                    }
                }
            }
        }
        cur = next;
    }
    cur
}
