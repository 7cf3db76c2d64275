use rand::Rng;
use serde::{Deserialize, Serialize};

use super::design::{Allocation, TrialDesign, Tuning};
use crate::approx::{posterior_argmax, PpsMethod};
use crate::error::{Error, Result};
use crate::exact::{superiority_probs, TrialState};
use crate::special::reg_inc_beta;

/// Superiority probabilities of every arm, renormalized when a backend's
/// values do not sum to one within 1e-12.
pub fn sbrar_probs(state: &TrialState, method: &PpsMethod) -> Result<Vec<f64>> {
    sbrar_probs_in_stream(state, method, 0)
}

pub(crate) fn sbrar_probs_in_stream(state: &TrialState, method: &PpsMethod, stream: u64) -> Result<Vec<f64>> {
    let p = method.probs_in_stream(state, stream)?;
    Ok(renormalize(p))
}

/// Raw superiority probabilities used as test statistics; approximations
/// are not renormalized.
pub fn test_statistics(state: &TrialState, method: &PpsMethod) -> Result<Vec<f64>> {
    method.probs_in_stream(state, 0)
}

fn renormalize(mut p: Vec<f64>) -> Vec<f64> {
    let s: f64 = p.iter().sum();
    if s > 0.0 && (s - 1.0).abs() > 1e-12 {
        p.iter_mut().for_each(|v| *v /= s);
    }
    p
}

/// Variance-scaled probabilities `t_j = (raw_j Var_j / (N_j + 1))^(1/m)`,
/// normalized; `raw` is returned unchanged when every `t_j` vanishes.
pub fn tuned_probs(raw: &[f64], state: &TrialState, counts: &[u32], tuning: Tuning) -> Vec<f64> {
    match tuning {
        Tuning::None => raw.to_vec(),
        Tuning::VarianceScaling { power } => {
            let inv = 1.0 / power as f64;
            let t: Vec<f64> = raw
                .iter()
                .enumerate()
                .map(|(j, &r)| (r.max(0.0) * state.variance(j) / (counts[j] as f64 + 1.0)).powf(inv))
                .collect();
            let s: f64 = t.iter().sum();
            if s > 0.0 && s.is_finite() {
                t.into_iter().map(|v| v / s).collect()
            } else {
                raw.to_vec()
            }
        }
    }
}

/// Zero the dropped arms and renormalize; uniform over the remaining arms if
/// nothing is left. Returned unchanged when no arm is dropped.
pub(crate) fn restrict(mut p: Vec<f64>, dropped: &[bool]) -> Vec<f64> {
    if !dropped.iter().any(|&d| d) {
        return p;
    }
    for (v, &d) in p.iter_mut().zip(dropped) {
        if d {
            *v = 0.0;
        }
    }
    let s: f64 = p.iter().sum();
    if s > 0.0 {
        p.iter_mut().for_each(|v| *v /= s);
        return p;
    }
    let live = dropped.iter().filter(|&&d| !d).count().max(1) as f64;
    dropped.iter().map(|&d| if d { 0.0 } else { 1.0 / live }).collect()
}

/// Patients allocated to each arm so far.
pub fn allocated_counts(state: &TrialState, priors: &TrialState) -> Vec<u32> {
    (0..state.arms())
        .map(|j| {
            let (a, b) = state.arm(j);
            let (a0, b0) = priors.arm(j);
            a + b - a0 - b0
        })
        .collect()
}

/// Allocation probabilities for the block starting at `state`. For posterior
/// draws this is the marginal law of the drawn arm.
pub fn allocation_probs(design: &TrialDesign, state: &TrialState, dropped: &[bool]) -> Result<Vec<f64>> {
    allocation_probs_in_stream(design, state, dropped, 0)
}

pub(crate) fn allocation_probs_in_stream(
    design: &TrialDesign,
    state: &TrialState,
    dropped: &[bool],
    stream: u64,
) -> Result<Vec<f64>> {
    match design.allocation {
        Allocation::Probabilities { method } => {
            let raw = sbrar_probs_in_stream(state, &method, stream)?;
            let counts = allocated_counts(state, &design.priors());
            Ok(restrict(tuned_probs(&raw, state, &counts, design.tuning), dropped))
        }
        Allocation::PosteriorDraw => posterior_draw_marginal(state, dropped),
    }
}

/// Law of the arm chosen by a posterior draw restricted to live arms.
fn posterior_draw_marginal(state: &TrialState, dropped: &[bool]) -> Result<Vec<f64>> {
    let live: Vec<usize> = (0..state.arms()).filter(|&j| !dropped[j]).collect();
    let mut out = vec![0.0; state.arms()];
    match live.len() {
        0 => return Err(Error::InvalidDesign("no arm left to allocate".into())),
        1 => out[live[0]] = 1.0,
        _ => {
            let sub = TrialState::new(live.iter().flat_map(|&j| [state.arm(j).0, state.arm(j).1]).collect())?;
            for (p, &j) in superiority_probs(&sub)?.into_iter().zip(&live) {
                out[j] = p;
            }
        }
    }
    Ok(out)
}

/// Thompson-sampling allocation: the arm holding the largest of one joint
/// posterior draw.
pub fn posterior_draw_allocation<R: Rng + ?Sized>(state: &TrialState, rng: &mut R) -> usize {
    posterior_argmax(state, &vec![true; state.arms()], rng)
}

/// Arms claimed by a rejection of the null hypothesis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Claim {
    pub best: Option<usize>,
    pub worst: Option<usize>,
}

impl Claim {
    pub fn best(j: usize) -> Self {
        Self { best: Some(j), worst: None }
    }

    /// Whether the claim identifies the unique best or the unique worst arm
    /// under `true_p`.
    pub fn is_correct(&self, true_p: &[f64]) -> bool {
        let best_ok = self.best.is_some() && unique_extreme(true_p, true) == self.best;
        let worst_ok = self.worst.is_some() && unique_extreme(true_p, false) == self.worst;
        best_ok || worst_ok
    }
}

/// Index of the unique maximum (or minimum) of `p`.
pub fn unique_extreme(p: &[f64], max: bool) -> Option<usize> {
    let better = |a: f64, b: f64| if max { a > b } else { a < b };
    let mut idx = 0;
    for j in 1..p.len() {
        if better(p[j], p[idx]) {
            idx = j;
        }
    }
    (p.iter().enumerate().filter(|&(j, &v)| j != idx && v == p[idx]).count() == 0).then_some(idx)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(tag = "decision", rename_all = "snake_case")]
pub enum Decision {
    Continue,
    Reject(Claim),
    Futility,
}

/// Result of one analysis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalysisOutcome {
    pub patients: u32,
    pub superiority: Vec<f64>,
    pub inferiority: Option<Vec<f64>>,
    pub newly_dropped: Vec<usize>,
    pub decision: Decision,
}

fn argmax_live(v: &[f64], dropped: &[bool]) -> Option<usize> {
    let mut best: Option<usize> = None;
    for j in (0..v.len()).filter(|&j| !dropped[j]) {
        if best.is_none_or(|b| v[j] > v[b]) {
            best = Some(j);
        }
    }
    best
}

/// Largest statistic that decides rejection at this analysis: the best live
/// superiority value and, at a final analysis with a worst-arm claim, the
/// best live inferiority value of an arm other than the leading one.
pub fn deciding_statistic(superiority: &[f64], inferiority: Option<&[f64]>, dropped: &[bool]) -> f64 {
    let best = argmax_live(superiority, dropped);
    let s = best.map_or(0.0, |j| superiority[j]);
    let i = inferiority
        .and_then(|t| argmax_live(t, dropped).filter(|&j| Some(j) != best).map(|j| t[j]))
        .unwrap_or(0.0);
    s.max(i)
}

/// Apply the design's rules to the statistics of one analysis.
///
/// Interim analyses only test superiority and may drop arms; the final
/// analysis also tests inferiority when configured.
pub fn decide(
    design: &TrialDesign,
    state: &TrialState,
    superiority: &[f64],
    inferiority: Option<&[f64]>,
    dropped: &[bool],
    final_analysis: bool,
) -> Result<(Decision, Vec<usize>)> {
    let best = argmax_live(superiority, dropped);
    let sup_ok = best.is_some_and(|j| superiority[j] > design.superiority_threshold);
    if !final_analysis {
        if sup_ok {
            return Ok((Decision::Reject(Claim { best, worst: None }), vec![]));
        }
        let mut newly = Vec::new();
        if let Some(rule) = design.drop_rule {
            for j in (0..state.arms()).filter(|&j| !dropped[j]) {
                let (a, b) = state.arm(j);
                if reg_inc_beta(rule.response_floor, a as f64, b as f64)? >= rule.confidence {
                    newly.push(j);
                }
            }
            if dropped.iter().filter(|&&d| !d).count() == newly.len() {
                return Ok((Decision::Futility, newly));
            }
        }
        return Ok((Decision::Continue, newly));
    }
    let mut worst = None;
    if let (Some(c), Some(t)) = (design.inferiority_threshold, inferiority) {
        worst = argmax_live(t, dropped).filter(|&j| t[j] > c && Some(j) != best);
    }
    let claim = Claim { best: best.filter(|_| sup_ok), worst };
    let decision = if claim.best.is_some() || claim.worst.is_some() {
        Decision::Reject(claim)
    } else {
        Decision::Continue
    };
    Ok((decision, vec![]))
}

/// Compute the test statistics at `state` with the design's test method and
/// apply the decision rules.
pub fn evaluate_tests(
    design: &TrialDesign,
    state: &TrialState,
    dropped: &[bool],
    final_analysis: bool,
) -> Result<AnalysisOutcome> {
    let superiority = test_statistics(state, &design.test_method)?;
    let inferiority = if final_analysis && design.inferiority_threshold.is_some() {
        Some(test_statistics(&state.swapped(), &design.test_method)?)
    } else {
        None
    };
    let (decision, newly_dropped) =
        decide(design, state, &superiority, inferiority.as_deref(), dropped, final_analysis)?;
    let patients = allocated_counts(state, &design.priors()).iter().sum();
    Ok(AnalysisOutcome { patients, superiority, inferiority, newly_dropped, decision })
}
