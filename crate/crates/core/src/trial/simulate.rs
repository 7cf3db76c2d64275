use rand::Rng;
use serde::{Deserialize, Serialize};

use super::design::{Allocation, TrialDesign};
use super::rules::{allocated_counts, allocation_probs_in_stream, decide, restrict, AnalysisOutcome, Claim, Decision};
use crate::approx::{posterior_argmax, PpsMethod};
use crate::error::{Error, Result};
use crate::exact::{superiority_probs, Increment, SubsetTable, TrialState};
use crate::seed::{derive_seed, stream_rng};

const ROLE_ALLOCATION: u64 = 0;
const ROLE_SUPERIORITY: u64 = 1;
const ROLE_INFERIORITY: u64 = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PatientRecord {
    pub arm: usize,
    pub success: bool,
}

/// Allocation law in force from patient `start` (0-based) to the next record.
/// `probs` is absent during the round-robin burn-in.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AllocationRecord {
    pub start: u32,
    pub probs: Option<Vec<f64>>,
}

/// Complete history of one simulated trial.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialHistoryRecord {
    pub seed: u64,
    pub patients: Vec<PatientRecord>,
    pub allocations: Vec<AllocationRecord>,
    pub analyses: Vec<AnalysisOutcome>,
    /// Patients allocated when the trial ended.
    pub stopped_at: u32,
    pub rejection: Option<Claim>,
    pub futility: bool,
    pub dropped: Vec<bool>,
    pub final_state: TrialState,
}

impl TrialHistoryRecord {
    pub fn successes(&self, arms: usize) -> Vec<u32> {
        let mut s = vec![0; arms];
        self.patients.iter().filter(|p| p.success).for_each(|p| s[p.arm] += 1);
        s
    }

    pub fn allocated(&self, arms: usize) -> Vec<u32> {
        let mut n = vec![0; arms];
        self.patients.iter().for_each(|p| n[p.arm] += 1);
        n
    }

    /// Allocation probabilities used for patient `i` (0-based), if explicit.
    pub fn allocation_probs(&self, i: u32) -> Option<&[f64]> {
        let idx = self.allocations.partition_point(|a| a.start <= i);
        self.allocations.get(idx.checked_sub(1)?)?.probs.as_deref()
    }
}

/// Incrementally maintained test statistics.
struct StatTracker {
    method: PpsMethod,
    table: Option<SubsetTable>,
    state: TrialState,
}

impl StatTracker {
    fn new(priors: &TrialState, method: PpsMethod) -> Result<Self> {
        let table = match method {
            PpsMethod::Exact => Some(SubsetTable::from_state(priors)?),
            _ => None,
        };
        Ok(Self { method, table, state: priors.clone() })
    }

    fn push(&mut self, inc: Increment) -> Result<()> {
        if let Some(t) = &mut self.table {
            t.apply_increment(inc)?;
        }
        self.state.increment(inc);
        Ok(())
    }

    fn superiority(&self, stream: u64) -> Result<Vec<f64>> {
        match &self.table {
            Some(t) => Ok(t.singletons()),
            None => self.method.probs_in_stream(&self.state, stream),
        }
    }

    fn inferiority(&self, stream: u64) -> Result<Vec<f64>> {
        match self.method {
            PpsMethod::Exact => superiority_probs(&self.state.swapped()),
            m => m.probs_in_stream(&self.state.swapped(), stream),
        }
    }
}

/// Where patients' arms and outcomes come from.
trait PatientSource {
    fn next(&mut self, arm_law: ArmLaw<'_>, true_arm_success: &dyn Fn(usize) -> f64) -> Result<PatientRecord>;
}

enum ArmLaw<'a> {
    Fixed(usize),
    Probs(&'a [f64]),
    Draw(&'a TrialState, &'a [bool]),
}

struct Simulated<R: Rng> {
    rng: R,
}

impl<R: Rng> PatientSource for Simulated<R> {
    fn next(&mut self, law: ArmLaw<'_>, p: &dyn Fn(usize) -> f64) -> Result<PatientRecord> {
        let arm = match law {
            ArmLaw::Fixed(j) => j,
            ArmLaw::Probs(probs) => {
                let u: f64 = self.rng.random();
                let mut acc = 0.0;
                let mut arm = probs.iter().rposition(|&v| v > 0.0).unwrap_or(0);
                for (j, &v) in probs.iter().enumerate() {
                    acc += v;
                    if u < acc && v > 0.0 {
                        arm = j;
                        break;
                    }
                }
                arm
            }
            ArmLaw::Draw(state, dropped) => {
                let allowed: Vec<bool> = dropped.iter().map(|d| !d).collect();
                posterior_argmax(state, &allowed, &mut self.rng)
            }
        };
        let success = self.rng.random::<f64>() < p(arm);
        Ok(PatientRecord { arm, success })
    }
}

struct Replayed<'a> {
    patients: std::slice::Iter<'a, PatientRecord>,
}

impl PatientSource for Replayed<'_> {
    fn next(&mut self, _: ArmLaw<'_>, _: &dyn Fn(usize) -> f64) -> Result<PatientRecord> {
        self.patients
            .next()
            .copied()
            .ok_or_else(|| Error::Domain("record ends before the trial does".into()))
    }
}

/// Simulate one trial with response probabilities `true_p`; deterministic in `seed`.
pub fn simulate_trial(design: &TrialDesign, true_p: &[f64], seed: u64) -> Result<TrialHistoryRecord> {
    design.validate()?;
    if true_p.len() != design.arms || true_p.iter().any(|p| !(0.0..=1.0).contains(p)) {
        return Err(Error::Domain(format!("need {} response probabilities in [0, 1]", design.arms)));
    }
    let source = Simulated { rng: stream_rng(seed, &[]) };
    run(design, true_p, seed, source)
}

/// Recompute every analysis of `record` by feeding its patients through the
/// test engine again.
pub fn replay(design: &TrialDesign, record: &TrialHistoryRecord) -> Result<TrialHistoryRecord> {
    design.validate()?;
    let source = Replayed { patients: record.patients.iter() };
    run(design, &vec![0.0; design.arms], record.seed, source)
}

/// Whether replaying `record` reproduces its statistics and decisions exactly.
pub fn audit(design: &TrialDesign, record: &TrialHistoryRecord) -> Result<bool> {
    let again = replay(design, record)?;
    Ok(again.analyses == record.analyses
        && again.stopped_at == record.stopped_at
        && again.rejection == record.rejection
        && again.final_state == record.final_state)
}

fn run<S: PatientSource>(design: &TrialDesign, true_p: &[f64], seed: u64, mut source: S) -> Result<TrialHistoryRecord> {
    let k = design.arms;
    let n = design.max_patients;
    let priors = design.priors();
    let burn = design.burn_in_patients();
    let points = design.analysis_points();
    let mut next_point = 0;

    let mut tracker = StatTracker::new(&priors, design.test_method)?;
    let shares_tracker = design.allocation == Allocation::Probabilities { method: design.test_method };
    let mut dropped = vec![false; k];
    let mut patients = Vec::with_capacity(n as usize);
    let mut allocations = Vec::new();
    let mut analyses = Vec::new();
    let mut rejection = None;
    let mut futility = false;
    let mut block_probs: Vec<f64> = Vec::new();
    let mut block_state = priors.clone();
    let p = |j: usize| true_p[j];

    if burn > 0 {
        allocations.push(AllocationRecord { start: 0, probs: None });
    }
    let mut i = 0u32;
    while i < n {
        let law = if i < burn {
            ArmLaw::Fixed(i as usize % k)
        } else {
            if (i - burn) % design.block_size == 0 {
                block_state = tracker.state.clone();
                let stream = derive_seed(seed, &[i as u64, ROLE_ALLOCATION]);
                block_probs = match design.allocation {
                    Allocation::Probabilities { .. } if shares_tracker && design.test_method == PpsMethod::Exact => {
                        let raw = tracker.superiority(stream)?;
                        let counts = allocated_counts(&block_state, &priors);
                        let tuned = super::rules::tuned_probs(&raw, &block_state, &counts, design.tuning);
                        restrict(tuned, &dropped)
                    }
                    Allocation::Probabilities { .. } => allocation_probs_in_stream(design, &block_state, &dropped, stream)?,
                    Allocation::PosteriorDraw => vec![],
                };
                allocations.push(AllocationRecord {
                    start: i,
                    probs: (!block_probs.is_empty()).then(|| block_probs.clone()),
                });
            }
            match design.allocation {
                Allocation::PosteriorDraw => ArmLaw::Draw(&block_state, &dropped),
                _ => ArmLaw::Probs(&block_probs),
            }
        };
        let patient = source.next(law, &p)?;
        if patient.arm >= k {
            return Err(Error::Domain(format!("patient {i} assigned to arm {}", patient.arm)));
        }
        tracker.push(Increment::new(patient.arm, if patient.success { 0 } else { 1 }))?;
        patients.push(patient);
        i += 1;

        if next_point < points.len() && points[next_point] == i {
            next_point += 1;
            let final_analysis = i == n;
            let sup = tracker.superiority(derive_seed(seed, &[i as u64, ROLE_SUPERIORITY]))?;
            let inf = if final_analysis && design.inferiority_threshold.is_some() {
                Some(tracker.inferiority(derive_seed(seed, &[i as u64, ROLE_INFERIORITY]))?)
            } else {
                None
            };
            let (decision, newly) = decide(design, &tracker.state, &sup, inf.as_deref(), &dropped, final_analysis)?;
            newly.iter().for_each(|&j| dropped[j] = true);
            let mid_block = i > burn && i < n && (i - burn) % design.block_size != 0;
            if !newly.is_empty() && mid_block && !block_probs.is_empty() {
                block_probs = restrict(block_probs, &dropped);
                allocations.push(AllocationRecord { start: i, probs: Some(block_probs.clone()) });
            }
            analyses.push(AnalysisOutcome {
                patients: i,
                superiority: sup,
                inferiority: inf,
                newly_dropped: newly,
                decision,
            });
            match decision {
                Decision::Reject(c) => {
                    rejection = Some(c);
                    break;
                }
                Decision::Futility => {
                    futility = true;
                    break;
                }
                Decision::Continue => {}
            }
        }
    }
    Ok(TrialHistoryRecord {
        seed,
        patients,
        allocations,
        analyses,
        stopped_at: i,
        rejection,
        futility,
        dropped,
        final_state: tracker.state,
    })
}
