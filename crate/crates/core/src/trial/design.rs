use serde::{Deserialize, Serialize};

use crate::approx::PpsMethod;
use crate::error::{Error, Result};
use crate::exact::TrialState;

/// Transformation applied to raw superiority probabilities before allocation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Tuning {
    #[default]
    None,
    /// `t_j = (pi_j Var(p_j) / (N_j + 1))^(1/power)`, renormalized.
    VarianceScaling { power: u32 },
}

/// How the next block of patients is allocated.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Allocation {
    /// Explicit probabilities from a backend.
    Probabilities { method: PpsMethod },
    /// Thompson sampling: one joint posterior draw per patient, argmax arm.
    PosteriorDraw,
}

/// Drop arm `j` at an interim analysis once `P(p_j < response_floor) >= confidence`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DropRule {
    pub response_floor: f64,
    pub confidence: f64,
}

/// When analyses take place, in numbers of patients allocated. The final
/// analysis at the maximum sample size is always included.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum AnalysisSchedule {
    /// Only the final analysis.
    FinalOnly,
    /// After every block following burn-in.
    EveryBlock,
    /// Explicit patient counts.
    Points { points: Vec<u32> },
}

/// A response-adaptive trial with binary endpoints and Beta priors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrialDesign {
    pub arms: usize,
    pub max_patients: u32,
    /// Beta prior parameters; uniform when absent.
    #[serde(default)]
    pub priors: Option<TrialState>,
    /// Patients per arm assigned round-robin before adaptation starts.
    #[serde(default)]
    pub burn_in: u32,
    /// Patients allocated between updates of the allocation probabilities.
    #[serde(default = "one")]
    pub block_size: u32,
    pub analyses: AnalysisSchedule,
    pub superiority_threshold: f64,
    /// Threshold for the worst-arm claim at the final analysis; no such claim when absent.
    #[serde(default)]
    pub inferiority_threshold: Option<f64>,
    #[serde(default)]
    pub drop_rule: Option<DropRule>,
    #[serde(default)]
    pub tuning: Tuning,
    pub allocation: Allocation,
    pub test_method: PpsMethod,
}

fn one() -> u32 {
    1
}

impl TrialDesign {
    /// Plain S-BRAR with exact probabilities, no burn-in, one patient per
    /// block and a single final analysis.
    pub fn sbrar(arms: usize, max_patients: u32, threshold: f64) -> Self {
        Self {
            arms,
            max_patients,
            priors: None,
            burn_in: 0,
            block_size: 1,
            analyses: AnalysisSchedule::FinalOnly,
            superiority_threshold: threshold,
            inferiority_threshold: None,
            drop_rule: None,
            tuning: Tuning::None,
            allocation: Allocation::Probabilities { method: PpsMethod::Exact },
            test_method: PpsMethod::Exact,
        }
    }

    /// Three-arm status-epilepticus design: 720 patients, variance-scaled
    /// T-BRAR with square-root tuning, best and worst claims at 0.975, arm
    /// dropping below a 25% response rate with 95% confidence.
    pub fn eset(burn_in: u32, block_size: u32, method: PpsMethod) -> Self {
        Self {
            arms: 3,
            max_patients: 720,
            priors: None,
            burn_in,
            block_size,
            analyses: AnalysisSchedule::EveryBlock,
            superiority_threshold: 0.975,
            inferiority_threshold: Some(0.975),
            drop_rule: Some(DropRule { response_floor: 0.25, confidence: 0.95 }),
            tuning: Tuning::VarianceScaling { power: 2 },
            allocation: Allocation::Probabilities { method },
            test_method: method,
        }
    }

    pub fn with_method(mut self, method: PpsMethod) -> Self {
        self.allocation = Allocation::Probabilities { method };
        self.test_method = method;
        self
    }

    pub fn with_threshold(mut self, c: f64) -> Self {
        self.superiority_threshold = c;
        if self.inferiority_threshold.is_some() {
            self.inferiority_threshold = Some(c);
        }
        self
    }

    pub fn priors(&self) -> TrialState {
        self.priors.clone().unwrap_or_else(|| TrialState::uniform(self.arms).expect("validated arm count"))
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidDesign(m));
        if self.arms < 2 || self.arms > crate::exact::MAX_ARMS {
            return bad(format!("arm count {} outside 2..={}", self.arms, crate::exact::MAX_ARMS));
        }
        if let Some(p) = &self.priors {
            if p.arms() != self.arms {
                return bad(format!("priors describe {} arms, design has {}", p.arms(), self.arms));
            }
        }
        if self.arms as u64 * self.burn_in as u64 > self.max_patients as u64 {
            return bad("burn-in exceeds the maximum sample size".into());
        }
        if self.block_size == 0 {
            return bad("block size must be at least 1".into());
        }
        for (name, t) in [("superiority", Some(self.superiority_threshold)), ("inferiority", self.inferiority_threshold)] {
            if let Some(t) = t {
                if !(0.0..=1.0).contains(&t) {
                    return bad(format!("{name} threshold {t} outside [0, 1]"));
                }
            }
        }
        if let Some(d) = self.drop_rule {
            if !(0.0..=1.0).contains(&d.response_floor) || !(0.0..=1.0).contains(&d.confidence) {
                return bad("drop rule values must lie in [0, 1]".into());
            }
        }
        if let AnalysisSchedule::Points { points } = &self.analyses {
            let burn = self.burn_in_patients();
            if let Some(&p) = points.iter().find(|&&p| p == 0 || p > self.max_patients || p < burn) {
                return bad(format!("analysis point {p} outside burn-in end {burn}..={}", self.max_patients));
            }
        }
        if let Tuning::VarianceScaling { power: 0 } = self.tuning {
            return bad("variance-scaling power must be positive".into());
        }
        if self.allocation == Allocation::PosteriorDraw && self.tuning != Tuning::None {
            return bad("tuning needs explicit allocation probabilities; posterior draws cannot be tuned".into());
        }
        if let Allocation::Probabilities { method } = self.allocation {
            method.validate()?;
        }
        self.test_method.validate()
    }

    pub fn burn_in_patients(&self) -> u32 {
        self.arms as u32 * self.burn_in
    }

    /// Sorted, de-duplicated analysis points; the last one is `max_patients`.
    pub fn analysis_points(&self) -> Vec<u32> {
        let n = self.max_patients;
        let mut pts = match &self.analyses {
            AnalysisSchedule::FinalOnly => vec![],
            AnalysisSchedule::EveryBlock => {
                let start = self.burn_in_patients();
                (1..).map(|m| start as u64 + m * self.block_size as u64).take_while(|&p| p < n as u64).map(|p| p as u32).collect()
            }
            AnalysisSchedule::Points { points } => points.clone(),
        };
        if n > 0 {
            pts.push(n);
        }
        pts.sort_unstable();
        pts.dedup();
        pts
    }

    /// Patient counts at which allocation probabilities are recomputed.
    pub fn block_starts(&self) -> impl Iterator<Item = u32> + '_ {
        let start = self.burn_in_patients();
        (0..).map(move |m| start as u64 + m * self.block_size as u64).take_while(move |&p| p < self.max_patients as u64).map(|p| p as u32)
    }

    /// Whether allocation probabilities are a deterministic function of the state.
    pub fn is_deterministic(&self) -> bool {
        let alloc = match self.allocation {
            Allocation::Probabilities { method } => method.is_deterministic(),
            Allocation::PosteriorDraw => true,
        };
        alloc && self.test_method.is_deterministic()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn eset_schedule() {
        let d = TrialDesign::eset(100, 100, PpsMethod::Exact);
        d.validate().unwrap();
        assert_eq!(d.analysis_points(), vec![400, 500, 600, 700, 720]);
        assert_eq!(d.block_starts().collect::<Vec<_>>(), vec![300, 400, 500, 600, 700]);
        let d = TrialDesign::eset(0, 20, PpsMethod::gaussian());
        let pts = d.analysis_points();
        assert_eq!((pts[0], pts.len(), *pts.last().unwrap()), (20, 36, 720));
    }

    #[test]
    fn validation() {
        let mut d = TrialDesign::sbrar(2, 10, 0.9);
        d.validate().unwrap();
        d.burn_in = 6;
        assert!(d.validate().is_err());
        let mut d = TrialDesign::sbrar(2, 10, 1.5);
        assert!(d.validate().is_err());
        d.superiority_threshold = 0.5;
        d.block_size = 0;
        assert!(d.validate().is_err());
        let mut d = TrialDesign::sbrar(3, 10, 0.9);
        d.allocation = Allocation::PosteriorDraw;
        d.tuning = Tuning::VarianceScaling { power: 2 };
        assert!(d.validate().is_err());
    }

    #[test]
    fn serde_round_trip_rejects_unknown() {
        let d = TrialDesign::eset(100, 100, PpsMethod::Exact);
        let s = serde_json::to_string(&d).unwrap();
        assert_eq!(serde_json::from_str::<TrialDesign>(&s).unwrap(), d);
        let mut v: serde_json::Value = serde_json::from_str(&s).unwrap();
        v["surprise"] = 1.into();
        assert!(serde_json::from_value::<TrialDesign>(v).is_err());
        let bad = r#"{"arms":2,"max_patients":4,"priors":[1,0,1,1],"analyses":{"kind":"final_only"},
            "superiority_threshold":0.9,"allocation":{"kind":"posterior_draw"},"test_method":{"method":"exact"}}"#;
        assert!(serde_json::from_str::<TrialDesign>(bad).is_err());
    }
}
