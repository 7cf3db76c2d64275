//! Heuristic choice of a posterior-probability backend for a response-adaptive
//! trial with uniform priors, a fixed maximum sample size and interim analyses
//! that both re-randomize and allow early stopping.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::trial::TrialDesign;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AnalysisFrequency {
    Frequent,
    Infrequent,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BurnInLength {
    Longer,
    Shorter,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Priority {
    /// Accuracy first, as in a confirmatory trial.
    Acc,
    Mix,
    /// Speed first, as when exploring many scenarios.
    Comp,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Backend {
    Exact,
    Ga,
    Rs,
}

impl fmt::Display for Backend {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Backend::Exact => "Exact",
            Backend::Ga => "GA",
            Backend::Rs => "RS",
        })
    }
}

macro_rules! parse_lower {
    ($ty:ty, $($name:literal => $v:expr),+) => {
        impl FromStr for $ty {
            type Err = Error;
            fn from_str(s: &str) -> Result<Self> {
                match s.to_ascii_lowercase().as_str() {
                    $($name => Ok($v),)+
                    other => Err(Error::Domain(format!("unrecognised value `{other}`"))),
                }
            }
        }
    };
}

parse_lower!(AnalysisFrequency, "frequent" => AnalysisFrequency::Frequent, "infrequent" => AnalysisFrequency::Infrequent);
parse_lower!(BurnInLength, "longer" => BurnInLength::Longer, "shorter" => BurnInLength::Shorter);
parse_lower!(Priority, "acc" => Priority::Acc, "mix" => Priority::Mix, "comp" => Priority::Comp);

/// Recommended backends, preferred first; two entries mean either is reasonable.
pub fn recommend(arms: usize, freq: AnalysisFrequency, burn_in: BurnInLength, priority: Priority) -> Result<Vec<Backend>> {
    use AnalysisFrequency::*;
    use Backend::*;
    use BurnInLength::*;
    if arms < 2 {
        return Err(Error::Domain(format!("need at least two arms, got {arms}")));
    }
    let fallback = if arms <= 7 { Ga } else { Rs };
    let cell = match (priority, freq, burn_in) {
        (Priority::Acc, _, _) => vec![Exact],
        (_, Infrequent, Longer) => vec![fallback],
        (_, Frequent, Shorter) if arms >= 13 && priority == Priority::Comp => vec![Rs],
        (_, Frequent, Shorter) if arms >= 13 => vec![Exact, Rs],
        (_, Frequent, Shorter) => vec![Exact],
        _ if arms >= 13 => vec![Rs],
        (Priority::Mix, _, _) => vec![Exact],
        (Priority::Comp, _, _) => vec![Exact, fallback],
    };
    Ok(cell)
}

/// Cut-offs turning a concrete design into the qualitative table inputs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Classification {
    /// Blocks of at most this many patients count as frequent analyses.
    pub frequent_max_block: u32,
    /// Burn-in is shorter when `arms * burn_in <= shorter_fraction * max_patients`.
    pub shorter_fraction: f64,
}

impl Default for Classification {
    fn default() -> Self {
        Self { frequent_max_block: 5, shorter_fraction: 0.125 }
    }
}

impl Classification {
    pub fn classify(&self, design: &TrialDesign) -> (AnalysisFrequency, BurnInLength) {
        let freq = if design.block_size <= self.frequent_max_block {
            AnalysisFrequency::Frequent
        } else {
            AnalysisFrequency::Infrequent
        };
        let total_burn = (design.arms as u64 * design.burn_in as u64) as f64;
        let burn = if total_burn <= self.shorter_fraction * design.max_patients as f64 {
            BurnInLength::Shorter
        } else {
            BurnInLength::Longer
        };
        (freq, burn)
    }
}

/// Joins alternatives as `Exact/GA`.
pub fn format_backends(b: &[Backend]) -> String {
    b.iter().map(Backend::to_string).collect::<Vec<_>>().join("/")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::approx::PpsMethod;

    #[test]
    fn parses_case_insensitively() {
        assert_eq!("Frequent".parse::<AnalysisFrequency>().unwrap(), AnalysisFrequency::Frequent);
        assert!("often".parse::<AnalysisFrequency>().is_err());
        assert_eq!("COMP".parse::<Priority>().unwrap(), Priority::Comp);
    }

    #[test]
    fn eset_classification() {
        let c = Classification::default();
        let d = |b0, b| TrialDesign::eset(b0, b, PpsMethod::Exact);
        assert_eq!(c.classify(&d(0, 1)), (AnalysisFrequency::Frequent, BurnInLength::Shorter));
        assert_eq!(c.classify(&d(100, 100)), (AnalysisFrequency::Infrequent, BurnInLength::Longer));
        // 3 * 30 = 90 = 720 / 8
        assert_eq!(c.classify(&d(30, 20)).1, BurnInLength::Shorter);
        assert_eq!(c.classify(&d(31, 20)).1, BurnInLength::Longer);
    }

    #[test]
    fn rejects_single_arm() {
        assert!(recommend(1, AnalysisFrequency::Frequent, BurnInLength::Longer, Priority::Acc).is_err());
    }
}
