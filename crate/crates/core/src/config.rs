//! The JSON run configuration shared by every command. Unknown keys are
//! rejected at every level; `schema/run_config.schema.json` documents it.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::bench::BenchConfig;
use crate::error::{Error, Result};
use crate::figures::{ErrorSurfaceConfig, OcSurfaceConfig};
use crate::oc::DEFAULT_STATE_CAP;
use crate::recommend::Classification;
use crate::trial::TrialDesign;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OcModeChoice {
    #[default]
    Exact,
    Simulated,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "test", rename_all = "snake_case", deny_unknown_fields)]
pub enum CalibrationConfig {
    Pp {
        p: f64,
        alpha: f64,
    },
    Ux {
        alpha: f64,
        #[serde(default = "default_step")]
        step: f64,
        #[serde(default = "default_refine_step")]
        refine_step: f64,
    },
}

fn default_step() -> f64 {
    0.01
}
fn default_refine_step() -> f64 {
    0.001
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub design: Option<TrialDesign>,
    /// Response-probability vectors to evaluate.
    #[serde(default)]
    pub scenarios: Vec<Vec<f64>>,
    /// Critical value for every rejection; the design's own thresholds when absent.
    #[serde(default)]
    pub threshold: Option<f64>,
    #[serde(default)]
    pub replications: Option<u64>,
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub threads: Option<usize>,
    #[serde(default)]
    pub out: Option<PathBuf>,
    #[serde(default)]
    pub oc_mode: OcModeChoice,
    #[serde(default)]
    pub state_cap: Option<u64>,
    #[serde(default)]
    pub calibration: Option<CalibrationConfig>,
    #[serde(default)]
    pub bench: Option<BenchConfig>,
    #[serde(default)]
    pub error_surface: Option<ErrorSurfaceConfig>,
    #[serde(default)]
    pub oc_surface: Option<OcSurfaceConfig>,
    #[serde(default)]
    pub classification: Option<Classification>,
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn validate(&self) -> Result<()> {
        if let Some(d) = &self.design {
            d.validate().map_err(|e| Error::Config(e.to_string()))?;
            if let Some(s) = self.scenarios.iter().find(|s| s.len() != d.arms) {
                return Err(Error::Config(format!("scenario {s:?} does not have {} arms", d.arms)));
            }
        }
        if let Some(s) = self.scenarios.iter().find(|s| s.iter().any(|p| !(0.0..=1.0).contains(p))) {
            return Err(Error::Config(format!("scenario {s:?} has a probability outside [0, 1]")));
        }
        if let Some(c) = self.threshold {
            if !(0.0..=1.0).contains(&c) {
                return Err(Error::Config(format!("threshold {c} outside [0, 1]")));
            }
        }
        if self.threads == Some(0) {
            return Err(Error::Config("threads must be positive".into()));
        }
        match self.calibration {
            Some(CalibrationConfig::Pp { p, alpha }) if !(0.0..=1.0).contains(&p) || !(alpha > 0.0) => {
                return Err(Error::Config("calibration needs p in [0, 1] and alpha > 0".into()))
            }
            Some(CalibrationConfig::Ux { alpha, step, refine_step })
                if !(alpha > 0.0) || !(step > 0.0) || !(refine_step > 0.0) =>
            {
                return Err(Error::Config("calibration needs positive alpha and grid steps".into()))
            }
            _ => {}
        }
        Ok(())
    }

    pub fn require_design(&self) -> Result<&TrialDesign> {
        self.design.as_ref().ok_or_else(|| Error::Config("`design` is required".into()))
    }

    pub fn require_scenarios(&self) -> Result<&[Vec<f64>]> {
        if self.scenarios.is_empty() {
            return Err(Error::Config("`scenarios` must list at least one response-probability vector".into()));
        }
        Ok(&self.scenarios)
    }

    pub fn state_cap(&self) -> u64 {
        self.state_cap.unwrap_or(DEFAULT_STATE_CAP)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_object_is_valid() {
        assert_eq!(RunConfig::from_json("{}").unwrap(), RunConfig::default());
    }

    #[test]
    fn unknown_keys_are_rejected_at_every_level() {
        assert!(RunConfig::from_json(r#"{"sed": 1}"#).is_err());
        assert!(RunConfig::from_json(r#"{"calibration": {"test": "pp", "p": 0.5, "alpha": 0.05, "x": 1}}"#).is_err());
        assert!(RunConfig::from_json(r#"{"bench": {"cases": [], "reps": 3}}"#).is_err());
    }

    #[test]
    fn scenario_arity_is_checked() {
        let text = r#"{
            "design": {"arms": 2, "max_patients": 10, "analyses": {"kind": "final_only"},
                       "superiority_threshold": 0.9,
                       "allocation": {"kind": "probabilities", "method": {"method": "exact"}},
                       "test_method": {"method": "exact"}},
            "scenarios": [[0.5, 0.5, 0.5]]
        }"#;
        assert!(matches!(RunConfig::from_json(text), Err(Error::Config(_))));
        let ok = text.replace("[[0.5, 0.5, 0.5]]", "[[0.5, 0.5]]");
        assert!(RunConfig::from_json(&ok).unwrap().design.is_some());
    }
}
