//! Versioned CSV layouts for command output. Per-arm vectors occupy one
//! column with `;` between entries so every header is fixed.

use std::fmt::Display;
use std::io::Write;

use serde::Serialize;

use crate::error::Result;
use crate::oc::{OcMode, OcReport, PpCalibration, ReplicationSummary, UxCalibration};
use crate::trial::{Claim, Decision};

pub const REPORT_SCHEMA_VERSION: u32 = 1;

pub fn join<T: Display>(v: &[T]) -> String {
    v.iter().map(ToString::to_string).collect::<Vec<_>>().join(";")
}

fn opt<T: Display>(v: Option<T>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

pub const REPLICATION_HEADER: [&str; 11] = [
    "schema_version",
    "scenario",
    "replication",
    "seed",
    "stopped_at",
    "allocated",
    "successes",
    "superiority",
    "decision",
    "best",
    "worst",
];

#[derive(Debug, Clone, Serialize)]
pub struct ReplicationRow {
    pub schema_version: u32,
    pub scenario: usize,
    pub replication: u64,
    pub seed: u64,
    pub stopped_at: u32,
    pub allocated: String,
    pub successes: String,
    pub superiority: String,
    pub decision: &'static str,
    pub best: String,
    pub worst: String,
}

impl ReplicationRow {
    pub fn new(scenario: usize, r: &ReplicationSummary) -> Self {
        let (decision, claim) = match r.decision {
            Decision::Continue => ("continue", Claim { best: None, worst: None }),
            Decision::Reject(c) => ("reject", c),
            Decision::Futility => ("futility", Claim { best: None, worst: None }),
        };
        Self {
            schema_version: REPORT_SCHEMA_VERSION,
            scenario,
            replication: r.replication,
            seed: r.seed,
            stopped_at: r.stopped_at,
            allocated: join(&r.allocated),
            successes: join(&r.successes),
            superiority: join(&r.last_superiority),
            decision,
            best: opt(claim.best),
            worst: opt(claim.worst),
        }
    }
}

pub const OC_HEADER: [&str; 15] = [
    "schema_version",
    "mode",
    "true_p",
    "threshold",
    "superior_arm",
    "rejection_rate",
    "power",
    "futility_rate",
    "expected_sample_size",
    "epasa",
    "vpasa",
    "replications",
    "radius",
    "epasa_se",
    "vpasa_se",
];

#[derive(Debug, Clone, Serialize)]
pub struct OcRow {
    pub schema_version: u32,
    pub mode: &'static str,
    pub true_p: String,
    pub threshold: f64,
    pub superior_arm: usize,
    pub rejection_rate: f64,
    pub power: f64,
    pub futility_rate: f64,
    pub expected_sample_size: f64,
    pub epasa: f64,
    pub vpasa: f64,
    pub replications: String,
    pub radius: String,
    pub epasa_se: String,
    pub vpasa_se: String,
}

impl From<&OcReport> for OcRow {
    fn from(r: &OcReport) -> Self {
        let (mode, reps, radius, es, vs) = match r.mode {
            OcMode::Exact => ("exact", None, None, None, None),
            OcMode::Simulated { replications, radius, epasa_se, vpasa_se, .. } => {
                ("simulated", Some(replications), Some(radius), Some(epasa_se), Some(vpasa_se))
            }
        };
        Self {
            schema_version: REPORT_SCHEMA_VERSION,
            mode,
            true_p: join(&r.true_p),
            threshold: r.threshold,
            superior_arm: r.superior_arm,
            rejection_rate: r.rejection_rate,
            power: r.power,
            futility_rate: r.futility_rate,
            expected_sample_size: r.expected_sample_size,
            epasa: r.epasa,
            vpasa: r.vpasa,
            replications: opt(reps),
            radius: opt(radius),
            epasa_se: opt(es),
            vpasa_se: opt(vs),
        }
    }
}

pub const CALIBRATION_HEADER: [&str; 10] = [
    "schema_version",
    "test",
    "p",
    "alpha",
    "threshold",
    "type_i_error",
    "argmax_p",
    "next_lower",
    "next_lower_type_i_error",
    "forward_passes",
];

#[derive(Debug, Clone, Serialize)]
pub struct CalibrationRow {
    pub schema_version: u32,
    pub test: &'static str,
    pub p: String,
    pub alpha: f64,
    pub threshold: f64,
    pub type_i_error: f64,
    pub argmax_p: String,
    pub next_lower: String,
    pub next_lower_type_i_error: String,
    pub forward_passes: String,
}

impl From<&PpCalibration> for CalibrationRow {
    fn from(c: &PpCalibration) -> Self {
        Self {
            schema_version: REPORT_SCHEMA_VERSION,
            test: "pp",
            p: c.p.to_string(),
            alpha: c.alpha,
            threshold: c.threshold,
            type_i_error: c.type_i_error,
            argmax_p: String::new(),
            next_lower: opt(c.next_lower.map(|n| n.0)),
            next_lower_type_i_error: opt(c.next_lower.map(|n| n.1)),
            forward_passes: c.forward_passes.to_string(),
        }
    }
}

impl CalibrationRow {
    /// `type_i_error` is the PP type I error at the maximizing rate.
    pub fn ux(c: &UxCalibration, at_argmax: &PpCalibration) -> Self {
        Self {
            schema_version: REPORT_SCHEMA_VERSION,
            test: "ux",
            p: String::new(),
            alpha: c.alpha,
            threshold: c.threshold,
            type_i_error: at_argmax.type_i_error,
            argmax_p: c.argmax_p.to_string(),
            next_lower: String::new(),
            next_lower_type_i_error: String::new(),
            forward_passes: String::new(),
        }
    }
}

pub const PPS_HEADER: [&str; 7] = ["schema_version", "method", "arms", "value", "error_estimate", "error_kind", "seconds"];

#[derive(Debug, Clone, Serialize)]
pub struct PpsRow {
    pub schema_version: u32,
    pub method: &'static str,
    pub arms: usize,
    pub value: f64,
    pub error_estimate: String,
    /// `quadrature`, `mvn`, `rs_mean_abs_bound` or empty for exact values.
    pub error_kind: &'static str,
    pub seconds: f64,
}

/// Writes `header` then every row, header included even when `rows` is empty.
pub fn write_csv<W: Write, T: Serialize>(header: &[&str], rows: &[T], w: W) -> Result<()> {
    crate::figures::write_rows(header, rows, w)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_table_is_just_the_header() {
        let mut buf = Vec::new();
        write_csv::<_, OcRow>(&OC_HEADER, &[], &mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), OC_HEADER.join(",") + "\n");
    }

    #[test]
    fn lists_join_with_semicolons() {
        assert_eq!(join(&[0.5, 0.25]), "0.5;0.25");
        assert_eq!(join::<u32>(&[]), "");
    }
}
