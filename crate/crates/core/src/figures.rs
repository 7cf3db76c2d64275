//! Plot-ready grids: single-probability error surfaces for two arms, and the
//! change in two-arm operating characteristics when an approximation replaces
//! exact probabilities for allocation or for testing.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::approx::{pps_gaussian, rs_mean_abs_error, PpsMethod};
use crate::error::{Error, Result};
use crate::exact::{pps_two_arm, TrialState};
use crate::oc::{calibrate_pp, calibrate_ux, exact_ocs_with_cap, simulate_ocs, OcMode, UxOptions, DEFAULT_STATE_CAP};
use crate::trial::{Allocation, TrialDesign};

pub const FIGURE_SCHEMA_VERSION: u32 = 1;

/// Evenly spaced integers from 0 to `max`; a single point `max` when `points == 1`.
fn int_grid(max: u32, points: usize) -> Vec<u32> {
    match points {
        0 => vec![],
        1 => vec![max],
        _ => (0..points).map(|i| ((max as f64) * i as f64 / (points - 1) as f64).round() as u32).collect(),
    }
}

/// Evenly spaced probabilities on `[0, 1]`; the single point 0.5 when `points == 1`.
fn prob_grid(points: usize) -> Vec<f64> {
    match points {
        0 => vec![],
        1 => vec![0.5],
        _ => (0..points).map(|i| ((i as f64 / (points - 1) as f64) * 1e9).round() / 1e9).collect(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ErrorSurfaceConfig {
    /// Largest number of patients on one arm.
    #[serde(default = "default_per_arm")]
    pub max_per_arm: u32,
    /// Grid points per axis.
    #[serde(default = "default_resolution")]
    pub resolution: usize,
    /// Repeated-sampling draws whose error is reported.
    #[serde(default = "default_rs_samples")]
    pub samples: u64,
    /// Explicit `(arm 0, arm 1)` patient totals replacing the grid.
    #[serde(default)]
    pub cells: Option<Vec<(u32, u32)>>,
}

fn default_per_arm() -> u32 {
    100
}
fn default_resolution() -> usize {
    11
}
fn default_rs_samples() -> u64 {
    10_000
}

impl Default for ErrorSurfaceConfig {
    fn default() -> Self {
        Self { max_per_arm: default_per_arm(), resolution: default_resolution(), samples: default_rs_samples(), cells: None }
    }
}

/// Errors over every split of fixed arm totals into successes and failures,
/// with uniform priors; the probability is that arm 0 is best.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorSurfaceRow {
    pub schema_version: u32,
    pub arm0_patients: u32,
    pub arm1_patients: u32,
    pub states: u64,
    pub ga_max_abs_error: f64,
    pub ga_mean_abs_error: f64,
    /// Mean over states of the expected repeated-sampling error.
    pub rs_mean_abs_error: f64,
    /// Largest expected repeated-sampling error over states.
    pub rs_max_mean_abs_error: f64,
    /// Successes and failures `(a, b, c, d)` attaining the largest GA error.
    pub ga_worst_state: String,
}

pub const ERROR_SURFACE_HEADER: [&str; 9] = [
    "schema_version",
    "arm0_patients",
    "arm1_patients",
    "states",
    "ga_max_abs_error",
    "ga_mean_abs_error",
    "rs_mean_abs_error",
    "rs_max_mean_abs_error",
    "ga_worst_state",
];

pub fn error_surface_cell(n0: u32, n1: u32, samples: u64) -> Result<ErrorSurfaceRow> {
    if samples == 0 {
        return Err(Error::Config("samples must be positive".into()));
    }
    let (mut ga_max, mut ga_sum, mut rs_sum, mut rs_max) = (0.0f64, 0.0, 0.0, 0.0f64);
    let mut worst = (0, n0, 0, n1);
    for a in 0..=n0 {
        for c in 0..=n1 {
            let (b, d) = (n0 - a, n1 - c);
            let exact = pps_two_arm((c + 1, d + 1), (a + 1, b + 1))?;
            let state = TrialState::new(vec![a + 1, b + 1, c + 1, d + 1])?;
            let err = (pps_gaussian(&state, 0)? - exact).abs();
            if err > ga_max {
                ga_max = err;
                worst = (a, b, c, d);
            }
            ga_sum += err;
            let rs = rs_mean_abs_error(exact.clamp(0.0, 1.0), samples);
            rs_sum += rs;
            rs_max = rs_max.max(rs);
        }
    }
    let states = (n0 as u64 + 1) * (n1 as u64 + 1);
    Ok(ErrorSurfaceRow {
        schema_version: FIGURE_SCHEMA_VERSION,
        arm0_patients: n0,
        arm1_patients: n1,
        states,
        ga_max_abs_error: ga_max,
        ga_mean_abs_error: ga_sum / states as f64,
        rs_mean_abs_error: rs_sum / states as f64,
        rs_max_mean_abs_error: rs_max,
        ga_worst_state: format!("{};{};{};{}", worst.0, worst.1, worst.2, worst.3),
    })
}

pub fn error_surface(cfg: &ErrorSurfaceConfig) -> Result<Vec<ErrorSurfaceRow>> {
    let cells: Vec<(u32, u32)> = match &cfg.cells {
        Some(c) => c.clone(),
        None => {
            let g = int_grid(cfg.max_per_arm, cfg.resolution);
            g.iter().flat_map(|&x| g.iter().map(move |&y| (x, y))).collect()
        }
    };
    cells.par_iter().map(|&(x, y)| error_surface_cell(x, y, cfg.samples)).collect()
}

/// Test whose threshold is calibrated on the all-exact design.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "test", rename_all = "snake_case", deny_unknown_fields)]
pub enum TestSpec {
    Pp { p: f64 },
    Ux,
}

impl TestSpec {
    pub fn label(&self) -> String {
        match self {
            TestSpec::Pp { p } => format!("pp({p})"),
            TestSpec::Ux => "ux".into(),
        }
    }
}

/// Which part of the design the approximation replaces.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ApproximatedPart {
    Allocation,
    Test,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OcSurfaceConfig {
    /// Maximum sample size of the two-arm S-BRAR design.
    #[serde(default = "default_oc_patients")]
    pub patients: u32,
    #[serde(default = "default_tests")]
    pub tests: Vec<TestSpec>,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    /// Grid points per response-probability axis.
    #[serde(default = "default_resolution")]
    pub resolution: usize,
    /// UX calibration grid step.
    #[serde(default = "default_ux_step")]
    pub ux_step: f64,
    /// Simulated replications per cell for the repeated-sampling variant; none when 0.
    #[serde(default)]
    pub replications: u64,
    #[serde(default = "default_rs_samples")]
    pub rs_samples: u64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_cap")]
    pub state_cap: u64,
}

fn default_oc_patients() -> u32 {
    40
}
fn default_tests() -> Vec<TestSpec> {
    vec![TestSpec::Pp { p: 0.6 }, TestSpec::Ux]
}
fn default_alpha() -> f64 {
    0.05
}
fn default_ux_step() -> f64 {
    0.01
}
fn default_cap() -> u64 {
    DEFAULT_STATE_CAP
}

impl Default for OcSurfaceConfig {
    fn default() -> Self {
        Self {
            patients: default_oc_patients(),
            tests: default_tests(),
            alpha: default_alpha(),
            resolution: default_resolution(),
            ux_step: default_ux_step(),
            replications: 0,
            rs_samples: default_rs_samples(),
            seed: 0,
            state_cap: default_cap(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OcSurfaceRow {
    pub schema_version: u32,
    pub approximated: ApproximatedPart,
    pub test: String,
    pub threshold: f64,
    pub p0: f64,
    pub p1: f64,
    pub exact_rejection: f64,
    pub exact_power: f64,
    pub ga_rejection: f64,
    pub ga_power: f64,
    /// Empty when no replications were requested.
    pub rs_rejection: Option<f64>,
    pub rs_power: Option<f64>,
    pub rs_radius: Option<f64>,
}

pub const OC_SURFACE_HEADER: [&str; 13] = [
    "schema_version",
    "approximated",
    "test",
    "threshold",
    "p0",
    "p1",
    "exact_rejection",
    "exact_power",
    "ga_rejection",
    "ga_power",
    "rs_rejection",
    "rs_power",
    "rs_radius",
];

fn with_part(design: &TrialDesign, part: ApproximatedPart, m: PpsMethod) -> TrialDesign {
    let mut d = design.clone();
    match part {
        ApproximatedPart::Allocation => d.allocation = Allocation::Probabilities { method: m },
        ApproximatedPart::Test => d.test_method = m,
    }
    d
}

pub fn oc_surface(cfg: &OcSurfaceConfig, part: ApproximatedPart) -> Result<Vec<OcSurfaceRow>> {
    let base = TrialDesign::sbrar(2, cfg.patients, 1.0);
    base.validate()?;
    let grid = prob_grid(cfg.resolution);
    let cells: Vec<(f64, f64)> = grid.iter().flat_map(|&x| grid.iter().map(move |&y| (x, y))).collect();
    let ga = with_part(&base, part, PpsMethod::gaussian());
    let rs = with_part(&base, part, PpsMethod::repeated_sampling(cfg.rs_samples, cfg.seed));
    let mut rows = Vec::new();
    for test in &cfg.tests {
        let c = match *test {
            TestSpec::Pp { p } => calibrate_pp(&base, p, cfg.alpha, cfg.state_cap)?.threshold,
            TestSpec::Ux => {
                let opts = UxOptions { step: cfg.ux_step, refine_step: cfg.ux_step / 10.0, cap: cfg.state_cap };
                calibrate_ux(&base, cfg.alpha, opts)?.threshold
            }
        };
        let part_rows: Vec<OcSurfaceRow> = cells
            .par_iter()
            .enumerate()
            .map(|(i, &(p0, p1))| {
                let p = [p0, p1];
                let ex = exact_ocs_with_cap(&base, &p, c, cfg.state_cap)?;
                let g = exact_ocs_with_cap(&ga, &p, c, cfg.state_cap)?;
                let (rs_rejection, rs_power, rs_radius) = if cfg.replications > 0 {
                    let r = simulate_ocs(&rs, &p, c, cfg.replications, crate::seed::derive_seed(cfg.seed, &[i as u64]))?;
                    let OcMode::Simulated { radius, .. } = r.mode else { unreachable!("simulated report") };
                    (Some(r.rejection_rate), Some(r.power), Some(radius))
                } else {
                    (None, None, None)
                };
                Ok(OcSurfaceRow {
                    schema_version: FIGURE_SCHEMA_VERSION,
                    approximated: part,
                    test: test.label(),
                    threshold: c,
                    p0,
                    p1,
                    exact_rejection: ex.rejection_rate,
                    exact_power: ex.power,
                    ga_rejection: g.rejection_rate,
                    ga_power: g.power,
                    rs_rejection,
                    rs_power,
                    rs_radius,
                })
            })
            .collect::<Result<_>>()?;
        rows.extend(part_rows);
    }
    Ok(rows)
}

pub fn write_rows<W: std::io::Write, T: Serialize>(header: &[&str], rows: &[T], w: W) -> Result<()> {
    let mut wtr = csv::WriterBuilder::new().has_headers(false).from_writer(w);
    wtr.write_record(header)?;
    for r in rows {
        wtr.serialize(r)?;
    }
    wtr.flush()?;
    Ok(())
}
