//! Wall-clock benchmarks of the probability backends, alone and inside full
//! trials, and the runtime model fitted from them.

mod runtime;

use std::hint::black_box;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::approx::PpsMethod;
use crate::error::{Error, Result};
use crate::exact::{pps_single, run_path, Increment, TrialState};
use crate::trial::{simulate_trial, TrialDesign};

pub use runtime::{FitMetadata, LogAffineFit, RuntimeModel};

/// Version of the benchmark CSV layout.
pub const BENCH_SCHEMA_VERSION: u32 = 1;
pub const BENCH_HEADER: [&str; 13] = [
    "schema_version",
    "case",
    "method",
    "arms",
    "patients",
    "burn_in",
    "block_size",
    "samples",
    "trials",
    "repetitions",
    "median_seconds",
    "max_seconds",
    "value",
];

/// Median and maximum over timed repetitions; one warm-up run is discarded.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Timing {
    pub median: f64,
    pub max: f64,
    pub repetitions: usize,
}

pub fn measure<T>(repetitions: usize, mut f: impl FnMut() -> T) -> Timing {
    let repetitions = repetitions.max(1);
    black_box(f());
    let mut secs: Vec<f64> = (0..repetitions)
        .map(|_| {
            let t = Instant::now();
            black_box(f());
            t.elapsed().as_secs_f64()
        })
        .collect();
    secs.sort_by(f64::total_cmp);
    let mid = secs.len() / 2;
    let median = if secs.len() % 2 == 1 { secs[mid] } else { 0.5 * (secs[mid - 1] + secs[mid]) };
    Timing { median, max: secs[secs.len() - 1], repetitions }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BenchConfig {
    #[serde(default = "default_repetitions")]
    pub repetitions: usize,
    pub cases: Vec<BenchCase>,
}

fn default_repetitions() -> usize {
    5
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "case", rename_all = "snake_case", deny_unknown_fields)]
pub enum BenchCase {
    /// Probability that arm 0 is best at the balanced state with `n` patients.
    SingleProbability { arms: usize, patients: Vec<u32>, methods: Vec<PpsMethod> },
    /// Every arm's probability at the balanced state: the work of one block update.
    Update { arms: usize, patients: Vec<u32>, methods: Vec<PpsMethod> },
    /// All exact probabilities after each patient along a path to the balanced state.
    ExactPath { arms: usize, patients: Vec<u32> },
    /// `trials` whole trials per repetition with stopping and dropping disabled,
    /// each method used for both allocation and testing.
    Trial { design: TrialDesign, true_p: Vec<f64>, trials: u64, methods: Vec<PpsMethod> },
}

/// One row of the benchmark CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchRow {
    pub schema_version: u32,
    pub case: String,
    pub method: String,
    pub arms: usize,
    pub patients: u32,
    pub burn_in: u32,
    pub block_size: u32,
    pub samples: u64,
    pub trials: u64,
    pub repetitions: usize,
    pub median_seconds: f64,
    pub max_seconds: f64,
    /// Probability computed, or the mean final-analysis statistic of arm 0 for trials.
    pub value: f64,
}

/// State with `n` patients spread as evenly as possible over all `2k`
/// success and failure counts, on top of uniform priors; for a fixed `n` this
/// is where the exact two-arm computation is slowest.
pub fn balanced_state(arms: usize, n: u32) -> Result<TrialState> {
    let slots = 2 * arms as u32;
    if slots == 0 {
        return Err(Error::Domain("need at least one arm".into()));
    }
    TrialState::new((0..slots).map(|i| 1 + n / slots + u32::from(i < n % slots)).collect())
}

/// Path of `n` increments from uniform priors to [`balanced_state`].
pub fn balanced_path(arms: usize, n: u32) -> Vec<Increment> {
    let slots = 2 * arms as u32;
    (0..n).map(|i| Increment::new(((i % slots) / 2) as usize, (i % 2) as u8)).collect()
}

fn samples_of(m: &PpsMethod) -> u64 {
    match *m {
        PpsMethod::RepeatedSampling { samples, .. } => samples,
        _ => 0,
    }
}

impl BenchCase {
    fn name(&self) -> &'static str {
        match self {
            BenchCase::SingleProbability { .. } => "single_probability",
            BenchCase::Update { .. } => "update",
            BenchCase::ExactPath { .. } => "exact_path",
            BenchCase::Trial { .. } => "trial",
        }
    }

    pub fn run(&self, repetitions: usize) -> Result<Vec<BenchRow>> {
        let row = |method: &PpsMethod, arms, patients, t: Timing, value| BenchRow {
            schema_version: BENCH_SCHEMA_VERSION,
            case: self.name().into(),
            method: method.short_name().into(),
            arms,
            patients,
            burn_in: 0,
            block_size: 1,
            samples: samples_of(method),
            trials: 0,
            repetitions,
            median_seconds: t.median,
            max_seconds: t.max,
            value,
        };
        let mut out = Vec::new();
        match self {
            BenchCase::SingleProbability { arms, patients, methods } | BenchCase::Update { arms, patients, methods } => {
                let all = matches!(self, BenchCase::Update { .. });
                for &n in patients {
                    let state = balanced_state(*arms, n)?;
                    for m in methods {
                        m.validate()?;
                        let value = if all { m.probs(&state)?[0] } else { single_probability(m, &state)? };
                        let t = if all {
                            measure(repetitions, || m.probs(&state))
                        } else {
                            measure(repetitions, || single_probability(m, &state))
                        };
                        out.push(row(m, *arms, n, t, value));
                    }
                }
            }
            BenchCase::ExactPath { arms, patients } => {
                let priors = TrialState::uniform(*arms)?;
                for &n in patients {
                    let path = balanced_path(*arms, n);
                    let value = run_path(&priors, &path)?.last().map_or(0.0, |v| v[0]);
                    let t = measure(repetitions, || run_path(&priors, &path));
                    out.push(row(&PpsMethod::Exact, *arms, n, t, value));
                }
            }
            BenchCase::Trial { design, true_p, trials, methods } => {
                for m in methods {
                    let mut d = design.clone().with_method(*m).with_threshold(1.0);
                    d.drop_rule = None;
                    d.validate()?;
                    let run = || -> Result<f64> {
                        let mut acc = 0.0;
                        for seed in 0..*trials {
                            let rec = simulate_trial(&d, true_p, seed)?;
                            acc += rec.analyses.last().map_or(0.0, |a| a.superiority[0]);
                        }
                        Ok(acc / (*trials).max(1) as f64)
                    };
                    let value = run()?;
                    let t = measure(repetitions, run);
                    out.push(BenchRow {
                        burn_in: d.burn_in,
                        block_size: d.block_size,
                        trials: *trials,
                        ..row(m, d.arms, d.max_patients, t, value)
                    });
                }
            }
        }
        Ok(out)
    }
}

fn single_probability(m: &PpsMethod, state: &TrialState) -> Result<f64> {
    match m {
        PpsMethod::Exact => pps_single(state.arm(0), &state.params()[2..]),
        PpsMethod::GaussianApprox { accuracy, seed } => crate::approx::pps_gaussian_with(state, 0, *accuracy, *seed),
        PpsMethod::RepeatedSampling { samples, seed } => {
            crate::approx::pps_repeated_sampling(state, 0, *samples, *seed)
        }
        PpsMethod::NumericIntegration { accuracy } => crate::approx::pps_numeric_integration(state, 0, *accuracy),
    }
}

pub fn run_bench(config: &BenchConfig) -> Result<Vec<BenchRow>> {
    let mut rows = Vec::new();
    for case in &config.cases {
        rows.extend(case.run(config.repetitions)?);
    }
    Ok(rows)
}

pub fn write_bench_csv<W: std::io::Write>(rows: &[BenchRow], w: W) -> Result<()> {
    let mut wtr = csv::WriterBuilder::new().has_headers(false).from_writer(w);
    wtr.write_record(BENCH_HEADER)?;
    for r in rows {
        wtr.serialize(r)?;
    }
    wtr.flush()?;
    Ok(())
}

pub fn read_bench_csv<R: std::io::Read>(r: R) -> Result<Vec<BenchRow>> {
    let mut rdr = csv::Reader::from_reader(r);
    let header: Vec<String> = rdr.headers()?.iter().map(str::to_owned).collect();
    if header != BENCH_HEADER {
        return Err(Error::Config(format!("unexpected benchmark header {header:?}")));
    }
    let rows: Vec<BenchRow> = rdr.deserialize().collect::<std::result::Result<_, _>>()?;
    if let Some(r) = rows.iter().find(|r| r.schema_version != BENCH_SCHEMA_VERSION) {
        return Err(Error::Config(format!("benchmark schema version {} is not supported", r.schema_version)));
    }
    Ok(rows)
}
