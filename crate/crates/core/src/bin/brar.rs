use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;

use brar::approx::{pps_numeric_integration_with_error, rs_error_bound};
use brar::bench::{read_bench_csv, run_bench, write_bench_csv, RuntimeModel};
use brar::config::{CalibrationConfig, OcModeChoice, RunConfig};
use brar::exact::TrialState;
use brar::figures::{self, ApproximatedPart, ERROR_SURFACE_HEADER, OC_SURFACE_HEADER};
use brar::oc::{calibrate_pp, calibrate_ux, exact_ocs_with_cap, simulate_replications, summarize, UxOptions};
use brar::recommend::{format_backends, recommend, AnalysisFrequency, Backend, BurnInLength, Priority};
use brar::report::{
    write_csv, CalibrationRow, OcRow, PpsRow, ReplicationRow, CALIBRATION_HEADER, OC_HEADER, PPS_HEADER,
    REPLICATION_HEADER, REPORT_SCHEMA_VERSION,
};
use brar::Error;

#[derive(Parser)]
#[command(name = "brar", version, about = "Posterior probabilities of superiority and response-adaptive trial operating characteristics")]
struct Cli {
    /// JSON run configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Master seed; overrides the configuration.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads; overrides the configuration.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Output file; standard output when absent.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Csv)]
    format: Format,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Clone, Copy, ValueEnum)]
enum MethodArg {
    Exact,
    Ga,
    Rs,
    Ni,
}

#[derive(Clone, Copy, ValueEnum)]
enum Study {
    Fig1,
    Fig2,
    Fig3,
}

#[derive(Subcommand)]
enum Command {
    /// Probability that the focal arm beats every opponent.
    Pps {
        #[arg(long)]
        k: usize,
        /// Focal arm parameters `a,b`.
        #[arg(long, value_delimiter = ',')]
        focal: Vec<u32>,
        /// Opponent parameters, two per arm.
        #[arg(long, value_delimiter = ',')]
        opp: Vec<u32>,
        #[arg(long, value_enum)]
        method: MethodArg,
        /// Draws for repeated sampling.
        #[arg(long, default_value_t = 10_000)]
        samples: u64,
        /// Target accuracy for numerical integration and the normal CDF.
        #[arg(long)]
        accuracy: Option<f64>,
    },
    /// Simulated replications of the configured design for every scenario.
    Simulate,
    /// Critical value controlling the type I error.
    Calibrate,
    /// Operating characteristics for every scenario, exactly or by simulation.
    Oc,
    /// Timing table for the configured benchmark cases.
    Bench,
    /// Fit runtime constants from a benchmark CSV.
    FitRuntime {
        /// Benchmark CSV written by `bench`.
        input: Option<PathBuf>,
        /// Print the published reference-hardware constants instead of fitting.
        #[arg(long)]
        reference: bool,
        /// `method,n,k,burn_in,block,samples` to predict, repeatable.
        #[arg(long)]
        predict: Vec<String>,
    },
    /// Suggested backend for a design.
    Recommend {
        #[arg(long)]
        k: Option<usize>,
        #[arg(long)]
        analyses: Option<String>,
        #[arg(long)]
        burn_in: Option<String>,
        /// acc, mix or comp; every priority when absent.
        #[arg(long)]
        priority: Option<String>,
    },
    /// Plot-ready grids.
    FigureData {
        #[arg(long, value_enum)]
        study: Study,
    },
}

/// Failure with the process exit status it maps to.
struct Failure {
    code: u8,
    message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::Config(_) | Error::InvalidDesign(_) | Error::InsufficientData(_) | Error::Domain(_) => 3,
            Error::Infeasible { .. } => 4,
            _ => 1,
        };
        Failure { code, message: e.to_string() }
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Failure { code: 1, message: e.to_string() }
    }
}

fn usage(message: impl Into<String>) -> Failure {
    Failure { code: 2, message: message.into() }
}

type Outcome<T> = std::result::Result<T, Failure>;

struct Ctx {
    cfg: RunConfig,
    seed: u64,
    /// Seed given on the command line or in the configuration.
    seed_override: Option<u64>,
    format: Format,
    out: Option<PathBuf>,
}

impl Ctx {
    fn sink(&self) -> Outcome<Box<dyn Write>> {
        Ok(match &self.out {
            Some(p) => Box::new(BufWriter::new(File::create(p)?)),
            None => Box::new(io::stdout().lock()),
        })
    }

    /// Where secondary tables go: standard output when the main table has a
    /// file, standard error otherwise.
    fn side(&self) -> Box<dyn Write> {
        if self.out.is_some() {
            Box::new(io::stdout().lock())
        } else {
            Box::new(io::stderr().lock())
        }
    }

    fn emit<T: Serialize>(&self, header: &[&str], rows: &[T], w: impl Write) -> Outcome<()> {
        match self.format {
            Format::Csv => write_csv(header, rows, w)?,
            Format::Json => {
                let mut w = w;
                serde_json::to_writer_pretty(&mut w, rows).map_err(|e| Failure { code: 1, message: e.to_string() })?;
                writeln!(w)?;
            }
        }
        Ok(())
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}

fn run(cli: Cli) -> Outcome<()> {
    let cfg = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    let threads = cli.threads.or(cfg.threads);
    if let Some(n) = threads {
        if n == 0 {
            return Err(usage("--threads must be positive"));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Failure { code: 1, message: e.to_string() })?;
    }
    let ctx = Ctx {
        seed: cli.seed.or(cfg.seed).unwrap_or(0),
        seed_override: cli.seed.or(cfg.seed),
        out: cli.out.clone().or_else(|| cfg.out.clone()),
        format: cli.format,
        cfg,
    };
    match cli.command {
        Command::Pps { k, focal, opp, method, samples, accuracy } => pps(&ctx, k, &focal, &opp, method, samples, accuracy),
        Command::Simulate => simulate(&ctx),
        Command::Calibrate => calibrate(&ctx),
        Command::Oc => oc(&ctx),
        Command::Bench => bench(&ctx),
        Command::FitRuntime { input, reference, predict } => fit_runtime(&ctx, input, reference, &predict),
        Command::Recommend { k, analyses, burn_in, priority } => {
            recommend_cmd(&ctx, k, analyses.as_deref(), burn_in.as_deref(), priority.as_deref())
        }
        Command::FigureData { study } => figure_data(&ctx, study),
    }
}

fn pps(ctx: &Ctx, k: usize, focal: &[u32], opp: &[u32], method: MethodArg, samples: u64, accuracy: Option<f64>) -> Outcome<()> {
    if k < 2 || focal.len() != 2 || opp.len() != 2 * (k - 1) {
        return Err(usage(format!("--k {k} needs --focal a,b and {} opponent parameters", 2 * k.saturating_sub(1))));
    }
    let mut params = focal.to_vec();
    params.extend_from_slice(opp);
    let state = TrialState::new(params).map_err(|e| usage(e.to_string()))?;
    let start = Instant::now();
    let (name, value, err, kind) = match method {
        MethodArg::Exact => ("exact", brar::exact::pps_single((focal[0], focal[1]), opp)?, None, ""),
        MethodArg::Ga => {
            let acc = accuracy.unwrap_or(brar::special::DEFAULT_MVN_ACCURACY);
            let v = brar::approx::pps_gaussian_with(&state, 0, acc, ctx.seed)?;
            let err = (k >= 4).then_some(acc);
            ("ga", v, err, if k >= 4 { "mvn_accuracy" } else { "" })
        }
        MethodArg::Rs => {
            if samples == 0 {
                return Err(usage("--samples must be positive"));
            }
            let v = brar::approx::pps_repeated_sampling(&state, 0, samples, ctx.seed)?;
            ("rs", v, Some(rs_error_bound(samples)), "rs_mean_abs_bound")
        }
        MethodArg::Ni => {
            let q = pps_numeric_integration_with_error(&state, 0, accuracy.unwrap_or(brar::approx::DEFAULT_NI_ACCURACY))?;
            ("ni", q.value, Some(q.error), "quadrature")
        }
    };
    let seconds = start.elapsed().as_secs_f64();
    eprintln!(
        "P(arm 0 best) = {value:.6} [{name}{}] in {:.3} ms",
        err.map(|e| format!(", {kind} {e:.1e}")).unwrap_or_default(),
        seconds * 1e3
    );
    let row = PpsRow {
        schema_version: REPORT_SCHEMA_VERSION,
        method: name,
        arms: k,
        value,
        error_estimate: err.map(|e| e.to_string()).unwrap_or_default(),
        error_kind: kind,
        seconds,
    };
    ctx.emit(&PPS_HEADER, &[row], ctx.sink()?)
}

fn design_with_threshold(ctx: &Ctx) -> Outcome<brar::trial::TrialDesign> {
    let d = ctx.cfg.require_design()?.clone();
    Ok(match ctx.cfg.threshold {
        Some(c) => d.with_threshold(c),
        None => d,
    })
}

fn simulate(ctx: &Ctx) -> Outcome<()> {
    let design = design_with_threshold(ctx)?;
    let scenarios = ctx.cfg.require_scenarios()?;
    let k = ctx.cfg.replications.ok_or_else(|| Error::Config("`replications` is required".into()))?;
    let mut rows = Vec::new();
    let mut summaries = Vec::new();
    for (s, p) in scenarios.iter().enumerate() {
        let reps = simulate_replications(&design, p, k, ctx.seed)?;
        rows.extend(reps.iter().map(|r| ReplicationRow::new(s, r)));
        summaries.push(reps);
    }
    ctx.emit(&REPLICATION_HEADER, &rows, ctx.sink()?)?;
    let mut oc_rows = Vec::new();
    for (p, reps) in scenarios.iter().zip(&summaries) {
        oc_rows.push(OcRow::from(&summarize(&design, p, design.superiority_threshold, reps)?));
    }
    ctx.emit(&OC_HEADER, &oc_rows, ctx.side())
}

fn oc(ctx: &Ctx) -> Outcome<()> {
    let design = design_with_threshold(ctx)?;
    let c = design.superiority_threshold;
    let mut rows = Vec::new();
    for p in ctx.cfg.require_scenarios()? {
        let report = match ctx.cfg.oc_mode {
            OcModeChoice::Exact => exact_ocs_with_cap(&design, p, c, ctx.cfg.state_cap()).map_err(|e| match e {
                Error::Infeasible { .. } => Failure {
                    code: 4,
                    message: format!("{e} (set \"oc_mode\": \"simulated\" and \"replications\")"),
                },
                e => e.into(),
            })?,
            OcModeChoice::Simulated => {
                let k = ctx.cfg.replications.ok_or_else(|| Error::Config("`replications` is required".into()))?;
                brar::oc::simulate_ocs(&design, p, c, k, ctx.seed)?
            }
        };
        rows.push(OcRow::from(&report));
    }
    ctx.emit(&OC_HEADER, &rows, ctx.sink()?)
}

fn calibrate(ctx: &Ctx) -> Outcome<()> {
    let design = ctx.cfg.require_design()?;
    let cap = ctx.cfg.state_cap();
    let cal = ctx.cfg.calibration.ok_or_else(|| Error::Config("`calibration` is required".into()))?;
    let row = match cal {
        CalibrationConfig::Pp { p, alpha } => CalibrationRow::from(&calibrate_pp(design, p, alpha, cap)?),
        CalibrationConfig::Ux { alpha, step, refine_step } => {
            let ux = calibrate_ux(design, alpha, UxOptions { step, refine_step, cap })?;
            let at = calibrate_pp(design, ux.argmax_p, alpha, cap)?;
            CalibrationRow::ux(&ux, &at)
        }
    };
    ctx.emit(&CALIBRATION_HEADER, &[row], ctx.sink()?)
}

fn bench(ctx: &Ctx) -> Outcome<()> {
    let cfg = ctx.cfg.bench.as_ref().ok_or_else(|| Error::Config("`bench` is required".into()))?;
    let rows = run_bench(cfg)?;
    match ctx.format {
        Format::Csv => write_bench_csv(&rows, ctx.sink()?)?,
        Format::Json => ctx.emit(&[], &rows, ctx.sink()?)?,
    }
    Ok(())
}

#[derive(Serialize)]
struct Prediction {
    method: Backend,
    patients: u32,
    arms: usize,
    burn_in: u32,
    block_size: u32,
    samples: u64,
    seconds: f64,
}

fn parse_prediction(s: &str) -> Outcome<(Backend, u32, usize, u32, u32, u64)> {
    let f: Vec<&str> = s.split(',').map(str::trim).collect();
    let bad = || usage(format!("--predict expects method,n,k,burn_in,block,samples; got `{s}`"));
    if f.len() != 6 {
        return Err(bad());
    }
    let method = match f[0].to_ascii_lowercase().as_str() {
        "exact" => Backend::Exact,
        "ga" => Backend::Ga,
        "rs" => Backend::Rs,
        _ => return Err(bad()),
    };
    Ok((
        method,
        f[1].parse().map_err(|_| bad())?,
        f[2].parse().map_err(|_| bad())?,
        f[3].parse().map_err(|_| bad())?,
        f[4].parse().map_err(|_| bad())?,
        f[5].parse().map_err(|_| bad())?,
    ))
}

fn fit_runtime(ctx: &Ctx, input: Option<PathBuf>, reference: bool, predict: &[String]) -> Outcome<()> {
    let model = match (input, reference) {
        (_, true) => RuntimeModel::reference_hardware(),
        (Some(p), false) => RuntimeModel::fit(&read_bench_csv(File::open(&p)?)?)?,
        (None, false) => return Err(usage("fit-runtime needs a benchmark CSV or --reference")),
    };
    let mut out = ctx.sink()?;
    if predict.is_empty() {
        let fit = model.exact_fit().ok();
        let doc = serde_json::json!({ "model": model, "exact_log_fit": fit });
        serde_json::to_writer_pretty(&mut out, &doc).map_err(|e| Failure { code: 1, message: e.to_string() })?;
        writeln!(out)?;
        return Ok(());
    }
    let mut rows = Vec::new();
    for s in predict {
        let (method, n, k, b0, b, samples) = parse_prediction(s)?;
        let seconds = model.predict(method, n, k, b0, b, samples)?;
        rows.push(Prediction { method, patients: n, arms: k, burn_in: b0, block_size: b, samples, seconds });
    }
    ctx.emit(&["method", "patients", "arms", "burn_in", "block_size", "samples", "seconds"], &rows, out)
}

#[derive(Serialize)]
struct RecommendRow {
    arms: usize,
    analyses: AnalysisFrequency,
    burn_in: BurnInLength,
    priority: Priority,
    methods: String,
}

fn recommend_cmd(ctx: &Ctx, k: Option<usize>, analyses: Option<&str>, burn_in: Option<&str>, priority: Option<&str>) -> Outcome<()> {
    let parse_err = |e: Error| usage(e.to_string());
    let (k, freq, burn) = match (&ctx.cfg.design, k, analyses, burn_in) {
        (_, Some(k), Some(a), Some(b)) => (k, a.parse().map_err(parse_err)?, b.parse().map_err(parse_err)?),
        (Some(d), _, None, None) => {
            let (f, b) = ctx.cfg.classification.unwrap_or_default().classify(d);
            (d.arms, f, b)
        }
        _ => return Err(usage("recommend needs --k, --analyses and --burn-in, or a configured design")),
    };
    let priorities = match priority {
        Some(p) => vec![p.parse::<Priority>().map_err(parse_err)?],
        None => vec![Priority::Acc, Priority::Mix, Priority::Comp],
    };
    let mut rows = Vec::new();
    for p in priorities {
        let methods = format_backends(&recommend(k, freq, burn, p).map_err(parse_err)?);
        eprintln!("{p:?}: {methods}");
        rows.push(RecommendRow { arms: k, analyses: freq, burn_in: burn, priority: p, methods });
    }
    ctx.emit(&["arms", "analyses", "burn_in", "priority", "methods"], &rows, ctx.sink()?)
}

fn figure_data(ctx: &Ctx, study: Study) -> Outcome<()> {
    match study {
        Study::Fig1 => {
            let cfg = ctx.cfg.error_surface.clone().unwrap_or_default();
            let rows = figures::error_surface(&cfg)?;
            ctx.emit(&ERROR_SURFACE_HEADER, &rows, ctx.sink()?)
        }
        Study::Fig2 | Study::Fig3 => {
            let mut cfg = ctx.cfg.oc_surface.clone().unwrap_or_default();
            if let Some(seed) = ctx.seed_override {
                cfg.seed = seed;
            }
            let part = if matches!(study, Study::Fig2) { ApproximatedPart::Allocation } else { ApproximatedPart::Test };
            let rows = figures::oc_surface(&cfg, part).map_err(|e| match e {
                Error::Infeasible { .. } => Failure {
                    code: 4,
                    message: format!("{e} (or lower `oc_surface.patients`)"),
                },
                e => e.into(),
            })?;
            ctx.emit(&OC_SURFACE_HEADER, &rows, ctx.sink()?)
        }
    }
}
