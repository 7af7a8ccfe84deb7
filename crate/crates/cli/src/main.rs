//! `landfall` command-line interface.
//!
//! Exit codes: 0 success, 1 other failure, 2 unsafe landing, 3 timeout with
//! forced landing, 4 bad configuration or scene, 5 judge backend errors,
//! 6 batch threshold gate violated.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context as _;
use clap::{Args, Parser, Subcommand, ValueEnum};
use landfall::judge::remote::RemoteConfig;
use landfall::runner::{self, BackendSelector, LaunchMode, RunConfig, RunError};
use landfall::surface::ContextLevel;
use landfall::trace::Outcome;

const EXIT_OTHER: u8 = 1;
const EXIT_UNSAFE: u8 = 2;
const EXIT_TIMEOUT: u8 = 3;
const EXIT_CONFIG: u8 = 4;
const EXIT_DEGRADED: u8 = 5;
const EXIT_GATE: u8 = 6;

#[derive(Parser)]
#[command(
    name = "landfall",
    version,
    about = "Sudden-landing recovery simulator"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fly one episode from the scene's launch pose.
    Run(RunArgs),
    /// Fly many episodes and write an aggregate report.
    Batch(BatchArgs),
    /// Re-derive and check the summary of a trace file.
    Replay { trace: PathBuf },
    /// Aggregate every trace in a directory.
    Report {
        dir: PathBuf,
        /// Where to write the report files (defaults to DIR).
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Backend {
    Oracle,
    /// Oracle that accepts clear roads and piers as a last resort.
    OracleTolerant,
    /// Chat-completion endpoint from LANDFALL_BASE_URL / LANDFALL_MODEL /
    /// LANDFALL_API_KEY.
    Remote,
    DenyAll,
}

#[derive(Args)]
struct RunArgs {
    /// Preset name (scenario-1, scenario-2, city) or scene file path.
    #[arg(long, default_value = "scenario-1")]
    scenario: String,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_enum, default_value = "oracle")]
    backend: Backend,
    /// cropped, padded<percent> or full_image.
    #[arg(long, default_value = "cropped")]
    context: ContextLevel,
    #[arg(long, default_value_t = 0.5)]
    k: f64,
    #[arg(long, default_value_t = 10)]
    max_rounds: u32,
    #[arg(long, default_value_t = 5.0)]
    landing_threshold: f64,
    /// Depth gradient threshold in metres per pixel at 50 m range.
    #[arg(long, default_value_t = 0.05)]
    grad_threshold: f64,
    /// Minimum candidate area as a fraction of the image.
    #[arg(long, default_value_t = 0.01)]
    min_area: f64,
    /// Relative depth noise.
    #[arg(long, default_value_t = 0.02)]
    noise_sigma: f64,
    /// Launch exactly at the preset pose.
    #[arg(long)]
    no_jitter: bool,
    /// Drift toward the best quadrant when every candidate is rejected.
    #[arg(long)]
    explore: bool,
    /// Directory for traces and reports.
    #[arg(long, default_value = "runs")]
    out: PathBuf,
}

#[derive(Args)]
struct BatchArgs {
    #[command(flatten)]
    run: RunArgs,
    #[arg(long, default_value_t = 20)]
    count: usize,
    /// halton spreads launches over the map; curated jitters the preset pose.
    #[arg(long, value_enum, default_value = "halton")]
    launch: LaunchArg,
    /// Concurrent episodes (0 = one per core).
    #[arg(long, default_value_t = 0)]
    workers: usize,
    /// Fail with exit code 6 below this safe-landing percentage.
    #[arg(long)]
    min_safe_rate: Option<f64>,
    /// Fail with exit code 6 above this mean number of rounds.
    #[arg(long)]
    max_mean_rounds: Option<f64>,
}

#[derive(Clone, Copy, ValueEnum)]
enum LaunchArg {
    Halton,
    Curated,
}

fn config(args: &RunArgs) -> Result<RunConfig, RunError> {
    let backend = match args.backend {
        Backend::Oracle => BackendSelector::Oracle {
            tolerate_roads: false,
        },
        Backend::OracleTolerant => BackendSelector::Oracle {
            tolerate_roads: true,
        },
        Backend::Remote => BackendSelector::Remote(
            RemoteConfig::from_env().map_err(|e| RunError::Config(e.to_string()))?,
        ),
        Backend::DenyAll => BackendSelector::DenyAll,
    };
    let mut cfg = RunConfig {
        scenario: args.scenario.clone(),
        seed: args.seed,
        backend,
        noise_sigma: args.noise_sigma,
        output_dir: Some(args.out.clone()),
        ..RunConfig::default()
    };
    if args.no_jitter {
        cfg.launch_jitter_m = 0.0;
        cfg.launch_jitter_yaw = 0.0;
    }
    let p = &mut cfg.planner;
    p.k = args.k;
    p.max_rounds = args.max_rounds;
    p.landing_threshold_m = args.landing_threshold;
    p.explore_on_empty = args.explore;
    p.detector.grad_threshold = args.grad_threshold;
    p.detector.min_area_fraction = args.min_area;
    p.detector.context = args.context;
    cfg.validate()?;
    Ok(cfg)
}

fn error_code(e: &RunError) -> u8 {
    match e {
        RunError::Config(_) | RunError::Scene(_) => EXIT_CONFIG,
        RunError::Planner(landfall::planner::PlannerError::InvalidConfig(_)) => EXIT_CONFIG,
        _ => EXIT_OTHER,
    }
}

fn run(args: &RunArgs) -> Result<u8, RunError> {
    let cfg = config(args)?;
    let ep = runner::run_single(&cfg)?;
    let s = &ep.result.summary;
    println!(
        "{}: {} after {} round(s) on {} at ({:.2}, {:.2})",
        s.scenario,
        s.outcome.name(),
        s.rounds_used,
        s.classification.surface_class,
        s.final_pose.north,
        s.final_pose.east
    );
    println!("  {}", s.classification.reason());
    if let Some(d) = s.landing_distance {
        println!("  landing distance {d:.3} m");
    }
    if let Some(path) = &ep.trace_path {
        println!("  trace: {}", path.display());
    }
    if s.backend_degraded {
        log::warn!("the judge backend failed during this episode");
        return Ok(EXIT_DEGRADED);
    }
    Ok(match s.outcome {
        Outcome::LandedSafe => 0,
        Outcome::LandedUnsafe => EXIT_UNSAFE,
        Outcome::TimeoutForcedLanding => EXIT_TIMEOUT,
    })
}

fn batch(args: &BatchArgs) -> Result<u8, RunError> {
    let cfg = config(&args.run)?;
    let mode = match args.launch {
        LaunchArg::Halton => LaunchMode::Halton,
        LaunchArg::Curated => LaunchMode::Curated,
    };
    let out = runner::run_batch(&cfg, args.count, mode, args.workers)?;
    let Some(agg) = &out.report.aggregate else {
        eprintln!("no episode completed");
        return Ok(EXIT_OTHER);
    };
    print!("{}", landfall::metrics::summary_text(agg));
    println!("report: {}", args.run.out.join("report.json").display());
    let mut gate_ok = true;
    if let Some(min) = args.min_safe_rate {
        if agg.safe_rate_pct < min {
            eprintln!(
                "safe landings {:.1}% below the {min}% gate",
                agg.safe_rate_pct
            );
            gate_ok = false;
        }
    }
    if let Some(max) = args.max_mean_rounds {
        if agg.mean_rounds > max {
            eprintln!("mean rounds {:.2} above the {max} gate", agg.mean_rounds);
            gate_ok = false;
        }
    }
    Ok(if !gate_ok {
        EXIT_GATE
    } else if agg.degraded_episodes > 0 {
        EXIT_DEGRADED
    } else if !out.report.failures.is_empty() {
        EXIT_OTHER
    } else {
        0
    })
}

fn replay(path: &Path) -> anyhow::Result<u8> {
    let report =
        runner::replay_file(path).with_context(|| format!("replaying {}", path.display()))?;
    println!("{}", serde_json::to_string_pretty(&report.summary)?);
    if !report.summary_matches {
        eprintln!("stored summary differs from the recomputed one");
    }
    for v in &report.violations {
        eprintln!("violation: {v}");
    }
    Ok(if report.is_clean() { 0 } else { EXIT_OTHER })
}

fn report(dir: &Path, out: Option<&PathBuf>) -> anyhow::Result<u8> {
    let checks = runner::replay_dir(dir).with_context(|| format!("reading {}", dir.display()))?;
    let mut episodes = Vec::new();
    let mut failures = Vec::new();
    for check in checks {
        match check.result {
            Ok(r) if r.is_clean() => episodes.push(r.summary),
            Ok(r) => failures.push(runner::EpisodeFailure {
                seed: r.summary.seed,
                error: format!("{}: inconsistent trace", check.path.display()),
            }),
            Err(e) => failures.push(runner::EpisodeFailure {
                seed: 0,
                error: format!("{}: {e}", check.path.display()),
            }),
        }
    }
    episodes.sort_by(|a, b| (&a.scenario, a.seed).cmp(&(&b.scenario, b.seed)));
    let report = runner::BatchReport {
        schema_version: landfall::metrics::REPORT_SCHEMA_VERSION,
        config: serde_json::json!({ "source": dir }),
        launch_mode: None,
        count: episodes.len() + failures.len(),
        aggregate: landfall::metrics::aggregate(&episodes).ok(),
        failures,
    };
    runner::write_report(out.map_or(dir, PathBuf::as_path), &report, &episodes)?;
    match &report.aggregate {
        Some(agg) => print!("{}", landfall::metrics::summary_text(agg)),
        None => println!("no readable traces"),
    }
    for f in &report.failures {
        eprintln!("skipped {}", f.error);
    }
    Ok(if report.failures.is_empty() {
        0
    } else {
        EXIT_OTHER
    })
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let code = match &cli.command {
        Command::Run(args) => run(args).unwrap_or_else(|e| {
            eprintln!("error: {e}");
            error_code(&e)
        }),
        Command::Batch(args) => batch(args).unwrap_or_else(|e| {
            eprintln!("error: {e}");
            error_code(&e)
        }),
        Command::Replay { trace } => replay(trace).unwrap_or_else(|e| {
            eprintln!("error: {e:#}");
            EXIT_OTHER
        }),
        Command::Report { dir, out } => report(dir, out.as_ref()).unwrap_or_else(|e| {
            eprintln!("error: {e:#}");
            EXIT_OTHER
        }),
    };
    ExitCode::from(code)
}
