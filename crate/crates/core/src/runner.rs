//! Single runs and Halton-seeded batches with trace and report output.

use std::fs;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{halton_points, CameraIntrinsics, PlanarBounds};
use crate::judge::oracle::{OracleConfig, OracleJudge};
use crate::judge::remote::{RemoteConfig, RemoteJudge};
use crate::judge::{DenyAllJudge, JudgeBackend, JudgeError};
use crate::metrics::{self, Aggregate, MetricsError};
use crate::planner::{run_episode, EpisodeResult, EpisodeSpec, PlannerConfig, PlannerError};
use crate::presets::resolve_scene;
use crate::scene::{SceneError, SceneModel};
use crate::sensor::{DepthNoiseConfig, Pose, SensorRig};
use crate::surface::ContextLevel;
use crate::trace::{self, EpisodeSummary, TraceError};

pub const IMAGE_SIZE_PX: u32 = 128;
pub const FOCAL_PX: f64 = 110.0;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BackendSelector {
    Oracle {
        #[serde(default)]
        tolerate_roads: bool,
    },
    /// Endpoint settings; the key comes from the environment at run time.
    Remote(RemoteConfig),
    DenyAll,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    /// Preset name or scene file path.
    pub scenario: String,
    pub seed: u64,
    pub backend: BackendSelector,
    pub planner: PlannerConfig,
    pub noise_sigma: f64,
    pub noise_correlation_px: u32,
    /// Perturb the preset launch pose by up to this many metres per axis.
    pub launch_jitter_m: f64,
    pub launch_jitter_yaw: f64,
    pub alert: String,
    /// Where traces and reports go. Not echoed, so outputs are
    /// independent of their location.
    #[serde(skip)]
    pub output_dir: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            scenario: "scenario-1".into(),
            seed: 0,
            backend: BackendSelector::Oracle {
                tolerate_roads: false,
            },
            planner: PlannerConfig::default(),
            noise_sigma: DepthNoiseConfig::DEFAULT_SIGMA,
            noise_correlation_px: DepthNoiseConfig::DEFAULT_CORRELATION_PX,
            launch_jitter_m: 2.0,
            launch_jitter_yaw: 0.1,
            alert: "navigation integrity alarm".into(),
            output_dir: None,
        }
    }
}

#[derive(Debug, Error)]
pub enum RunError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Scene(#[from] SceneError),
    #[error(transparent)]
    Planner(#[from] PlannerError),
    #[error(transparent)]
    Judge(#[from] JudgeError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error(transparent)]
    Trace(#[from] TraceError),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> RunError + '_ {
    move |source| RunError::Io {
        path: path.to_path_buf(),
        source,
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<(), RunError> {
        self.planner
            .validate()
            .map_err(|e| RunError::Config(e.to_string()))?;
        if let ContextLevel::Padded(p) = self.planner.detector.context {
            if p > 100 {
                return Err(RunError::Config(format!("padding {p}% exceeds 100%")));
            }
        }
        if !(self.noise_sigma >= 0.0 && self.noise_sigma < 1.0) {
            return Err(RunError::Config("noise sigma must lie in [0, 1)".into()));
        }
        if self.noise_correlation_px == 0 {
            return Err(RunError::Config(
                "noise correlation must be positive".into(),
            ));
        }
        if !(self.launch_jitter_m >= 0.0 && self.launch_jitter_yaw >= 0.0) {
            return Err(RunError::Config(
                "launch jitter must be non-negative".into(),
            ));
        }
        Ok(())
    }

    /// Configuration as written to trace headers and reports.
    pub fn echo(&self) -> serde_json::Value {
        serde_json::to_value(self).expect("config serialises")
    }

    fn rig(&self, scene: &SceneModel, seed: u64) -> SensorRig {
        let intrinsics =
            CameraIntrinsics::centered(FOCAL_PX, IMAGE_SIZE_PX).expect("fixed intrinsics");
        let noise = DepthNoiseConfig {
            sigma: self.noise_sigma,
            correlation_px: self.noise_correlation_px,
            seed: mix(scene.rng_seed, seed),
        };
        SensorRig::new(intrinsics, noise)
    }

    fn judge(&self) -> Result<Box<dyn JudgeBackend>, RunError> {
        let p = &self.planner;
        Ok(match &self.backend {
            BackendSelector::Oracle { tolerate_roads } => {
                Box::new(OracleJudge::new(OracleConfig {
                    tolerate_roads: *tolerate_roads,
                    // Cover the judge call and the final drop from the threshold.
                    lookahead_ticks: p.judge_ticks
                        + (p.landing_threshold_m / p.vertical_speed).ceil() as u64,
                }))
            }
            BackendSelector::Remote(cfg) => {
                let mut cfg = cfg.clone();
                cfg.api_key = std::env::var(crate::judge::remote::ENV_API_KEY)
                    .ok()
                    .filter(|k| !k.is_empty());
                Box::new(RemoteJudge::new(cfg)?)
            }
            BackendSelector::DenyAll => Box::new(DenyAllJudge),
        })
    }
}

/// SplitMix64 finaliser over two words.
pub fn mix(a: u64, b: u64) -> u64 {
    let mut z = a ^ b.wrapping_mul(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Preset launch pose, jittered per seed.
pub fn curated_launch(scene: &SceneModel, cfg: &RunConfig, seed: u64) -> Result<Pose, RunError> {
    let l = scene
        .launch
        .ok_or_else(|| RunError::Config(format!("scene {} has no launch pose", scene.name)))?;
    let mut rng = ChaCha8Rng::seed_from_u64(mix(seed, 0x1a0c));
    let j = |rng: &mut ChaCha8Rng, r: f64| {
        if r > 0.0 {
            rng.random_range(-r..=r)
        } else {
            0.0
        }
    };
    // Jitter never pushes the launch off the map.
    let b = scene.bounds();
    let m = 0.5 * scene.cell_size;
    let north =
        (l.north + j(&mut rng, cfg.launch_jitter_m)).clamp(b.north_min + m, b.north_max - m);
    let east = (l.east + j(&mut rng, cfg.launch_jitter_m)).clamp(b.east_min + m, b.east_max - m);
    let yaw = l.yaw + j(&mut rng, cfg.launch_jitter_yaw);
    Ok(Pose::new(north, east, l.altitude, yaw))
}

/// Launch sites for a batch: a Halton sequence over the map inset by a
/// tenth on every side, at the preset altitude.
pub fn batch_launches(scene: &SceneModel, count: usize) -> Result<Vec<Pose>, RunError> {
    let b = scene.bounds();
    let (dn, de) = (
        0.1 * (b.north_max - b.north_min),
        0.1 * (b.east_max - b.east_min),
    );
    let inset = PlanarBounds::new(
        b.north_min + dn,
        b.north_max - dn,
        b.east_min + de,
        b.east_max - de,
    );
    let altitude = scene
        .launch
        .map_or(scene.max_elevation() + 20.0, |l| l.altitude);
    let points = halton_points(count, &inset, 1).map_err(|e| RunError::Config(e.to_string()))?;
    Ok(points
        .into_iter()
        .map(|(n, e)| Pose::new(n, e, altitude, 0.0))
        .collect())
}

pub fn trace_file_name(scenario: &str, seed: u64) -> String {
    let stem: String = scenario
        .rsplit('/')
        .next()
        .unwrap_or(scenario)
        .trim_end_matches(".scene")
        .chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || c == '-' || c == '_' {
                c
            } else {
                '_'
            }
        })
        .collect();
    format!("{stem}_seed{seed}.jsonl")
}

#[derive(Clone, Debug)]
pub struct EpisodeRun {
    pub result: EpisodeResult,
    pub trace_path: Option<PathBuf>,
}

fn episode(
    scene: &SceneModel,
    cfg: &RunConfig,
    seed: u64,
    launch: Pose,
) -> Result<EpisodeRun, RunError> {
    let rig = cfg.rig(scene, seed);
    let mut judge = cfg.judge()?;
    let mut echo = cfg.clone();
    echo.seed = seed;
    let spec = EpisodeSpec {
        scenario: scene.name.clone(),
        seed,
        alert: cfg.alert.clone(),
        config: echo.echo(),
    };
    let result = run_episode(scene, launch, &rig, judge.as_mut(), &cfg.planner, &spec)?;
    let trace_path = match &cfg.output_dir {
        Some(dir) => {
            fs::create_dir_all(dir).map_err(io_err(dir))?;
            let path = dir.join(trace_file_name(&scene.name, seed));
            fs::write(&path, trace::to_jsonl(&result.records)).map_err(io_err(&path))?;
            Some(path)
        }
        None => None,
    };
    Ok(EpisodeRun { result, trace_path })
}

/// One episode from the scene's launch pose (jittered by seed).
pub fn run_single(cfg: &RunConfig) -> Result<EpisodeRun, RunError> {
    cfg.validate()?;
    let scene = resolve_scene(&cfg.scenario)?;
    let launch = curated_launch(&scene, cfg, cfg.seed)?;
    episode(&scene, cfg, cfg.seed, launch)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LaunchMode {
    /// Preset pose with per-seed jitter.
    Curated,
    /// Halton-spread positions over the map.
    Halton,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpisodeFailure {
    pub seed: u64,
    pub error: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BatchReport {
    pub schema_version: u32,
    pub config: serde_json::Value,
    /// Unknown when the report was rebuilt from traces.
    pub launch_mode: Option<LaunchMode>,
    pub count: usize,
    pub aggregate: Option<Aggregate>,
    pub failures: Vec<EpisodeFailure>,
}

#[derive(Clone, Debug)]
pub struct BatchRun {
    pub report: BatchReport,
    pub episodes: Vec<EpisodeSummary>,
}

/// `count` episodes with seeds `cfg.seed + i`, up to `workers` at a time
/// (0 means one per core). Results are ordered by seed regardless of
/// scheduling.
pub fn run_batch(
    cfg: &RunConfig,
    count: usize,
    mode: LaunchMode,
    workers: usize,
) -> Result<BatchRun, RunError> {
    cfg.validate()?;
    if count == 0 {
        return Err(RunError::Config("batch count must be at least 1".into()));
    }
    let scene = resolve_scene(&cfg.scenario)?;
    let launches = match mode {
        LaunchMode::Halton => batch_launches(&scene, count)?,
        LaunchMode::Curated => (0..count)
            .map(|i| curated_launch(&scene, cfg, cfg.seed.wrapping_add(i as u64)))
            .collect::<Result<_, _>>()?,
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| RunError::Config(format!("cannot start workers: {e}")))?;
    let outcomes: Vec<(u64, Result<EpisodeRun, RunError>)> = pool.install(|| {
        launches
            .par_iter()
            .enumerate()
            .map(|(i, launch)| {
                let seed = cfg.seed.wrapping_add(i as u64);
                (seed, episode(&scene, cfg, seed, *launch))
            })
            .collect()
    });
    let mut episodes = Vec::new();
    let mut failures = Vec::new();
    for (seed, outcome) in outcomes {
        match outcome {
            Ok(run) => episodes.push(run.result.summary),
            Err(e) => {
                log::warn!("episode with seed {seed} failed: {e}");
                failures.push(EpisodeFailure {
                    seed,
                    error: e.to_string(),
                });
            }
        }
    }
    let report = BatchReport {
        schema_version: metrics::REPORT_SCHEMA_VERSION,
        config: cfg.echo(),
        launch_mode: Some(mode),
        count,
        aggregate: metrics::aggregate(&episodes).ok(),
        failures,
    };
    if let Some(dir) = &cfg.output_dir {
        write_report(dir, &report, &episodes)?;
    }
    Ok(BatchRun { report, episodes })
}

/// Writes `episodes.csv`, `arrows.csv`, `report.json` and `summary.txt`.
pub fn write_report(
    dir: &Path,
    report: &BatchReport,
    episodes: &[EpisodeSummary],
) -> Result<(), RunError> {
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    let write = |name: &str, text: String| {
        let path = dir.join(name);
        fs::write(&path, text).map_err(io_err(&path))
    };
    write("episodes.csv", metrics::episodes_csv(episodes))?;
    write("arrows.csv", metrics::arrows_csv(episodes))?;
    let mut json = serde_json::to_string_pretty(report).expect("report serialises");
    json.push('\n');
    write("report.json", json)?;
    let mut text = match &report.aggregate {
        Some(agg) => metrics::summary_text(agg),
        None => "no completed episodes\n".to_string(),
    };
    for f in &report.failures {
        text.push_str(&format!("seed {} failed: {}\n", f.seed, f.error));
    }
    write("summary.txt", text)
}

/// Outcome of re-reading one trace file.
#[derive(Clone, Debug)]
pub struct TraceCheck {
    pub path: PathBuf,
    pub result: Result<trace::ReplayReport, String>,
}

pub fn replay_file(path: &Path) -> Result<trace::ReplayReport, RunError> {
    let file = fs::File::open(path).map_err(io_err(path))?;
    let records = trace::read_trace(std::io::BufReader::new(file))?;
    Ok(trace::replay(&records)?)
}

/// Replays every `*.jsonl` file in `dir`, sorted by name.
pub fn replay_dir(dir: &Path) -> Result<Vec<TraceCheck>, RunError> {
    let mut paths: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(io_err(dir))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "jsonl"))
        .collect();
    paths.sort();
    Ok(paths
        .into_iter()
        .map(|path| {
            let result = replay_file(&path).map_err(|e| e.to_string());
            TraceCheck { path, result }
        })
        .collect())
}
