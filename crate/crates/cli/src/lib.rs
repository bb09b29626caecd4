//! Batch commands: run episodes, benchmark arms, compute oracles, render
//! belief snapshots and generate scene suites.

pub mod config;
pub mod render;

use std::fmt::Display;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use lcom_search::harness::{generate_scene, run_episode, validate_scene, EpisodeLog, HarnessError, Scene};
use lcom_search::metrics::{BenchmarkResult, EpisodeResult, MetricsError};
use lcom_search::Belief;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use thiserror::Error;

pub use config::{Arm, ArmConfig, Profile, RunConfig, ENDPOINT_ENV};
pub use render::render_belief;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error(transparent)]
    Harness(#[from] HarnessError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error("{0}")]
    Input(String),
}

impl CliError {
    pub fn config(field: &str, msg: impl Display) -> Self {
        CliError::Config(format!("{field}: {msg}"))
    }

    pub fn io(path: &Path, source: std::io::Error) -> Self {
        CliError::Io { path: path.to_path_buf(), source }
    }

    /// Process exit status: 2 for bad input, 3 for detector transport
    /// failures, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::Input(_) => 2,
            CliError::Harness(h) if h.is_transport() => 3,
            CliError::Harness(HarnessError::Scene(_) | HarnessError::Config(_)) => 2,
            _ => 1,
        }
    }
}

/// Writes via a temporary sibling and a rename, so readers never see a
/// partial file.
pub fn write_atomic(path: &Path, contents: &[u8]) -> Result<(), CliError> {
    let dir = path.parent().unwrap_or(Path::new("."));
    fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    let name = path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
    let tmp = dir.join(format!(".{name}.tmp{}", std::process::id()));
    let mut f = fs::File::create(&tmp).map_err(|e| CliError::io(&tmp, e))?;
    f.write_all(contents).and_then(|_| f.sync_all()).map_err(|e| CliError::io(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| CliError::io(path, e))
}

/// Log and belief snapshot paths for one episode.
pub fn episode_paths(out: &Path, arm: &str, scene: &str, seed: u64) -> (PathBuf, PathBuf) {
    let dir = out.join("logs").join(arm);
    (dir.join(format!("{scene}_s{seed}.json")), dir.join(format!("{scene}_s{seed}_belief.csv")))
}

struct Job<'a> {
    arm: &'a Arm,
    scene: &'a Scene,
    seed: u64,
}

fn run_job(job: &Job<'_>, out: &Path) -> Result<EpisodeResult, CliError> {
    let ep = run_episode(job.scene, &job.arm.config, job.seed)?;
    let (log_path, belief_path) = episode_paths(out, &job.arm.name, &job.scene.name, job.seed);
    let json = serde_json::to_string_pretty(&ep.log).expect("log serializes");
    write_atomic(&log_path, json.as_bytes())?;
    write_atomic(&belief_path, ep.final_belief.to_csv(&job.scene.grid).as_bytes())?;
    log::info!(
        "{} {} seed {}: success={} actions={} oracle={}",
        job.arm.name,
        job.scene.name,
        job.seed,
        ep.log.outcome.success,
        ep.log.outcome.actions,
        ep.log.outcome.oracle
    );
    Ok(ep.log.result(&job.arm.name))
}

fn jobs<'a>(arms: &'a [Arm], scenes: &'a [Scene], seeds: &[u64]) -> Vec<Job<'a>> {
    let mut out = Vec::new();
    for arm in arms {
        for scene in scenes {
            for &seed in seeds {
                out.push(Job { arm, scene, seed });
            }
        }
    }
    out
}

/// Runs every (arm, scene, seed) episode in order and writes one log and
/// one belief snapshot per episode. Stops at the first error.
pub fn cmd_run(cfg: &RunConfig) -> Result<Vec<EpisodeResult>, CliError> {
    cfg.validate()?;
    let arms = cfg.arms()?;
    let scenes = cfg.load_scenes()?;
    jobs(&arms, &scenes, &cfg.seeds).iter().map(|j| run_job(j, &cfg.out_dir)).collect()
}

/// Runs all episodes in parallel, writes the logs plus `episodes.csv` and
/// `summary.csv`, and returns the aggregate.
pub fn cmd_bench(cfg: &RunConfig) -> Result<BenchmarkResult, CliError> {
    cfg.validate()?;
    let arms = cfg.arms()?;
    let scenes = cfg.load_scenes()?;
    let results: Vec<EpisodeResult> = jobs(&arms, &scenes, &cfg.seeds)
        .par_iter()
        .map(|j| run_job(j, &cfg.out_dir))
        .collect::<Result<_, _>>()?;
    let bench = BenchmarkResult::from_episodes(results)?;
    write_bench(&bench, &cfg.out_dir)?;
    Ok(bench)
}

fn write_bench(bench: &BenchmarkResult, out: &Path) -> Result<(), CliError> {
    let csv = bench.to_csv();
    let (episodes, summary) = csv.split_once("\n\n").unwrap_or((csv.as_str(), ""));
    write_atomic(&out.join("episodes.csv"), format!("{episodes}\n").as_bytes())?;
    write_atomic(&out.join("summary.csv"), summary.as_bytes())
}

/// Rebuilds the benchmark aggregate from the JSON logs under `out/logs`.
pub fn aggregate_logs(out: &Path) -> Result<BenchmarkResult, CliError> {
    let logs = out.join("logs");
    let mut results = Vec::new();
    let mut arms: Vec<PathBuf> = fs::read_dir(&logs)
        .map_err(|e| CliError::io(&logs, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_dir())
        .collect();
    arms.sort();
    for dir in arms {
        let arm = dir.file_name().expect("dir name").to_string_lossy().into_owned();
        let mut files: Vec<PathBuf> = fs::read_dir(&dir)
            .map_err(|e| CliError::io(&dir, e))?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|x| x == "json"))
            .collect();
        files.sort();
        for f in files {
            let text = fs::read_to_string(&f).map_err(|e| CliError::io(&f, e))?;
            let log: EpisodeLog =
                serde_json::from_str(&text).map_err(|e| CliError::Input(format!("{}: {e}", f.display())))?;
            results.push(log.result(&arm));
        }
    }
    Ok(BenchmarkResult::from_episodes(results)?)
}

#[derive(Debug, Clone, PartialEq)]
pub struct OracleRow {
    pub scene: String,
    pub oracle: Option<u32>,
    pub findings: Vec<String>,
}

/// Validates each scene and computes its oracle action count.
pub fn cmd_oracle(paths: &[PathBuf]) -> Result<Vec<OracleRow>, CliError> {
    paths
        .iter()
        .map(|p| {
            let scene = Scene::load(p)?;
            Ok(OracleRow {
                oracle: scene.oracle().ok(),
                findings: validate_scene(&scene).iter().map(ToString::to_string).collect(),
                scene: scene.name,
            })
        })
        .collect()
}

pub fn cmd_render(csv: &str) -> Result<String, CliError> {
    let (belief, grid) = Belief::from_csv(csv).map_err(|e| CliError::Input(e.to_string()))?;
    Ok(render_belief(&belief, &grid))
}

/// Writes `count` random scenes named `scene_NN.toml` into `out`.
pub fn cmd_generate(out: &Path, count: usize, size: usize, seed: u64) -> Result<Vec<PathBuf>, CliError> {
    if size < 5 {
        return Err(CliError::Input("scene size must be at least 5".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|i| {
            let name = format!("scene_{i:02}");
            let scene = generate_scene(&mut rng, &name, size, size);
            let path = out.join(format!("{name}.toml"));
            write_atomic(&path, scene.to_toml().as_bytes())?;
            Ok(path)
        })
        .collect()
}
