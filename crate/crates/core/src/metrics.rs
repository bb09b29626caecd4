//! Task completion, success weighted by path length (SPL), and the
//! shortest-action oracle used as the SPL reference length.

use std::collections::{BTreeMap, VecDeque};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::grid::{apply_move, fan_region, Cell, Direction, FanParams, OccupancyGrid, RobotPose};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MetricsError {
    #[error("no episodes to aggregate")]
    Empty,
    #[error("object at {0} cannot be seen from any reachable pose")]
    Unreachable(Cell),
    #[error("invalid record for {scene}: {msg}")]
    InvalidRecord { scene: String, msg: String },
}

/// Fewest actions that find the object when its location is known: the
/// shortest move sequence to any pose that sees it, plus one `Look` and one
/// `Find`.
pub fn oracle_actions(
    grid: &OccupancyGrid,
    fan: &FanParams,
    start: RobotPose,
    object: Cell,
) -> Result<u32, MetricsError> {
    let pose_index = |p: &RobotPose| (grid.index(p.cell())) * 4 + p.orientation.index();
    let mut dist = vec![u32::MAX; grid.num_cells() * 4];
    let mut queue = VecDeque::new();
    dist[pose_index(&start)] = 0;
    queue.push_back(start);
    while let Some(pose) = queue.pop_front() {
        let d = dist[pose_index(&pose)];
        if fan_region(grid, &pose, fan).contains(object) {
            return Ok(d + 2);
        }
        for dir in Direction::ALL {
            let next = apply_move(grid, pose, dir);
            let i = pose_index(&next);
            if dist[i] == u32::MAX {
                dist[i] = d + 1;
                queue.push_back(next);
            }
        }
    }
    Err(MetricsError::Unreachable(object))
}

/// One finished episode as seen by the metrics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeResult {
    pub scene: String,
    pub arm: String,
    pub seed: u64,
    pub success: bool,
    /// Actions the agent took (p_i).
    pub actions: u32,
    /// Oracle action count (l_i).
    pub oracle: u32,
    #[serde(default)]
    pub seconds: f64,
}

impl EpisodeResult {
    fn check(&self) -> Result<(), MetricsError> {
        if self.oracle < 1 {
            return Err(MetricsError::InvalidRecord {
                scene: self.scene.clone(),
                msg: "oracle length must be >= 1".into(),
            });
        }
        if self.success && self.actions < 1 {
            return Err(MetricsError::InvalidRecord {
                scene: self.scene.clone(),
                msg: "a successful episode takes at least one action".into(),
            });
        }
        Ok(())
    }

    /// This episode's SPL term `S·l / max(p, l)`.
    pub fn spl_term(&self) -> f64 {
        if !self.success {
            return 0.0;
        }
        let l = self.oracle as f64;
        l / (self.actions as f64).max(l)
    }
}

pub fn spl(results: &[EpisodeResult]) -> Result<f64, MetricsError> {
    if results.is_empty() {
        return Err(MetricsError::Empty);
    }
    for r in results {
        r.check()?;
    }
    Ok(results.iter().map(EpisodeResult::spl_term).sum::<f64>() / results.len() as f64)
}

pub fn completion_rate(results: &[EpisodeResult]) -> Result<f64, MetricsError> {
    if results.is_empty() {
        return Err(MetricsError::Empty);
    }
    Ok(results.iter().filter(|r| r.success).count() as f64 / results.len() as f64)
}

/// Mean and standard error of the mean.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanSe {
    pub mean: f64,
    pub se: f64,
}

impl MeanSe {
    pub fn of(xs: &[f64]) -> MeanSe {
        let n = xs.len() as f64;
        let mean = xs.iter().sum::<f64>() / n;
        let se = if xs.len() > 1 {
            let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
            (var / n).sqrt()
        } else {
            0.0
        };
        MeanSe { mean, se }
    }

    pub fn lower(&self) -> f64 {
        self.mean - self.se
    }

    pub fn upper(&self) -> f64 {
        self.mean + self.se
    }

    /// The `mean ± se` intervals are disjoint.
    pub fn separated_from(&self, other: &MeanSe) -> bool {
        self.lower() > other.upper() || other.lower() > self.upper()
    }
}

/// Per-arm aggregate. Completion and SPL are computed per seed over all
/// scenes, then summarized across seeds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArmSummary {
    pub arm: String,
    pub episodes: usize,
    pub seeds: usize,
    pub completion: MeanSe,
    pub spl: MeanSe,
    pub mean_actions: f64,
    pub mean_oracle: f64,
    pub mean_seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkResult {
    pub episodes: Vec<EpisodeResult>,
    pub arms: Vec<ArmSummary>,
}

impl BenchmarkResult {
    /// Aggregates episodes by arm, keeping arms in first-seen order.
    pub fn from_episodes(episodes: Vec<EpisodeResult>) -> Result<Self, MetricsError> {
        if episodes.is_empty() {
            return Err(MetricsError::Empty);
        }
        let mut order: Vec<String> = Vec::new();
        for e in &episodes {
            if !order.contains(&e.arm) {
                order.push(e.arm.clone());
            }
        }
        let arms = order
            .iter()
            .map(|arm| {
                let mine: Vec<EpisodeResult> =
                    episodes.iter().filter(|e| &e.arm == arm).cloned().collect();
                summarize(arm, &mine)
            })
            .collect::<Result<Vec<_>, _>>()?;
        Ok(BenchmarkResult { episodes, arms })
    }

    pub fn arm(&self, name: &str) -> Option<&ArmSummary> {
        self.arms.iter().find(|a| a.arm == name)
    }

    pub const EPISODE_HEADER: &'static str = "scene,arm,seed,success,actions,oracle,spl_term,seconds";
    pub const SUMMARY_HEADER: &'static str =
        "arm,episodes,seeds,completion_mean,completion_se,spl_mean,spl_se,mean_actions,mean_oracle,mean_seconds";

    /// Episode rows, a blank line, then the per-arm aggregate block.
    pub fn to_csv(&self) -> String {
        let mut s = String::new();
        s.push_str(Self::EPISODE_HEADER);
        s.push('\n');
        for e in &self.episodes {
            let _ = writeln!(
                s,
                "{},{},{},{},{},{},{},{}",
                e.scene,
                e.arm,
                e.seed,
                u8::from(e.success),
                e.actions,
                e.oracle,
                e.spl_term(),
                e.seconds
            );
        }
        s.push('\n');
        s.push_str(Self::SUMMARY_HEADER);
        s.push('\n');
        for a in &self.arms {
            let _ = writeln!(
                s,
                "{},{},{},{},{},{},{},{},{},{}",
                a.arm,
                a.episodes,
                a.seeds,
                a.completion.mean,
                a.completion.se,
                a.spl.mean,
                a.spl.se,
                a.mean_actions,
                a.mean_oracle,
                a.mean_seconds
            );
        }
        s
    }
}

pub fn summarize(arm: &str, episodes: &[EpisodeResult]) -> Result<ArmSummary, MetricsError> {
    if episodes.is_empty() {
        return Err(MetricsError::Empty);
    }
    // Fixed summation order, so any permutation of the input gives
    // bit-identical aggregates.
    let mut episodes = episodes.to_vec();
    episodes.sort_by(|a, b| (a.seed, &a.scene).cmp(&(b.seed, &b.scene)));
    let mut by_seed: BTreeMap<u64, Vec<EpisodeResult>> = BTreeMap::new();
    for e in &episodes {
        by_seed.entry(e.seed).or_default().push(e.clone());
    }
    let mut completions = Vec::new();
    let mut spls = Vec::new();
    for group in by_seed.values() {
        completions.push(completion_rate(group)?);
        spls.push(spl(group)?);
    }
    let n = episodes.len() as f64;
    Ok(ArmSummary {
        arm: arm.to_string(),
        episodes: episodes.len(),
        seeds: by_seed.len(),
        completion: MeanSe::of(&completions),
        spl: MeanSe::of(&spls),
        mean_actions: episodes.iter().map(|e| e.actions as f64).sum::<f64>() / n,
        mean_oracle: episodes.iter().map(|e| e.oracle as f64).sum::<f64>() / n,
        mean_seconds: episodes.iter().map(|e| e.seconds).sum::<f64>() / n,
    })
}
