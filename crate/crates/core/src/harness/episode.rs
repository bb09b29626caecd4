use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::detector::{simulate_detection, BridgeSession, DetectorSpec};
use super::scene::Scene;
use super::HarnessError;
use crate::belief::Belief;
use crate::grid::{fan_region, Cell, RobotPose};
use crate::lcom::{ConfidenceMap, LcomMode, NoiseParams};
use crate::metrics::EpisodeResult;
use crate::planner::{plan, PlannerConfig, PlanningContext};
use crate::pomdp::{reward, transition, Action, RewardConfig, SearchState};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct EpisodeLimits {
    pub max_steps: u32,
    pub find_budget: u32,
}

impl Default for EpisodeLimits {
    fn default() -> Self {
        EpisodeLimits { max_steps: 100, find_budget: 10 }
    }
}

/// Everything about an episode except the scene and the seed.
#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeConfig {
    pub detector: DetectorSpec,
    pub mode: LcomMode,
    /// Belief-update noise in static mode, and the components a dynamic
    /// mode leaves fixed.
    pub static_params: NoiseParams,
    pub confidence_map: ConfidenceMap,
    pub planner: PlannerConfig,
    pub rewards: RewardConfig,
    pub limits: EpisodeLimits,
}

impl Default for EpisodeConfig {
    fn default() -> Self {
        EpisodeConfig {
            detector: DetectorSpec::Static { params: NoiseParams::SEGMENTATION_STATIC, confidence: 1.0 },
            mode: LcomMode::Static,
            static_params: NoiseParams::SEGMENTATION_STATIC,
            confidence_map: ConfidenceMap::segmentation(),
            planner: PlannerConfig::default(),
            rewards: RewardConfig::default(),
            limits: EpisodeLimits::default(),
        }
    }
}

impl EpisodeConfig {
    pub fn validate(&self) -> Result<(), HarnessError> {
        self.detector.validate()?;
        self.static_params.validate()?;
        self.confidence_map.validate()?;
        self.planner.validate()?;
        self.rewards.validate()?;
        if self.limits.max_steps == 0 || self.limits.find_budget == 0 {
            return Err(HarnessError::Config("max_steps and find_budget must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub step: u32,
    pub action: Action,
    /// Detection reported by a `Look`; always null otherwise.
    pub observation: Option<Cell>,
    /// Detector score; present for `Look` only.
    pub confidence: Option<f64>,
    /// Noise used for the belief update; present for `Look` only.
    pub params: Option<NoiseParams>,
    pub reward: f64,
    /// Belief entropy in nats after the step.
    pub entropy: f64,
    pub elapsed_s: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StopReason {
    Found,
    StepCap,
    FindBudget,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Outcome {
    pub success: bool,
    pub actions: u32,
    pub finds: u32,
    pub discounted_return: f64,
    pub oracle: u32,
    pub stop: StopReason,
    pub seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeLog {
    pub scene: String,
    pub seed: u64,
    pub mode: LcomMode,
    pub object_cell: Cell,
    pub robot_start: RobotPose,
    pub records: Vec<StepRecord>,
    pub outcome: Outcome,
}

impl EpisodeLog {
    /// Copy with all wall-clock fields zeroed, for replay comparisons.
    pub fn without_timing(&self) -> EpisodeLog {
        let mut out = self.clone();
        out.records.iter_mut().for_each(|r| r.elapsed_s = 0.0);
        out.outcome.seconds = 0.0;
        out
    }

    /// Discounted return recomputed from the reward trace.
    pub fn recomputed_return(&self, discount: f64) -> f64 {
        self.records
            .iter()
            .enumerate()
            .map(|(t, r)| discount.powi(t as i32) * r.reward)
            .sum()
    }

    pub fn result(&self, arm: &str) -> EpisodeResult {
        EpisodeResult {
            scene: self.scene.clone(),
            arm: arm.to_string(),
            seed: self.seed,
            success: self.outcome.success,
            actions: self.outcome.actions,
            oracle: self.outcome.oracle,
            seconds: self.outcome.seconds,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Episode {
    pub log: EpisodeLog,
    pub final_belief: Belief,
}

const DETECTOR_STREAM: u64 = 0x6465_7465_6374;
const PLANNER_STREAM: u64 = 0x706c_616e;

/// Independent 64-bit seed for one (episode seed, step, stream) triple.
pub fn derive_seed(seed: u64, step: u32, stream: u64) -> u64 {
    // splitmix64 finalizer over a combination of the inputs
    let mut z = seed
        .wrapping_add(stream.wrapping_mul(0x9e37_79b9_7f4a_7c15))
        .wrapping_add((step as u64).wrapping_mul(0xd1b5_4a32_d192_ed69));
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Runs one episode with the PO-UCT planner choosing actions.
pub fn run_episode(scene: &Scene, cfg: &EpisodeConfig, seed: u64) -> Result<Episode, HarnessError> {
    let ctx = PlanningContext { grid: &scene.grid, fan: &scene.fan, rewards: &cfg.rewards };
    let mut pcfg = cfg.planner;
    pcfg.discount = cfg.rewards.discount;
    let base = cfg.planner.rng_seed;
    let mut policy = |b: &Belief, robot: RobotPose, step: u32| -> Result<Action, HarnessError> {
        let step_cfg = PlannerConfig { rng_seed: derive_seed(seed ^ base, step, PLANNER_STREAM), ..pcfg };
        Ok(plan(b, robot, ctx, &step_cfg)?)
    };
    run_episode_with(scene, cfg, seed, &mut policy)
}

/// Runs one episode with `policy` choosing each action from the current
/// belief, robot pose and step index.
pub fn run_episode_with(
    scene: &Scene,
    cfg: &EpisodeConfig,
    seed: u64,
    policy: &mut dyn FnMut(&Belief, RobotPose, u32) -> Result<Action, HarnessError>,
) -> Result<Episode, HarnessError> {
    cfg.validate()?;
    let oracle = scene.oracle()?;
    let grid = &scene.grid;
    let started = Instant::now();
    let mut session = BridgeSession::open(&cfg.detector)?;
    let mut state = SearchState::new(scene.robot_start, scene.object_cell);
    let mut belief = Belief::uniform(grid)?;
    let mut records = Vec::new();
    let (mut finds, mut ret, mut disc) = (0u32, 0.0, 1.0);
    let mut stop = StopReason::StepCap;

    for step in 0..cfg.limits.max_steps {
        let t0 = Instant::now();
        let action = policy(&belief, state.robot, step)?;
        let r = reward(&state, &action, &cfg.rewards);
        let next = transition(grid, &state, &action)?;
        let mut record = StepRecord {
            step,
            action,
            observation: None,
            confidence: None,
            params: None,
            reward: r,
            entropy: 0.0,
            elapsed_s: 0.0,
        };
        match action {
            Action::Move { .. } => {}
            Action::Look => {
                let view = fan_region(grid, &state.robot, &scene.fan);
                let obs = match session.as_mut() {
                    Some(s) => s.observe(&scene.name, &scene.language, &state.robot, step, grid, &scene.fan)?,
                    None => {
                        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, step, DETECTOR_STREAM));
                        simulate_detection(&cfg.detector, state.object_cell, &view, &mut rng)
                            .expect("simulated detector")
                    }
                };
                let params = cfg.mode.params_for(&cfg.static_params, &cfg.confidence_map, obs.confidence);
                belief = belief.update(&action, &obs, &view, &params)?;
                record.observation = obs.detection;
                record.confidence = Some(obs.confidence);
                record.params = Some(params);
            }
            Action::Find { cell } => {
                finds += 1;
                if !next.found {
                    belief = belief.rule_out(cell)?;
                }
            }
        }
        ret += disc * r;
        disc *= cfg.rewards.discount;
        record.entropy = belief.entropy();
        record.elapsed_s = t0.elapsed().as_secs_f64();
        records.push(record);
        state = next;
        if state.found {
            stop = StopReason::Found;
            break;
        }
        if finds >= cfg.limits.find_budget {
            stop = StopReason::FindBudget;
            break;
        }
    }

    let log = EpisodeLog {
        scene: scene.name.clone(),
        seed,
        mode: cfg.mode,
        object_cell: scene.object_cell,
        robot_start: scene.robot_start,
        outcome: Outcome {
            success: state.found,
            actions: records.len() as u32,
            finds,
            discounted_return: ret,
            oracle,
            stop,
            seconds: started.elapsed().as_secs_f64(),
        },
        records,
    };
    Ok(Episode { log, final_belief: belief })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{Direction, FanParams, OccupancyGrid};

    fn scene_5x5() -> Scene {
        Scene {
            name: "open5".into(),
            language: "the mug".into(),
            grid: OccupancyGrid::open(5, 5),
            object_cell: Cell::new(2, 1),
            robot_start: RobotPose::new(2, 4, Direction::North),
            fan: FanParams::default(),
        }
    }

    fn perfect_cfg() -> EpisodeConfig {
        let mut planner = PlannerConfig::default();
        planner.planning_noise = NoiseParams::PERFECT;
        EpisodeConfig {
            detector: DetectorSpec::perfect(),
            static_params: NoiseParams::PERFECT,
            planner,
            ..EpisodeConfig::default()
        }
    }

    #[test]
    fn perfect_sensor_object_in_view() {
        let s = scene_5x5();
        assert!(fan_region(&s.grid, &s.robot_start, &s.fan).contains(s.object_cell));
        let ep = run_episode(&s, &perfect_cfg(), 1).unwrap();
        let o = &ep.log.outcome;
        assert!(o.success);
        assert!(o.actions <= 3, "{:?}", ep.log.records);
        assert_eq!(o.oracle, 2);
    }

    #[test]
    fn replay_is_deterministic() {
        let mut s = scene_5x5();
        s.object_cell = Cell::new(0, 4);
        let cfg = EpisodeConfig {
            detector: DetectorSpec::confidence(0.9, 0.2),
            mode: LcomMode::DynamicBoth,
            ..EpisodeConfig::default()
        };
        let a = run_episode(&s, &cfg, 9).unwrap().log;
        let b = run_episode(&s, &cfg, 9).unwrap().log;
        assert_eq!(a.without_timing(), b.without_timing());
        let c = run_episode(&s, &cfg, 10).unwrap().log;
        assert_ne!(a.without_timing().records, c.without_timing().records);
    }

    #[test]
    fn blind_detector_fails_at_step_cap() {
        let mut s = scene_5x5();
        s.object_cell = Cell::new(0, 0);
        let blind = NoiseParams { tpr: 0.0, ..NoiseParams::SEGMENTATION_STATIC };
        let cfg = EpisodeConfig {
            detector: DetectorSpec::Static { params: blind, confidence: 1.0 },
            static_params: blind,
            limits: EpisodeLimits { max_steps: 30, find_budget: 10 },
            ..EpisodeConfig::default()
        };
        let mut policy = |_: &Belief, _: RobotPose, step: u32| -> Result<Action, HarnessError> {
            Ok(if step % 2 == 0 { Action::Look } else { Action::Move { dir: Direction::ALL[(step as usize / 2) % 4] } })
        };
        let ep = run_episode_with(&s, &cfg, 4, &mut policy).unwrap();
        assert!(!ep.log.outcome.success);
        assert_eq!(ep.log.outcome.stop, StopReason::StepCap);
        assert_eq!(ep.log.outcome.actions, 30);
    }

    #[test]
    fn return_matches_trace() {
        let mut s = scene_5x5();
        s.object_cell = Cell::new(4, 0);
        let ep = run_episode(&s, &EpisodeConfig::default(), 2).unwrap();
        let log = &ep.log;
        assert!((log.outcome.discounted_return - log.recomputed_return(0.9)).abs() < 1e-9);
        let rc = RewardConfig::default();
        for r in &log.records {
            let expected = match r.action {
                Action::Move { .. } => rc.move_cost,
                Action::Look => rc.look_cost,
                Action::Find { cell } if cell == s.object_cell => rc.find_success,
                Action::Find { .. } => rc.find_failure,
            };
            assert_eq!(r.reward, expected);
        }
    }

    #[test]
    fn find_budget_stops_episode() {
        let s = scene_5x5();
        let cfg = EpisodeConfig { limits: EpisodeLimits { max_steps: 50, find_budget: 3 }, ..EpisodeConfig::default() };
        let mut policy = |_: &Belief, _: RobotPose, _: u32| -> Result<Action, HarnessError> {
            Ok(Action::Find { cell: Cell::new(0, 0) })
        };
        let ep = run_episode_with(&s, &cfg, 0, &mut policy).unwrap();
        assert_eq!(ep.log.outcome.stop, StopReason::FindBudget);
        assert_eq!(ep.log.outcome.finds, 3);
        assert_eq!(ep.final_belief.prob(Cell::new(0, 0)), 0.0);
    }
}
