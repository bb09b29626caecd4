//! Online PO-UCT search over the object-search POMDP.
//!
//! Each simulation draws an object cell from the root belief and walks the
//! tree with UCB1 action selection, sampling `Look` outcomes from a fixed
//! planning noise model. One node is added per simulation; below it a
//! uniform random rollout over moves and looks runs to the depth limit.
//!
//! Every node carries the exact posterior for its history under the planning
//! model. The `Find` edge of a node always targets that posterior's most
//! likely cell, which keeps the branching factor at six.

use std::collections::HashMap;
use std::time::{Duration, Instant};

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::belief::{Belief, BeliefError};
use crate::grid::{apply_move, fan_region, Cell, CellSet, Direction, FanParams, OccupancyGrid, RobotPose};
use crate::lcom::{sample_observation, NoiseParams, SensorObservation};
use crate::pomdp::{Action, RewardConfig};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PlanError {
    #[error("belief has no support")]
    EmptyBelief,
    #[error("invalid planner config: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Belief(#[from] BeliefError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Budget {
    /// Fixed number of simulations; reproducible.
    Simulations(u32),
    /// Wall-clock seconds per decision; not reproducible.
    Seconds(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PlannerConfig {
    pub depth: u32,
    pub exploration_c: f64,
    pub budget: Budget,
    pub discount: f64,
    pub planning_noise: NoiseParams,
    pub rng_seed: u64,
}

impl Default for PlannerConfig {
    fn default() -> Self {
        PlannerConfig {
            depth: 3,
            exploration_c: 10_000.0,
            budget: Budget::Simulations(1000),
            discount: 0.9,
            planning_noise: NoiseParams::SEGMENTATION_STATIC,
            rng_seed: 0,
        }
    }
}

impl PlannerConfig {
    pub fn validate(&self) -> Result<(), PlanError> {
        let bad = |m: String| Err(PlanError::InvalidConfig(m));
        if self.depth < 1 {
            return bad("depth must be >= 1".into());
        }
        if !(self.exploration_c >= 0.0 && self.exploration_c.is_finite()) {
            return bad(format!("exploration_c must be >= 0, got {}", self.exploration_c));
        }
        match self.budget {
            Budget::Simulations(0) => return bad("simulation budget must be positive".into()),
            Budget::Seconds(s) if !(s > 0.0 && s.is_finite()) => {
                return bad(format!("time budget must be positive, got {s}"))
            }
            _ => {}
        }
        if !(self.discount > 0.0 && self.discount < 1.0) {
            return bad(format!("discount must be in (0, 1), got {}", self.discount));
        }
        self.planning_noise
            .validate()
            .map_err(|e| PlanError::InvalidConfig(e.to_string()))
    }
}

/// Number of candidate actions at every node.
pub const NUM_ACTIONS: usize = 6;
const LOOK: usize = 4;
const FIND: usize = 5;

/// `[Move N, Move E, Move S, Move W, Look, Find(MAP)]`, in tie-break order.
pub fn candidate_actions(belief: &Belief) -> [Action; NUM_ACTIONS] {
    let [n, e, s, w] = Direction::ALL.map(|dir| Action::Move { dir });
    [n, e, s, w, Action::Look, Action::Find { cell: belief.map_estimate() }]
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct EdgeStats {
    pub visits: u32,
    pub value: f64,
}

#[derive(Debug)]
struct Node {
    pose: RobotPose,
    belief: Belief,
    view: CellSet,
    visits: u32,
    edges: [EdgeStats; NUM_ACTIONS],
    children: HashMap<(u8, Option<Cell>), usize>,
}

/// Root statistics after a search.
#[derive(Debug, Clone, PartialEq)]
pub struct SearchOutcome {
    pub action: Action,
    pub actions: [Action; NUM_ACTIONS],
    pub edges: [EdgeStats; NUM_ACTIONS],
    pub simulations: u32,
    pub tree_size: usize,
}

impl SearchOutcome {
    pub fn q(&self, action: &Action) -> Option<f64> {
        self.actions
            .iter()
            .position(|a| a == action)
            .filter(|&i| self.edges[i].visits > 0)
            .map(|i| self.edges[i].value)
    }
}

/// Static problem data shared by every search.
#[derive(Debug, Clone, Copy)]
pub struct PlanningContext<'a> {
    pub grid: &'a OccupancyGrid,
    pub fan: &'a FanParams,
    pub rewards: &'a RewardConfig,
}

struct Tree<'a> {
    ctx: PlanningContext<'a>,
    cfg: &'a PlannerConfig,
    nodes: Vec<Node>,
    rng: ChaCha8Rng,
}

impl<'a> Tree<'a> {
    fn new_node(&self, pose: RobotPose, belief: Belief) -> Node {
        let view = fan_region(self.ctx.grid, &pose, self.ctx.fan);
        Node {
            pose,
            belief,
            view,
            visits: 0,
            edges: [EdgeStats::default(); NUM_ACTIONS],
            children: HashMap::new(),
        }
    }

    fn select(&self, id: usize) -> usize {
        let node = &self.nodes[id];
        if let Some(i) = node.edges.iter().position(|e| e.visits == 0) {
            return i;
        }
        let ln_n = (node.visits as f64).ln();
        let mut best = 0;
        let mut best_score = f64::NEG_INFINITY;
        for (i, e) in node.edges.iter().enumerate() {
            let score = e.value + self.cfg.exploration_c * (ln_n / e.visits as f64).sqrt();
            if score > best_score {
                best = i;
                best_score = score;
            }
        }
        best
    }

    fn rollout(&mut self, remaining: u32) -> f64 {
        let mut total = 0.0;
        let mut discount = 1.0;
        for _ in 0..remaining {
            let r = if self.rng.gen_range(0..5) == LOOK {
                self.ctx.rewards.look_cost
            } else {
                self.ctx.rewards.move_cost
            };
            total += discount * r;
            discount *= self.cfg.discount;
        }
        total
    }

    fn simulate(&mut self, id: usize, object: Cell, remaining: u32) -> Result<f64, PlanError> {
        if remaining == 0 {
            return Ok(0.0);
        }
        let a = self.select(id);
        let pose = self.nodes[id].pose;
        let rewards = self.ctx.rewards;
        let (next_pose, reward, terminal, obs) = match a {
            FIND => {
                let target = self.nodes[id].belief.map_estimate();
                if target == object {
                    (pose, rewards.find_success, true, None)
                } else {
                    (pose, rewards.find_failure, false, None)
                }
            }
            LOOK => {
                let s = sample_observation(
                    &mut self.rng,
                    object,
                    &self.nodes[id].view,
                    &self.cfg.planning_noise,
                );
                (pose, rewards.look_cost, false, s.detection)
            }
            m => {
                let next = apply_move(self.ctx.grid, pose, Direction::ALL[m]);
                (next, rewards.move_cost, false, None)
            }
        };

        let value = if terminal {
            reward
        } else {
            let key = (a as u8, obs);
            match self.nodes[id].children.get(&key).copied() {
                Some(child) => reward + self.cfg.discount * self.simulate(child, object, remaining - 1)?,
                None => {
                    let node = &self.nodes[id];
                    let belief = match a {
                        FIND => node.belief.rule_out(node.belief.map_estimate())?,
                        LOOK => node.belief.update(
                            &Action::Look,
                            &SensorObservation { detection: obs, confidence: 0.0 },
                            &node.view,
                            &self.cfg.planning_noise,
                        )?,
                        _ => node.belief.clone(),
                    };
                    let child = self.new_node(next_pose, belief);
                    self.nodes.push(child);
                    let child_id = self.nodes.len() - 1;
                    self.nodes[id].children.insert(key, child_id);
                    reward + self.cfg.discount * self.rollout(remaining - 1)
                }
            }
        };

        let node = &mut self.nodes[id];
        node.visits += 1;
        let e = &mut node.edges[a];
        e.visits += 1;
        e.value += (value - e.value) / e.visits as f64;
        Ok(value)
    }
}

fn best_edge(edges: &[EdgeStats; NUM_ACTIONS]) -> usize {
    let mut best = None::<usize>;
    for (i, e) in edges.iter().enumerate() {
        if e.visits == 0 {
            continue;
        }
        match best {
            Some(b) if edges[b].value >= e.value => {}
            _ => best = Some(i),
        }
    }
    best.unwrap_or(LOOK)
}

/// Runs the search and returns root statistics.
pub fn search(
    belief: &Belief,
    robot: RobotPose,
    ctx: PlanningContext<'_>,
    cfg: &PlannerConfig,
) -> Result<SearchOutcome, PlanError> {
    cfg.validate()?;
    if !(belief.total() > 0.0) {
        return Err(PlanError::EmptyBelief);
    }
    let mut tree = Tree {
        ctx,
        cfg,
        nodes: Vec::new(),
        rng: ChaCha8Rng::seed_from_u64(cfg.rng_seed),
    };
    let root = tree.new_node(robot, belief.clone());
    tree.nodes.push(root);

    let mut sims = 0u32;
    match cfg.budget {
        Budget::Simulations(n) => {
            for _ in 0..n {
                let object = belief.sample(&mut tree.rng);
                tree.simulate(0, object, cfg.depth)?;
                sims += 1;
            }
        }
        Budget::Seconds(s) => {
            let limit = Duration::from_secs_f64(s);
            let start = Instant::now();
            while sims == 0 || start.elapsed() < limit {
                let object = belief.sample(&mut tree.rng);
                tree.simulate(0, object, cfg.depth)?;
                sims += 1;
            }
        }
    }

    let root = &tree.nodes[0];
    let actions = candidate_actions(&root.belief);
    let best = best_edge(&root.edges);
    Ok(SearchOutcome {
        action: actions[best],
        actions,
        edges: root.edges,
        simulations: sims,
        tree_size: tree.nodes.len(),
    })
}

/// Chooses the next action from `belief` at `robot`.
pub fn plan(
    belief: &Belief,
    robot: RobotPose,
    ctx: PlanningContext<'_>,
    cfg: &PlannerConfig,
) -> Result<Action, PlanError> {
    search(belief, robot, ctx, cfg).map(|o| o.action)
}
