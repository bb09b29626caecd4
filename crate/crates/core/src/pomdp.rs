//! The object-search POMDP: states, actions, deterministic dynamics and rewards.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::grid::{apply_move, Cell, Direction, OccupancyGrid, RobotPose};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PomdpError {
    #[error("cannot act in a terminal state")]
    Terminal,
    #[error("find target {0} is outside the map")]
    FindOutOfBounds(Cell),
    #[error("invalid reward config: {0}")]
    InvalidRewards(String),
}

/// Robot pose plus the (hidden) object cell.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SearchState {
    pub robot: RobotPose,
    pub object_cell: Cell,
    pub found: bool,
}

impl SearchState {
    pub fn new(robot: RobotPose, object_cell: Cell) -> Self {
        SearchState {
            robot,
            object_cell,
            found: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum Action {
    Move { dir: Direction },
    Look,
    Find { cell: Cell },
}

impl Action {
    pub fn is_move(&self) -> bool {
        matches!(self, Action::Move { .. })
    }

    pub fn is_find(&self) -> bool {
        matches!(self, Action::Find { .. })
    }
}

impl fmt::Display for Action {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Action::Move { dir } => write!(f, "move-{dir}"),
            Action::Look => f.write_str("look"),
            Action::Find { cell } => write!(f, "find-{}-{}", cell.x, cell.y),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RewardConfig {
    pub move_cost: f64,
    pub look_cost: f64,
    pub find_success: f64,
    pub find_failure: f64,
    pub discount: f64,
}

impl Default for RewardConfig {
    fn default() -> Self {
        RewardConfig {
            move_cost: -2.0,
            look_cost: -1.0,
            find_success: 1000.0,
            find_failure: -1000.0,
            discount: 0.9,
        }
    }
}

impl RewardConfig {
    pub fn validate(&self) -> Result<(), PomdpError> {
        if !(self.discount > 0.0 && self.discount < 1.0) {
            return Err(PomdpError::InvalidRewards(format!(
                "discount must be in (0, 1), got {}",
                self.discount
            )));
        }
        if !(self.find_success > 0.0 && self.find_failure < 0.0) {
            return Err(PomdpError::InvalidRewards(
                "need find_success > 0 > find_failure".into(),
            ));
        }
        Ok(())
    }
}

pub fn transition(
    grid: &OccupancyGrid,
    state: &SearchState,
    action: &Action,
) -> Result<SearchState, PomdpError> {
    if state.found {
        return Err(PomdpError::Terminal);
    }
    let mut next = *state;
    match *action {
        Action::Move { dir } => next.robot = apply_move(grid, state.robot, dir),
        Action::Look => {}
        Action::Find { cell } => {
            if !grid.contains(cell) {
                return Err(PomdpError::FindOutOfBounds(cell));
            }
            next.found = cell == state.object_cell;
        }
    }
    Ok(next)
}

/// Reward for taking `action` in `state`. Depends only on the object cell.
pub fn reward(state: &SearchState, action: &Action, cfg: &RewardConfig) -> f64 {
    match *action {
        Action::Move { .. } => cfg.move_cost,
        Action::Look => cfg.look_cost,
        Action::Find { cell } if cell == state.object_cell => cfg.find_success,
        Action::Find { .. } => cfg.find_failure,
    }
}

pub fn is_terminal(state: &SearchState) -> bool {
    state.found
}
