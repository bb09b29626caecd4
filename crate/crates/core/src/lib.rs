//! Language-conditioned object search on an occupancy grid.
//!
//! A robot with a fan-shaped detector searches for one object described in
//! natural language. The detector's confidence score selects the noise
//! parameters of the observation model used for the Bayesian belief update;
//! actions are chosen online by PO-UCT tree search.

pub mod belief;
pub mod bridge;
pub mod grid;
pub mod harness;
pub mod lcom;
pub mod metrics;
pub mod planner;
pub mod pomdp;

pub use belief::Belief;
pub use grid::{apply_move, fan_region, load_grid, Cell, CellSet, Direction, FanParams, OccupancyGrid, RobotPose};
pub use lcom::{ConfidenceMap, LcomMode, NoiseParams, SensorObservation};
pub use pomdp::{Action, RewardConfig, SearchState};
