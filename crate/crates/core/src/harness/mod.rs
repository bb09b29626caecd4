//! Scenes, simulated detectors and the episode loop.

mod detector;
mod episode;
mod scene;

use thiserror::Error;

use crate::belief::BeliefError;
use crate::bridge::BridgeError;
use crate::grid::GridError;
use crate::lcom::LcomError;
use crate::metrics::MetricsError;
use crate::planner::PlanError;
use crate::pomdp::PomdpError;

pub use detector::{simulate_detection, BridgeSession, DetectorSpec};
pub use episode::{
    derive_seed, run_episode, run_episode_with, Episode, EpisodeConfig, EpisodeLimits, EpisodeLog, Outcome,
    StepRecord, StopReason,
};
pub use scene::{generate_scene, validate_scene, Finding, Scene, Severity};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("scene: {0}")]
    Scene(String),
    #[error("config: {0}")]
    Config(String),
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error(transparent)]
    Lcom(#[from] LcomError),
    #[error(transparent)]
    Belief(#[from] BeliefError),
    #[error(transparent)]
    Plan(#[from] PlanError),
    #[error(transparent)]
    Pomdp(#[from] PomdpError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error("detector transport: {0}")]
    Bridge(#[from] BridgeError),
}

impl HarnessError {
    /// Failure talking to an external detector, as opposed to a bad input
    /// or an internal contract violation.
    pub fn is_transport(&self) -> bool {
        matches!(self, HarnessError::Bridge(_))
    }
}
