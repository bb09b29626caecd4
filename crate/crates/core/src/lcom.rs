//! Confidence-conditioned observation model for the fan sensor.
//!
//! A `Look` yields either nothing (`None`) or one cell of the visible region
//! V. The outcome is a mixture of three events: a true positive (A), drawn
//! from a discrete Gaussian around the object restricted to V; a false
//! positive (B), uniform over V; and a negative (C), the null observation.
//! Event weights come from the sensor's true-positive and true-negative
//! rates, and a small smoothing mass `δ` lets every event leak into the
//! other side of the null/detection split:
//!
//! ```text
//! P(None)     = γ(1 − δ) + (1 − γ)δ
//! P(z ∈ V)    = (1 − δ)(α·D(z) + β/|V|) + γδ/|V|
//! ```
//!
//! The detector's confidence score selects the noise triple through a
//! step-function map ([`ConfidenceMap`]), with [`LcomMode`] deciding which
//! parts of the triple follow the score and which stay at the static values.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::grid::{Cell, CellSet};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LcomError {
    #[error("invalid noise parameters: {0}")]
    InvalidParams(String),
    #[error("detection {0} is not inside the sensor region")]
    DetectionOutsideRegion(Cell),
    #[error("detection {0} reported against an empty sensor region")]
    EmptyRegion(Cell),
    #[error("invalid confidence map: {0}")]
    InvalidMap(String),
    #[error("unknown confidence profile {0:?}")]
    UnknownProfile(String),
    #[error("unknown observation-model mode {0:?}")]
    UnknownMode(String),
}

/// What the sensor reported for one `Look`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SensorObservation {
    pub detection: Option<Cell>,
    pub confidence: f64,
}

impl SensorObservation {
    pub fn null(confidence: f64) -> Self {
        SensorObservation {
            detection: None,
            confidence,
        }
    }

    pub fn at(cell: Cell, confidence: f64) -> Self {
        SensorObservation {
            detection: Some(cell),
            confidence,
        }
    }
}

pub const DEFAULT_SMOOTHING: f64 = 1e-3;

fn default_smoothing() -> f64 {
    DEFAULT_SMOOTHING
}

/// Sensor accuracy: Gaussian spread (in cells), true-positive and
/// true-negative rates, and additive smoothing mass.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseParams {
    pub sigma: f64,
    pub tpr: f64,
    pub tnr: f64,
    #[serde(default = "default_smoothing")]
    pub smoothing: f64,
}

impl NoiseParams {
    /// Measured statistics of the fine-tuned segmentation detector.
    pub const SEGMENTATION_STATIC: NoiseParams = NoiseParams {
        sigma: 0.827,
        tpr: 0.581,
        tnr: 0.918,
        smoothing: DEFAULT_SMOOTHING,
    };

    /// Measured statistics of the open-vocabulary region detector.
    pub const VILD_STATIC: NoiseParams = NoiseParams {
        sigma: 1.825,
        tpr: 0.976,
        tnr: 0.118,
        smoothing: DEFAULT_SMOOTHING,
    };

    /// Near-noiseless sensor for the perfect-detector arm.
    pub const PERFECT: NoiseParams = NoiseParams {
        sigma: 0.2,
        tpr: 1.0,
        tnr: 1.0,
        smoothing: DEFAULT_SMOOTHING,
    };

    pub fn new(sigma: f64, tpr: f64, tnr: f64, smoothing: f64) -> Result<Self, LcomError> {
        let p = NoiseParams {
            sigma,
            tpr,
            tnr,
            smoothing,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn with_smoothing(self, smoothing: f64) -> Self {
        NoiseParams { smoothing, ..self }
    }

    /// Smoothing of exactly zero is accepted so the model can be evaluated
    /// unsmoothed; anything above 0.1 is rejected.
    pub fn validate(&self) -> Result<(), LcomError> {
        if !(self.sigma > 0.0 && self.sigma.is_finite()) {
            return Err(LcomError::InvalidParams(format!("sigma must be > 0, got {}", self.sigma)));
        }
        for (name, v) in [("tpr", self.tpr), ("tnr", self.tnr)] {
            if !(0.0..=1.0).contains(&v) {
                return Err(LcomError::InvalidParams(format!("{name} must be in [0, 1], got {v}")));
            }
        }
        if !(0.0..=0.1).contains(&self.smoothing) {
            return Err(LcomError::InvalidParams(format!(
                "smoothing must be in [0, 0.1], got {}",
                self.smoothing
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConfidenceBand {
    pub threshold: f64,
    pub params: NoiseParams,
}

/// Step function from confidence score to noise parameters: the first band
/// whose threshold is at most the score wins, else the fallback.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfidenceMap {
    pub bands: Vec<ConfidenceBand>,
    pub fallback: NoiseParams,
}

impl ConfidenceMap {
    pub const SEGMENTATION: &'static str = "hu-segmentation";
    pub const VILD: &'static str = "vild";

    pub fn new(bands: Vec<ConfidenceBand>, fallback: NoiseParams) -> Result<Self, LcomError> {
        let map = ConfidenceMap { bands, fallback };
        map.validate()?;
        Ok(map)
    }

    pub fn validate(&self) -> Result<(), LcomError> {
        if self.bands.is_empty() {
            return Err(LcomError::InvalidMap("need at least one band".into()));
        }
        if self.bands.windows(2).any(|w| w[0].threshold <= w[1].threshold) {
            return Err(LcomError::InvalidMap("thresholds must be strictly decreasing".into()));
        }
        for b in &self.bands {
            b.params.validate()?;
        }
        self.fallback.validate()
    }

    /// Segmentation detector: high confidence (>= 1) sharpens the detection
    /// and raises the true-positive rate; the true-negative rate stays at
    /// the measured 0.918.
    pub fn segmentation() -> Self {
        let tnr = NoiseParams::SEGMENTATION_STATIC.tnr;
        ConfidenceMap {
            bands: vec![ConfidenceBand {
                threshold: 1.0,
                params: NoiseParams { sigma: 0.6, tpr: 0.7, tnr, smoothing: DEFAULT_SMOOTHING },
            }],
            fallback: NoiseParams { sigma: 1.0, tpr: 0.5, tnr, smoothing: DEFAULT_SMOOTHING },
        }
    }

    /// Region detector: the score moves the true-negative rate and spread;
    /// the true-positive rate stays at the measured 0.976.
    pub fn vild() -> Self {
        let tpr = NoiseParams::VILD_STATIC.tpr;
        ConfidenceMap {
            bands: vec![ConfidenceBand {
                threshold: 0.25,
                params: NoiseParams { sigma: 1.0, tpr, tnr: 0.1, smoothing: DEFAULT_SMOOTHING },
            }],
            fallback: NoiseParams { sigma: 2.0, tpr, tnr: 0.3, smoothing: DEFAULT_SMOOTHING },
        }
    }

    pub fn builtin(name: &str) -> Result<Self, LcomError> {
        match name {
            Self::SEGMENTATION => Ok(Self::segmentation()),
            Self::VILD => Ok(Self::vild()),
            other => Err(LcomError::UnknownProfile(other.to_string())),
        }
    }

    /// The confidence-to-noise map g_L.
    pub fn map(&self, confidence: f64) -> NoiseParams {
        self.bands
            .iter()
            .find(|b| confidence >= b.threshold)
            .map(|b| b.params)
            .unwrap_or(self.fallback)
    }
}

/// Which components of the noise triple follow the confidence score.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LcomMode {
    #[default]
    Static,
    DynamicSigma,
    DynamicTpr,
    DynamicBoth,
    DynamicTnr,
    DynamicTnrSigma,
}

impl LcomMode {
    pub const ALL: [LcomMode; 6] = [
        LcomMode::Static,
        LcomMode::DynamicSigma,
        LcomMode::DynamicTpr,
        LcomMode::DynamicBoth,
        LcomMode::DynamicTnr,
        LcomMode::DynamicTnrSigma,
    ];

    pub fn name(self) -> &'static str {
        match self {
            LcomMode::Static => "static",
            LcomMode::DynamicSigma => "dynamic-sigma",
            LcomMode::DynamicTpr => "dynamic-tpr",
            LcomMode::DynamicBoth => "dynamic-both",
            LcomMode::DynamicTnr => "dynamic-tnr",
            LcomMode::DynamicTnrSigma => "dynamic-tnr-sigma",
        }
    }

    pub fn is_dynamic(self) -> bool {
        self != LcomMode::Static
    }

    /// Combines the static triple with the score-mapped one.
    pub fn resolve(self, fixed: &NoiseParams, mapped: &NoiseParams) -> NoiseParams {
        let mut p = *fixed;
        match self {
            LcomMode::Static => {}
            LcomMode::DynamicSigma => p.sigma = mapped.sigma,
            LcomMode::DynamicTpr => p.tpr = mapped.tpr,
            LcomMode::DynamicBoth => {
                p.sigma = mapped.sigma;
                p.tpr = mapped.tpr;
            }
            LcomMode::DynamicTnr => p.tnr = mapped.tnr,
            LcomMode::DynamicTnrSigma => {
                p.sigma = mapped.sigma;
                p.tnr = mapped.tnr;
            }
        }
        p
    }

    /// Noise parameters to use for a reading with the given confidence.
    pub fn params_for(self, fixed: &NoiseParams, map: &ConfidenceMap, confidence: f64) -> NoiseParams {
        if self.is_dynamic() {
            self.resolve(fixed, &map.map(confidence))
        } else {
            *fixed
        }
    }
}

impl fmt::Display for LcomMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for LcomMode {
    type Err = LcomError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        LcomMode::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| LcomError::UnknownMode(s.to_string()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EventProbs {
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
}

/// Event weights (true positive, false positive, negative).
pub fn event_probs(object_in_view: bool, p: &NoiseParams) -> EventProbs {
    if object_in_view {
        EventProbs { alpha: p.tpr, beta: 0.0, gamma: 1.0 - p.tpr }
    } else {
        EventProbs { alpha: 0.0, beta: 1.0 - p.tnr, gamma: p.tnr }
    }
}

fn gaussian_kernel(a: Cell, b: Cell, sigma: f64) -> f64 {
    (-a.dist2(b) / (2.0 * sigma * sigma)).exp()
}

/// Discrete Gaussian around `center`, normalized over the cells of `view`.
/// Zero when `z` is not in the view or the view carries no weight.
pub fn gaussian_density(z: Cell, center: Cell, view: &CellSet, sigma: f64) -> f64 {
    if !view.contains(z) {
        return 0.0;
    }
    let norm: f64 = view.iter().map(|v| gaussian_kernel(v, center, sigma)).sum();
    if norm > 0.0 {
        gaussian_kernel(z, center, sigma) / norm
    } else {
        0.0
    }
}

/// `p(z | object_cell, V, params)`.
pub fn observation_likelihood(
    detection: Option<Cell>,
    object_cell: Cell,
    view: &CellSet,
    p: &NoiseParams,
) -> Result<f64, LcomError> {
    let e = event_probs(view.contains(object_cell), p);
    let delta = p.smoothing;
    match detection {
        None if view.is_empty() => Ok(1.0),
        None => Ok(e.gamma * (1.0 - delta) + (1.0 - e.gamma) * delta),
        Some(z) if view.is_empty() => Err(LcomError::EmptyRegion(z)),
        Some(z) if !view.contains(z) => Err(LcomError::DetectionOutsideRegion(z)),
        Some(z) => {
            let n = view.len() as f64;
            let a = if e.alpha > 0.0 {
                e.alpha * gaussian_density(z, object_cell, view, p.sigma)
            } else {
                0.0
            };
            Ok((1.0 - delta) * (a + e.beta / n) + delta * e.gamma / n)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Event {
    TruePositive,
    FalsePositive,
    Negative,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SampledObservation {
    pub event: Event,
    pub detection: Option<Cell>,
}

impl SampledObservation {
    /// The sensor reported the object's own (noisy) position.
    pub fn is_true_positive(&self) -> bool {
        self.event == Event::TruePositive && self.detection.is_some()
    }
}

fn sample_weighted<R: Rng + ?Sized>(rng: &mut R, cells: &[Cell], weights: &[f64]) -> Cell {
    let total: f64 = weights.iter().sum();
    let mut u = rng.gen::<f64>() * total;
    for (c, w) in cells.iter().zip(weights) {
        if u < *w {
            return *c;
        }
        u -= w;
    }
    *cells.last().expect("non-empty region")
}

/// Draws one observation from the generative model.
pub fn sample_observation<R: Rng + ?Sized>(
    rng: &mut R,
    object_cell: Cell,
    view: &CellSet,
    p: &NoiseParams,
) -> SampledObservation {
    let e = event_probs(view.contains(object_cell), p);
    let u: f64 = rng.gen();
    let event = if u < e.alpha {
        Event::TruePositive
    } else if u < e.alpha + e.beta {
        Event::FalsePositive
    } else {
        Event::Negative
    };
    if view.is_empty() {
        if event != Event::Negative {
            log::debug!("{event:?} drawn against an empty sensor region, reporting null");
        }
        return SampledObservation { event, detection: None };
    }
    let leak = rng.gen::<f64>() < p.smoothing;
    let cells = view.cells();
    let detection = match (event, leak) {
        (Event::TruePositive, false) => {
            let w: Vec<f64> = cells.iter().map(|&c| gaussian_kernel(c, object_cell, p.sigma)).collect();
            Some(sample_weighted(rng, cells, &w))
        }
        (Event::FalsePositive, false) | (Event::Negative, true) => {
            Some(cells[rng.gen_range(0..cells.len())])
        }
        (Event::TruePositive, true) | (Event::FalsePositive, true) | (Event::Negative, false) => None,
    };
    SampledObservation { event, detection }
}

pub fn sample_observation_seeded(
    seed: u64,
    object_cell: Cell,
    view: &CellSet,
    p: &NoiseParams,
) -> SampledObservation {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    sample_observation(&mut rng, object_cell, view, p)
}
