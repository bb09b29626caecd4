use std::time::Duration;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::HarnessError;
use crate::bridge::{
    project_detection, CameraModel, DetectionRequest, DetectorClient, Endpoint, ImageRef,
};
use crate::grid::{Cell, CellSet, FanParams, OccupancyGrid, RobotPose};
use crate::lcom::{sample_observation, NoiseParams, SensorObservation};

fn one() -> f64 {
    1.0
}

fn low_default() -> f64 {
    0.1
}

fn static_default() -> NoiseParams {
    NoiseParams::SEGMENTATION_STATIC
}

fn timeout_default() -> u64 {
    5000
}

/// Where observations come from during an episode.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum DetectorSpec {
    /// Reports the object's cell whenever it is in view.
    Perfect {
        #[serde(default = "one")]
        high_value: f64,
    },
    /// Samples the observation model with fixed params; constant score.
    Static {
        #[serde(default = "static_default")]
        params: NoiseParams,
        #[serde(default = "one")]
        confidence: f64,
    },
    /// Like `static`, plus a two-level score that is more often high when
    /// the detection is a true positive.
    Confidence {
        #[serde(default = "static_default")]
        params: NoiseParams,
        p_high_given_a: f64,
        p_high_given_not_a: f64,
        #[serde(default = "one")]
        high_value: f64,
        #[serde(default = "low_default")]
        low_value: f64,
    },
    /// External detector over the wire protocol. `image` and `depth` are
    /// path templates; `{scene}`, `{x}`, `{y}`, `{dir}` and `{step}` are
    /// substituted per request.
    Bridge {
        endpoint: Endpoint,
        camera: CameraModel,
        image: String,
        #[serde(default)]
        depth: Option<String>,
        #[serde(default = "timeout_default")]
        timeout_ms: u64,
    },
}

impl DetectorSpec {
    pub fn perfect() -> Self {
        DetectorSpec::Perfect { high_value: 1.0 }
    }

    pub fn confidence(p_high_given_a: f64, p_high_given_not_a: f64) -> Self {
        DetectorSpec::Confidence {
            params: NoiseParams::SEGMENTATION_STATIC,
            p_high_given_a,
            p_high_given_not_a,
            high_value: 1.0,
            low_value: 0.1,
        }
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        let bad = |m: String| Err(HarnessError::Config(m));
        match self {
            DetectorSpec::Perfect { high_value } if !(*high_value >= 0.0) => {
                bad(format!("high_value must be >= 0, got {high_value}"))
            }
            DetectorSpec::Static { params, confidence } => {
                params.validate()?;
                if !(*confidence >= 0.0 && confidence.is_finite()) {
                    return bad(format!("confidence must be >= 0, got {confidence}"));
                }
                Ok(())
            }
            DetectorSpec::Confidence { params, p_high_given_a, p_high_given_not_a, high_value, low_value } => {
                params.validate()?;
                for (name, p) in [("p_high_given_a", p_high_given_a), ("p_high_given_not_a", p_high_given_not_a)] {
                    if !(0.0..=1.0).contains(p) {
                        return bad(format!("{name} must be in [0, 1], got {p}"));
                    }
                }
                if !(*high_value > *low_value && *low_value >= 0.0) {
                    return bad(format!("need high_value > low_value >= 0, got {high_value} and {low_value}"));
                }
                Ok(())
            }
            DetectorSpec::Bridge { camera, .. } => Ok(camera.validate()?),
            DetectorSpec::Perfect { .. } => Ok(()),
        }
    }
}

/// In-process detection draw for the simulated detector kinds. Returns
/// `None` for `bridge`.
pub fn simulate_detection<R: Rng + ?Sized>(
    spec: &DetectorSpec,
    object: Cell,
    view: &CellSet,
    rng: &mut R,
) -> Option<SensorObservation> {
    let obs = match spec {
        DetectorSpec::Perfect { high_value } => SensorObservation {
            detection: view.contains(object).then_some(object),
            confidence: *high_value,
        },
        DetectorSpec::Static { params, confidence } => SensorObservation {
            detection: sample_observation(rng, object, view, params).detection,
            confidence: *confidence,
        },
        DetectorSpec::Confidence { params, p_high_given_a, p_high_given_not_a, high_value, low_value } => {
            let s = sample_observation(rng, object, view, params);
            let p_high = if s.is_true_positive() { *p_high_given_a } else { *p_high_given_not_a };
            let high = rng.gen::<f64>() < p_high;
            SensorObservation {
                detection: s.detection,
                confidence: if high { *high_value } else { *low_value },
            }
        }
        DetectorSpec::Bridge { .. } => return None,
    };
    Some(obs)
}

/// A bridge connection bound to one episode.
#[derive(Debug)]
pub struct BridgeSession {
    client: DetectorClient,
    camera: CameraModel,
    image: String,
    depth: Option<String>,
    timeout: Duration,
}

fn fill_template(template: &str, scene: &str, robot: &RobotPose, step: u32) -> String {
    template
        .replace("{scene}", scene)
        .replace("{x}", &robot.x.to_string())
        .replace("{y}", &robot.y.to_string())
        .replace("{dir}", &robot.orientation.to_string())
        .replace("{step}", &step.to_string())
}

impl BridgeSession {
    /// Opens a session if `spec` is a bridge detector.
    pub fn open(spec: &DetectorSpec) -> Result<Option<Self>, HarnessError> {
        let DetectorSpec::Bridge { endpoint, camera, image, depth, timeout_ms } = spec else {
            return Ok(None);
        };
        let timeout = Duration::from_millis(*timeout_ms);
        Ok(Some(BridgeSession {
            client: DetectorClient::connect(endpoint, timeout)?,
            camera: *camera,
            image: image.clone(),
            depth: depth.clone(),
            timeout,
        }))
    }

    #[allow(clippy::too_many_arguments)]
    pub fn observe(
        &mut self,
        scene: &str,
        language: &str,
        robot: &RobotPose,
        step: u32,
        grid: &OccupancyGrid,
        fan: &FanParams,
    ) -> Result<SensorObservation, HarnessError> {
        let req = DetectionRequest {
            id: self.client.next_id(),
            lang: language.to_string(),
            rgb: ImageRef::Path(fill_template(&self.image, scene, robot, step)),
            depth: self.depth.as_ref().map(|t| ImageRef::Path(fill_template(t, scene, robot, step))),
            intrinsics: self.camera.intrinsics,
        };
        let resp = self.client.query(&req, self.timeout)?;
        Ok(project_detection(&resp, &self.camera, robot, grid, fan)?)
    }
}
