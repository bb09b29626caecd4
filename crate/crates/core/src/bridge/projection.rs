use serde::{Deserialize, Serialize};

use super::protocol::{DetectionResponse, Intrinsics};
use super::BridgeError;
use crate::grid::{fan_region, Cell, FanParams, OccupancyGrid, RobotPose};
use crate::lcom::SensorObservation;

/// Pinhole camera mounted on the robot. `mount_yaw_deg` is the camera's
/// heading relative to the robot's, positive to the left.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CameraModel {
    pub intrinsics: Intrinsics,
    #[serde(default)]
    pub mount_yaw_deg: f64,
}

impl CameraModel {
    pub fn validate(&self) -> Result<(), BridgeError> {
        let k = &self.intrinsics;
        if !(k.fx > 0.0 && k.fy > 0.0) {
            return Err(BridgeError::Projection("focal lengths must be positive".into()));
        }
        Ok(())
    }

    /// Robot-frame `(forward, right)` offset in meters of the point seen at
    /// pixel column `u` with optical-axis depth `depth_m`.
    pub fn robot_frame_point(&self, u: f64, depth_m: f64) -> (f64, f64) {
        let k = &self.intrinsics;
        let lateral = (u - k.cx) * depth_m / k.fx;
        let yaw = self.mount_yaw_deg.to_radians();
        let forward = lateral * yaw.sin() + depth_m * yaw.cos();
        let right = lateral * yaw.cos() - depth_m * yaw.sin();
        (forward, right)
    }
}

/// The grid cell containing a robot-frame offset, or `None` off the map.
pub fn cell_for_offset(grid: &OccupancyGrid, robot: &RobotPose, forward_m: f64, right_m: f64) -> Option<Cell> {
    let (hx, hy) = robot.orientation.delta();
    let (rx, ry) = (-hy, hx);
    let f = forward_m / grid.cell_size_m();
    let r = right_m / grid.cell_size_m();
    let dx = (f * hx as f64 + r * rx as f64).round() as i64;
    let dy = (f * hy as f64 + r * ry as f64).round() as i64;
    let (x, y) = (robot.x as i64 + dx, robot.y as i64 + dy);
    grid.in_bounds(x, y).then(|| Cell::new(x as usize, y as usize))
}

/// Turns a pixel detection into a grid observation. Detections that land
/// outside the fan region become null observations carrying the same
/// confidence.
pub fn project_detection(
    resp: &DetectionResponse,
    cam: &CameraModel,
    robot: &RobotPose,
    grid: &OccupancyGrid,
    fan: &FanParams,
) -> Result<SensorObservation, BridgeError> {
    resp.validate().map_err(BridgeError::Malformed)?;
    cam.validate()?;
    if !resp.detected {
        return Ok(SensorObservation::null(resp.confidence));
    }
    let (u, depth) = (resp.u.unwrap_or_default(), resp.depth_m.unwrap_or_default());
    if !(depth > 0.0) {
        return Err(BridgeError::Projection(format!("depth must be positive, got {depth}")));
    }
    let (forward, right) = cam.robot_frame_point(u, depth);
    let view = fan_region(grid, robot, fan);
    match cell_for_offset(grid, robot, forward, right) {
        Some(c) if view.contains(c) => Ok(SensorObservation::at(c, resp.confidence)),
        other => {
            log::debug!("detection at {other:?} falls outside the sensor region, treating as null");
            Ok(SensorObservation::null(resp.confidence))
        }
    }
}
