use std::fmt;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::HarnessError;
use crate::grid::{fan_region, load_grid, Cell, Direction, FanParams, OccupancyGrid, RobotPose};
use crate::metrics::oracle_actions;

/// A search problem: map, hidden object, start pose and the language
/// description handed to the detector.
#[derive(Debug, Clone, PartialEq)]
pub struct Scene {
    pub name: String,
    pub language: String,
    pub grid: OccupancyGrid,
    pub object_cell: Cell,
    pub robot_start: RobotPose,
    pub fan: FanParams,
}

// On-disk layout. Example:
//
//   name = "kitchen"
//   language = "the red mug"
//   object = [3, 4]
//   cell_size_m = 0.25
//   map = """
//   .....
//   .##..
//   ....."""
//   [start]
//   x = 0
//   y = 0
//   orientation = "east"
//   [fan]
//   fov_degrees = 90.0
//   range_cells = 4.0
//   occlusion_enabled = true
#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SceneFile {
    name: String,
    language: String,
    object: Cell,
    #[serde(default = "default_cell_size")]
    cell_size_m: f64,
    map: String,
    start: RobotPose,
    #[serde(default)]
    fan: FanParams,
}

fn default_cell_size() -> f64 {
    crate::grid::DEFAULT_CELL_SIZE_M
}

impl Scene {
    /// Parses a scene file. Structural problems are errors; semantic
    /// problems are left to [`validate_scene`].
    pub fn from_toml(text: &str) -> Result<Scene, HarnessError> {
        let file: SceneFile = toml::from_str(text).map_err(|e| HarnessError::Scene(e.to_string()))?;
        let grid = load_grid(&file.map)?.with_cell_size(file.cell_size_m)?;
        file.fan.validate()?;
        Ok(Scene {
            name: file.name,
            language: file.language,
            grid,
            object_cell: file.object,
            robot_start: file.start,
            fan: file.fan,
        })
    }

    pub fn to_toml(&self) -> String {
        let file = SceneFile {
            name: self.name.clone(),
            language: self.language.clone(),
            object: self.object_cell,
            cell_size_m: self.grid.cell_size_m(),
            map: self.grid.to_text(),
            start: self.robot_start,
            fan: self.fan,
        };
        toml::to_string(&file).expect("scene serializes")
    }

    pub fn load(path: &Path) -> Result<Scene, HarnessError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| HarnessError::Scene(format!("{}: {e}", path.display())))?;
        Scene::from_toml(&text).map_err(|e| HarnessError::Scene(format!("{}: {e}", path.display())))
    }

    /// Loads and rejects scenes with error findings.
    pub fn load_valid(path: &Path) -> Result<Scene, HarnessError> {
        let scene = Scene::load(path)?;
        if let Some(f) = validate_scene(&scene).into_iter().find(|f| f.severity == Severity::Error) {
            return Err(HarnessError::Scene(format!("{}: {}", path.display(), f.message)));
        }
        Ok(scene)
    }

    pub fn oracle(&self) -> Result<u32, HarnessError> {
        Ok(oracle_actions(&self.grid, &self.fan, self.robot_start, self.object_cell)?)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Severity {
    Error,
    Warning,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Finding {
    pub severity: Severity,
    pub message: String,
}

impl fmt::Display for Finding {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let tag = match self.severity {
            Severity::Error => "error",
            Severity::Warning => "warning",
        };
        write!(f, "{tag}: {}", self.message)
    }
}

pub fn validate_scene(scene: &Scene) -> Vec<Finding> {
    let mut out = Vec::new();
    let mut error = |m: String| out.push(Finding { severity: Severity::Error, message: m });
    if scene.language.trim().is_empty() {
        error("language description is empty".into());
    }
    let g = &scene.grid;
    if !scene.robot_start.is_valid(g) {
        error(format!("robot start {} is out of bounds or on an occupied cell", scene.robot_start));
    }
    if !g.is_free(scene.object_cell) {
        error(format!("object cell {} is out of bounds or occupied", scene.object_cell));
    }
    if scene.fan.validate().is_err() {
        error("invalid fan parameters".into());
    }
    if !out.is_empty() {
        return out;
    }
    if oracle_actions(g, &scene.fan, scene.robot_start, scene.object_cell).is_err() {
        out.push(Finding {
            severity: Severity::Error,
            message: format!("object at {} is unreachable: no reachable pose sees it", scene.object_cell),
        });
    } else if fan_region(g, &scene.robot_start, &scene.fan).contains(scene.object_cell) {
        out.push(Finding {
            severity: Severity::Warning,
            message: format!("object at {} is visible from the start pose", scene.object_cell),
        });
    }
    out
}

const LANGUAGE: [&str; 8] = [
    "the red mug",
    "the green apple on the counter",
    "a small potted plant",
    "the blue book",
    "the remote control",
    "the white laptop",
    "the yellow sponge by the sink",
    "a cardboard box",
];

/// Random `width` x `height` scene with interior walls and furniture
/// blocks. Resamples until the scene has no findings at all, so the object
/// is reachable but not visible from the start.
pub fn generate_scene<R: Rng + ?Sized>(rng: &mut R, name: &str, width: usize, height: usize) -> Scene {
    loop {
        let mut occupied = vec![false; width * height];
        let walls = rng.gen_range(2..=4);
        for _ in 0..walls {
            let horizontal = rng.gen_bool(0.5);
            let (len_max, across) = if horizontal { (width, height) } else { (height, width) };
            let at = rng.gen_range(2..across - 2);
            let gap = rng.gen_range(0..len_max);
            let gap_len = rng.gen_range(2..=3);
            for i in 0..len_max {
                if i >= gap && i < gap + gap_len {
                    continue;
                }
                let (x, y) = if horizontal { (i, at) } else { (at, i) };
                occupied[y * width + x] = true;
            }
        }
        let blocks = rng.gen_range(3..=6);
        for _ in 0..blocks {
            let (bw, bh) = (rng.gen_range(1..=2), rng.gen_range(1..=2));
            let (x0, y0) = (rng.gen_range(0..width - bw), rng.gen_range(0..height - bh));
            for y in y0..y0 + bh {
                for x in x0..x0 + bw {
                    occupied[y * width + x] = true;
                }
            }
        }
        let Ok(grid) = OccupancyGrid::new(width, height, occupied, crate::grid::DEFAULT_CELL_SIZE_M) else { continue };
        let free: Vec<Cell> = grid.free_cells().collect();
        if free.len() < 2 {
            continue;
        }
        let start = *free.choose(rng).expect("free cells");
        let object = *free.choose(rng).expect("free cells");
        let orientation = *Direction::ALL.choose(rng).expect("four directions");
        let scene = Scene {
            name: name.to_string(),
            language: LANGUAGE[rng.gen_range(0..LANGUAGE.len())].to_string(),
            grid,
            object_cell: object,
            robot_start: RobotPose::new(start.x, start.y, orientation),
            fan: FanParams::default(),
        };
        if object != start && validate_scene(&scene).is_empty() {
            return scene;
        }
    }
}
