//! Occupancy grid, robot poses, movement and the fan-shaped field of view.
//!
//! Coordinates are `(x, y)` cell indices with `x` growing east (column) and
//! `y` growing south (row), so the first line of a text map is the northern
//! edge of the grid.

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GridError {
    #[error("map is empty")]
    Empty,
    #[error("row {row}: expected {expected} columns, found {found}")]
    RaggedRow {
        row: usize,
        expected: usize,
        found: usize,
    },
    #[error("row {row}, column {col}: unknown map character {ch:?}")]
    UnknownChar { row: usize, col: usize, ch: char },
    #[error("map has no free cells")]
    NoFreeCells,
    #[error("cell size must be positive, got {0}")]
    BadCellSize(f64),
    #[error("pose ({x}, {y}) is out of bounds or on an occupied cell")]
    InvalidPose { x: usize, y: usize },
    #[error("invalid fan parameters: {0}")]
    InvalidFan(String),
}

/// A grid cell index. Ordered row-major, i.e. by `(y, x)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(from = "(usize, usize)", into = "(usize, usize)")]
pub struct Cell {
    pub x: usize,
    pub y: usize,
}

impl Cell {
    pub const fn new(x: usize, y: usize) -> Self {
        Cell { x, y }
    }

    pub fn dist2(self, other: Cell) -> f64 {
        let dx = self.x as f64 - other.x as f64;
        let dy = self.y as f64 - other.y as f64;
        dx * dx + dy * dy
    }
}

impl From<(usize, usize)> for Cell {
    fn from((x, y): (usize, usize)) -> Self {
        Cell { x, y }
    }
}

impl From<Cell> for (usize, usize) {
    fn from(c: Cell) -> Self {
        (c.x, c.y)
    }
}

impl Ord for Cell {
    fn cmp(&self, other: &Self) -> Ordering {
        (self.y, self.x).cmp(&(other.y, other.x))
    }
}

impl PartialOrd for Cell {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for Cell {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.x, self.y)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    North,
    East,
    South,
    West,
}

impl Direction {
    pub const ALL: [Direction; 4] = [
        Direction::North,
        Direction::East,
        Direction::South,
        Direction::West,
    ];

    /// Unit step `(dx, dy)` in grid coordinates.
    pub fn delta(self) -> (i64, i64) {
        match self {
            Direction::North => (0, -1),
            Direction::East => (1, 0),
            Direction::South => (0, 1),
            Direction::West => (-1, 0),
        }
    }

    pub fn opposite(self) -> Direction {
        match self {
            Direction::North => Direction::South,
            Direction::East => Direction::West,
            Direction::South => Direction::North,
            Direction::West => Direction::East,
        }
    }

    /// Quarter turn clockwise when viewed with north up.
    pub fn rotate_cw(self) -> Direction {
        match self {
            Direction::North => Direction::East,
            Direction::East => Direction::South,
            Direction::South => Direction::West,
            Direction::West => Direction::North,
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }
}

impl fmt::Display for Direction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Direction::North => "north",
            Direction::East => "east",
            Direction::South => "south",
            Direction::West => "west",
        };
        f.write_str(s)
    }
}

impl FromStr for Direction {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "north" | "n" => Ok(Direction::North),
            "east" | "e" => Ok(Direction::East),
            "south" | "s" => Ok(Direction::South),
            "west" | "w" => Ok(Direction::West),
            other => Err(format!("unknown direction {other:?}")),
        }
    }
}

/// The known map: free and occupied cells.
#[derive(Debug, Clone, PartialEq)]
pub struct OccupancyGrid {
    width: usize,
    height: usize,
    occupied: Vec<bool>,
    cell_size_m: f64,
}

pub const DEFAULT_CELL_SIZE_M: f64 = 0.25;

impl OccupancyGrid {
    pub fn new(
        width: usize,
        height: usize,
        occupied: Vec<bool>,
        cell_size_m: f64,
    ) -> Result<Self, GridError> {
        if width == 0 || height == 0 || occupied.len() != width * height {
            return Err(GridError::Empty);
        }
        if !(cell_size_m > 0.0 && cell_size_m.is_finite()) {
            return Err(GridError::BadCellSize(cell_size_m));
        }
        if occupied.iter().all(|&o| o) {
            return Err(GridError::NoFreeCells);
        }
        Ok(OccupancyGrid {
            width,
            height,
            occupied,
            cell_size_m,
        })
    }

    pub fn open(width: usize, height: usize) -> Self {
        Self::new(width, height, vec![false; width * height], DEFAULT_CELL_SIZE_M)
            .expect("open grid must have positive dimensions")
    }

    pub fn with_cell_size(mut self, cell_size_m: f64) -> Result<Self, GridError> {
        if !(cell_size_m > 0.0 && cell_size_m.is_finite()) {
            return Err(GridError::BadCellSize(cell_size_m));
        }
        self.cell_size_m = cell_size_m;
        Ok(self)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn cell_size_m(&self) -> f64 {
        self.cell_size_m
    }

    pub fn num_cells(&self) -> usize {
        self.width * self.height
    }

    pub fn index(&self, c: Cell) -> usize {
        c.y * self.width + c.x
    }

    pub fn cell_at(&self, idx: usize) -> Cell {
        Cell::new(idx % self.width, idx / self.width)
    }

    pub fn in_bounds(&self, x: i64, y: i64) -> bool {
        x >= 0 && y >= 0 && (x as usize) < self.width && (y as usize) < self.height
    }

    pub fn contains(&self, c: Cell) -> bool {
        c.x < self.width && c.y < self.height
    }

    pub fn is_free(&self, c: Cell) -> bool {
        self.contains(c) && !self.occupied[self.index(c)]
    }

    pub fn is_occupied(&self, c: Cell) -> bool {
        self.contains(c) && self.occupied[self.index(c)]
    }

    /// Free cells in row-major order.
    pub fn free_cells(&self) -> impl Iterator<Item = Cell> + '_ {
        (0..self.num_cells())
            .filter(|&i| !self.occupied[i])
            .map(|i| self.cell_at(i))
    }

    pub fn num_free(&self) -> usize {
        self.occupied.iter().filter(|&&o| !o).count()
    }

    /// The in-bounds neighbor of `c` in direction `dir`, free or not.
    pub fn neighbor(&self, c: Cell, dir: Direction) -> Option<Cell> {
        let (dx, dy) = dir.delta();
        let (nx, ny) = (c.x as i64 + dx, c.y as i64 + dy);
        self.in_bounds(nx, ny)
            .then(|| Cell::new(nx as usize, ny as usize))
    }

    /// The same map turned a quarter clockwise. Cell `(x, y)` moves to
    /// `(height - 1 - y, x)`.
    pub fn rotated_cw(&self) -> OccupancyGrid {
        let (w, h) = (self.height, self.width);
        let mut occupied = vec![false; w * h];
        for c in (0..self.num_cells()).map(|i| self.cell_at(i)) {
            let r = self.rotate_cell_cw(c);
            occupied[r.y * w + r.x] = self.occupied[self.index(c)];
        }
        OccupancyGrid {
            width: w,
            height: h,
            occupied,
            cell_size_m: self.cell_size_m,
        }
    }

    pub fn rotate_cell_cw(&self, c: Cell) -> Cell {
        Cell::new(self.height - 1 - c.y, c.x)
    }

    pub fn to_text(&self) -> String {
        let mut s = String::with_capacity((self.width + 1) * self.height);
        for y in 0..self.height {
            for x in 0..self.width {
                s.push(if self.occupied[y * self.width + x] { '#' } else { '.' });
            }
            s.push('\n');
        }
        s
    }
}

impl FromStr for OccupancyGrid {
    type Err = GridError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        load_grid(s)
    }
}

/// Parses a text map of `.` (free) and `#` (occupied) rows. Leading and
/// trailing blank lines and trailing `\r` are ignored.
pub fn load_grid(text: &str) -> Result<OccupancyGrid, GridError> {
    let rows: Vec<&str> = text
        .lines()
        .map(|l| l.trim_end_matches('\r'))
        .collect::<Vec<_>>();
    let start = rows.iter().position(|r| !r.trim().is_empty());
    let end = rows.iter().rposition(|r| !r.trim().is_empty());
    let rows = match (start, end) {
        (Some(s), Some(e)) => &rows[s..=e],
        _ => return Err(GridError::Empty),
    };
    let width = rows[0].chars().count();
    let mut occupied = Vec::with_capacity(width * rows.len());
    for (row, line) in rows.iter().enumerate() {
        let found = line.chars().count();
        if found != width {
            return Err(GridError::RaggedRow {
                row,
                expected: width,
                found,
            });
        }
        for (col, ch) in line.chars().enumerate() {
            match ch {
                '.' => occupied.push(false),
                '#' => occupied.push(true),
                ch => return Err(GridError::UnknownChar { row, col, ch }),
            }
        }
    }
    OccupancyGrid::new(width, rows.len(), occupied, DEFAULT_CELL_SIZE_M)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RobotPose {
    pub x: usize,
    pub y: usize,
    pub orientation: Direction,
}

impl RobotPose {
    pub const fn new(x: usize, y: usize, orientation: Direction) -> Self {
        RobotPose { x, y, orientation }
    }

    /// Builds a pose and checks it sits on a free in-bounds cell.
    pub fn on(grid: &OccupancyGrid, x: usize, y: usize, orientation: Direction) -> Result<Self, GridError> {
        let pose = RobotPose::new(x, y, orientation);
        if pose.is_valid(grid) {
            Ok(pose)
        } else {
            Err(GridError::InvalidPose { x, y })
        }
    }

    pub fn cell(&self) -> Cell {
        Cell::new(self.x, self.y)
    }

    pub fn is_valid(&self, grid: &OccupancyGrid) -> bool {
        grid.is_free(self.cell())
    }

    pub fn rotated_cw(&self, grid: &OccupancyGrid) -> RobotPose {
        let c = grid.rotate_cell_cw(self.cell());
        RobotPose::new(c.x, c.y, self.orientation.rotate_cw())
    }
}

impl fmt::Display for RobotPose {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {}, {})", self.x, self.y, self.orientation)
    }
}

/// Turns the robot to face `dir`, then steps one cell that way if the target
/// is in bounds and free. A blocked step still turns the robot.
pub fn apply_move(grid: &OccupancyGrid, pose: RobotPose, dir: Direction) -> RobotPose {
    match grid.neighbor(pose.cell(), dir) {
        Some(next) if grid.is_free(next) => RobotPose::new(next.x, next.y, dir),
        _ => RobotPose::new(pose.x, pose.y, dir),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FanParams {
    pub fov_degrees: f64,
    pub range_cells: f64,
    #[serde(default = "default_occlusion")]
    pub occlusion_enabled: bool,
}

fn default_occlusion() -> bool {
    true
}

impl Default for FanParams {
    fn default() -> Self {
        FanParams {
            fov_degrees: 90.0,
            range_cells: 4.0,
            occlusion_enabled: true,
        }
    }
}

impl FanParams {
    pub fn validate(&self) -> Result<(), GridError> {
        if !(self.fov_degrees > 0.0 && self.fov_degrees <= 180.0) {
            return Err(GridError::InvalidFan(format!(
                "fov_degrees must be in (0, 180], got {}",
                self.fov_degrees
            )));
        }
        if !(self.range_cells >= 1.0 && self.range_cells.is_finite()) {
            return Err(GridError::InvalidFan(format!(
                "range_cells must be >= 1, got {}",
                self.range_cells
            )));
        }
        Ok(())
    }
}

/// A set of cells on a particular grid: sorted list plus a membership mask.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CellSet {
    cells: Vec<Cell>,
    mask: Vec<bool>,
    width: usize,
}

impl CellSet {
    pub fn empty(grid: &OccupancyGrid) -> Self {
        CellSet {
            cells: Vec::new(),
            mask: vec![false; grid.num_cells()],
            width: grid.width(),
        }
    }

    pub fn from_cells(grid: &OccupancyGrid, cells: impl IntoIterator<Item = Cell>) -> Self {
        let mut set = CellSet::empty(grid);
        for c in cells {
            set.insert(c);
        }
        set
    }

    fn insert(&mut self, c: Cell) {
        let i = c.y * self.width + c.x;
        if !self.mask[i] {
            self.mask[i] = true;
            let pos = self.cells.binary_search(&c).unwrap_or_else(|p| p);
            self.cells.insert(pos, c);
        }
    }

    pub fn contains(&self, c: Cell) -> bool {
        c.x < self.width && self.mask.get(c.y * self.width + c.x).copied().unwrap_or(false)
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    /// Cells in row-major order.
    pub fn cells(&self) -> &[Cell] {
        &self.cells
    }

    pub fn iter(&self) -> impl Iterator<Item = Cell> + '_ {
        self.cells.iter().copied()
    }

    pub fn is_subset(&self, other: &CellSet) -> bool {
        self.cells.iter().all(|&c| other.contains(c))
    }
}

// Rounds n/d to the nearest integer, halves away from zero. Symmetric under
// negation, which keeps the ray rasterization rotation-equivariant.
fn div_round(n: i64, d: i64) -> i64 {
    debug_assert!(d > 0);
    let q = (2 * n.abs() + d) / (2 * d);
    if n < 0 {
        -q
    } else {
        q
    }
}

/// Cells on the discrete segment from `from` to `to`, excluding both ends.
pub(crate) fn ray_interior(from: Cell, to: Cell) -> impl Iterator<Item = (i64, i64)> {
    let (x0, y0) = (from.x as i64, from.y as i64);
    let dx = to.x as i64 - x0;
    let dy = to.y as i64 - y0;
    let steps = dx.abs().max(dy.abs());
    (1..steps.max(1)).map(move |i| {
        if dx.abs() >= dy.abs() {
            (x0 + dx.signum() * i, y0 + div_round(dy * i, steps))
        } else {
            (x0 + div_round(dx * i, steps), y0 + dy.signum() * i)
        }
    })
}

/// Whether `c` passes the fan's range and angle tests from `pose`.
pub(crate) fn in_fan_geometry(pose: &RobotPose, c: Cell, fan: &FanParams) -> bool {
    let dx = c.x as i64 - pose.x as i64;
    let dy = c.y as i64 - pose.y as i64;
    if dx == 0 && dy == 0 {
        return false;
    }
    let d2 = (dx * dx + dy * dy) as f64;
    if d2 > fan.range_cells * fan.range_cells + 1e-9 {
        return false;
    }
    let (hx, hy) = pose.orientation.delta();
    let dot = (hx * dx + hy * dy) as f64;
    let cross = (hx * dy - hy * dx).abs() as f64;
    let angle = cross.atan2(dot);
    angle <= (fan.fov_degrees / 2.0).to_radians() + 1e-9
}

/// The fan-shaped visible region V from `pose`: free cells within range and
/// half-angle of the heading, optionally not hidden behind occupied cells.
/// The robot's own cell is never included.
pub fn fan_region(grid: &OccupancyGrid, pose: &RobotPose, fan: &FanParams) -> CellSet {
    let mut set = CellSet::empty(grid);
    let r = fan.range_cells.floor() as i64;
    let (px, py) = (pose.x as i64, pose.y as i64);
    for y in (py - r).max(0)..=(py + r).min(grid.height() as i64 - 1) {
        for x in (px - r).max(0)..=(px + r).min(grid.width() as i64 - 1) {
            let c = Cell::new(x as usize, y as usize);
            if !grid.is_free(c) || !in_fan_geometry(pose, c, fan) {
                continue;
            }
            if fan.occlusion_enabled
                && ray_interior(pose.cell(), c).any(|(ix, iy)| {
                    grid.is_occupied(Cell::new(ix as usize, iy as usize))
                })
            {
                continue;
            }
            set.insert(c);
        }
    }
    set
}
