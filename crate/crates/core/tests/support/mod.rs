//! Independent reference computations shared by the integration tests.
#![allow(dead_code)]

use lcom_search::grid::{apply_move, fan_region, Cell, Direction, FanParams, OccupancyGrid, RobotPose};
use lcom_search::lcom::{observation_likelihood, sample_observation, ConfidenceMap, NoiseParams};
use lcom_search::RewardConfig;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use statrs::distribution::{ChiSquared, ContinuousCDF};

/// Row-major argmax, first index wins ties.
pub fn argmax(p: &[f64]) -> usize {
    let mut best = 0;
    for i in 1..p.len() {
        if p[i] > p[best] {
            best = i;
        }
    }
    best
}

pub struct Model<'a> {
    pub grid: &'a OccupancyGrid,
    pub fan: &'a FanParams,
    pub rewards: &'a RewardConfig,
    pub noise: &'a NoiseParams,
}

/// Exact finite-horizon expectimax over the six candidate actions
/// `[N, E, S, W, Look, Find(argmax)]`, with beliefs propagated by
/// enumerating every observation. Returns the Q value of each action.
pub fn expectimax_q(m: &Model<'_>, belief: &[f64], pose: RobotPose, depth: u32) -> [f64; 6] {
    let g = m.rewards.discount;
    let mut q = [0.0; 6];
    for (i, dir) in Direction::ALL.into_iter().enumerate() {
        let next = apply_move(m.grid, pose, dir);
        q[i] = m.rewards.move_cost + g * value(m, belief, next, depth - 1);
    }

    let view = fan_region(m.grid, &pose, m.fan);
    let mut outcomes: Vec<Option<Cell>> = vec![None];
    outcomes.extend(view.iter().map(Some));
    let mut look = m.rewards.look_cost;
    for z in outcomes {
        let joint: Vec<f64> = (0..belief.len())
            .map(|i| {
                if belief[i] == 0.0 {
                    0.0
                } else {
                    let c = m.grid.cell_at(i);
                    belief[i] * observation_likelihood(z, c, &view, m.noise).unwrap()
                }
            })
            .collect();
        let pz: f64 = joint.iter().sum();
        if pz <= 0.0 {
            continue;
        }
        let post: Vec<f64> = joint.iter().map(|j| j / pz).collect();
        look += g * pz * value(m, &post, pose, depth - 1);
    }
    q[4] = look;

    let target = argmax(belief);
    let p = belief[target];
    let mut find = p * m.rewards.find_success + (1.0 - p) * m.rewards.find_failure;
    if p < 1.0 {
        let mut rest = belief.to_vec();
        rest[target] = 0.0;
        let s: f64 = rest.iter().sum();
        rest.iter_mut().for_each(|r| *r /= s);
        find += g * (1.0 - p) * value(m, &rest, pose, depth - 1);
    }
    q[5] = find;
    q
}

pub fn value(m: &Model<'_>, belief: &[f64], pose: RobotPose, depth: u32) -> f64 {
    if depth == 0 {
        return 0.0;
    }
    expectimax_q(m, belief, pose, depth).into_iter().fold(f64::NEG_INFINITY, f64::max)
}

/// Shortest action count to find each cell by brute force: walks every
/// string of moves up to `max_moves` long from `start` and records, per
/// cell, the shortest string ending at a pose that sees it (then Look +
/// Find). Indexed like the grid; `None` where no string works.
pub fn exhaustive_oracle(
    grid: &OccupancyGrid,
    fan: &FanParams,
    start: RobotPose,
    max_moves: u32,
) -> Vec<Option<u32>> {
    let views: std::collections::HashMap<RobotPose, Vec<usize>> = all_poses(grid)
        .into_iter()
        .map(|p| (p, fan_region(grid, &p, fan).iter().map(|c| grid.index(c)).collect()))
        .collect();
    let mut best = vec![None::<u32>; grid.num_cells()];
    let mut stack = vec![(start, 0u32)];
    while let Some((pose, len)) = stack.pop() {
        for &i in &views[&pose] {
            if best[i].map_or(true, |b| len + 2 < b) {
                best[i] = Some(len + 2);
            }
        }
        if len < max_moves {
            for d in Direction::ALL {
                stack.push((apply_move(grid, pose, d), len + 1));
            }
        }
    }
    best
}

pub const SAMPLES: usize = 100_000;

pub struct SamplerConfig {
    pub name: &'static str,
    pub map: &'static str,
    pub robot: RobotPose,
    pub object: Cell,
    pub noise: NoiseParams,
}

pub fn sampler_configs() -> Vec<SamplerConfig> {
    let room = "......\n......\n..#...\n......\n......";
    vec![
        SamplerConfig {
            name: "object in view, segmentation high",
            map: room,
            robot: RobotPose::new(0, 2, Direction::East),
            object: Cell::new(3, 1),
            noise: ConfidenceMap::segmentation().map(1.0),
        },
        SamplerConfig {
            name: "object outside view, segmentation static",
            map: room,
            robot: RobotPose::new(0, 2, Direction::East),
            object: Cell::new(5, 4),
            noise: NoiseParams::SEGMENTATION_STATIC,
        },
        SamplerConfig {
            name: "vild low confidence",
            map: room,
            robot: RobotPose::new(2, 4, Direction::North),
            object: Cell::new(2, 1),
            noise: ConfidenceMap::vild().map(0.1),
        },
        SamplerConfig {
            name: "near-perfect sensor",
            map: room,
            robot: RobotPose::new(5, 0, Direction::South),
            object: Cell::new(5, 3),
            noise: NoiseParams::PERFECT,
        },
        SamplerConfig {
            name: "wide sigma, heavy smoothing",
            map: room,
            robot: RobotPose::new(0, 0, Direction::East),
            object: Cell::new(2, 0),
            noise: NoiseParams::new(2.0, 0.6, 0.7, 0.05).unwrap(),
        },
    ]
}

/// Pearson statistic and p-value, pooling categories with expected count
/// below five into one bin.
pub fn chi_square(observed: &[u64], probs: &[f64], n: usize) -> (f64, f64) {
    let mut stat = 0.0;
    let mut bins = 0;
    let (mut pool_o, mut pool_e) = (0.0, 0.0);
    for (&o, &p) in observed.iter().zip(probs) {
        let e = p * n as f64;
        if e < 5.0 {
            pool_o += o as f64;
            pool_e += e;
            continue;
        }
        stat += (o as f64 - e).powi(2) / e;
        bins += 1;
    }
    if pool_e > 0.0 {
        stat += (pool_o - pool_e).powi(2) / pool_e.max(1e-12);
        bins += 1;
    }
    let dist = ChiSquared::new((bins - 1) as f64).unwrap();
    (stat, dist.sf(stat))
}

/// Goodness of fit of `SAMPLES` draws from the sampler against the
/// likelihood, for one configuration.
pub fn sampler_p_value(cfg: &SamplerConfig, seed: u64) -> (f64, f64) {
    let g: OccupancyGrid = cfg.map.parse().unwrap();
    let view = fan_region(&g, &cfg.robot, &FanParams::default());
    assert!(!view.is_empty(), "{}", cfg.name);
    let mut probs = vec![observation_likelihood(None, cfg.object, &view, &cfg.noise).unwrap()];
    probs.extend(view.iter().map(|z| observation_likelihood(Some(z), cfg.object, &view, &cfg.noise).unwrap()));
    let mut counts = vec![0u64; probs.len()];
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..SAMPLES {
        let s = sample_observation(&mut rng, cfg.object, &view, &cfg.noise);
        let bin = match s.detection {
            None => 0,
            Some(z) => 1 + view.cells().iter().position(|&c| c == z).expect("detection in view"),
        };
        counts[bin] += 1;
    }
    chi_square(&counts, &probs, SAMPLES)
}

/// Deterministic corpus of small maps: hand-written layouts plus random
/// ones, all at most 4x4.
pub fn small_map_corpus() -> Vec<OccupancyGrid> {
    let fixed = [
        "..\n..",
        "....",
        ".#..",
        "...\n.#.\n...",
        "..#\n..#\n...",
        "....\n.##.\n....\n....",
        "#...\n..#.\n.#..\n....",
        "....\n###.\n....\n.###",
        ".\n.\n.\n.",
    ];
    let mut maps: Vec<OccupancyGrid> = fixed.iter().map(|t| t.parse().unwrap()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    while maps.len() < 30 {
        let (w, h) = (rng.gen_range(2..=4), rng.gen_range(2..=4));
        let text: Vec<String> = (0..h)
            .map(|_| (0..w).map(|_| if rng.gen_bool(0.25) { '#' } else { '.' }).collect())
            .collect();
        if let Ok(g) = text.join("\n").parse::<OccupancyGrid>() {
            if g.num_free() >= 2 {
                maps.push(g);
            }
        }
    }
    maps
}

/// Every valid pose on a grid.
pub fn all_poses(grid: &OccupancyGrid) -> Vec<RobotPose> {
    grid.free_cells()
        .flat_map(|c| Direction::ALL.map(|d| RobotPose::new(c.x, c.y, d)))
        .collect()
}

/// Dense belief vector with the given masses on cells.
pub fn dense(grid: &OccupancyGrid, masses: &[(Cell, f64)]) -> Vec<f64> {
    let mut v = vec![0.0; grid.num_cells()];
    for &(c, p) in masses {
        v[grid.index(c)] = p;
    }
    v
}
