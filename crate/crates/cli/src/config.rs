use std::path::{Path, PathBuf};

use lcom_search::bridge::Endpoint;
use lcom_search::harness::{DetectorSpec, EpisodeConfig, EpisodeLimits, Scene};
use lcom_search::planner::PlannerConfig;
use lcom_search::{ConfidenceMap, LcomMode, NoiseParams, RewardConfig};
use serde::{Deserialize, Serialize};

use crate::CliError;

/// Overrides the endpoint of every bridge detector in a config.
pub const ENDPOINT_ENV: &str = "LCOM_DETECTOR_ENDPOINT";

fn default_seeds() -> Vec<u64> {
    vec![0]
}

fn default_out() -> PathBuf {
    PathBuf::from("out")
}

fn default_static() -> NoiseParams {
    NoiseParams::SEGMENTATION_STATIC
}

fn default_detector() -> DetectorSpec {
    DetectorSpec::Static { params: NoiseParams::SEGMENTATION_STATIC, confidence: 1.0 }
}

/// Confidence-to-noise map: a built-in profile name or an explicit table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Profile {
    Named(String),
    Custom(ConfidenceMap),
}

impl Default for Profile {
    fn default() -> Self {
        Profile::Named(ConfidenceMap::SEGMENTATION.to_string())
    }
}

impl Profile {
    pub fn resolve(&self) -> Result<ConfidenceMap, CliError> {
        let map = match self {
            Profile::Named(n) => ConfidenceMap::builtin(n).map_err(|e| CliError::config("profile", e))?,
            Profile::Custom(m) => m.clone(),
        };
        map.validate().map_err(|e| CliError::config("profile", e))?;
        Ok(map)
    }
}

/// One experimental condition in a benchmark.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ArmConfig {
    pub name: String,
    pub detector: DetectorSpec,
    pub mode: LcomMode,
    /// Replaces the top-level `static_params` for this arm.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub static_params: Option<NoiseParams>,
    /// Replaces `planner.planning_noise` for this arm.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub planning_noise: Option<NoiseParams>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// Scene files, or directories whose `*.toml` files are all used.
    pub scenes: Vec<PathBuf>,
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    #[serde(default = "default_out")]
    pub out_dir: PathBuf,
    #[serde(default = "default_detector")]
    pub detector: DetectorSpec,
    #[serde(default)]
    pub mode: LcomMode,
    #[serde(default = "default_static")]
    pub static_params: NoiseParams,
    #[serde(default)]
    pub profile: Profile,
    #[serde(default)]
    pub planner: PlannerConfig,
    #[serde(default)]
    pub rewards: RewardConfig,
    #[serde(default)]
    pub limits: EpisodeLimits,
    /// Benchmark arms. Empty means one arm from `detector` and `mode`.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub arms: Vec<ArmConfig>,
}

/// A fully resolved arm, ready to run.
#[derive(Debug, Clone)]
pub struct Arm {
    pub name: String,
    pub config: EpisodeConfig,
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// Reads a config file; relative paths inside it are taken relative to
    /// the file's directory.
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        let mut cfg = Self::from_toml(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new(""));
        for s in &mut cfg.scenes {
            if s.is_relative() {
                *s = base.join(&*s);
            }
        }
        if cfg.out_dir.is_relative() {
            cfg.out_dir = base.join(&cfg.out_dir);
        }
        Ok(cfg)
    }

    /// Keeps only arms in `mode`; without explicit arms, sets the mode.
    pub fn restrict_mode(&mut self, mode: LcomMode) -> Result<(), CliError> {
        if self.arms.is_empty() {
            self.mode = mode;
            return Ok(());
        }
        self.arms.retain(|a| a.mode == mode);
        if self.arms.is_empty() {
            return Err(CliError::config("arms", format!("no arm uses mode {mode}")));
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<(), CliError> {
        if self.scenes.is_empty() {
            return Err(CliError::config("scenes", "need at least one scene"));
        }
        if self.seeds.is_empty() {
            return Err(CliError::config("seeds", "need at least one seed"));
        }
        self.arms()?;
        Ok(())
    }

    /// Resolved arms, with the endpoint environment override applied.
    pub fn arms(&self) -> Result<Vec<Arm>, CliError> {
        let map = self.profile.resolve()?;
        let endpoint = match std::env::var(ENDPOINT_ENV) {
            Ok(s) if !s.trim().is_empty() => Some(
                s.parse::<Endpoint>()
                    .map_err(|e| CliError::config(ENDPOINT_ENV, e))?,
            ),
            _ => None,
        };
        let explicit = if self.arms.is_empty() {
            vec![ArmConfig {
                name: self.mode.to_string(),
                detector: self.detector.clone(),
                mode: self.mode,
                static_params: None,
                planning_noise: None,
            }]
        } else {
            self.arms.clone()
        };
        let mut seen = std::collections::HashSet::new();
        explicit
            .into_iter()
            .enumerate()
            .map(|(i, a)| {
                let path = format!("arms[{i}]");
                if a.name.is_empty() || a.name.contains(['/', '\\', ',']) || !seen.insert(a.name.clone()) {
                    return Err(CliError::config(&path, format!("arm name {:?} is empty, duplicated or unsafe", a.name)));
                }
                let mut detector = a.detector;
                if let (Some(ep), DetectorSpec::Bridge { endpoint, .. }) = (&endpoint, &mut detector) {
                    *endpoint = ep.clone();
                }
                let mut planner = self.planner;
                if let Some(p) = a.planning_noise {
                    planner.planning_noise = p;
                }
                let config = EpisodeConfig {
                    detector,
                    mode: a.mode,
                    static_params: a.static_params.unwrap_or(self.static_params),
                    confidence_map: map.clone(),
                    planner,
                    rewards: self.rewards,
                    limits: self.limits,
                };
                config.validate().map_err(|e| CliError::config(&path, e))?;
                Ok(Arm { name: a.name, config })
            })
            .collect()
    }

    /// Scene files named by `scenes`, directories expanded and sorted.
    pub fn scene_paths(&self) -> Result<Vec<PathBuf>, CliError> {
        let mut out = Vec::new();
        for p in &self.scenes {
            if p.is_dir() {
                let mut found: Vec<PathBuf> = std::fs::read_dir(p)
                    .map_err(|e| CliError::io(p, e))?
                    .filter_map(|e| e.ok().map(|e| e.path()))
                    .filter(|f| f.extension().is_some_and(|x| x == "toml"))
                    .collect();
                found.sort();
                out.extend(found);
            } else if p.is_file() {
                out.push(p.clone());
            } else {
                return Err(CliError::Config(format!("scene file not found: {}", p.display())));
            }
        }
        if out.is_empty() {
            return Err(CliError::config("scenes", "no scene files found"));
        }
        Ok(out)
    }

    pub fn load_scenes(&self) -> Result<Vec<Scene>, CliError> {
        let scenes = self
            .scene_paths()?
            .iter()
            .map(|p| Scene::load_valid(p).map_err(CliError::from))
            .collect::<Result<Vec<_>, _>>()?;
        let mut names = std::collections::HashSet::new();
        if let Some(dup) = scenes.iter().find(|s| !names.insert(s.name.clone())) {
            return Err(CliError::Config(format!("duplicate scene name {:?}", dup.name)));
        }
        Ok(scenes)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const FULL: &str = r#"
scenes = ["scenes"]
seeds = [1, 2, 3]
out_dir = "out/bench"
profile = "hu-segmentation"

[planner]
depth = 3
exploration_c = 10000.0
budget = { simulations = 500 }

[limits]
max_steps = 80

[[arms]]
name = "static"
mode = "static"
detector = { kind = "confidence", p_high_given_a = 0.9, p_high_given_not_a = 0.2 }

[[arms]]
name = "dynamic-both"
mode = "dynamic-both"
detector = { kind = "confidence", p_high_given_a = 0.9, p_high_given_not_a = 0.2 }
"#;

    #[test]
    fn parse_and_round_trip() {
        let cfg = RunConfig::from_toml(FULL).unwrap();
        assert_eq!(cfg.seeds, vec![1, 2, 3]);
        assert_eq!(cfg.limits, EpisodeLimits { max_steps: 80, find_budget: 10 });
        assert_eq!(cfg.planner.budget, lcom_search::planner::Budget::Simulations(500));
        assert_eq!(cfg.arms.len(), 2);
        let again = RunConfig::from_toml(&cfg.to_toml()).unwrap();
        assert_eq!(again, cfg);
    }

    #[test]
    fn minimal_config_gets_one_arm() {
        let cfg = RunConfig::from_toml("scenes = [\"a.toml\"]\nmode = \"dynamic-tpr\"\n").unwrap();
        let arms = cfg.arms().unwrap();
        assert_eq!(arms.len(), 1);
        assert_eq!(arms[0].name, "dynamic-tpr");
        assert_eq!(RunConfig::from_toml(&cfg.to_toml()).unwrap(), cfg);
    }

    #[test]
    fn errors_name_the_field() {
        let err = RunConfig::from_toml("scenes = []\nseedz = [1]\n").unwrap_err().to_string();
        assert!(err.contains("seedz"), "{err}");
        let err = RunConfig::from_toml("scenes = [\"a\"]\nmode = \"sometimes\"\n").unwrap_err().to_string();
        assert!(err.contains("mode"), "{err}");
        let mut cfg = RunConfig::from_toml(FULL).unwrap();
        cfg.arms[1].detector = DetectorSpec::confidence(0.9, 1.5);
        let err = cfg.validate().unwrap_err().to_string();
        assert!(err.contains("arms[1]"), "{err}");
        cfg.seeds.clear();
        assert!(cfg.validate().unwrap_err().to_string().contains("seeds"));
    }

    #[test]
    fn restrict_mode_filters_arms() {
        let mut cfg = RunConfig::from_toml(FULL).unwrap();
        cfg.restrict_mode(LcomMode::DynamicBoth).unwrap();
        assert_eq!(cfg.arms.len(), 1);
        assert!(cfg.clone().restrict_mode(LcomMode::DynamicSigma).is_err());
    }

    #[test]
    fn custom_profile() {
        let text = r#"
scenes = ["a"]
[profile]
fallback = { sigma = 1.0, tpr = 0.5, tnr = 0.9 }
bands = [{ threshold = 0.5, params = { sigma = 0.5, tpr = 0.8, tnr = 0.9 } }]
"#;
        let cfg = RunConfig::from_toml(text).unwrap();
        let map = cfg.profile.resolve().unwrap();
        assert_eq!(map.map(0.7).tpr, 0.8);
        assert_eq!(map.map(0.2).tpr, 0.5);
    }
}
