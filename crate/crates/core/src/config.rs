//! TOML experiment description. Unknown keys are rejected everywhere.
//!
//! ```toml
//! strategy = "Ours"
//! budget = 60000
//! seeds = [0, 1, 2]
//!
//! [env]
//! name = "point-maze-medium"
//!
//! [dataset]
//! trajectories = 100
//!
//! [corruption]
//! mode = "coverage"
//! radius = 1.5
//! ```

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::agent::AgentConfig;
use crate::envs::{
    corrupt_coverage, corrupt_orthogonal, corrupt_subsample, generate_prior_data, GenerationMode,
    PointMazeConfig, PriorDatasetSpec, Task,
};
use crate::error::{Error, Result};
use crate::labeler::LabelerConfig;
use crate::mdp::{dataset, ReplayBuffer};
use crate::strategy::{JsrlParams, Strategy, StrategyKind};

/// Environment variable that replaces the configured output directory.
pub const OUTPUT_ROOT_ENV: &str = "EXPLORE_OUTPUT_ROOT";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnvConfig {
    /// `point-maze-umaze`, `point-maze-medium`, `point-maze-large`,
    /// `point-maze` (needs `layout_file`), `key-door` or `chain`.
    pub name: String,
    pub layout_file: Option<PathBuf>,
    #[serde(default = "defaults::step_size")]
    pub step_size: f64,
    #[serde(default = "defaults::goal_radius")]
    pub goal_radius: f64,
    #[serde(default = "defaults::start_noise")]
    pub start_noise: f64,
    #[serde(default = "defaults::max_episode_steps")]
    pub max_episode_steps: usize,
    #[serde(default = "defaults::gamma")]
    pub gamma: f64,
}

impl EnvConfig {
    pub fn named(name: &str) -> Self {
        let d = PointMazeConfig::default();
        Self {
            name: name.to_string(),
            layout_file: None,
            step_size: d.step_size,
            goal_radius: d.goal_radius,
            start_noise: d.start_noise,
            max_episode_steps: d.max_episode_steps,
            gamma: d.gamma,
        }
    }

    pub fn point_maze(&self) -> PointMazeConfig {
        PointMazeConfig {
            step_size: self.step_size,
            goal_radius: self.goal_radius,
            start_noise: self.start_noise,
            max_episode_steps: self.max_episode_steps,
            gamma: self.gamma,
        }
    }

    pub fn build(&self) -> Result<Task> {
        let layout = match &self.layout_file {
            Some(p) => Some(fs::read_to_string(p).map_err(|e| {
                Error::config(format!("env.layout_file {}: {e}", p.display()))
            })?),
            None => None,
        };
        Task::from_name(&self.name, layout.as_deref(), &self.point_maze())
    }
}

mod defaults {
    use crate::envs::PointMazeConfig;

    pub fn step_size() -> f64 {
        PointMazeConfig::default().step_size
    }
    pub fn goal_radius() -> f64 {
        PointMazeConfig::default().goal_radius
    }
    pub fn start_noise() -> f64 {
        PointMazeConfig::default().start_noise
    }
    pub fn max_episode_steps() -> usize {
        PointMazeConfig::default().max_episode_steps
    }
    pub fn gamma() -> f64 {
        PointMazeConfig::default().gamma
    }
    pub fn seeds() -> Vec<u64> {
        vec![0]
    }
    pub fn output_dir() -> std::path::PathBuf {
        "runs".into()
    }
}

/// Prior data: read from `file` if given, otherwise generated.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DatasetConfig {
    pub file: Option<PathBuf>,
    pub mode: GenerationMode,
    pub trajectories: usize,
    pub noise: f64,
    /// Fixed across experiment seeds, so every seed sees the same data.
    pub seed: u64,
}

impl Default for DatasetConfig {
    fn default() -> Self {
        Self {
            file: None,
            mode: GenerationMode::Diverse,
            trajectories: 100,
            noise: 0.3,
            seed: 0,
        }
    }
}

impl DatasetConfig {
    pub fn spec(&self) -> PriorDatasetSpec {
        PriorDatasetSpec {
            mode: self.mode,
            trajectories: self.trajectories,
            noise: self.noise,
            seed: self.seed,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CorruptionMode {
    #[default]
    None,
    /// Drop transitions that move towards the goal along either axis.
    Orthogonal,
    /// Drop transitions within `radius` of the goal.
    Coverage,
    /// Keep a uniformly random `fraction` of transitions.
    Subsample,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CorruptionConfig {
    pub mode: CorruptionMode,
    pub radius: Option<f64>,
    pub fraction: Option<f64>,
    /// Axis signs of the removed direction; defaults to the start-to-goal signs.
    pub direction: Option<[f64; 2]>,
    pub seed: u64,
}

impl CorruptionConfig {
    fn validate(&self) -> Result<()> {
        match self.mode {
            CorruptionMode::Coverage if !self.radius.is_some_and(|r| r > 0.0) => {
                Err(Error::config("corruption.radius must be set and positive for mode \"coverage\""))
            }
            CorruptionMode::Subsample if !self.fraction.is_some_and(|f| f > 0.0 && f <= 1.0) => {
                Err(Error::config("corruption.fraction must lie in (0, 1] for mode \"subsample\""))
            }
            _ => Ok(()),
        }
    }

    pub fn apply(&self, task: &Task, data: &ReplayBuffer) -> Result<ReplayBuffer> {
        self.validate()?;
        let needs_layout = || {
            task.layout()
                .ok_or_else(|| Error::config(format!("{:?} corruption needs a spatial task", self.mode)))
        };
        match self.mode {
            CorruptionMode::None => Ok(data.clone()),
            CorruptionMode::Orthogonal => {
                let layout = needs_layout()?;
                let toward = self.direction.unwrap_or_else(|| {
                    let (s, g) = (layout.center(layout.start), layout.center(layout.goal));
                    [(g[0] - s[0]).signum(), (g[1] - s[1]).signum()]
                });
                Ok(corrupt_orthogonal(data, toward))
            }
            CorruptionMode::Coverage => {
                let layout = needs_layout()?;
                corrupt_coverage(data, layout.center(layout.goal), self.radius.unwrap_or_default())
            }
            CorruptionMode::Subsample => {
                corrupt_subsample(data, self.fraction.unwrap_or(1.0), self.seed)
            }
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct StrategyParams {
    /// Overrides the behaviour-cloning weight of the chosen strategy.
    pub bc_coef: Option<f64>,
    pub jsrl: Option<JsrlParams>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EvalConfig {
    /// Environment steps between metric rows.
    pub interval: u64,
    pub episodes: usize,
    /// Side of the square regions used for coverage.
    pub coverage_cell: f64,
    /// Rows sampled for the bonus and reward-error diagnostics.
    pub diagnostic_samples: usize,
    /// Record elapsed seconds; off by default so reruns are byte-identical.
    pub wall_clock: bool,
    pub checkpoint: bool,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            interval: 1000,
            episodes: 20,
            coverage_cell: 1.0,
            diagnostic_samples: 256,
            wall_clock: false,
            checkpoint: true,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub strategy: StrategyKind,
    /// Strategies of a sweep; empty means just `strategy`.
    #[serde(default)]
    pub strategies: Vec<StrategyKind>,
    pub budget: u64,
    #[serde(default = "defaults::seeds")]
    pub seeds: Vec<u64>,
    #[serde(default = "defaults::output_dir")]
    pub output_dir: PathBuf,
    /// Worker threads for sweeps.
    #[serde(default)]
    pub threads: Option<usize>,
    pub env: EnvConfig,
    #[serde(default)]
    pub dataset: DatasetConfig,
    #[serde(default)]
    pub corruption: CorruptionConfig,
    #[serde(default)]
    pub strategy_params: StrategyParams,
    #[serde(default)]
    pub agent: AgentConfig,
    #[serde(default)]
    pub labeler: LabelerConfig,
    #[serde(default)]
    pub eval: EvalConfig,
}

impl ExperimentConfig {
    /// Minimal config with defaults everywhere else.
    pub fn new(env: &str, strategy: StrategyKind, budget: u64) -> Self {
        Self {
            strategy,
            strategies: Vec::new(),
            budget,
            seeds: defaults::seeds(),
            output_dir: defaults::output_dir(),
            threads: None,
            env: EnvConfig::named(env),
            dataset: DatasetConfig::default(),
            corruption: CorruptionConfig::default(),
            strategy_params: StrategyParams::default(),
            agent: AgentConfig::default(),
            labeler: LabelerConfig::default(),
            eval: EvalConfig::default(),
        }
    }

    /// Parses and validates; relative file paths resolve against `base`.
    pub fn parse(text: &str, base: Option<&Path>) -> Result<Self> {
        let mut cfg: Self = toml::from_str(text).map_err(|e| Error::config(e.to_string()))?;
        if let Some(base) = base {
            for p in [&mut cfg.env.layout_file, &mut cfg.dataset.file].into_iter().flatten() {
                if p.is_relative() {
                    *p = base.join(&*p);
                }
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)
            .map_err(|e| Error::config(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text, path.parent())
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config is always serializable")
    }

    pub fn validate(&self) -> Result<()> {
        if self.seeds.is_empty() {
            return Err(Error::config("seeds must not be empty"));
        }
        for p in [&self.env.layout_file, &self.dataset.file].into_iter().flatten() {
            if !p.is_file() {
                return Err(Error::config(format!("referenced file {} does not exist", p.display())));
            }
        }
        if self.eval.interval == 0 {
            return Err(Error::config("eval.interval must be at least 1"));
        }
        if self.eval.episodes == 0 {
            return Err(Error::config("eval.episodes must be at least 1"));
        }
        if !(self.eval.coverage_cell > 0.0) {
            return Err(Error::config("eval.coverage_cell must be positive"));
        }
        if self.threads == Some(0) {
            return Err(Error::config("threads must be at least 1"));
        }
        if self.dataset.file.is_none() {
            self.dataset.spec().validate()?;
        }
        if let Some(c) = self.strategy_params.bc_coef {
            if !(c >= 0.0 && c.is_finite()) {
                return Err(Error::config("strategy_params.bc_coef must be finite and >= 0"));
            }
        }
        if let Some(j) = &self.strategy_params.jsrl {
            if !(0.0..=1.0).contains(&j.beta) {
                return Err(Error::config("strategy_params.jsrl.beta must lie in [0, 1]"));
            }
        }
        self.corruption.validate()?;
        self.agent.validate()?;
        self.labeler.validate()?;
        self.env.build()?;
        Ok(())
    }

    pub fn sweep_strategies(&self) -> Vec<StrategyKind> {
        if self.strategies.is_empty() {
            vec![self.strategy]
        } else {
            self.strategies.clone()
        }
    }

    /// `kind` with this config's parameter overrides applied.
    pub fn strategy_for(&self, kind: StrategyKind) -> Strategy {
        let mut s = Strategy::new(kind);
        if let Some(c) = self.strategy_params.bc_coef {
            s.bc_coef = c;
        }
        if s.jsrl.is_some() {
            if let Some(j) = self.strategy_params.jsrl {
                s.jsrl = Some(j);
            }
        }
        s
    }

    /// Output directory, honouring the override variable.
    pub fn output_dir(&self) -> PathBuf {
        std::env::var_os(OUTPUT_ROOT_ENV)
            .map(PathBuf::from)
            .unwrap_or_else(|| self.output_dir.clone())
    }

    /// Loads or generates the prior data, then applies the corruption.
    pub fn prior_data(&self, task: &Task) -> Result<ReplayBuffer> {
        let raw = match &self.dataset.file {
            Some(path) => {
                let (data, dims) = dataset::read_dataset(path, self.dataset.seed)?;
                let spec = crate::mdp::Environment::spec(task);
                if dims.state_dim != spec.state_dim || dims.action_dim != spec.action_dim {
                    return Err(Error::config(format!(
                        "dataset {} has dims ({}, {}) but the task needs ({}, {})",
                        path.display(),
                        dims.state_dim,
                        dims.action_dim,
                        spec.state_dim,
                        spec.action_dim
                    )));
                }
                data
            }
            None => generate_prior_data(task, &self.dataset.spec())?,
        };
        self.corruption.apply(task, &raw)
    }
}
