use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::transition::action_in_range;
use crate::error::{ensure_dim, Error, Result};

/// How a sparse task pays out.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RewardConvention {
    /// −1 on every step, 0 at the goal.
    StepPenalty,
    /// 0 on every step, +1 on success.
    Sparse,
}

impl RewardConvention {
    pub fn min_reward(self) -> f64 {
        match self {
            RewardConvention::StepPenalty => -1.0,
            RewardConvention::Sparse => 0.0,
        }
    }

    pub fn success_reward(self) -> f64 {
        match self {
            RewardConvention::StepPenalty => 0.0,
            RewardConvention::Sparse => 1.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnvSpec {
    pub state_dim: usize,
    pub action_dim: usize,
    pub gamma: f64,
    pub max_episode_steps: usize,
    pub reward: RewardConvention,
}

impl EnvSpec {
    pub fn new(
        state_dim: usize,
        action_dim: usize,
        gamma: f64,
        max_episode_steps: usize,
        reward: RewardConvention,
    ) -> Result<Self> {
        if !(gamma > 0.0 && gamma < 1.0) {
            return Err(Error::config(format!("discount must lie in (0, 1), got {gamma}")));
        }
        if max_episode_steps == 0 {
            return Err(Error::config("max episode length must be at least 1"));
        }
        Ok(Self {
            state_dim,
            action_dim,
            gamma,
            max_episode_steps,
            reward,
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct StepOutcome {
    pub next_state: Vec<f64>,
    pub reward: f64,
    /// True only on task success.
    pub terminal: bool,
    /// True when the step cap ends a non-terminal episode.
    pub truncated: bool,
}

impl StepOutcome {
    pub fn done(&self) -> bool {
        self.terminal || self.truncated
    }
}

/// An episodic task with continuous actions in `(−1, 1)^action_dim`.
pub trait Environment {
    fn spec(&self) -> &EnvSpec;

    fn reset(&mut self, rng: &mut ChaCha8Rng) -> Vec<f64>;

    fn step(&mut self, action: &[f64]) -> Result<StepOutcome>;

    /// Reward and success flag the task assigns to `(s, a, s′)`.
    fn ground_truth(&self, state: &[f64], action: &[f64], next_state: &[f64]) -> (f64, bool);

    /// Planar position encoded in a state, for coverage accounting.
    fn position(&self, _state: &[f64]) -> Option<[f64; 2]> {
        None
    }
}

/// Step counter shared by the environments: validates actions, refuses
/// to step a finished episode and flags truncation.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct EpisodeClock {
    pub elapsed: usize,
    pub done: bool,
}

impl EpisodeClock {
    pub fn reset(&mut self) {
        *self = Self::default();
    }

    pub fn check(&self, spec: &EnvSpec, action: &[f64]) -> Result<()> {
        if self.done {
            return Err(Error::usage("step called on a finished episode; call reset first"));
        }
        ensure_dim("action", spec.action_dim, action.len())?;
        if !action_in_range(action) {
            return Err(Error::usage(format!("action {action:?} outside (-1, 1)")));
        }
        Ok(())
    }

    /// Advances the clock and returns the truncation flag.
    pub fn advance(&mut self, spec: &EnvSpec, terminal: bool) -> bool {
        self.elapsed += 1;
        let truncated = !terminal && self.elapsed >= spec.max_episode_steps;
        self.done = terminal || truncated;
        truncated
    }
}
