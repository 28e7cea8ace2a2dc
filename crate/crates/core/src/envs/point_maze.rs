use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::layout::MazeLayout;
use crate::error::{Error, Result};
use crate::mdp::{EnvSpec, Environment, EpisodeClock, RewardConvention, StepOutcome};

/// Gap kept between the agent and a wall after a clamped move.
const WALL_MARGIN: f64 = 1e-6;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PointMazeConfig {
    /// Largest per-axis displacement per step, in cells.
    pub step_size: f64,
    pub goal_radius: f64,
    /// Half-width of the uniform jitter added to the start position.
    pub start_noise: f64,
    pub max_episode_steps: usize,
    pub gamma: f64,
}

impl Default for PointMazeConfig {
    fn default() -> Self {
        Self {
            step_size: 0.25,
            goal_radius: 0.5,
            start_noise: 0.1,
            max_episode_steps: 200,
            gamma: 0.99,
        }
    }
}

/// Point mass in a walled maze. State is the `(x, y)` position; the action
/// is a velocity in `(−1, 1)²` scaled by `step_size`. Reward is 0 within
/// `goal_radius` of the goal centre (which also terminates) and −1 elsewhere.
#[derive(Clone, Debug)]
pub struct PointMaze {
    layout: MazeLayout,
    config: PointMazeConfig,
    spec: EnvSpec,
    pos: [f64; 2],
    clock: EpisodeClock,
}

impl PointMaze {
    pub fn new(layout: MazeLayout, config: PointMazeConfig) -> Result<Self> {
        if !(config.step_size > 0.0 && config.step_size < 1.0) {
            return Err(Error::config("point maze step size must lie in (0, 1) cells"));
        }
        if config.goal_radius <= 0.0 {
            return Err(Error::config("goal radius must be positive"));
        }
        if !(0.0..0.5).contains(&config.start_noise) {
            return Err(Error::config("start noise must lie in [0, 0.5)"));
        }
        let spec = EnvSpec::new(
            2,
            2,
            config.gamma,
            config.max_episode_steps,
            RewardConvention::StepPenalty,
        )?;
        let pos = layout.center(layout.start);
        Ok(Self {
            layout,
            config,
            spec,
            pos,
            clock: EpisodeClock {
                elapsed: 0,
                done: true,
            },
        })
    }

    pub fn layout(&self) -> &MazeLayout {
        &self.layout
    }

    pub fn config(&self) -> &PointMazeConfig {
        &self.config
    }

    pub fn goal_position(&self) -> [f64; 2] {
        self.layout.center(self.layout.goal)
    }

    pub fn position_now(&self) -> [f64; 2] {
        self.pos
    }

    /// Starts a fresh episode at `pos`, which must be in free space.
    pub fn reset_to(&mut self, pos: [f64; 2]) -> Result<Vec<f64>> {
        if !self.layout.is_free_pos(pos) {
            return Err(Error::usage(format!("position {pos:?} is not in free space")));
        }
        self.pos = pos;
        self.clock.reset();
        Ok(pos.to_vec())
    }

    pub fn at_goal(&self, pos: [f64; 2]) -> bool {
        let g = self.goal_position();
        ((pos[0] - g[0]).powi(2) + (pos[1] - g[1]).powi(2)).sqrt() <= self.config.goal_radius
    }

    /// Dynamics without episode bookkeeping: move along x, then along y,
    /// stopping just short of any wall cell.
    pub fn simulate(&self, pos: [f64; 2], action: &[f64]) -> [f64; 2] {
        let mut p = pos;
        for axis in 0..2 {
            let delta = self.config.step_size * action[axis];
            let mut target = p;
            target[axis] += delta;
            if self.layout.is_free_pos(target) {
                p = target;
            } else if delta > 0.0 {
                p[axis] = (p[axis].floor() + 1.0 - WALL_MARGIN).max(p[axis]);
            } else if delta < 0.0 {
                p[axis] = (p[axis].floor() + WALL_MARGIN).min(p[axis]);
            }
        }
        p
    }
}

impl Environment for PointMaze {
    fn spec(&self) -> &EnvSpec {
        &self.spec
    }

    fn reset(&mut self, rng: &mut ChaCha8Rng) -> Vec<f64> {
        let [cx, cy] = self.layout.center(self.layout.start);
        let n = self.config.start_noise;
        let jitter = |rng: &mut ChaCha8Rng| if n > 0.0 { rng.random_range(-n..n) } else { 0.0 };
        self.pos = [cx + jitter(rng), cy + jitter(rng)];
        self.clock.reset();
        self.pos.to_vec()
    }

    fn step(&mut self, action: &[f64]) -> Result<StepOutcome> {
        self.clock.check(&self.spec, action)?;
        self.pos = self.simulate(self.pos, action);
        let terminal = self.at_goal(self.pos);
        let truncated = self.clock.advance(&self.spec, terminal);
        Ok(StepOutcome {
            next_state: self.pos.to_vec(),
            reward: if terminal { 0.0 } else { -1.0 },
            terminal,
            truncated,
        })
    }

    fn ground_truth(&self, _state: &[f64], _action: &[f64], next_state: &[f64]) -> (f64, bool) {
        let success = self.at_goal([next_state[0], next_state[1]]);
        (if success { 0.0 } else { -1.0 }, success)
    }

    fn position(&self, state: &[f64]) -> Option<[f64; 2]> {
        Some([state[0], state[1]])
    }
}
