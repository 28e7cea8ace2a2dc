//! Sparse-reward tasks, prior-data generators and dataset corruptions.

mod chain;
mod corrupt;
mod coverage;
mod key_door;
mod layout;
mod point_maze;
mod prior;

pub use chain::Chain;
pub use corrupt::{corrupt_coverage, corrupt_orthogonal, corrupt_subsample};
pub use coverage::{coverage, CoverageGrid, CoverageTracker};
pub use key_door::{completes_full_task, KeyDoorGrid};
pub use layout::{Cell, MazeLayout, KEY_DOOR, LARGE_MAZE, MEDIUM_MAZE, UMAZE};
pub use point_maze::{PointMaze, PointMazeConfig};
pub use prior::{generate_prior_data, generate_prior_trajectories, GenerationMode, PriorDatasetSpec};

use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::mdp::{EnvSpec, Environment, StepOutcome};

/// Number of states in the built-in chain task.
pub const CHAIN_LENGTH: usize = 10;

/// Every task the lab can run, behind one concrete type.
#[derive(Clone, Debug)]
pub enum Task {
    PointMaze(PointMaze),
    KeyDoor(KeyDoorGrid),
    Chain(Chain),
}

impl Task {
    /// Builds a task from its registry name. `layout` overrides the
    /// built-in grid of the maze and key–door tasks.
    pub fn from_name(name: &str, layout: Option<&str>, maze: &PointMazeConfig) -> Result<Self> {
        let builtin = match name {
            "point-maze-umaze" => UMAZE,
            "point-maze-medium" => MEDIUM_MAZE,
            "point-maze-large" => LARGE_MAZE,
            "point-maze" => "",
            "key-door" => KEY_DOOR,
            "chain" => {
                return Ok(Task::Chain(Chain::new(
                    CHAIN_LENGTH,
                    maze.max_episode_steps,
                    maze.gamma,
                )?))
            }
            other => return Err(Error::config(format!("unknown environment '{other}'"))),
        };
        let text = match layout {
            Some(text) => text,
            None if builtin.is_empty() => {
                return Err(Error::config("environment 'point-maze' needs a layout file"))
            }
            None => builtin,
        };
        let layout = MazeLayout::parse(text)?;
        if name == "key-door" {
            Ok(Task::KeyDoor(KeyDoorGrid::new(layout, maze.max_episode_steps, maze.gamma)?))
        } else {
            Ok(Task::PointMaze(PointMaze::new(layout, maze.clone())?))
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            Task::PointMaze(_) => "point maze",
            Task::KeyDoor(_) => "key-door grid",
            Task::Chain(_) => "chain",
        }
    }

    /// Spatial layout, for tasks that have one.
    pub fn layout(&self) -> Option<&MazeLayout> {
        match self {
            Task::PointMaze(env) => Some(env.layout()),
            Task::KeyDoor(env) => Some(env.layout()),
            Task::Chain(_) => None,
        }
    }

    /// Goal centre of a spatial task.
    pub fn goal_position(&self) -> Option<[f64; 2]> {
        self.layout().map(|l| l.center(l.goal))
    }

    fn inner(&self) -> &dyn Environment {
        match self {
            Task::PointMaze(env) => env,
            Task::KeyDoor(env) => env,
            Task::Chain(env) => env,
        }
    }

    fn inner_mut(&mut self) -> &mut dyn Environment {
        match self {
            Task::PointMaze(env) => env,
            Task::KeyDoor(env) => env,
            Task::Chain(env) => env,
        }
    }
}

impl Environment for Task {
    fn spec(&self) -> &EnvSpec {
        self.inner().spec()
    }

    fn reset(&mut self, rng: &mut ChaCha8Rng) -> Vec<f64> {
        self.inner_mut().reset(rng)
    }

    fn step(&mut self, action: &[f64]) -> Result<StepOutcome> {
        self.inner_mut().step(action)
    }

    fn ground_truth(&self, state: &[f64], action: &[f64], next_state: &[f64]) -> (f64, bool) {
        self.inner().ground_truth(state, action, next_state)
    }

    fn position(&self, state: &[f64]) -> Option<[f64; 2]> {
        self.inner().position(state)
    }
}
