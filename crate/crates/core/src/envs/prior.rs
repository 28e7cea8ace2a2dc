//! Scripted generators for unlabeled prior datasets.

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::chain::Chain;
use super::key_door::KeyDoorGrid;
use super::layout::Cell;
use super::point_maze::PointMaze;
use super::Task;
use crate::error::{Error, Result};
use crate::mdp::{clamp_action, ReplayBuffer, Transition};

const MAX_RESAMPLES: usize = 1000;
/// Distance to a waypoint centre at which the controller moves on.
const WAYPOINT_TOLERANCE: f64 = 0.35;
/// Proportional gain of the maze controller, in units of the step size.
const CONTROLLER_GAIN: f64 = 1.5;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GenerationMode {
    /// Uniformly random start and goal cells.
    Diverse,
    /// Start and goal drawn from a fixed set of landmark cells.
    Play,
    /// Single-stage trajectories only (key–door task).
    Stagewise,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PriorDatasetSpec {
    pub mode: GenerationMode,
    pub trajectories: usize,
    /// Maze: std of Gaussian action noise before squashing.
    /// Grid: probability of a random move.
    pub noise: f64,
    pub seed: u64,
}

impl PriorDatasetSpec {
    pub fn validate(&self) -> Result<()> {
        if self.trajectories == 0 {
            return Err(Error::config("prior dataset needs at least one trajectory"));
        }
        if !(self.noise >= 0.0 && self.noise.is_finite()) {
            return Err(Error::config("prior data noise must be a finite non-negative number"));
        }
        Ok(())
    }
}

/// Generates trajectories with every reward and terminal label stripped.
pub fn generate_prior_trajectories(task: &Task, spec: &PriorDatasetSpec) -> Result<Vec<Vec<Transition>>> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    match (task, spec.mode) {
        (Task::PointMaze(env), GenerationMode::Diverse | GenerationMode::Play) => (0..spec.trajectories)
            .map(|_| maze_trajectory(env, spec, &mut rng))
            .collect(),
        (Task::KeyDoor(env), GenerationMode::Stagewise) => Ok((0..spec.trajectories)
            .map(|i| stage_trajectory(env, i % 2 == 1, spec.noise, &mut rng))
            .collect()),
        (Task::Chain(env), _) => Ok((0..spec.trajectories)
            .map(|_| chain_trajectory(env, &mut rng))
            .collect()),
        (task, mode) => Err(Error::config(format!(
            "generation mode {mode:?} is not supported for {}",
            task.kind()
        ))),
    }
}

/// Flattened [`generate_prior_trajectories`].
pub fn generate_prior_data(task: &Task, spec: &PriorDatasetSpec) -> Result<ReplayBuffer> {
    let rows = generate_prior_trajectories(task, spec)?
        .into_iter()
        .flatten()
        .collect();
    Ok(ReplayBuffer::from_transitions(rows, spec.seed ^ 0x5eed))
}

fn distance(a: [f64; 2], b: [f64; 2]) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt()
}

fn pick_pair(env: &PointMaze, mode: GenerationMode, rng: &mut ChaCha8Rng) -> Result<Vec<Cell>> {
    let layout = env.layout();
    let pool = match mode {
        GenerationMode::Play => {
            let mut marks = layout.dead_ends();
            marks.extend([layout.start, layout.goal]);
            marks.sort();
            marks.dedup();
            marks
        }
        _ => layout.free_cells(),
    };
    if pool.len() < 2 {
        return Err(Error::config("maze has fewer than two candidate cells for prior data"));
    }
    for _ in 0..MAX_RESAMPLES {
        let from = *pool.choose(rng).expect("non-empty pool");
        let to = *pool.choose(rng).expect("non-empty pool");
        if from == to {
            continue;
        }
        if let Some(path) = layout.shortest_path(from, to) {
            return Ok(path);
        }
    }
    Err(Error::config("could not sample a reachable start/goal pair"))
}

/// Noisy waypoint follower along an A* path.
fn maze_trajectory(env: &PointMaze, spec: &PriorDatasetSpec, rng: &mut ChaCha8Rng) -> Result<Vec<Transition>> {
    let path = pick_pair(env, spec.mode, rng)?;
    let layout = env.layout();
    let step = env.config().step_size;
    let [cx, cy] = layout.center(path[0]);
    let mut pos = [cx + rng.random_range(-0.3..0.3), cy + rng.random_range(-0.3..0.3)];
    let cap = (3.0 * path.len() as f64 / step) as usize + 20;
    let last = path.len() - 1;
    let mut k = 1;
    let mut out = Vec::new();
    for t in 0..cap {
        let mut target = layout.center(path[k]);
        while k < last && distance(pos, target) < WAYPOINT_TOLERANCE {
            k += 1;
            target = layout.center(path[k]);
        }
        let action: Vec<f64> = (0..2)
            .map(|i| {
                let u = CONTROLLER_GAIN * (target[i] - pos[i]) / step;
                let eps: f64 = StandardNormal.sample(rng);
                clamp_action((u + spec.noise * eps).tanh())
            })
            .collect();
        let next = env.simulate(pos, &action);
        out.push(Transition::prior(pos.to_vec(), action, next.to_vec(), t as u32));
        pos = next;
        if k == last && distance(pos, target) < WAYPOINT_TOLERANCE {
            break;
        }
    }
    Ok(out)
}

fn move_action(dr: isize, dc: isize) -> Vec<f64> {
    // +y (action[1] > 0) is up, i.e. row - 1.
    vec![0.8 * dc as f64, -0.8 * dr as f64]
}

/// One stage of the key–door task: reach the latch from a closed-drawer
/// start, or reach the object from an open-drawer start. Never both.
fn stage_trajectory(env: &KeyDoorGrid, second_stage: bool, noise: f64, rng: &mut ChaCha8Rng) -> Vec<Transition> {
    let layout = env.layout();
    let target = if second_stage { env.object() } else { env.latch() };
    let candidates: Vec<Cell> = layout
        .free_cells()
        .into_iter()
        .filter(|c| *c != target && *c != env.latch())
        .collect();
    let mut cell = *candidates.choose(rng).expect("grid has free cells");
    let mut open = second_stage;
    let path = layout.shortest_path(cell, target).expect("grid cells are connected");
    let cap = 3 * path.len() + 10;
    let mut out = Vec::new();
    for t in 0..cap {
        let action = if rng.random_bool(noise.clamp(0.0, 1.0)) {
            let dirs = [(-1, 0), (1, 0), (0, -1), (0, 1)];
            let (dr, dc) = *dirs.choose(rng).expect("four directions");
            move_action(dr, dc)
        } else {
            let next = layout.shortest_path(cell, target).expect("connected")[1];
            move_action(next.row as isize - cell.row as isize, next.col as isize - cell.col as isize)
        };
        let (next_cell, next_open) = env.simulate(cell, open, &action);
        // A random move onto the latch during stage one ends the trajectory
        // there, so the drawer never opens before the object is reached.
        out.push(Transition::prior(
            env.encode(cell, open),
            action,
            env.encode(next_cell, next_open),
            t as u32,
        ));
        cell = next_cell;
        open = next_open;
        if cell == target || (!second_stage && open) {
            break;
        }
    }
    out
}

fn chain_trajectory(env: &Chain, rng: &mut ChaCha8Rng) -> Vec<Transition> {
    let mut pos = rng.random_range(0..env.len() - 1);
    let mut out = Vec::new();
    for t in 0..env.len() {
        let a = clamp_action(rng.random_range(-1.0..1.0));
        let next = env.simulate(pos, a);
        out.push(Transition::prior(env.encode(pos), vec![a], env.encode(next), t as u32));
        if next == env.len() - 1 {
            break;
        }
        pos = next;
    }
    out
}
