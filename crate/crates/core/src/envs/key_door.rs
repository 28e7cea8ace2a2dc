use rand_chacha::ChaCha8Rng;

use super::layout::{Cell, MazeLayout};
use crate::error::{Error, Result};
use crate::mdp::{EnvSpec, Environment, EpisodeClock, RewardConvention, StepOutcome};

/// Actions whose largest component is below this magnitude do not move.
const MOVE_THRESHOLD: f64 = 0.2;

/// Two-stage grid task. Stepping on the latch `K` opens a drawer; standing
/// on the object `G` with the drawer open completes the task (+1, terminal).
/// Reaching `G` with the drawer closed pays nothing.
///
/// State is `(x, y, open)` with `(x, y)` the centre of the agent's cell.
/// The continuous action is mapped to a move along its dominant axis.
#[derive(Clone, Debug)]
pub struct KeyDoorGrid {
    layout: MazeLayout,
    latch: Cell,
    spec: EnvSpec,
    cell: Cell,
    open: bool,
    clock: EpisodeClock,
}

impl KeyDoorGrid {
    pub fn new(layout: MazeLayout, max_episode_steps: usize, gamma: f64) -> Result<Self> {
        let latch = layout
            .key
            .ok_or_else(|| Error::config("key-door layout needs a latch cell 'K'"))?;
        if latch == layout.goal {
            return Err(Error::config("latch and object must be different cells"));
        }
        let spec = EnvSpec::new(3, 2, gamma, max_episode_steps, RewardConvention::Sparse)?;
        let cell = layout.start;
        Ok(Self {
            layout,
            latch,
            spec,
            cell,
            open: false,
            clock: EpisodeClock {
                elapsed: 0,
                done: true,
            },
        })
    }

    pub fn layout(&self) -> &MazeLayout {
        &self.layout
    }

    pub fn latch(&self) -> Cell {
        self.latch
    }

    pub fn object(&self) -> Cell {
        self.layout.goal
    }

    pub fn encode(&self, cell: Cell, open: bool) -> Vec<f64> {
        let [x, y] = self.layout.center(cell);
        vec![x, y, if open { 1.0 } else { 0.0 }]
    }

    pub fn decode(&self, state: &[f64]) -> Option<(Cell, bool)> {
        let cell = self.layout.cell_at([state[0], state[1]])?;
        Some((cell, state[2] > 0.5))
    }

    /// Starts an episode in an arbitrary configuration (used by data generators and tests).
    pub fn reset_to(&mut self, cell: Cell, open: bool) -> Result<Vec<f64>> {
        if !self.layout.is_free(cell) {
            return Err(Error::usage(format!("cell {cell:?} is not free")));
        }
        self.cell = cell;
        self.open = open;
        self.clock.reset();
        Ok(self.encode(cell, open))
    }

    /// Grid move selected by a continuous action, if any.
    pub fn direction(action: &[f64]) -> Option<(isize, isize)> {
        let (ax, ay) = (action[0], action[1]);
        if ax.abs().max(ay.abs()) < MOVE_THRESHOLD {
            None
        } else if ax.abs() >= ay.abs() {
            Some((0, ax.signum() as isize))
        } else {
            // +y is up, i.e. towards row 0.
            Some((-(ay.signum() as isize), 0))
        }
    }

    /// Pure dynamics: next cell and drawer state.
    pub fn simulate(&self, cell: Cell, open: bool, action: &[f64]) -> (Cell, bool) {
        let next = Self::direction(action)
            .and_then(|(dr, dc)| {
                let row = cell.row.checked_add_signed(dr)?;
                let col = cell.col.checked_add_signed(dc)?;
                Some(Cell::new(row, col))
            })
            .filter(|c| self.layout.is_free(*c))
            .unwrap_or(cell);
        (next, open || next == self.latch)
    }

    pub fn success(&self, cell: Cell, open: bool) -> bool {
        open && cell == self.layout.goal
    }
}

impl Environment for KeyDoorGrid {
    fn spec(&self) -> &EnvSpec {
        &self.spec
    }

    fn reset(&mut self, _rng: &mut ChaCha8Rng) -> Vec<f64> {
        self.cell = self.layout.start;
        self.open = false;
        self.clock.reset();
        self.encode(self.cell, self.open)
    }

    fn step(&mut self, action: &[f64]) -> Result<StepOutcome> {
        self.clock.check(&self.spec, action)?;
        let (cell, open) = self.simulate(self.cell, self.open, action);
        self.cell = cell;
        self.open = open;
        let terminal = self.success(cell, open);
        let truncated = self.clock.advance(&self.spec, terminal);
        Ok(StepOutcome {
            next_state: self.encode(cell, open),
            reward: if terminal { 1.0 } else { 0.0 },
            terminal,
            truncated,
        })
    }

    fn ground_truth(&self, _state: &[f64], _action: &[f64], next_state: &[f64]) -> (f64, bool) {
        let success = self
            .decode(next_state)
            .is_some_and(|(c, open)| self.success(c, open));
        (if success { 1.0 } else { 0.0 }, success)
    }

    fn position(&self, state: &[f64]) -> Option<[f64; 2]> {
        Some([state[0], state[1]])
    }
}

/// Whether a trajectory opens the drawer and later completes the task.
pub fn completes_full_task(env: &KeyDoorGrid, trajectory: &[Vec<f64>]) -> bool {
    let mut opened = false;
    for pair in trajectory.windows(2) {
        let (Some((_, was_open)), Some((cell, open))) = (env.decode(&pair[0]), env.decode(&pair[1]))
        else {
            continue;
        };
        if !was_open && open {
            opened = true;
        }
        if opened && env.success(cell, open) {
            return true;
        }
    }
    false
}
