use serde::{Deserialize, Serialize};

/// Largest action magnitude kept after squashing; `tanh` saturates to
/// exactly ±1 in double precision for large inputs.
pub const ACTION_LIMIT: f64 = 1.0 - 1e-9;

/// Where a transition came from. Reward and termination models may only
/// ever train on [`Source::Online`] rows.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Source {
    Online,
    Prior,
}

/// One environment step. Prior transitions carry no reward or terminal
/// label; online transitions always carry both.
#[derive(Clone, Debug, PartialEq)]
pub struct Transition {
    pub state: Vec<f64>,
    pub action: Vec<f64>,
    pub next_state: Vec<f64>,
    pub reward: Option<f64>,
    pub terminal: Option<bool>,
    /// Index of this step within its episode.
    pub step: u32,
    pub source: Source,
}

impl Transition {
    pub fn online(
        state: Vec<f64>,
        action: Vec<f64>,
        next_state: Vec<f64>,
        reward: f64,
        terminal: bool,
        step: u32,
    ) -> Self {
        Self {
            state,
            action,
            next_state,
            reward: Some(reward),
            terminal: Some(terminal),
            step,
            source: Source::Online,
        }
    }

    pub fn prior(state: Vec<f64>, action: Vec<f64>, next_state: Vec<f64>, step: u32) -> Self {
        Self {
            state,
            action,
            next_state,
            reward: None,
            terminal: None,
            step,
            source: Source::Prior,
        }
    }

    /// Drops reward and terminal labels and marks the row as prior data.
    pub fn into_unlabeled(self) -> Self {
        Self {
            reward: None,
            terminal: None,
            source: Source::Prior,
            ..self
        }
    }

    /// Displacement of the first two state coordinates.
    pub fn displacement(&self) -> [f64; 2] {
        [
            self.next_state[0] - self.state[0],
            self.next_state[1] - self.state[1],
        ]
    }
}

pub fn clamp_action(a: f64) -> f64 {
    a.clamp(-ACTION_LIMIT, ACTION_LIMIT)
}

pub fn action_in_range(action: &[f64]) -> bool {
    action.iter().all(|a| a.abs() < 1.0)
}
