use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::mdp::{EnvSpec, Environment, EpisodeClock, RewardConvention, StepOutcome};

/// Deterministic chain of `n` states with one-hot observations. A positive
/// action moves right, anything else moves left (the left end is sticky).
/// Entering the last state pays +1 and terminates.
#[derive(Clone, Debug)]
pub struct Chain {
    n: usize,
    pos: usize,
    spec: EnvSpec,
    clock: EpisodeClock,
}

impl Chain {
    pub fn new(n: usize, max_episode_steps: usize, gamma: f64) -> Result<Self> {
        if n < 2 {
            return Err(Error::config("a chain needs at least two states"));
        }
        Ok(Self {
            n,
            pos: 0,
            spec: EnvSpec::new(n, 1, gamma, max_episode_steps, RewardConvention::Sparse)?,
            clock: EpisodeClock {
                elapsed: 0,
                done: true,
            },
        })
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn encode(&self, pos: usize) -> Vec<f64> {
        let mut s = vec![0.0; self.n];
        s[pos] = 1.0;
        s
    }

    pub fn decode(&self, state: &[f64]) -> usize {
        state
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1))
            .map(|(i, _)| i)
            .unwrap_or(0)
    }

    pub fn simulate(&self, pos: usize, action: f64) -> usize {
        if action > 0.0 {
            (pos + 1).min(self.n - 1)
        } else {
            pos.saturating_sub(1)
        }
    }

    pub fn reset_to(&mut self, pos: usize) -> Vec<f64> {
        self.pos = pos.min(self.n - 1);
        self.clock.reset();
        self.encode(self.pos)
    }

    /// Optimal action values by value iteration over the two moves,
    /// `[left, right]` per non-terminal state.
    pub fn optimal_q(&self, gamma: f64) -> Vec<[f64; 2]> {
        let mut v = vec![0.0; self.n];
        for _ in 0..10_000 {
            let mut next = v.clone();
            for (s, slot) in next.iter_mut().enumerate().take(self.n - 1) {
                *slot = [-1.0, 1.0]
                    .iter()
                    .map(|a| self.backup(&v, s, *a, gamma))
                    .fold(f64::MIN, f64::max);
            }
            let delta = next
                .iter()
                .zip(&v)
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max);
            v = next;
            if delta < 1e-14 {
                break;
            }
        }
        (0..self.n - 1)
            .map(|s| [self.backup(&v, s, -1.0, gamma), self.backup(&v, s, 1.0, gamma)])
            .collect()
    }

    fn backup(&self, v: &[f64], s: usize, a: f64, gamma: f64) -> f64 {
        let s2 = self.simulate(s, a);
        if s2 == self.n - 1 {
            1.0
        } else {
            gamma * v[s2]
        }
    }
}

impl Environment for Chain {
    fn spec(&self) -> &EnvSpec {
        &self.spec
    }

    fn reset(&mut self, _rng: &mut ChaCha8Rng) -> Vec<f64> {
        self.reset_to(0)
    }

    fn step(&mut self, action: &[f64]) -> Result<StepOutcome> {
        self.clock.check(&self.spec, action)?;
        self.pos = self.simulate(self.pos, action[0]);
        let terminal = self.pos == self.n - 1;
        let truncated = self.clock.advance(&self.spec, terminal);
        Ok(StepOutcome {
            next_state: self.encode(self.pos),
            reward: if terminal { 1.0 } else { 0.0 },
            terminal,
            truncated,
        })
    }

    fn ground_truth(&self, _state: &[f64], _action: &[f64], next_state: &[f64]) -> (f64, bool) {
        let success = self.decode(next_state) == self.n - 1;
        (if success { 1.0 } else { 0.0 }, success)
    }
}
