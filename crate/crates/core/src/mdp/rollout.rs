use rand_chacha::ChaCha8Rng;

use super::{Environment, ReplayBuffer, Transition};
use crate::error::Result;

#[derive(Clone, Debug, PartialEq)]
pub struct EpisodeStats {
    pub undiscounted_return: f64,
    pub discounted_return: f64,
    pub length: usize,
    pub success: bool,
    pub truncated: bool,
}

/// Runs one episode, appending every step to `buffer` with its reward and
/// terminal label. Truncation is not recorded as termination.
pub fn rollout<E, P>(
    env: &mut E,
    mut policy: P,
    buffer: &mut ReplayBuffer,
    rng: &mut ChaCha8Rng,
) -> Result<EpisodeStats>
where
    E: Environment + ?Sized,
    P: FnMut(&[f64]) -> Vec<f64>,
{
    let gamma = env.spec().gamma;
    let mut state = env.reset(rng);
    let mut stats = EpisodeStats {
        undiscounted_return: 0.0,
        discounted_return: 0.0,
        length: 0,
        success: false,
        truncated: false,
    };
    let mut discount = 1.0;
    loop {
        let action = policy(&state);
        let out = env.step(&action)?;
        stats.undiscounted_return += out.reward;
        stats.discounted_return += discount * out.reward;
        discount *= gamma;
        buffer.push(Transition::online(
            state,
            action,
            out.next_state.clone(),
            out.reward,
            out.terminal,
            stats.length as u32,
        ));
        stats.length += 1;
        state = out.next_state;
        if out.terminal {
            stats.success = true;
            return Ok(stats);
        }
        if out.truncated {
            stats.truncated = true;
            return Ok(stats);
        }
    }
}
