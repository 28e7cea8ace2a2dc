//! Transitions, replay storage, the environment interface and rollouts.

mod buffer;
pub mod dataset;
mod env;
mod rollout;
mod transition;

pub use buffer::{sample_mixed_batch, MixedBatch, ReplayBuffer};
pub use env::{EnvSpec, Environment, EpisodeClock, RewardConvention, StepOutcome};
pub use rollout::{rollout, EpisodeStats};
pub use transition::{action_in_range, clamp_action, Source, Transition, ACTION_LIMIT};
