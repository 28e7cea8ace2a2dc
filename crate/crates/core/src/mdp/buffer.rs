use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::Transition;
use crate::error::{Error, Result};

/// FIFO transition store with uniform sampling with replacement.
#[derive(Clone, Debug)]
pub struct ReplayBuffer {
    items: Vec<Transition>,
    capacity: Option<usize>,
    /// Physical index of the oldest item once the buffer has wrapped.
    head: usize,
    rng: ChaCha8Rng,
}

impl ReplayBuffer {
    /// `capacity = None` grows without bound.
    pub fn new(capacity: Option<usize>, seed: u64) -> Self {
        Self {
            items: Vec::new(),
            capacity: capacity.map(|c| c.max(1)),
            head: 0,
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    pub fn from_transitions(items: Vec<Transition>, seed: u64) -> Self {
        Self {
            items,
            capacity: None,
            head: 0,
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    pub fn capacity(&self) -> Option<usize> {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn push(&mut self, t: Transition) {
        match self.capacity {
            Some(cap) if self.items.len() >= cap => {
                self.items[self.head] = t;
                self.head = (self.head + 1) % cap;
            }
            _ => self.items.push(t),
        }
    }

    /// Logical index 0 is the oldest stored transition.
    pub fn get(&self, i: usize) -> Option<&Transition> {
        if i >= self.items.len() {
            return None;
        }
        Some(&self.items[(self.head + i) % self.items.len()])
    }

    /// Transitions from oldest to newest.
    pub fn iter(&self) -> impl Iterator<Item = &Transition> {
        let (newer, older) = self.items.split_at(self.head);
        older.iter().chain(newer.iter())
    }

    pub fn to_vec(&self) -> Vec<Transition> {
        self.iter().cloned().collect()
    }

    pub fn sample_indices(&mut self, n: usize) -> Result<Vec<usize>> {
        if n == 0 {
            return Ok(Vec::new());
        }
        if self.items.is_empty() {
            return Err(Error::usage(format!(
                "cannot sample {n} transitions from an empty buffer"
            )));
        }
        let len = self.items.len();
        Ok((0..n).map(|_| self.rng.random_range(0..len)).collect())
    }

    pub fn sample(&mut self, n: usize) -> Result<Vec<&Transition>> {
        let idx = self.sample_indices(n)?;
        Ok(idx.into_iter().map(|i| &self.items[i]).collect())
    }

    /// Keeps the transitions satisfying `keep`, preserving order, in a new
    /// unbounded buffer that reuses this buffer's sampling stream.
    pub fn filtered<F>(&self, mut keep: F) -> ReplayBuffer
    where
        F: FnMut(&Transition) -> bool,
    {
        ReplayBuffer {
            items: self.iter().filter(|t| keep(t)).cloned().collect(),
            capacity: None,
            head: 0,
            rng: self.rng.clone(),
        }
    }
}

/// Online and offline rows drawn for one gradient step.
#[derive(Debug)]
pub struct MixedBatch<'a> {
    pub online: Vec<&'a Transition>,
    pub offline: Vec<&'a Transition>,
}

impl MixedBatch<'_> {
    pub fn len(&self) -> usize {
        self.online.len() + self.offline.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Draws exactly `n_online` rows from `online` and `n_offline` from
/// `offline`, uniformly with replacement. Offline rows stay unlabeled.
pub fn sample_mixed_batch<'a>(
    online: &'a mut ReplayBuffer,
    offline: &'a mut ReplayBuffer,
    n_online: usize,
    n_offline: usize,
) -> Result<MixedBatch<'a>> {
    let on = online.sample_indices(n_online)?;
    let off = offline.sample_indices(n_offline)?;
    let online: &'a ReplayBuffer = online;
    let offline: &'a ReplayBuffer = offline;
    Ok(MixedBatch {
        online: on.into_iter().map(|i| &online.items[i]).collect(),
        offline: off.into_iter().map(|i| &offline.items[i]).collect(),
    })
}
