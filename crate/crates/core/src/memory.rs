//! Bounded replay memory with uniform sampling without replacement.

use alloc::vec::Vec;

use rand::Rng;

use crate::error::check_len;
use crate::{Error, Result};

/// One environment step for all agents. `x` and `x_next` concatenate the
/// agents' local observations; `a` concatenates their actions.
#[derive(Debug, Clone, PartialEq)]
pub struct Transition {
    pub x: Vec<f64>,
    pub a: Vec<f64>,
    pub r: Vec<f64>,
    pub x_next: Vec<f64>,
    pub terminal: bool,
}

impl Transition {
    fn is_finite(&self) -> bool {
        self.x
            .iter()
            .chain(&self.a)
            .chain(&self.r)
            .chain(&self.x_next)
            .all(|v| v.is_finite())
    }
}

/// Widths every stored transition must have.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TransitionShape {
    pub obs_len: usize,
    pub act_len: usize,
    pub n_agents: usize,
}

#[derive(Debug, Clone)]
pub struct ReplayMemory {
    shape: TransitionShape,
    capacity: usize,
    buffer: Vec<Transition>,
    /// Slot the next push overwrites once the buffer is full.
    head: usize,
}

impl ReplayMemory {
    pub fn new(capacity: usize, shape: TransitionShape) -> Result<Self> {
        if capacity == 0 {
            return Err(Error::InvalidSpec("replay capacity must be positive".into()));
        }
        Ok(ReplayMemory {
            shape,
            capacity,
            buffer: Vec::new(),
            head: 0,
        })
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.buffer.len()
    }

    pub fn is_empty(&self) -> bool {
        self.buffer.is_empty()
    }

    pub fn shape(&self) -> TransitionShape {
        self.shape
    }

    pub fn push(&mut self, t: Transition) -> Result<()> {
        check_len("transition x", self.shape.obs_len, t.x.len())?;
        check_len("transition x_next", self.shape.obs_len, t.x_next.len())?;
        check_len("transition a", self.shape.act_len, t.a.len())?;
        check_len("transition r", self.shape.n_agents, t.r.len())?;
        if !t.is_finite() {
            return Err(Error::Numeric("transition"));
        }
        if self.buffer.len() < self.capacity {
            self.buffer.push(t);
        } else {
            self.buffer[self.head] = t;
            self.head = (self.head + 1) % self.capacity;
        }
        Ok(())
    }

    /// Stored transitions, oldest first.
    pub fn iter(&self) -> impl Iterator<Item = &Transition> + '_ {
        let (newer, older) = self.buffer.split_at(self.head);
        older.iter().chain(newer)
    }

    /// `s` distinct transitions drawn uniformly.
    pub fn sample<R: Rng + ?Sized>(&self, s: usize, rng: &mut R) -> Result<Vec<&Transition>> {
        if s == 0 {
            return Err(Error::InvalidSpec("batch size must be positive".into()));
        }
        if s > self.buffer.len() {
            return Err(Error::InsufficientData {
                requested: s,
                available: self.buffer.len(),
            });
        }
        Ok(rand::seq::index::sample(rng, self.buffer.len(), s)
            .into_iter()
            .map(|i| &self.buffer[i])
            .collect())
    }
}
