use alloc::vec;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Variant {
    /// Independent actor and centralized critic per agent.
    Maddpg,
    /// One actor and one critic shared by all agents.
    V0,
    /// Shared actor, one critic per agent.
    V1,
    /// Shared actor, one critic trunk with a Q head per agent.
    V2,
}

impl Variant {
    pub const ALL: [Variant; 4] = [Variant::Maddpg, Variant::V0, Variant::V1, Variant::V2];

    pub fn name(self) -> &'static str {
        match self {
            Variant::Maddpg => "maddpg",
            Variant::V0 => "v0",
            Variant::V1 => "v1",
            Variant::V2 => "v2",
        }
    }

    pub fn shares_actor(self) -> bool {
        self != Variant::Maddpg
    }

    /// Online nets that receive an optimizer step (and whose targets are
    /// soft-updated) in one learning step.
    pub fn nets_updated_per_step(self, n_agents: usize) -> usize {
        match self {
            Variant::Maddpg => 2 * n_agents,
            Variant::V0 | Variant::V2 => 2,
            Variant::V1 => n_agents + 1,
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Variant::ALL
            .into_iter()
            .find(|v| v.name() == s)
            .ok_or_else(|| Error::InvalidSpec(alloc::format!("unknown variant `{s}`")))
    }
}

/// Hyperparameters of one training run.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub variant: Variant,
    pub gamma: f64,
    pub tau: f64,
    pub lr_actor: f64,
    pub lr_critic: f64,
    pub batch_size: usize,
    /// Minimum memory size before learning starts.
    pub warmup: usize,
    pub eps_start: f64,
    pub eps_end: f64,
    pub eps_decay_steps: u64,
    pub total_steps: u64,
    pub max_episode_length: usize,
    pub seed: u64,
    pub memory_capacity: usize,
    pub actor_hidden: Vec<usize>,
    pub critic_hidden: Vec<usize>,
    /// Hidden widths of the shared critic trunk (v2).
    pub v2_shared_sizes: Vec<usize>,
    /// Hidden widths of each critic head before its scalar output (v2).
    pub v2_head_sizes: Vec<usize>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig::desk(Variant::V0)
    }
}

impl TrainConfig {
    /// Small nets and short schedules that train in minutes on one core.
    pub fn desk(variant: Variant) -> Self {
        TrainConfig {
            variant,
            gamma: 0.99,
            tau: 0.01,
            lr_actor: 1e-3,
            lr_critic: 1e-3,
            batch_size: 64,
            warmup: 1000,
            eps_start: 1.0,
            eps_end: 0.02,
            eps_decay_steps: 15_000,
            total_steps: 30_000,
            max_episode_length: 25,
            seed: 0,
            memory_capacity: 50_000,
            actor_hidden: vec![64, 64],
            critic_hidden: vec![64, 64],
            v2_shared_sizes: vec![64, 64],
            v2_head_sizes: vec![32],
        }
    }

    /// Network shapes and schedule of the original large-scale experiments.
    pub fn full_scale(variant: Variant) -> Self {
        TrainConfig {
            lr_actor: 1e-4,
            lr_critic: 1e-4,
            eps_decay_steps: 600_000,
            total_steps: 2_000_000,
            max_episode_length: 500,
            memory_capacity: 1_000_000,
            actor_hidden: vec![500, 128],
            critic_hidden: vec![500, 300, 128],
            v2_shared_sizes: vec![500, 300],
            v2_head_sizes: vec![128],
            ..TrainConfig::desk(variant)
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::InvalidSpec(msg.into()));
        if !(0.0..=1.0).contains(&self.gamma) {
            return bad("gamma must lie in [0, 1]");
        }
        if !(self.tau > 0.0 && self.tau <= 1.0) {
            return bad("tau must lie in (0, 1]");
        }
        if !(self.lr_actor > 0.0 && self.lr_critic > 0.0) {
            return bad("learning rates must be positive");
        }
        if self.batch_size == 0 {
            return bad("batch size must be positive");
        }
        if !(self.eps_start >= self.eps_end && self.eps_end >= 0.0) {
            return bad("need eps_start >= eps_end >= 0");
        }
        if self.eps_decay_steps == 0 {
            return bad("eps_decay_steps must be positive");
        }
        if self.max_episode_length == 0 || self.memory_capacity == 0 {
            return bad("episode length and memory capacity must be positive");
        }
        if self.memory_capacity < self.learning_starts() {
            return bad("memory capacity smaller than max(batch size, warmup)");
        }
        let hidden = [
            &self.actor_hidden,
            &self.critic_hidden,
            &self.v2_shared_sizes,
            &self.v2_head_sizes,
        ];
        if hidden.iter().any(|h| h.contains(&0)) {
            return bad("zero-width hidden layer");
        }
        if self.v2_shared_sizes.is_empty() {
            return bad("v2 critic trunk needs at least one layer");
        }
        Ok(())
    }

    /// Memory size at which learning starts.
    pub fn learning_starts(&self) -> usize {
        self.batch_size.max(self.warmup)
    }
}

/// Linear decay from `eps_start` to `eps_end` over `eps_decay_steps`, then flat.
pub fn exploration_epsilon(step: u64, cfg: &TrainConfig) -> f64 {
    if step >= cfg.eps_decay_steps {
        cfg.eps_end
    } else {
        let frac = step as f64 / cfg.eps_decay_steps as f64;
        cfg.eps_start + (cfg.eps_end - cfg.eps_start) * frac
    }
}
