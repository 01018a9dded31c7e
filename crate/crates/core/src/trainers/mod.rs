//! MADDPG and the parameter-sharing variants.
//!
//! | variant | actors | critics                         | nets stepped per update |
//! |---------|--------|---------------------------------|-------------------------|
//! | maddpg  | N      | N                               | 2N                      |
//! | v0      | 1      | 1                               | 2                       |
//! | v1      | 1      | N                               | N + 1                   |
//! | v2      | 1      | 1 trunk + N heads               | 2                       |
//!
//! Every critic sees all observations and all actions; every actor sees only
//! its agent's local observation.

mod config;
mod ensemble;
mod update;

use alloc::string::String;
use alloc::vec::Vec;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub use config::{exploration_epsilon, TrainConfig, Variant};
pub use ensemble::{
    exploration_noise, select_action, AgentEnsemble, CriticRef, Critics, Learner,
    MultiHeadCritic, MultiHeadLearner,
};
pub use update::{train_step, AgentTargets, CriticGradient, StepReport, UpdateReport};

use crate::envs::MultiAgentEnv;
use crate::eval::{EpisodeRecord, ReturnAccumulator};
use crate::memory::{ReplayMemory, Transition, TransitionShape};
use crate::Result;

/// One finished training episode.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainEpisode {
    pub record: EpisodeRecord,
    /// Exploration level at the episode's last step.
    pub epsilon: f64,
    /// Learning steps run during the episode.
    pub updates: usize,
}

/// Drives episodes of one environment and learns from them.
#[derive(Debug)]
pub struct Trainer<'e, E> {
    env: &'e E,
    cfg: TrainConfig,
    ensemble: AgentEnsemble,
    memory: ReplayMemory,
    rng: ChaCha8Rng,
    global_step: u64,
    episodes: usize,
    warnings: Vec<String>,
}

impl<'e, E: MultiAgentEnv> Trainer<'e, E> {
    /// Seeds a fresh ensemble and memory from `cfg.seed`.
    pub fn new(env: &'e E, cfg: TrainConfig) -> Result<Self> {
        cfg.validate()?;
        let spec = env.spec();
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let ensemble = AgentEnsemble::new(spec, &cfg, &mut rng)?;
        let memory = ReplayMemory::new(
            cfg.memory_capacity,
            TransitionShape {
                obs_len: spec.total_obs(),
                act_len: spec.total_act(),
                n_agents: spec.n_agents,
            },
        )?;
        let mut warnings = Vec::new();
        if cfg.variant == Variant::V0 && !spec.reward_sharing && !spec.exchangeable {
            warnings.push(String::from(
                "v0 shares one critic but this environment neither shares rewards nor has exchangeable agents",
            ));
        }
        Ok(Trainer {
            env,
            cfg,
            ensemble,
            memory,
            rng,
            global_step: 0,
            episodes: 0,
            warnings,
        })
    }

    pub fn ensemble(&self) -> &AgentEnsemble {
        &self.ensemble
    }

    pub fn into_ensemble(self) -> AgentEnsemble {
        self.ensemble
    }

    pub fn memory(&self) -> &ReplayMemory {
        &self.memory
    }

    pub fn config(&self) -> &TrainConfig {
        &self.cfg
    }

    pub fn global_step(&self) -> u64 {
        self.global_step
    }

    pub fn warnings(&self) -> &[String] {
        &self.warnings
    }

    pub fn is_finished(&self) -> bool {
        self.global_step >= self.cfg.total_steps
    }

    /// Runs one episode (cut short if the step budget runs out). Returns
    /// `None` once the budget is spent.
    pub fn run_episode(&mut self) -> Result<Option<TrainEpisode>> {
        if self.is_finished() {
            return Ok(None);
        }
        let n = self.env.spec().n_agents;
        let (mut state, mut obs) = self.env.reset(&mut self.rng);
        let mut returns = ReturnAccumulator::new(n);
        let mut steps = 0;
        let mut updates = 0;
        let mut epsilon = exploration_epsilon(self.global_step, &self.cfg);
        while steps < self.cfg.max_episode_length && !self.is_finished() {
            epsilon = exploration_epsilon(self.global_step, &self.cfg);
            let actions = self.ensemble.act(&obs, epsilon, &mut self.rng)?;
            let out = self.env.step(&state, &actions, &mut self.rng)?;
            returns.add(&out.rewards);
            let transition = Transition {
                x: obs.concat(),
                a: actions.concat(),
                r: out.rewards,
                x_next: out.observations.concat(),
                terminal: out.terminal,
            };
            let report = train_step(
                &mut self.ensemble,
                &mut self.memory,
                transition,
                &self.cfg,
                &mut self.rng,
            )?;
            updates += usize::from(report.update.is_some());
            self.global_step += 1;
            steps += 1;
            state = out.state;
            obs = out.observations;
            if out.done || out.terminal {
                break;
            }
        }
        let record = returns.record(self.episodes, steps);
        self.episodes += 1;
        Ok(Some(TrainEpisode {
            record,
            epsilon,
            updates,
        }))
    }
}

/// Result of a full training run.
#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub ensemble: AgentEnsemble,
    pub episodes: Vec<TrainEpisode>,
    pub warnings: Vec<String>,
}

/// Trains until `cfg.total_steps` environment steps have been taken.
pub fn train<E: MultiAgentEnv>(env: &E, cfg: &TrainConfig) -> Result<TrainOutcome> {
    let mut trainer = Trainer::new(env, cfg.clone())?;
    let mut episodes = Vec::new();
    while let Some(ep) = trainer.run_episode()? {
        episodes.push(ep);
    }
    let warnings = trainer.warnings.clone();
    Ok(TrainOutcome {
        ensemble: trainer.into_ensemble(),
        episodes,
        warnings,
    })
}
