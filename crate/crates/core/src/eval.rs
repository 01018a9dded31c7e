//! Policy evaluation, moving averages and structural comparisons.

use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;

use crate::envs::{EnvSpec, MultiAgentEnv};
use crate::trainers::{AgentEnsemble, TrainConfig, Variant};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeRecord {
    pub episode: usize,
    pub returns: Vec<f64>,
    /// Sum of `returns`.
    pub total: f64,
    pub steps: usize,
}

impl EpisodeRecord {
    pub fn new(episode: usize, returns: Vec<f64>, steps: usize) -> Self {
        EpisodeRecord {
            episode,
            total: compensated_sum(returns.iter().copied()),
            returns,
            steps,
        }
    }
}

/// Neumaier-compensated running sum.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct CompensatedSum {
    sum: f64,
    carry: f64,
}

impl CompensatedSum {
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.carry += (self.sum - t) + x;
        } else {
            self.carry += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.carry
    }
}

pub fn compensated_sum(values: impl IntoIterator<Item = f64>) -> f64 {
    let mut acc = CompensatedSum::default();
    for v in values {
        acc.add(v);
    }
    acc.value()
}

/// Per-agent episode returns accumulated step by step.
#[derive(Debug, Clone)]
pub struct ReturnAccumulator {
    sums: Vec<CompensatedSum>,
}

impl ReturnAccumulator {
    pub fn new(n_agents: usize) -> Self {
        ReturnAccumulator {
            sums: vec![CompensatedSum::default(); n_agents],
        }
    }

    pub fn add(&mut self, rewards: &[f64]) {
        for (acc, &r) in self.sums.iter_mut().zip(rewards) {
            acc.add(r);
        }
    }

    pub fn record(&self, episode: usize, steps: usize) -> EpisodeRecord {
        EpisodeRecord::new(episode, self.sums.iter().map(CompensatedSum::value).collect(), steps)
    }
}

/// Runs `episodes` episodes with an arbitrary joint policy. The policy sees
/// the full state as well as the local observations, so it can also express
/// oracle controllers.
pub fn rollout<E, R, P>(env: &E, episodes: usize, rng: &mut R, mut policy: P) -> Result<Vec<EpisodeRecord>>
where
    E: MultiAgentEnv,
    R: Rng + ?Sized,
    P: FnMut(&E::State, &[Vec<f64>], &mut R) -> Result<Vec<Vec<f64>>>,
{
    let spec = env.spec();
    let mut records = Vec::with_capacity(episodes);
    for episode in 0..episodes {
        let (mut state, mut obs) = env.reset(rng);
        let mut returns = ReturnAccumulator::new(spec.n_agents);
        let mut steps = 0;
        loop {
            let actions = policy(&state, &obs, rng)?;
            let out = env.step(&state, &actions, rng)?;
            returns.add(&out.rewards);
            steps += 1;
            state = out.state;
            obs = out.observations;
            if out.done || out.terminal {
                break;
            }
        }
        records.push(returns.record(episode, steps));
    }
    Ok(records)
}

/// Runs the deterministic policy (no exploration noise, no learning).
pub fn evaluate<E, R>(
    ensemble: &AgentEnsemble,
    env: &E,
    episodes: usize,
    rng: &mut R,
) -> Result<Vec<EpisodeRecord>>
where
    E: MultiAgentEnv,
    R: Rng + ?Sized,
{
    check_compatible(ensemble.spec(), env.spec())?;
    rollout(env, episodes, rng, |_, obs, rng| ensemble.act(obs, 0.0, rng))
}

fn check_compatible(a: &EnvSpec, b: &EnvSpec) -> Result<()> {
    if a.n_agents == b.n_agents && a.obs_dims == b.obs_dims && a.act_dims == b.act_dims {
        Ok(())
    } else {
        Err(Error::InvalidSpec(
            "ensemble was built for a different environment".into(),
        ))
    }
}

/// Trailing mean over the last `min(k + 1, window)` values.
pub fn moving_average(values: &[f64], window: usize) -> Vec<f64> {
    let window = window.max(1);
    let mut out = Vec::with_capacity(values.len());
    let mut sum = 0.0;
    for (k, &v) in values.iter().enumerate() {
        sum += v;
        if k >= window {
            sum -= values[k - window];
        }
        let len = (k + 1).min(window);
        // Re-sum periodically so long series do not drift.
        if k % 1024 == 1023 {
            sum = values[k + 1 - len..=k].iter().sum();
        }
        out.push(sum / len as f64);
    }
    out
}

/// Parameter and update counts for one variant.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StructuralRow {
    pub variant: Variant,
    pub actor_params: usize,
    pub critic_params: usize,
    pub total_params: usize,
    pub nets_updated_per_step: usize,
}

/// Builds each configuration's ensemble for `spec` and counts its parameters.
pub fn structural_rows<R: Rng + ?Sized>(
    cfgs: &[TrainConfig],
    spec: &EnvSpec,
    rng: &mut R,
) -> Result<Vec<StructuralRow>> {
    cfgs.iter()
        .map(|cfg| {
            let ens = AgentEnsemble::new(spec, cfg, rng)?;
            Ok(StructuralRow {
                variant: cfg.variant,
                actor_params: ens.actor_params(),
                critic_params: ens.critic_params(),
                total_params: ens.total_params(),
                nets_updated_per_step: cfg.variant.nets_updated_per_step(spec.n_agents),
            })
        })
        .collect()
}
