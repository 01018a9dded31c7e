//! Per-variant parameter counts, update counts and train-step wall-clock.

use std::fmt::Write as _;
use std::time::Instant;

use psmaddpg_core::envs::{MultiAgentEnv, ParticleEnv};
use psmaddpg_core::eval::{structural_rows, StructuralRow};
use psmaddpg_core::memory::{ReplayMemory, Transition, TransitionShape};
use psmaddpg_core::trainers::{train_step, AgentEnsemble, TrainConfig, Variant};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone, PartialEq)]
pub struct TimedRow {
    pub counts: StructuralRow,
    /// Milliseconds per 1 000 learning train steps.
    pub ms_per_1000_steps: f64,
}

/// Uniformly random joint actions rolled through the environment.
pub fn random_transitions<R: Rng + ?Sized>(env: &ParticleEnv, count: usize, rng: &mut R) -> Vec<Transition> {
    let spec = env.spec();
    let (mut state, mut obs) = env.reset(rng);
    let mut out = Vec::with_capacity(count);
    while out.len() < count {
        let actions: Vec<Vec<f64>> = spec
            .act_dims
            .iter()
            .map(|&d| (0..d).map(|_| rng.random_range(-1.0..=1.0)).collect())
            .collect();
        let step = env.step(&state, &actions, rng).expect("finite random actions");
        out.push(Transition {
            x: obs.concat(),
            a: actions.concat(),
            r: step.rewards.clone(),
            x_next: step.observations.concat(),
            terminal: step.terminal,
        });
        if step.done || step.terminal {
            (state, obs) = env.reset(rng);
        } else {
            state = step.state;
            obs = step.observations;
        }
    }
    out
}

/// Times `steps` learning train steps after filling the memory to the
/// learning threshold. Environment stepping happens before the clock starts.
pub fn time_train_steps(env: &ParticleEnv, cfg: &TrainConfig, steps: usize) -> Result<f64, psmaddpg_core::Error> {
    let spec = env.spec();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut ensemble = AgentEnsemble::new(spec, cfg, &mut rng)?;
    let mut memory = ReplayMemory::new(
        cfg.memory_capacity,
        TransitionShape {
            obs_len: spec.total_obs(),
            act_len: spec.total_act(),
            n_agents: spec.n_agents,
        },
    )?;
    let warm = cfg.learning_starts().saturating_sub(1).min(cfg.memory_capacity);
    let mut transitions = random_transitions(env, warm + steps, &mut rng).into_iter();
    for t in transitions.by_ref().take(warm) {
        memory.push(t)?;
    }
    let start = Instant::now();
    for t in transitions {
        train_step(&mut ensemble, &mut memory, t, cfg, &mut rng)?;
    }
    let elapsed = start.elapsed().as_secs_f64() * 1e3;
    Ok(elapsed * 1000.0 / steps.max(1) as f64)
}

/// All four variants with `base`'s shapes on `env`.
pub fn structural_report(env: &ParticleEnv, base: &TrainConfig, steps: usize) -> Result<Vec<TimedRow>, psmaddpg_core::Error> {
    let cfgs: Vec<TrainConfig> = Variant::ALL
        .iter()
        .map(|&variant| TrainConfig { variant, ..base.clone() })
        .collect();
    let rows = structural_rows(&cfgs, env.spec(), &mut ChaCha8Rng::seed_from_u64(base.seed))?;
    rows.into_iter()
        .zip(&cfgs)
        .map(|(counts, cfg)| {
            Ok(TimedRow {
                counts,
                ms_per_1000_steps: time_train_steps(env, cfg, steps)?,
            })
        })
        .collect()
}

pub fn structural_text(env: &ParticleEnv, rows: &[TimedRow]) -> String {
    let mut out = format!("# env {} n_agents {}\n", env.kind(), env.spec().n_agents);
    out.push_str("variant total_params actor_params critic_params nets_updated_per_step ms_per_1000_steps\n");
    for r in rows {
        let c = &r.counts;
        writeln!(
            out,
            "{} {} {} {} {} {:.3}",
            c.variant, c.total_params, c.actor_params, c.critic_params, c.nets_updated_per_step, r.ms_per_1000_steps
        )
        .unwrap();
    }
    let total = |v: Variant| rows.iter().find(|r| r.counts.variant == v).map(|r| r.counts.total_params);
    if let (Some(m), Some(v0)) = (total(Variant::Maddpg), total(Variant::V0)) {
        writeln!(out, "param_ratio_maddpg_over_v0 {:?}", m as f64 / v0 as f64).unwrap();
    }
    out
}
