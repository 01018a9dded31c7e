//! `metrics.csv` and `trajectory.csv`.

use std::fmt::{self, Write as _};

use psmaddpg_core::envs::{MultiAgentEnv, ParticleEnv};
use psmaddpg_core::eval::{moving_average, EpisodeRecord};
use psmaddpg_core::trainers::AgentEnsemble;
use rand::Rng;

pub const METRICS_HEADER: &str = "episode,agent,return,total,ma100,epsilon,phase";
pub const TRAJECTORY_HEADER: &str = "episode,step,agent,ox,oy,ax,ay,reward";
pub const MA_WINDOW: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Phase {
    Train,
    Eval,
}

impl fmt::Display for Phase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Phase::Train => "train",
            Phase::Eval => "eval",
        })
    }
}

/// One episode of one phase, with the exploration level it ran at.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseEpisode {
    pub record: EpisodeRecord,
    pub epsilon: f64,
}

/// Renders rows ordered by (phase, episode, agent). `ma100` is the trailing
/// 100-episode mean of each agent's return within its phase.
pub fn metrics_csv(train: &[PhaseEpisode], eval: &[PhaseEpisode]) -> String {
    let mut out = String::from(METRICS_HEADER);
    out.push('\n');
    for (phase, episodes) in [(Phase::Train, train), (Phase::Eval, eval)] {
        let n = episodes.first().map_or(0, |e| e.record.returns.len());
        let averages: Vec<Vec<f64>> = (0..n)
            .map(|agent| {
                let series: Vec<f64> = episodes.iter().map(|e| e.record.returns[agent]).collect();
                moving_average(&series, MA_WINDOW)
            })
            .collect();
        for (k, ep) in episodes.iter().enumerate() {
            for (agent, ret) in ep.record.returns.iter().enumerate() {
                writeln!(
                    out,
                    "{},{},{},{},{},{},{}",
                    ep.record.episode, agent, ret, ep.record.total, averages[agent][k], ep.epsilon, phase
                )
                .unwrap();
            }
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryRow {
    pub episode: usize,
    pub step: usize,
    pub agent: usize,
    /// Position when the action was chosen.
    pub position: [f64; 2],
    pub action: Vec<f64>,
    pub reward: f64,
}

/// Deterministic-policy episodes with every agent's position and action.
pub fn record_trajectories<R: Rng + ?Sized>(
    ensemble: &AgentEnsemble,
    env: &ParticleEnv,
    episodes: usize,
    rng: &mut R,
) -> Result<Vec<TrajectoryRow>, psmaddpg_core::Error> {
    let mut rows = Vec::new();
    for episode in 0..episodes {
        let (mut state, mut obs) = env.reset(rng);
        for step in 0.. {
            let actions = ensemble.act(&obs, 0.0, rng)?;
            let out = env.step(&state, &actions, rng)?;
            for (agent, action) in actions.into_iter().enumerate() {
                rows.push(TrajectoryRow {
                    episode,
                    step,
                    agent,
                    position: state.agent_pos[agent],
                    action,
                    reward: out.rewards[agent],
                });
            }
            state = out.state;
            obs = out.observations;
            if out.done || out.terminal {
                break;
            }
        }
    }
    Ok(rows)
}

pub fn trajectory_csv(rows: &[TrajectoryRow]) -> String {
    let mut out = String::from(TRAJECTORY_HEADER);
    out.push('\n');
    for r in rows {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{}",
            r.episode, r.step, r.agent, r.position[0], r.position[1], r.action[0], r.action[1], r.reward
        )
        .unwrap();
    }
    out
}
