//! 2-D particle environments for cooperative multi-agent control.
//!
//! Agents are double integrators in the box `[-1, 1]^2`. Each agent sees only
//! a local view: its own position and velocity, offsets to every landmark
//! and offsets to the other agents (sorted, so the view does not depend on
//! agent numbering).

use alloc::vec;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use rand::Rng;

use crate::error::check_len;
use crate::{Error, Result};

pub const DT: f64 = 0.1;
pub const DRAG: f64 = 0.25;
/// Half-width of the square arena.
pub const ARENA: f64 = 1.0;
/// Half-width of the uniform sensor noise used by the demos.
pub const DEFAULT_OBS_NOISE: f64 = 0.01;

/// Static description of an environment as the learners see it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EnvSpec {
    pub n_agents: usize,
    pub obs_dims: Vec<usize>,
    pub act_dims: Vec<usize>,
    /// Every agent receives the same reward at every step.
    pub reward_sharing: bool,
    /// Swapping two agents only permutes their own observations.
    pub exchangeable: bool,
    pub max_episode_length: usize,
}

impl EnvSpec {
    pub fn total_obs(&self) -> usize {
        self.obs_dims.iter().sum()
    }

    pub fn total_act(&self) -> usize {
        self.act_dims.iter().sum()
    }

    /// All agents share observation and action widths.
    pub fn is_uniform(&self) -> bool {
        self.obs_dims.windows(2).all(|w| w[0] == w[1])
            && self.act_dims.windows(2).all(|w| w[0] == w[1])
    }

    /// Start offset of each agent's slice inside a concatenated vector.
    pub fn obs_offsets(&self) -> Vec<usize> {
        offsets(&self.obs_dims)
    }

    pub fn act_offsets(&self) -> Vec<usize> {
        offsets(&self.act_dims)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_agents == 0 || self.max_episode_length == 0 {
            return Err(Error::InvalidSpec(
                "agent count and episode length must be positive".into(),
            ));
        }
        check_len("obs_dims", self.n_agents, self.obs_dims.len())?;
        check_len("act_dims", self.n_agents, self.act_dims.len())?;
        if self.obs_dims.contains(&0) || self.act_dims.contains(&0) {
            return Err(Error::InvalidSpec("zero observation or action width".into()));
        }
        Ok(())
    }
}

fn offsets(dims: &[usize]) -> Vec<usize> {
    dims.iter()
        .scan(0, |acc, &d| {
            let start = *acc;
            *acc += d;
            Some(start)
        })
        .collect()
}

/// Everything a learner needs from an environment.
pub trait MultiAgentEnv {
    type State: Clone;

    fn spec(&self) -> &EnvSpec;

    fn reset<R: Rng + ?Sized>(&self, rng: &mut R) -> (Self::State, Vec<Vec<f64>>);

    fn step<R: Rng + ?Sized>(
        &self,
        state: &Self::State,
        actions: &[Vec<f64>],
        rng: &mut R,
    ) -> Result<StepOutcome<Self::State>>;
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepOutcome<S> {
    pub state: S,
    pub observations: Vec<Vec<f64>>,
    pub rewards: Vec<f64>,
    /// The episode is over (time limit reached).
    pub done: bool,
    /// The next state is absorbing, so nothing should be bootstrapped from it.
    pub terminal: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum EnvKind {
    /// Shared reward: minus the sum over landmarks of the closest agent's distance.
    CoopSpread,
    /// Agent `i` is rewarded by minus its distance to landmark `i`.
    AssignedTargets,
    /// `CoopSpread` with a one-hot agent id appended to each observation.
    IdTaggedSpread,
}

impl EnvKind {
    pub const ALL: [EnvKind; 3] = [
        EnvKind::CoopSpread,
        EnvKind::AssignedTargets,
        EnvKind::IdTaggedSpread,
    ];

    pub fn name(self) -> &'static str {
        match self {
            EnvKind::CoopSpread => "coop_spread",
            EnvKind::AssignedTargets => "assigned_targets",
            EnvKind::IdTaggedSpread => "id_tagged_spread",
        }
    }
}

impl fmt::Display for EnvKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for EnvKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        EnvKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::InvalidSpec(alloc::format!("unknown environment `{s}`")))
    }
}

pub type Vec2 = [f64; 2];

#[derive(Debug, Clone, PartialEq)]
pub struct EnvState {
    pub agent_pos: Vec<Vec2>,
    pub agent_vel: Vec<Vec2>,
    pub landmarks: Vec<Vec2>,
    pub step: usize,
}

impl EnvState {
    /// Exchanges the full kinematic state of two agents.
    pub fn swap_agents(&mut self, i: usize, j: usize) {
        self.agent_pos.swap(i, j);
        self.agent_vel.swap(i, j);
    }
}

#[derive(Debug, Clone)]
pub struct ParticleEnv {
    kind: EnvKind,
    spec: EnvSpec,
    obs_noise: f64,
}

impl ParticleEnv {
    pub fn new(kind: EnvKind, n_agents: usize, max_episode_length: usize) -> Result<Self> {
        if n_agents == 0 {
            return Err(Error::InvalidSpec("need at least one agent".into()));
        }
        let base = 4 + 2 * n_agents + 2 * (n_agents - 1);
        let obs_dim = match kind {
            EnvKind::IdTaggedSpread => base + n_agents,
            _ => base,
        };
        let spec = EnvSpec {
            n_agents,
            obs_dims: vec![obs_dim; n_agents],
            act_dims: vec![2; n_agents],
            reward_sharing: kind != EnvKind::AssignedTargets,
            exchangeable: kind == EnvKind::CoopSpread,
            max_episode_length,
        };
        spec.validate()?;
        Ok(ParticleEnv {
            kind,
            spec,
            obs_noise: 0.0,
        })
    }

    /// Adds zero-mean uniform noise of the given half-width to observations.
    pub fn with_obs_noise(mut self, half_width: f64) -> Result<Self> {
        if !(half_width >= 0.0 && half_width.is_finite()) {
            return Err(Error::InvalidSpec("noise half-width must be >= 0".into()));
        }
        self.obs_noise = half_width;
        Ok(self)
    }

    pub fn kind(&self) -> EnvKind {
        self.kind
    }

    pub fn obs_noise(&self) -> f64 {
        self.obs_noise
    }

    /// Noise-free local observations.
    pub fn observe(&self, state: &EnvState) -> Vec<Vec<f64>> {
        (0..self.spec.n_agents)
            .map(|i| self.observe_agent(state, i))
            .collect()
    }

    fn observe_agent(&self, state: &EnvState, i: usize) -> Vec<f64> {
        let n = self.spec.n_agents;
        let me = state.agent_pos[i];
        let mut obs = Vec::with_capacity(self.spec.obs_dims[i]);
        obs.extend_from_slice(&me);
        obs.extend_from_slice(&state.agent_vel[i]);
        // Own landmark first for assigned targets so a shared policy can find it.
        let first = if self.kind == EnvKind::AssignedTargets { i } else { 0 };
        for k in 0..n {
            let l = state.landmarks[(first + k) % n];
            obs.push(l[0] - me[0]);
            obs.push(l[1] - me[1]);
        }
        let mut others: Vec<Vec2> = (0..n)
            .filter(|&j| j != i)
            .map(|j| {
                let p = state.agent_pos[j];
                [p[0] - me[0], p[1] - me[1]]
            })
            .collect();
        others.sort_by(|a, b| {
            norm2(*a)
                .total_cmp(&norm2(*b))
                .then(a[0].total_cmp(&b[0]))
                .then(a[1].total_cmp(&b[1]))
        });
        for o in others {
            obs.extend_from_slice(&o);
        }
        if self.kind == EnvKind::IdTaggedSpread {
            obs.extend((0..n).map(|k| if k == i { 1.0 } else { 0.0 }));
        }
        obs
    }

    fn observe_noisy<R: Rng + ?Sized>(&self, state: &EnvState, rng: &mut R) -> Vec<Vec<f64>> {
        let mut obs = self.observe(state);
        if self.obs_noise > 0.0 {
            let w = self.obs_noise;
            for v in obs.iter_mut().flatten() {
                *v += rng.random_range(-w..=w);
            }
        }
        obs
    }

    pub fn rewards(&self, state: &EnvState) -> Vec<f64> {
        let n = self.spec.n_agents;
        match self.kind {
            EnvKind::AssignedTargets => (0..n)
                .map(|i| -dist(state.agent_pos[i], state.landmarks[i]))
                .collect(),
            EnvKind::CoopSpread | EnvKind::IdTaggedSpread => {
                let shared = -state
                    .landmarks
                    .iter()
                    .map(|&l| {
                        state
                            .agent_pos
                            .iter()
                            .map(|&p| dist(p, l))
                            .fold(f64::INFINITY, f64::min)
                    })
                    .sum::<f64>();
                vec![shared; n]
            }
        }
    }
}

impl MultiAgentEnv for ParticleEnv {
    type State = EnvState;

    fn spec(&self) -> &EnvSpec {
        &self.spec
    }

    fn reset<R: Rng + ?Sized>(&self, rng: &mut R) -> (EnvState, Vec<Vec<f64>>) {
        let n = self.spec.n_agents;
        let mut point = || [rng.random_range(-ARENA..=ARENA), rng.random_range(-ARENA..=ARENA)];
        let agent_pos = (0..n).map(|_| point()).collect();
        let landmarks = (0..n).map(|_| point()).collect();
        let state = EnvState {
            agent_pos,
            agent_vel: vec![[0.0; 2]; n],
            landmarks,
            step: 0,
        };
        let obs = self.observe_noisy(&state, rng);
        (state, obs)
    }

    fn step<R: Rng + ?Sized>(
        &self,
        state: &EnvState,
        actions: &[Vec<f64>],
        rng: &mut R,
    ) -> Result<StepOutcome<EnvState>> {
        let n = self.spec.n_agents;
        check_len("actions", n, actions.len())?;
        if state.step >= self.spec.max_episode_length {
            return Err(Error::InvalidSpec("episode already finished".into()));
        }
        for (a, &d) in actions.iter().zip(&self.spec.act_dims) {
            check_len("agent action", d, a.len())?;
            if a.iter().any(|v| v.is_nan()) {
                return Err(Error::Numeric("action"));
            }
        }
        let mut next = state.clone();
        for ((pos, vel), action) in next
            .agent_pos
            .iter_mut()
            .zip(next.agent_vel.iter_mut())
            .zip(actions)
        {
            for d in 0..2 {
                let u = action[d].clamp(-1.0, 1.0);
                vel[d] += DT * u - DRAG * vel[d];
                pos[d] += DT * vel[d];
                if pos[d].abs() > ARENA {
                    pos[d] = pos[d].clamp(-ARENA, ARENA);
                    vel[d] = 0.0;
                }
            }
        }
        next.step += 1;
        let rewards = self.rewards(&next);
        let observations = self.observe_noisy(&next, rng);
        let done = next.step >= self.spec.max_episode_length;
        Ok(StepOutcome {
            state: next,
            observations,
            rewards,
            done,
            terminal: false,
        })
    }
}

#[inline]
fn norm2(v: Vec2) -> f64 {
    v[0] * v[0] + v[1] * v[1]
}

#[inline]
fn dist(a: Vec2, b: Vec2) -> f64 {
    libm::sqrt(norm2([a[0] - b[0], a[1] - b[1]]))
}

/// Cost weights of the locomotion reward `v - contact - control + survival`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AntReward {
    pub survival: f64,
    pub control_cost: f64,
}

impl AntReward {
    /// The stock locomotion reward.
    pub const STANDARD: AntReward = AntReward {
        survival: 1.0,
        control_cost: 0.5,
    };
    /// Reduced survival bonus and control cost, so standing still is no
    /// longer a good local optimum.
    pub const LOW_SURVIVAL: AntReward = AntReward {
        survival: 0.05,
        control_cost: 5e-3,
    };

    pub fn reward(&self, velocity: f64, contact: &[f64], action: &[f64]) -> f64 {
        multi_ant_reward(velocity, contact, action, self.survival, self.control_cost)
    }
}

const CONTACT_COST: f64 = 5e-4;

/// `v - 5e-4 * |clip(F, -1, 1)|^2 - c_ctrl * |a|^2 + survival`.
pub fn multi_ant_reward(
    velocity: f64,
    contact: &[f64],
    action: &[f64],
    survival: f64,
    control_cost: f64,
) -> f64 {
    let contact_sq: f64 = contact
        .iter()
        .map(|f| {
            let c = f.clamp(-1.0, 1.0);
            c * c
        })
        .sum();
    let action_sq: f64 = action.iter().map(|a| a * a).sum();
    velocity - CONTACT_COST * contact_sq - control_cost * action_sq + survival
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn rng(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }

    #[test]
    fn reset_is_deterministic_and_sized() {
        for kind in EnvKind::ALL {
            let env = ParticleEnv::new(kind, 3, 25).unwrap();
            let (s1, o1) = env.reset(&mut rng(5));
            let (s2, o2) = env.reset(&mut rng(5));
            assert_eq!(s1, s2);
            assert_eq!(o1, o2);
            for (o, &d) in o1.iter().zip(&env.spec().obs_dims) {
                assert_eq!(o.len(), d);
            }
            assert!(s1.agent_vel.iter().all(|v| *v == [0.0, 0.0]));
            assert_eq!(s1.step, 0);
        }
    }

    #[test]
    fn translation_leaves_offsets_unchanged() {
        let env = ParticleEnv::new(EnvKind::CoopSpread, 3, 25).unwrap();
        let (state, _) = env.reset(&mut rng(9));
        let shift = [0.25, -0.125];
        let mut moved = state.clone();
        for p in moved.agent_pos.iter_mut().chain(moved.landmarks.iter_mut()) {
            p[0] += shift[0];
            p[1] += shift[1];
        }
        let before = env.observe(&state);
        let after = env.observe(&moved);
        for (b, a) in before.iter().zip(&after) {
            assert!((a[0] - b[0] - shift[0]).abs() < 1e-12);
            assert!((a[1] - b[1] - shift[1]).abs() < 1e-12);
            for (x, y) in b[2..].iter().zip(&a[2..]) {
                assert!((x - y).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn zero_action_at_rest_stays_put() {
        let env = ParticleEnv::new(EnvKind::CoopSpread, 2, 25).unwrap();
        let (state, _) = env.reset(&mut rng(1));
        let out = env
            .step(&state, &[vec![0.0, 0.0], vec![0.0, 0.0]], &mut rng(2))
            .unwrap();
        assert_eq!(out.state.agent_pos, state.agent_pos);
        assert_eq!(out.state.step, 1);
    }

    #[test]
    fn shared_reward_on_placed_configuration() {
        let env = ParticleEnv::new(EnvKind::CoopSpread, 2, 25).unwrap();
        let state = EnvState {
            agent_pos: vec![[-0.5, 0.0], [0.5, 0.3]],
            agent_vel: vec![[0.0; 2]; 2],
            landmarks: vec![[-0.5, 0.0], [0.5, -0.1]],
            step: 0,
        };
        let r = env.rewards(&state);
        assert!((r[0] + 0.4).abs() < 1e-12);
        assert_eq!(r[0], r[1]);
    }

    #[test]
    fn assigned_rewards_are_individual() {
        let env = ParticleEnv::new(EnvKind::AssignedTargets, 2, 25).unwrap();
        let state = EnvState {
            agent_pos: vec![[0.0, 0.0], [0.0, 0.0]],
            agent_vel: vec![[0.0; 2]; 2],
            landmarks: vec![[0.3, 0.4], [0.0, -1.0]],
            step: 0,
        };
        assert_eq!(env.rewards(&state), vec![-0.5, -1.0]);
        // Own landmark first in each view.
        let obs = env.observe(&state);
        assert_eq!(&obs[0][4..6], &[0.3, 0.4]);
        assert_eq!(&obs[1][4..6], &[0.0, -1.0]);
    }

    #[test]
    fn id_tag_appended() {
        let env = ParticleEnv::new(EnvKind::IdTaggedSpread, 3, 25).unwrap();
        let (state, _) = env.reset(&mut rng(0));
        let obs = env.observe(&state);
        assert_eq!(&obs[1][obs[1].len() - 3..], &[0.0, 1.0, 0.0]);
        assert!(!env.spec().exchangeable);
        assert!(env.spec().reward_sharing);
    }

    #[test]
    fn actions_are_clipped_and_nan_rejected() {
        let env = ParticleEnv::new(EnvKind::CoopSpread, 1, 25).unwrap();
        let (mut state, _) = env.reset(&mut rng(0));
        state.agent_pos[0] = [0.0, 0.0];
        let big = env.step(&state, &[vec![50.0, -50.0]], &mut rng(0)).unwrap();
        let unit = env.step(&state, &[vec![1.0, -1.0]], &mut rng(0)).unwrap();
        assert_eq!(big.state, unit.state);
        assert!(matches!(
            env.step(&state, &[vec![f64::NAN, 0.0]], &mut rng(0)),
            Err(Error::Numeric(_))
        ));
    }

    #[test]
    fn episode_ends_at_max_length() {
        let env = ParticleEnv::new(EnvKind::AssignedTargets, 2, 7).unwrap();
        let mut r = rng(4);
        let (mut state, _) = env.reset(&mut r);
        let mut steps = 0;
        loop {
            let out = env.step(&state, &[vec![1.0, 1.0], vec![-1.0, 0.5]], &mut r).unwrap();
            steps += 1;
            state = out.state;
            assert!(state.agent_pos.iter().flatten().all(|p| p.abs() <= ARENA));
            if out.done {
                break;
            }
        }
        assert_eq!(steps, 7);
        assert!(env.step(&state, &[vec![0.0; 2], vec![0.0; 2]], &mut r).is_err());
    }

    #[test]
    fn noise_is_bounded() {
        let env = ParticleEnv::new(EnvKind::CoopSpread, 2, 5)
            .unwrap()
            .with_obs_noise(DEFAULT_OBS_NOISE)
            .unwrap();
        let (state, noisy) = env.reset(&mut rng(2));
        let clean = env.observe(&state);
        for (a, b) in noisy.iter().flatten().zip(clean.iter().flatten()) {
            assert!((a - b).abs() <= DEFAULT_OBS_NOISE);
        }
    }

    #[test]
    fn ant_reward_cases() {
        assert_eq!(multi_ant_reward(0.0, &[0.0], &[0.0], 1.0, 0.5), 1.0);
        let saturated = multi_ant_reward(0.0, &[10.0, -10.0], &[0.0, 0.0], 0.0, 0.5);
        assert!((saturated + 0.001).abs() < 1e-15);
        let r = AntReward::STANDARD.reward(0.5, &[0.0], &[1.0, 1.0]);
        assert!((r - 0.5).abs() < 1e-15);
    }

    #[test]
    fn parse_kind() {
        for kind in EnvKind::ALL {
            assert_eq!(kind.name().parse::<EnvKind>().unwrap(), kind);
        }
        assert!("water_world".parse::<EnvKind>().is_err());
    }
}
