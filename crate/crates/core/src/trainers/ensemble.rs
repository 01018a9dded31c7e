use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use super::config::{TrainConfig, Variant};
use crate::envs::EnvSpec;
use crate::error::check_len;
use crate::net::{Activation, Adam, Direction, Gradients, LayeredNet};
use crate::{Error, Result};

/// An online net, its frozen target copy and the online net's optimizer.
#[derive(Debug, Clone, PartialEq)]
pub struct Learner {
    pub online: LayeredNet,
    pub target: LayeredNet,
    pub adam: Adam,
}

impl Learner {
    pub fn new(online: LayeredNet) -> Self {
        Learner {
            target: online.clone(),
            adam: Adam::new(&online),
            online,
        }
    }

    pub fn soft_update(&mut self, tau: f64) -> Result<()> {
        self.target.soft_update(&self.online, tau)
    }

    pub(crate) fn step(&mut self, grads: &Gradients, lr: f64, direction: Direction) -> Result<()> {
        self.adam.step(&mut self.online, grads, lr, direction)
    }
}

/// A critic whose trunk is shared and whose top layers form one Q head per
/// agent.
#[derive(Debug, Clone, PartialEq)]
pub struct MultiHeadCritic {
    pub trunk: LayeredNet,
    pub heads: Vec<LayeredNet>,
}

impl MultiHeadCritic {
    pub fn new(trunk: LayeredNet, heads: Vec<LayeredNet>) -> Result<Self> {
        if heads.is_empty() {
            return Err(Error::InvalidSpec("multi-head critic needs a head".into()));
        }
        for h in &heads {
            check_len("head input", trunk.output_dim(), h.input_dim())?;
            check_len("head output", 1, h.output_dim())?;
        }
        Ok(MultiHeadCritic { trunk, heads })
    }

    pub fn input_dim(&self) -> usize {
        self.trunk.input_dim()
    }

    pub fn param_count(&self) -> usize {
        self.trunk.param_count() + self.heads.iter().map(LayeredNet::param_count).sum::<usize>()
    }

    /// Q value of every head.
    pub fn forward_all(&self, input: &[f64]) -> Result<Vec<f64>> {
        let h = self.trunk.forward(input)?;
        self.heads
            .iter()
            .map(|head| Ok(head.forward(&h)?[0]))
            .collect()
    }

    pub fn forward_head(&self, input: &[f64], head: usize) -> Result<f64> {
        let h = self.trunk.forward(input)?;
        Ok(self.head(head)?.forward(&h)?[0])
    }

    fn head(&self, i: usize) -> Result<&LayeredNet> {
        self.heads.get(i).ok_or(Error::Shape {
            context: "head index",
            expected: self.heads.len(),
            got: i,
        })
    }

    fn max_abs_diff(&self, other: &MultiHeadCritic) -> Result<f64> {
        let mut d = self.trunk.max_abs_diff(&other.trunk)?;
        check_len("head count", self.heads.len(), other.heads.len())?;
        for (a, b) in self.heads.iter().zip(&other.heads) {
            d = d.max(a.max_abs_diff(b)?);
        }
        Ok(d)
    }
}

/// Online and target multi-head critics with one optimizer per piece.
#[derive(Debug, Clone, PartialEq)]
pub struct MultiHeadLearner {
    pub online: MultiHeadCritic,
    pub target: MultiHeadCritic,
    pub trunk_adam: Adam,
    pub head_adams: Vec<Adam>,
}

impl MultiHeadLearner {
    pub fn new(online: MultiHeadCritic) -> Self {
        MultiHeadLearner {
            target: online.clone(),
            trunk_adam: Adam::new(&online.trunk),
            head_adams: online.heads.iter().map(Adam::new).collect(),
            online,
        }
    }

    pub fn soft_update(&mut self, tau: f64) -> Result<()> {
        self.target.trunk.soft_update(&self.online.trunk, tau)?;
        for (t, o) in self.target.heads.iter_mut().zip(&self.online.heads) {
            t.soft_update(o, tau)?;
        }
        Ok(())
    }
}

/// Read access to one agent's Q function, whatever the critic layout.
#[derive(Debug, Clone, Copy)]
pub enum CriticRef<'a> {
    Net(&'a LayeredNet),
    Head(&'a MultiHeadCritic, usize),
}

impl CriticRef<'_> {
    pub fn q(&self, input: &[f64]) -> Result<f64> {
        match *self {
            CriticRef::Net(net) => Ok(net.forward(input)?[0]),
            CriticRef::Head(mh, i) => mh.forward_head(input, i),
        }
    }

    /// Q and its gradient with respect to the critic input.
    pub fn q_and_input_grad(&self, input: &[f64]) -> Result<(f64, Vec<f64>)> {
        match *self {
            CriticRef::Net(net) => {
                let trace = net.forward_trace(input)?;
                let q = trace.output()[0];
                let grad = net.backward_trace(&trace, &[1.0], 1.0, None)?;
                Ok((q, grad))
            }
            CriticRef::Head(mh, i) => {
                let head = mh.head(i)?;
                let trunk_trace = mh.trunk.forward_trace(input)?;
                let head_trace = head.forward_trace(trunk_trace.output())?;
                let q = head_trace.output()[0];
                let dh = head.backward_trace(&head_trace, &[1.0], 1.0, None)?;
                let grad = mh.trunk.backward_trace(&trunk_trace, &dh, 1.0, None)?;
                Ok((q, grad))
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Critics {
    /// v0: one critic for everyone.
    Shared(Learner),
    /// maddpg and v1: critic `i` belongs to agent `i`.
    PerAgent(Vec<Learner>),
    /// v2.
    MultiHead(MultiHeadLearner),
}

/// All networks of one learner configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct AgentEnsemble {
    variant: Variant,
    spec: EnvSpec,
    /// One entry when the actor is shared.
    actors: Vec<Learner>,
    critics: Critics,
}

fn actor_net<R: Rng + ?Sized>(
    obs: usize,
    act: usize,
    hidden: &[usize],
    rng: &mut R,
) -> Result<LayeredNet> {
    let mut sizes = vec![obs];
    sizes.extend_from_slice(hidden);
    sizes.push(act);
    let mut acts = vec![Activation::Relu; hidden.len()];
    acts.push(Activation::Tanh);
    LayeredNet::with_rng(&sizes, &acts, rng)
}

fn critic_net<R: Rng + ?Sized>(input: usize, hidden: &[usize], rng: &mut R) -> Result<LayeredNet> {
    let mut sizes = vec![input];
    sizes.extend_from_slice(hidden);
    sizes.push(1);
    let mut acts = vec![Activation::Relu; hidden.len()];
    acts.push(Activation::Identity);
    LayeredNet::with_rng(&sizes, &acts, rng)
}

impl AgentEnsemble {
    pub fn new<R: Rng + ?Sized>(spec: &EnvSpec, cfg: &TrainConfig, rng: &mut R) -> Result<Self> {
        spec.validate()?;
        cfg.validate()?;
        let n = spec.n_agents;
        let variant = cfg.variant;
        if variant.shares_actor() && !spec.is_uniform() {
            return Err(Error::InvalidSpec(format!(
                "{variant} shares the actor but agents have different widths"
            )));
        }
        let actor_count = if variant.shares_actor() { 1 } else { n };
        let actors = (0..actor_count)
            .map(|i| {
                actor_net(spec.obs_dims[i], spec.act_dims[i], &cfg.actor_hidden, rng)
                    .map(Learner::new)
            })
            .collect::<Result<Vec<_>>>()?;
        let critic_in = spec.total_obs() + spec.total_act();
        let critics = match variant {
            Variant::V0 => Critics::Shared(Learner::new(critic_net(
                critic_in,
                &cfg.critic_hidden,
                rng,
            )?)),
            Variant::Maddpg | Variant::V1 => Critics::PerAgent(
                (0..n)
                    .map(|_| critic_net(critic_in, &cfg.critic_hidden, rng).map(Learner::new))
                    .collect::<Result<Vec<_>>>()?,
            ),
            Variant::V2 => {
                let mut sizes = vec![critic_in];
                sizes.extend_from_slice(&cfg.v2_shared_sizes);
                let trunk_acts = vec![Activation::Relu; cfg.v2_shared_sizes.len()];
                let trunk = LayeredNet::with_rng(&sizes, &trunk_acts, rng)?;
                let heads = (0..n)
                    .map(|_| critic_net(trunk.output_dim(), &cfg.v2_head_sizes, rng))
                    .collect::<Result<Vec<_>>>()?;
                Critics::MultiHead(MultiHeadLearner::new(MultiHeadCritic::new(trunk, heads)?))
            }
        };
        Ok(AgentEnsemble {
            variant,
            spec: spec.clone(),
            actors,
            critics,
        })
    }

    pub fn variant(&self) -> Variant {
        self.variant
    }

    pub fn spec(&self) -> &EnvSpec {
        &self.spec
    }

    pub fn n_agents(&self) -> usize {
        self.spec.n_agents
    }

    pub fn actors(&self) -> &[Learner] {
        &self.actors
    }

    pub fn critics(&self) -> &Critics {
        &self.critics
    }

    pub(crate) fn actor_learner_mut(&mut self, agent: usize) -> &mut Learner {
        let idx = if self.actors.len() == 1 { 0 } else { agent };
        &mut self.actors[idx]
    }

    pub(crate) fn critics_mut(&mut self) -> &mut Critics {
        &mut self.critics
    }

    /// Online policy of `agent`.
    pub fn actor(&self, agent: usize) -> &LayeredNet {
        let idx = if self.actors.len() == 1 { 0 } else { agent };
        &self.actors[idx].online
    }

    pub fn target_actor(&self, agent: usize) -> &LayeredNet {
        let idx = if self.actors.len() == 1 { 0 } else { agent };
        &self.actors[idx].target
    }

    pub fn critic(&self, agent: usize) -> CriticRef<'_> {
        match &self.critics {
            Critics::Shared(l) => CriticRef::Net(&l.online),
            Critics::PerAgent(ls) => CriticRef::Net(&ls[agent].online),
            Critics::MultiHead(mh) => CriticRef::Head(&mh.online, agent),
        }
    }

    pub fn target_critic(&self, agent: usize) -> CriticRef<'_> {
        match &self.critics {
            Critics::Shared(l) => CriticRef::Net(&l.target),
            Critics::PerAgent(ls) => CriticRef::Net(&ls[agent].target),
            Critics::MultiHead(mh) => CriticRef::Head(&mh.target, agent),
        }
    }

    pub fn actor_params(&self) -> usize {
        self.actors.iter().map(|l| l.online.param_count()).sum()
    }

    pub fn critic_params(&self) -> usize {
        match &self.critics {
            Critics::Shared(l) => l.online.param_count(),
            Critics::PerAgent(ls) => ls.iter().map(|l| l.online.param_count()).sum(),
            Critics::MultiHead(mh) => mh.online.param_count(),
        }
    }

    /// Trainable (online) parameters; targets are not counted.
    pub fn total_params(&self) -> usize {
        self.actor_params() + self.critic_params()
    }

    /// Largest gap between any online net and its target.
    pub fn max_target_gap(&self) -> Result<f64> {
        let mut gap: f64 = 0.0;
        for l in &self.actors {
            gap = gap.max(l.online.max_abs_diff(&l.target)?);
        }
        match &self.critics {
            Critics::Shared(l) => gap = gap.max(l.online.max_abs_diff(&l.target)?),
            Critics::PerAgent(ls) => {
                for l in ls {
                    gap = gap.max(l.online.max_abs_diff(&l.target)?);
                }
            }
            Critics::MultiHead(mh) => gap = gap.max(mh.online.max_abs_diff(&mh.target)?),
        }
        Ok(gap)
    }

    /// Every net with a stable name, e.g. `actor_0`, `critic_1_target`,
    /// `critic_trunk`, `critic_head_0_target`.
    pub fn named_nets(&self) -> Vec<(String, &LayeredNet)> {
        let mut out = Vec::new();
        for (i, l) in self.actors.iter().enumerate() {
            out.push((format!("actor_{i}"), &l.online));
            out.push((format!("actor_{i}_target"), &l.target));
        }
        match &self.critics {
            Critics::Shared(l) => {
                out.push(("critic_0".into(), &l.online));
                out.push(("critic_0_target".into(), &l.target));
            }
            Critics::PerAgent(ls) => {
                for (i, l) in ls.iter().enumerate() {
                    out.push((format!("critic_{i}"), &l.online));
                    out.push((format!("critic_{i}_target"), &l.target));
                }
            }
            Critics::MultiHead(mh) => {
                out.push(("critic_trunk".into(), &mh.online.trunk));
                out.push(("critic_trunk_target".into(), &mh.target.trunk));
                for (i, (o, t)) in mh.online.heads.iter().zip(&mh.target.heads).enumerate() {
                    out.push((format!("critic_head_{i}"), o));
                    out.push((format!("critic_head_{i}_target"), t));
                }
            }
        }
        out
    }

    /// Replaces the net called `name` (see [`AgentEnsemble::named_nets`]).
    /// Shapes and activations must match. Optimizer state is left as is.
    pub fn replace_net(&mut self, name: &str, net: LayeredNet) -> Result<()> {
        let slot = self
            .net_slot(name)
            .ok_or_else(|| Error::InvalidSpec(format!("no net named `{name}`")))?;
        if !slot.same_shape(&net) || slot.activations() != net.activations() {
            return Err(Error::Shape {
                context: "replacement net",
                expected: slot.param_count(),
                got: net.param_count(),
            });
        }
        *slot = net;
        Ok(())
    }

    fn net_slot(&mut self, name: &str) -> Option<&mut LayeredNet> {
        fn pick(l: &mut Learner, target: bool) -> &mut LayeredNet {
            if target {
                &mut l.target
            } else {
                &mut l.online
            }
        }
        let (base, target) = match name.strip_suffix("_target") {
            Some(b) => (b, true),
            None => (name, false),
        };
        if let Some(i) = base.strip_prefix("actor_") {
            let i = i.parse::<usize>().ok()?;
            return self.actors.get_mut(i).map(|l| pick(l, target));
        }
        let rest = base.strip_prefix("critic_")?;
        match &mut self.critics {
            Critics::Shared(l) => (rest == "0").then(|| pick(l, target)),
            Critics::PerAgent(ls) => {
                let i = rest.parse::<usize>().ok()?;
                ls.get_mut(i).map(|l| pick(l, target))
            }
            Critics::MultiHead(mh) => {
                let critic = if target { &mut mh.target } else { &mut mh.online };
                if rest == "trunk" {
                    Some(&mut critic.trunk)
                } else {
                    let i = rest.strip_prefix("head_")?.parse::<usize>().ok()?;
                    critic.heads.get_mut(i)
                }
            }
        }
    }

    /// Joint action for all agents, one vector per agent.
    pub fn act<R: Rng + ?Sized>(
        &self,
        observations: &[Vec<f64>],
        eps: f64,
        rng: &mut R,
    ) -> Result<Vec<Vec<f64>>> {
        check_len("observations", self.spec.n_agents, observations.len())?;
        observations
            .iter()
            .enumerate()
            .map(|(i, o)| select_action(self.actor(i), o, eps, rng))
            .collect()
    }
}

/// Zero-mean Gaussian noise with standard deviation `eps` per dimension.
pub fn exploration_noise<R: Rng + ?Sized>(dim: usize, eps: f64, rng: &mut R) -> Vec<f64> {
    (0..dim)
        .map(|_| {
            let z: f64 = StandardNormal.sample(rng);
            eps * z
        })
        .collect()
}

/// `clip(mu(o) + noise, -1, 1)`. With `eps == 0` no randomness is drawn and
/// the deterministic policy output is returned.
pub fn select_action<R: Rng + ?Sized>(
    actor: &LayeredNet,
    obs: &[f64],
    eps: f64,
    rng: &mut R,
) -> Result<Vec<f64>> {
    let mut action = actor.forward(obs)?;
    if eps > 0.0 {
        for (a, n) in action
            .iter_mut()
            .zip(exploration_noise(actor.output_dim(), eps, rng))
        {
            *a += n;
        }
    }
    for a in action.iter_mut() {
        *a = a.clamp(-1.0, 1.0);
    }
    Ok(action)
}
