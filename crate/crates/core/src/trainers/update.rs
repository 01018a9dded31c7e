//! Bellman targets, critic regression and the deterministic policy gradient.

use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;

use super::config::{TrainConfig, Variant};
use super::ensemble::{AgentEnsemble, Critics};
use crate::error::check_len;
use crate::memory::{ReplayMemory, Transition};
use crate::net::{Direction, Gradients};
use crate::{Error, Result};

/// Regression targets for one agent's Q function over a batch.
#[derive(Debug, Clone, PartialEq)]
pub struct AgentTargets {
    pub agent: usize,
    pub y: Vec<f64>,
}

/// What one learning step did.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct UpdateReport {
    /// Mean critic loss over the critic updates of this step.
    pub critic_loss: f64,
    /// Mean Q of the actor objective before each actor step, averaged.
    pub actor_objective: f64,
    /// Distinct online nets stepped and soft-updated.
    pub nets_updated: usize,
    /// Optimizer steps applied (a shared actor can be stepped several times).
    pub optimizer_steps: usize,
    /// Agents whose rewards drove the critic updates.
    pub agents: Vec<usize>,
}

/// Critic parameter gradients, laid out like the critic they belong to.
#[derive(Debug, Clone, PartialEq)]
pub enum CriticGradient {
    Plain {
        agent: usize,
        grads: Gradients,
    },
    MultiHead {
        trunk: Gradients,
        /// `None` for heads that received no targets.
        heads: Vec<Option<Gradients>>,
    },
}

impl CriticGradient {
    pub fn is_finite(&self) -> bool {
        match self {
            CriticGradient::Plain { grads, .. } => grads.is_finite(),
            CriticGradient::MultiHead { trunk, heads } => {
                trunk.is_finite() && heads.iter().flatten().all(Gradients::is_finite)
            }
        }
    }
}

pub(crate) fn critic_input(x: &[f64], a: &[f64]) -> Vec<f64> {
    let mut v = Vec::with_capacity(x.len() + a.len());
    v.extend_from_slice(x);
    v.extend_from_slice(a);
    v
}

impl AgentEnsemble {
    fn check_transition(&self, t: &Transition) -> Result<()> {
        let spec = self.spec();
        check_len("transition x", spec.total_obs(), t.x.len())?;
        check_len("transition x_next", spec.total_obs(), t.x_next.len())?;
        check_len("transition a", spec.total_act(), t.a.len())?;
        check_len("transition r", spec.n_agents, t.r.len())
    }

    /// Actions of every target actor on the next observations.
    fn next_joint_action(&self, t: &Transition) -> Result<Vec<f64>> {
        let spec = self.spec();
        let mut joint = Vec::with_capacity(spec.total_act());
        for (j, (&off, &dim)) in spec.obs_offsets().iter().zip(&spec.obs_dims).enumerate() {
            joint.extend(self.target_actor(j).forward(&t.x_next[off..off + dim])?);
        }
        Ok(joint)
    }

    /// `y = r_i + gamma * (1 - terminal) * Q'_i(x', mu'(o'))` for each
    /// requested agent, sharing the next-action computation.
    pub fn bellman_targets_for(
        &self,
        batch: &[&Transition],
        agents: &[usize],
        gamma: f64,
    ) -> Result<Vec<AgentTargets>> {
        let mut out: Vec<AgentTargets> = agents
            .iter()
            .map(|&agent| AgentTargets {
                agent,
                y: Vec::with_capacity(batch.len()),
            })
            .collect();
        for t in batch {
            self.check_transition(t)?;
            let input = if t.terminal || gamma == 0.0 {
                None
            } else {
                Some(critic_input(&t.x_next, &self.next_joint_action(t)?))
            };
            for target in out.iter_mut() {
                let r = t.r[target.agent];
                let y = match &input {
                    None => r,
                    Some(input) => r + gamma * self.target_critic(target.agent).q(input)?,
                };
                target.y.push(y);
            }
        }
        Ok(out)
    }

    pub fn bellman_targets(&self, batch: &[&Transition], agent: usize, gamma: f64) -> Result<Vec<f64>> {
        Ok(self
            .bellman_targets_for(batch, &[agent], gamma)?
            .pop()
            .map(|t| t.y)
            .unwrap_or_default())
    }

    /// Mean squared TD error of the online critic(s) against `targets`.
    pub fn critic_loss(&self, batch: &[&Transition], targets: &[AgentTargets]) -> Result<f64> {
        let mut sum = 0.0;
        for (j, t) in batch.iter().enumerate() {
            let input = critic_input(&t.x, &t.a);
            for target in targets {
                let r = self.critic(target.agent).q(&input)? - target.y[j];
                sum += r * r;
            }
        }
        Ok(sum / (batch.len() * targets.len()) as f64)
    }

    /// Gradient of the mean squared TD error. Plain critics take exactly one
    /// target set; the multi-head critic averages over all heads it is given.
    pub fn critic_gradient(
        &self,
        batch: &[&Transition],
        targets: &[AgentTargets],
    ) -> Result<(CriticGradient, f64)> {
        if batch.is_empty() || targets.is_empty() {
            return Err(Error::InsufficientData {
                requested: 1,
                available: 0,
            });
        }
        for target in targets {
            check_len("targets", batch.len(), target.y.len())?;
            if target.agent >= self.n_agents() {
                return Err(Error::Shape {
                    context: "agent index",
                    expected: self.n_agents(),
                    got: target.agent,
                });
            }
        }
        let count = (batch.len() * targets.len()) as f64;
        let mut loss = 0.0;
        let grads = match self.critics() {
            Critics::Shared(_) | Critics::PerAgent(_) => {
                if targets.len() != 1 {
                    return Err(Error::Shape {
                        context: "critic target sets",
                        expected: 1,
                        got: targets.len(),
                    });
                }
                let agent = targets[0].agent;
                let net = match self.critics() {
                    Critics::PerAgent(ls) => &ls[agent].online,
                    Critics::Shared(l) => &l.online,
                    Critics::MultiHead(_) => unreachable!(),
                };
                let mut grads = Gradients::zeros_like(net);
                for (t, &y) in batch.iter().zip(&targets[0].y) {
                    let trace = net.forward_trace(&critic_input(&t.x, &t.a))?;
                    let residual = trace.output()[0] - y;
                    loss += residual * residual;
                    net.backward_trace(&trace, &[2.0 * residual / count], 1.0, Some(&mut grads))?;
                }
                CriticGradient::Plain { agent, grads }
            }
            Critics::MultiHead(mh) => {
                let critic = &mh.online;
                let mut trunk = Gradients::zeros_like(&critic.trunk);
                let mut heads: Vec<Option<Gradients>> = alloc::vec![None; critic.heads.len()];
                for target in targets {
                    heads[target.agent] = Some(Gradients::zeros_like(&critic.heads[target.agent]));
                }
                for (j, t) in batch.iter().enumerate() {
                    let trunk_trace = critic.trunk.forward_trace(&critic_input(&t.x, &t.a))?;
                    let mut dh = vec![0.0; critic.trunk.output_dim()];
                    for target in targets {
                        let head = &critic.heads[target.agent];
                        let head_trace = head.forward_trace(trunk_trace.output())?;
                        let residual = head_trace.output()[0] - target.y[j];
                        loss += residual * residual;
                        let g = head.backward_trace(
                            &head_trace,
                            &[2.0 * residual / count],
                            1.0,
                            heads[target.agent].as_mut(),
                        )?;
                        for (d, gi) in dh.iter_mut().zip(g) {
                            *d += gi;
                        }
                    }
                    critic
                        .trunk
                        .backward_trace(&trunk_trace, &dh, 1.0, Some(&mut trunk))?;
                }
                CriticGradient::MultiHead { trunk, heads }
            }
        };
        Ok((grads, loss / count))
    }

    /// One Adam descent step on the mean squared TD error. Returns the loss
    /// before the step.
    pub fn critic_update(
        &mut self,
        batch: &[&Transition],
        targets: &[AgentTargets],
        lr: f64,
    ) -> Result<f64> {
        let (grads, loss) = self.critic_gradient(batch, targets)?;
        if !grads.is_finite() {
            return Err(Error::Numeric("critic gradient"));
        }
        match (self.critics_mut(), grads) {
            (Critics::Shared(l), CriticGradient::Plain { grads, .. }) => {
                l.step(&grads, lr, Direction::Descend)?
            }
            (Critics::PerAgent(ls), CriticGradient::Plain { agent, grads }) => {
                ls[agent].step(&grads, lr, Direction::Descend)?
            }
            (Critics::MultiHead(mh), CriticGradient::MultiHead { trunk, heads }) => {
                mh.trunk_adam
                    .step(&mut mh.online.trunk, &trunk, lr, Direction::Descend)?;
                for (i, g) in heads.iter().enumerate() {
                    if let Some(g) = g {
                        mh.head_adams[i].step(&mut mh.online.heads[i], g, lr, Direction::Descend)?;
                    }
                }
            }
            _ => unreachable!("gradient layout follows the critic layout"),
        }
        Ok(loss)
    }

    /// Gradient of `J = mean over agents and samples of
    /// Q_i(x, a | a_i = mu(o_i))` with respect to the parameters of the actor
    /// the listed agents use. Other agents' actions come from the batch.
    /// Returns the gradient and `J`.
    pub fn actor_gradient(&self, batch: &[&Transition], agents: &[usize]) -> Result<(Gradients, f64)> {
        if agents.is_empty() || batch.is_empty() {
            return Err(Error::InsufficientData {
                requested: 1,
                available: 0,
            });
        }
        let actor = self.actor(agents[0]);
        if agents.iter().any(|&i| !core::ptr::eq(self.actor(i), actor)) {
            return Err(Error::InvalidSpec(
                "agents in one actor update must share an actor".into(),
            ));
        }
        let spec = self.spec();
        let obs_off = spec.obs_offsets();
        let act_off = spec.act_offsets();
        let x_len = spec.total_obs();
        let scale = 1.0 / (batch.len() * agents.len()) as f64;
        let mut grads = Gradients::zeros_like(actor);
        let mut objective = 0.0;
        for t in batch {
            self.check_transition(t)?;
            let mut input = critic_input(&t.x, &t.a);
            for &i in agents {
                let obs = &t.x[obs_off[i]..obs_off[i] + spec.obs_dims[i]];
                let trace = actor.forward_trace(obs)?;
                let slot = x_len + act_off[i]..x_len + act_off[i] + spec.act_dims[i];
                input[slot.clone()].copy_from_slice(trace.output());
                let (q, dq) = self.critic(i).q_and_input_grad(&input)?;
                objective += q;
                actor.backward_trace(&trace, &dq[slot.clone()], scale, Some(&mut grads))?;
                input[slot.clone()].copy_from_slice(&t.a[slot.start - x_len..slot.end - x_len]);
            }
        }
        Ok((grads, objective * scale))
    }

    /// One Adam ascent step on the policy objective. Returns `J` before the step.
    pub fn actor_update(&mut self, batch: &[&Transition], agents: &[usize], lr: f64) -> Result<f64> {
        let (grads, objective) = self.actor_gradient(batch, agents)?;
        self.actor_learner_mut(agents[0])
            .step(&grads, lr, Direction::Ascend)?;
        Ok(objective)
    }

    fn soft_update_all(&mut self, tau: f64) -> Result<usize> {
        let mut count = 0;
        for i in 0..self.actors().len() {
            self.actor_learner_mut(i).soft_update(tau)?;
            count += 1;
        }
        match self.critics_mut() {
            Critics::Shared(l) => {
                l.soft_update(tau)?;
                count += 1;
            }
            Critics::PerAgent(ls) => {
                for l in ls {
                    l.soft_update(tau)?;
                    count += 1;
                }
            }
            Critics::MultiHead(mh) => {
                mh.soft_update(tau)?;
                count += 1;
            }
        }
        Ok(count)
    }

    /// One learning step of the configured variant: sample, targets, critic
    /// step, actor step, soft target update.
    pub fn learn<R: Rng + ?Sized>(
        &mut self,
        memory: &ReplayMemory,
        cfg: &TrainConfig,
        rng: &mut R,
    ) -> Result<UpdateReport> {
        let n = self.n_agents();
        let s = cfg.batch_size;
        let mut report = UpdateReport::default();
        let mut losses = Vec::new();
        let mut objectives = Vec::new();
        match self.variant() {
            Variant::V0 => {
                let agent = rng.random_range(0..n);
                let batch = memory.sample(s, rng)?;
                let targets = self.bellman_targets_for(&batch, &[agent], cfg.gamma)?;
                losses.push(self.critic_update(&batch, &targets, cfg.lr_critic)?);
                objectives.push(self.actor_update(&batch, &[agent], cfg.lr_actor)?);
                report.optimizer_steps = 2;
                report.agents.push(agent);
            }
            Variant::Maddpg | Variant::V1 => {
                for agent in 0..n {
                    let batch = memory.sample(s, rng)?;
                    let targets = self.bellman_targets_for(&batch, &[agent], cfg.gamma)?;
                    losses.push(self.critic_update(&batch, &targets, cfg.lr_critic)?);
                    objectives.push(self.actor_update(&batch, &[agent], cfg.lr_actor)?);
                    report.optimizer_steps += 2;
                    report.agents.push(agent);
                }
            }
            Variant::V2 => {
                let agents: Vec<usize> = (0..n).collect();
                let batch = memory.sample(s, rng)?;
                let targets = self.bellman_targets_for(&batch, &agents, cfg.gamma)?;
                losses.push(self.critic_update(&batch, &targets, cfg.lr_critic)?);
                objectives.push(self.actor_update(&batch, &agents, cfg.lr_actor)?);
                report.optimizer_steps = 2;
                report.agents = agents;
            }
        }
        report.nets_updated = self.soft_update_all(cfg.tau)?;
        report.critic_loss = losses.iter().sum::<f64>() / losses.len() as f64;
        report.actor_objective = objectives.iter().sum::<f64>() / objectives.len() as f64;
        Ok(report)
    }
}

/// Outcome of [`train_step`].
#[derive(Debug, Clone, PartialEq)]
pub struct StepReport {
    /// `None` while the memory is still warming up.
    pub update: Option<UpdateReport>,
    pub memory_len: usize,
}

/// Stores `transition` and, once the memory holds at least
/// `max(batch_size, warmup)` transitions, runs one learning step.
pub fn train_step<R: Rng + ?Sized>(
    ensemble: &mut AgentEnsemble,
    memory: &mut ReplayMemory,
    transition: Transition,
    cfg: &TrainConfig,
    rng: &mut R,
) -> Result<StepReport> {
    memory.push(transition)?;
    let update = if memory.len() >= cfg.learning_starts() {
        Some(ensemble.learn(memory, cfg, rng)?)
    } else {
        None
    };
    Ok(StepReport {
        update,
        memory_len: memory.len(),
    })
}
