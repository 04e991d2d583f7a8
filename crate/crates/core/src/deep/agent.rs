use rand::Rng;
use serde::{Deserialize, Serialize};

use super::mlp::{l2_norm, Mlp};
use super::pointmass::ACTION_DIM;
use super::replay::Experience;
use crate::error::{Error, Result};
use crate::graph::ConnectivityGraph;
use crate::scalar::Scalar;

/// Losses above this are reported as divergence.
pub const LOSS_LIMIT: f64 = 1e6;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DeepPRConfig {
    /// Weight of the peers' adjacency values in the TD target.
    pub kappa: f64,
    pub gamma: f64,
    pub actor_lr: f64,
    pub critic_lr: f64,
    /// `ρ` of the target-network update `w' ← (1 − ρ) w' + ρ w`.
    pub soft_update_rate: f64,
    /// Standard deviation of the Gaussian behaviour noise.
    pub exploration_noise: f64,
    /// Radius of the continuous adjacency ball; `0` shares exact states only.
    pub adjacency_epsilon: f64,
    pub batch_size: usize,
    #[serde(default = "default_hidden")]
    pub hidden: Vec<usize>,
    #[serde(default = "default_capacity")]
    pub buffer_capacity: usize,
    /// Interactions collected before the first update.
    #[serde(default = "default_warmup")]
    pub warmup: usize,
    #[serde(default)]
    pub graph: ConnectivityGraph,
}

fn default_hidden() -> Vec<usize> {
    vec![32, 32]
}

fn default_capacity() -> usize {
    100_000
}

fn default_warmup() -> usize {
    200
}

impl DeepPRConfig {
    pub fn new(kappa: f64) -> Self {
        DeepPRConfig {
            kappa,
            gamma: 0.9,
            actor_lr: 1e-3,
            critic_lr: 1e-2,
            soft_update_rate: 0.01,
            exploration_noise: 0.2,
            adjacency_epsilon: 0.05,
            batch_size: 32,
            hidden: default_hidden(),
            buffer_capacity: default_capacity(),
            warmup: default_warmup(),
            graph: ConnectivityGraph::default(),
        }
    }

    pub fn validate(&self, n_agents: usize) -> Result<()> {
        let unit = |field: &str, v: f64| {
            if v > 0.0 && v <= 1.0 {
                Ok(())
            } else {
                Err(Error::config(format!("deep.{field}"), format!("{v} outside (0, 1]")))
            }
        };
        if !(0.0..=1.0).contains(&self.kappa) {
            return Err(Error::config("deep.kappa", format!("{} outside [0, 1]", self.kappa)));
        }
        if !(0.0..1.0).contains(&self.gamma) {
            return Err(Error::config("deep.gamma", format!("{} outside [0, 1)", self.gamma)));
        }
        unit("actor_lr", self.actor_lr)?;
        unit("critic_lr", self.critic_lr)?;
        unit("soft_update_rate", self.soft_update_rate)?;
        if !(self.exploration_noise >= 0.0 && self.exploration_noise.is_finite()) {
            return Err(Error::config("deep.exploration_noise", "must be finite and non-negative"));
        }
        if !(self.adjacency_epsilon >= 0.0) {
            return Err(Error::config("deep.adjacency_epsilon", "must be non-negative"));
        }
        if self.batch_size == 0 {
            return Err(Error::config("deep.batch_size", "must be positive"));
        }
        if self.hidden.contains(&0) {
            return Err(Error::config("deep.hidden", "layers must be non-empty"));
        }
        if self.buffer_capacity == 0 {
            return Err(Error::config("deep.buffer_capacity", "must be positive"));
        }
        self.graph.validate(n_agents)
    }
}

/// Actor `μ(o) = tanh(MLP(o))`, centralized critic `Q(s, a_1..a_N)`, and
/// their delayed copies.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct DeepAgent<T> {
    pub actor: Mlp<T>,
    pub critic: Mlp<T>,
    pub target_actor: Mlp<T>,
    pub target_critic: Mlp<T>,
}

fn layer_dims(input: usize, hidden: &[usize], output: usize) -> Vec<usize> {
    let mut d = Vec::with_capacity(hidden.len() + 2);
    d.push(input);
    d.extend_from_slice(hidden);
    d.push(output);
    d
}

impl<T: Scalar> DeepAgent<T> {
    pub fn new<R: Rng + ?Sized>(obs_dim: usize, state_dim: usize, n_agents: usize, hidden: &[usize], rng: &mut R) -> Result<Self> {
        let actor = Mlp::new(&layer_dims(obs_dim, hidden, ACTION_DIM), rng)?;
        let critic = Mlp::new(&layer_dims(state_dim + ACTION_DIM * n_agents, hidden, 1), rng)?;
        Ok(DeepAgent {
            target_actor: actor.clone(),
            target_critic: critic.clone(),
            actor,
            critic,
        })
    }

    pub fn act(&self, obs: &[T]) -> Result<Vec<T>> {
        Ok(self.actor.forward(obs)?.into_iter().map(T::tanh).collect())
    }

    pub fn target_act(&self, obs: &[T]) -> Result<Vec<T>> {
        Ok(self.target_actor.forward(obs)?.into_iter().map(T::tanh).collect())
    }

    pub fn soft_update(&mut self, rho: T) -> Result<()> {
        self.target_actor.soft_update(&self.actor, rho)?;
        self.target_critic.soft_update(&self.critic, rho)
    }
}

pub fn critic_input<T: Scalar>(state: &[T], actions: &[T]) -> Vec<T> {
    let mut x = Vec::with_capacity(state.len() + actions.len());
    x.extend_from_slice(state);
    x.extend_from_slice(actions);
    x
}

pub fn critic_value<T: Scalar>(critic: &Mlp<T>, state: &[T], actions: &[T]) -> Result<T> {
    Ok(critic.forward(&critic_input(state, actions))?[0])
}

/// Squared Euclidean distance over the coordinates where `mask` is set.
pub fn masked_distance_sq<T: Scalar>(a: &[T], b: &[T], mask: &[bool]) -> T {
    a.iter()
        .zip(b)
        .zip(mask)
        .filter(|(_, &m)| m)
        .map(|((&x, &y), _)| (x - y) * (x - y))
        .sum()
}

/// Candidate states within `epsilon` of `anchor`, preceded by the anchor.
pub fn adjacent_states<'a, T: Scalar>(anchor: &'a [T], candidates: &[&'a [T]], mask: &[bool], epsilon: f64) -> Vec<&'a [T]> {
    let eps2 = T::lit(epsilon * epsilon);
    let mut out = vec![anchor];
    out.extend(
        candidates
            .iter()
            .copied()
            .filter(|c| masked_distance_sq(anchor, c, mask) <= eps2),
    );
    out
}

/// A peer's target critic and the states at which it is queried.
pub struct PeerView<'a, T> {
    pub critic: &'a Mlp<T>,
    pub states: Vec<&'a [T]>,
}

/// `(1 − κ) Q_i'(s', a') + κ · mean_j mean_{s♯} Q_j'(s♯, a')`. Without
/// peers the own value is returned.
pub fn deep_aggregate<T: Scalar>(own: &Mlp<T>, next_state: &[T], next_actions: &[T], peers: &[PeerView<'_, T>], kappa: T) -> Result<T> {
    let own_value = critic_value(own, next_state, next_actions)?;
    if kappa == T::zero() || peers.is_empty() {
        return Ok(own_value);
    }
    let mut total = T::zero();
    for p in peers {
        if p.states.is_empty() {
            return Err(Error::contract("peer adjacency set is empty"));
        }
        let mut sum = T::zero();
        for s in &p.states {
            sum += critic_value(p.critic, s, next_actions)?;
        }
        total += sum / T::from_usize_lossy(p.states.len());
    }
    Ok((T::one() - kappa) * own_value + kappa * total / T::from_usize_lossy(peers.len()))
}

/// A mini-batch with the target actors' joint action at every successor.
pub struct Batch<'a, T> {
    /// Replay indices; equal indices denote the same experience.
    pub ids: Vec<usize>,
    pub items: Vec<&'a Experience<T>>,
    pub next_actions: Vec<Vec<T>>,
}

impl<'a, T: Scalar> Batch<'a, T> {
    pub fn new(ids: Vec<usize>, items: Vec<&'a Experience<T>>, next_actions: Vec<Vec<T>>) -> Result<Self> {
        if items.is_empty() {
            return Err(Error::contract("empty batch"));
        }
        if ids.len() != items.len() || next_actions.len() != items.len() {
            return Err(Error::contract("batch columns differ in length"));
        }
        Ok(Batch { ids, items, next_actions })
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    /// Distinct successors of the batch other than that of entry `b`.
    pub fn other_successors(&self, b: usize) -> Vec<&'a [T]> {
        let mut seen = vec![self.ids[b]];
        let mut out = Vec::new();
        for (k, e) in self.items.iter().enumerate() {
            if !seen.contains(&self.ids[k]) {
                seen.push(self.ids[k]);
                out.push(e.next_state.as_slice());
            }
        }
        out
    }
}

/// A peer's frozen target critic with the coordinates it shares with the
/// learning agent.
pub struct PeerCritic<'a, T> {
    pub critic: &'a Mlp<T>,
    pub mask: Vec<bool>,
}

/// TD targets `y_b = r_i + γ · deepAggregate(s'_b, a'_b)`; terminal
/// successors do not bootstrap.
pub fn td_targets<T: Scalar>(agent: &DeepAgent<T>, i: usize, batch: &Batch<'_, T>, peers: &[PeerCritic<'_, T>], cfg: &DeepPRConfig) -> Result<Vec<T>> {
    let (gamma, kappa) = (T::lit(cfg.gamma), T::lit(cfg.kappa));
    (0..batch.len())
        .map(|b| {
            let e = batch.items[b];
            if e.terminal {
                return Ok(e.rewards[i]);
            }
            let others = if cfg.kappa == 0.0 { Vec::new() } else { batch.other_successors(b) };
            let views: Vec<PeerView<'_, T>> = peers
                .iter()
                .map(|p| PeerView {
                    critic: p.critic,
                    states: adjacent_states(&e.next_state, &others, &p.mask, cfg.adjacency_epsilon),
                })
                .collect();
            let z = deep_aggregate(&agent.target_critic, &e.next_state, &batch.next_actions[b], &views, kappa)?;
            Ok(e.rewards[i] + gamma * z)
        })
        .collect()
}

/// Loss `mean_b (Q_i(s_b, a_b) − y_b)²` and its parameter gradient.
pub fn td_loss_and_grad<T: Scalar>(critic: &Mlp<T>, batch: &Batch<'_, T>, targets: &[T]) -> Result<(T, Vec<T>)> {
    let n = T::from_usize_lossy(batch.len());
    let mut grad = vec![T::zero(); critic.n_params()];
    let mut loss = T::zero();
    for (e, &y) in batch.items.iter().zip(targets) {
        let cache = critic.forward_cached(&critic_input(&e.state, &e.actions))?;
        let err = cache.output()[0] - y;
        loss += err * err;
        critic.backward(&cache, &[T::lit(2.0) * err / n], &mut grad);
    }
    Ok((loss / n, grad))
}

fn check_loss<T: Scalar>(loss: T) -> Result<()> {
    if !(loss.as_f64() <= LOSS_LIMIT) {
        return Err(Error::Divergence {
            epoch: 0,
            detail: format!("TD loss {loss} above {LOSS_LIMIT:e}"),
        });
    }
    Ok(())
}

/// One critic step at `critic_lr`; returns the loss before the step.
pub fn td_loss_step<T: Scalar>(agent: &mut DeepAgent<T>, i: usize, batch: &Batch<'_, T>, peers: &[PeerCritic<'_, T>], cfg: &DeepPRConfig) -> Result<T> {
    let y = td_targets(agent, i, batch, peers, cfg)?;
    let (loss, grad) = td_loss_and_grad(&agent.critic, batch, &y)?;
    check_loss(loss)?;
    agent.critic.descend(&grad, T::lit(cfg.critic_lr));
    Ok(loss)
}

/// `J(θ) = mean_b Q_i(s_b, a_b with a_i = μ_θ(o_i(s_b)))` and `∇θ J`.
pub fn actor_objective_and_grad<T: Scalar>(agent: &DeepAgent<T>, i: usize, mask: &[bool], batch: &Batch<'_, T>) -> Result<(T, Vec<T>)> {
    let n = T::from_usize_lossy(batch.len());
    let mut grad = vec![T::zero(); agent.actor.n_params()];
    let mut j = T::zero();
    let state_dim = batch.items[0].state.len();
    for e in &batch.items {
        let obs: Vec<T> = e.state.iter().zip(mask).filter(|(_, &m)| m).map(|(&x, _)| x).collect();
        let a_cache = agent.actor.forward_cached(&obs)?;
        let a_i: Vec<T> = a_cache.output().iter().map(|v| v.tanh()).collect();
        let mut joint = e.actions.clone();
        joint[ACTION_DIM * i..ACTION_DIM * (i + 1)].copy_from_slice(&a_i);
        let c_cache = agent.critic.forward_cached(&critic_input(&e.state, &joint))?;
        j += c_cache.output()[0];
        let d_input = agent.critic.input_gradient(&c_cache, &[T::one()]);
        let off = state_dim + ACTION_DIM * i;
        let d_out: Vec<T> = (0..ACTION_DIM)
            .map(|k| d_input[off + k] * (T::one() - a_i[k] * a_i[k]) / n)
            .collect();
        agent.actor.backward(&a_cache, &d_out, &mut grad);
    }
    Ok((j / n, grad))
}

/// One ascent step on `J` at `actor_lr`; returns `‖∇θ J‖₂`.
pub fn actor_step<T: Scalar>(agent: &mut DeepAgent<T>, i: usize, mask: &[bool], batch: &Batch<'_, T>, cfg: &DeepPRConfig) -> Result<T> {
    let (_, grad) = actor_objective_and_grad(agent, i, mask, batch)?;
    agent.actor.descend(&grad, -T::lit(cfg.actor_lr));
    Ok(l2_norm(&grad))
}
