//! Tabular policy reciprocity: independent Q-learning augmented with a
//! step towards `Q⋆`, the κ-mix of peers' same-state values and their
//! adjacency aggregates.

use log::warn;
use serde::{Deserialize, Serialize};

use crate::adjacency::{member_weights, AdjacencyConfig, AdjacencyMode, PeerAdjacency};
use crate::env::{ActionProtocol, Environment};
use crate::error::{Error, Result};
use crate::graph::{ConnectivityGraph, Neighbourhoods};
use crate::mdp::{ActionId, LocalSpace};
use crate::oracle::{self, OracleQ};
use crate::policy::epsilon_greedy;
use crate::qtable::QTable;
use crate::rng::{self, EnvRng, StreamRng};
use crate::scalar::Scalar;
use crate::schedule::ScheduleConfig;

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum TableInit {
    #[default]
    Zeros,
    Uniform { c: f64 },
}

impl TableInit {
    pub fn magnitude(&self) -> f64 {
        match *self {
            TableInit::Zeros => 0.0,
            TableInit::Uniform { c } => c,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PRConfig {
    pub kappa: f64,
    pub gamma: f64,
    pub epsilon_greedy: f64,
    pub schedule: ScheduleConfig,
    pub adjacency: AdjacencyConfig,
    #[serde(default)]
    pub graph: ConnectivityGraph,
    #[serde(default)]
    pub init: TableInit,
}

impl PRConfig {
    pub fn validate(&self, global_dim: usize, n_agents: usize) -> Result<()> {
        if !(0.0..=1.0).contains(&self.kappa) {
            return Err(Error::config("kappa", format!("{} outside [0, 1]", self.kappa)));
        }
        if !(0.0..1.0).contains(&self.gamma) {
            return Err(Error::config("gamma", format!("{} outside [0, 1)", self.gamma)));
        }
        if !(0.0..=1.0).contains(&self.epsilon_greedy) {
            return Err(Error::config(
                "epsilon_greedy",
                format!("{} outside [0, 1]", self.epsilon_greedy),
            ));
        }
        if let TableInit::Uniform { c } = self.init {
            if !(c >= 0.0 && c.is_finite()) {
                return Err(Error::config("init.c", "must be finite and non-negative"));
            }
        }
        self.schedule.validate()?;
        self.adjacency.validate(global_dim)?;
        self.graph.validate(n_agents)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Learner {
    /// Independent Q-learning; the schedule's `β` is ignored.
    Iql,
    TabularPr,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainOptions {
    pub epochs: usize,
    /// Environment interactions per epoch.
    pub inner_steps: usize,
    /// Keep a copy of every table each `snapshot_every` epochs.
    #[serde(default)]
    pub snapshot_every: Option<usize>,
    /// Boltzmann temperature of the policy-consensus metric.
    #[serde(default = "default_temperature")]
    pub temperature: f64,
}

fn default_temperature() -> f64 {
    1.0
}

impl TrainOptions {
    pub fn new(epochs: usize, inner_steps: usize) -> Self {
        TrainOptions {
            epochs,
            inner_steps,
            snapshot_every: None,
            temperature: default_temperature(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 {
            return Err(Error::config("training.epochs", "must be positive"));
        }
        if self.inner_steps == 0 {
            return Err(Error::config("training.inner_steps", "must be positive"));
        }
        if self.snapshot_every == Some(0) {
            return Err(Error::config("training.snapshot_every", "must be positive"));
        }
        if !(self.temperature > 0.0) {
            return Err(Error::config("training.temperature", "must be positive"));
        }
        Ok(())
    }
}

/// One sampled transition in an agent's local indices. `next` is `None`
/// when the successor is absorbing.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Transition<T> {
    pub s: usize,
    pub a: ActionId,
    pub r: T,
    pub next: Option<usize>,
}

fn td_target<T: Scalar>(q: &QTable<T>, tr: &Transition<T>, gamma: T) -> T {
    match tr.next {
        Some(s2) => tr.r + gamma * q.max_value(s2),
        None => tr.r,
    }
}

/// `Q(s,a) ← Q(s,a) + α [r + γ max_a' Q(s',a') − Q(s,a)]`; returns the new value.
pub fn iql_update<T: Scalar>(q: &mut QTable<T>, tr: &Transition<T>, alpha: T, gamma: T) -> T {
    let old = q.get(tr.s, tr.a);
    let target = td_target(q, tr, gamma);
    let new = old + alpha * (target - old);
    q.set(tr.s, tr.a, new);
    q.record_visit(tr.s, tr.a);
    new
}

/// `Q ← (1−α) Q + α [r + γ max Q(s',·)] + β (Q⋆ − Q)`, evaluated as
/// `Q + α (target − Q) + β (Q⋆ − Q)` so that `β = 0` reproduces
/// [`iql_update`] bit for bit.
pub fn pr_update<T: Scalar>(q: &mut QTable<T>, tr: &Transition<T>, q_star: T, alpha: T, beta: T, gamma: T) -> T {
    let old = q.get(tr.s, tr.a);
    let target = td_target(q, tr, gamma);
    let mut new = old + alpha * (target - old);
    if beta != T::zero() {
        new += beta * (q_star - old);
    }
    q.set(tr.s, tr.a, new);
    q.record_visit(tr.s, tr.a);
    new
}

/// Clips `β` to `1 − α` when the combined step would exceed one.
pub fn guard_steps<T: Scalar>(alpha: T, beta: T) -> (T, T, bool) {
    if alpha + beta > T::one() {
        (alpha, (T::one() - alpha).max(T::zero()), true)
    } else {
        (alpha, beta, false)
    }
}

/// Cross-agent aggregation `Q⋆` over precomputed adjacency structure.
#[derive(Clone, Debug)]
pub struct Reciprocity {
    kappa: f64,
    mode: AdjacencyMode,
    /// `peers[i][j]`: adjacency of agent `i`'s states within agent `j`'s.
    peers: Vec<Vec<PeerAdjacency>>,
}

impl Reciprocity {
    pub fn new(spaces: &[LocalSpace], cfg: &AdjacencyConfig, kappa: f64) -> Result<Self> {
        let peers = spaces
            .iter()
            .map(|own| {
                spaces
                    .iter()
                    .map(|peer| PeerAdjacency::build(own, peer, cfg))
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Reciprocity {
            kappa,
            mode: cfg.mode,
            peers,
        })
    }

    pub fn kappa(&self) -> f64 {
        self.kappa
    }

    pub fn peer(&self, agent: usize, peer: usize) -> &PeerAdjacency {
        &self.peers[agent][peer]
    }

    /// `Q♯_j(s, a)` of peer `j` at agent `i`'s state `s`.
    pub fn q_sharp<T: Scalar>(&self, agent: usize, peer: usize, table: &QTable<T>, s: usize, a: ActionId) -> Result<T> {
        let members = self.peers[agent][peer].members(s);
        let rhos: Vec<usize> = members.iter().map(|&(_, rho)| rho).collect();
        let weights = member_weights::<T>(&rhos, self.mode)?;
        Ok(members
            .iter()
            .zip(weights)
            .map(|(&(k, _), w)| w * table.get(k, a))
            .sum())
    }

    /// `Q⋆_i(s,a) = κ · mean_j Q_j(s,a) + (1 − κ) · mean_j Q♯_j(s,a)` over
    /// the neighbours `j`.
    ///
    /// A peer without an identical state contributes no same-state term, a
    /// peer without adjacent states no `Q♯` term; each mean runs over the
    /// peers that contribute, and a term nobody contributes to hands its
    /// weight to the other.
    pub fn q_star<T: Scalar>(&self, agent: usize, tables: &[QTable<T>], s: usize, a: ActionId, neighbours: &[usize]) -> Result<T> {
        if neighbours.is_empty() {
            return Err(Error::Graph(format!("agent {agent} has no neighbours")));
        }
        let (mut same, mut n_same) = (T::zero(), 0usize);
        let (mut sharp, mut n_sharp) = (T::zero(), 0usize);
        for &j in neighbours {
            let adj = &self.peers[agent][j];
            if let Some(k) = adj.exact(s) {
                same += tables[j].get(k, a);
                n_same += 1;
            }
            match self.q_sharp(agent, j, &tables[j], s, a) {
                Ok(v) => {
                    sharp += v;
                    n_sharp += 1;
                }
                Err(Error::NoAdjacentState) => {}
                Err(e) => return Err(e),
            }
        }
        let kappa = T::lit(self.kappa);
        match (n_same, n_sharp) {
            (0, 0) => Err(Error::NoAdjacentState),
            (_, 0) => Ok(same / T::from_usize_lossy(n_same)),
            (0, _) => Ok(sharp / T::from_usize_lossy(n_sharp)),
            _ => Ok(kappa * same / T::from_usize_lossy(n_same)
                + (T::one() - kappa) * sharp / T::from_usize_lossy(n_sharp)),
        }
    }

    /// `Q⋆` of every `(s, a)` of agent `i` from a frozen set of tables;
    /// `None` where no neighbour offers a value.
    pub fn star_table<T: Scalar>(&self, agent: usize, tables: &[QTable<T>], neighbours: &[usize]) -> Result<Vec<Option<T>>> {
        let own = &tables[agent];
        let mut out = Vec::with_capacity(own.values().len());
        for s in 0..own.n_states() {
            for a in 0..own.n_actions() {
                match self.q_star(agent, tables, s, ActionId(a), neighbours) {
                    Ok(v) => out.push(Some(v)),
                    Err(Error::NoAdjacentState) | Err(Error::Graph(_)) => out.push(None),
                    Err(e) => return Err(e),
                }
            }
        }
        Ok(out)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct EpochMetrics<T> {
    pub epoch: usize,
    /// Per-step reward for continuing tasks, else the return of the
    /// episodes finished during the epoch; averaged over agents.
    pub mean_return: Option<T>,
    pub consensus_error: Option<T>,
    /// `max_i ‖Q_i − Q*‖∞` against the averaged-reward oracle.
    pub oracle_gap: Option<T>,
    pub policy_mse: Option<T>,
    pub min_visits: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct TrainingLog<T> {
    pub epochs: Vec<EpochMetrics<T>>,
    /// `(epoch, tables)` pairs at the configured interval.
    pub snapshots: Vec<(usize, Vec<QTable<T>>)>,
    pub tables: Vec<QTable<T>>,
    pub oracle: Option<OracleQ<T>>,
    /// Largest `|Q|` reached by any update of the run.
    pub max_abs_q: T,
    /// Updates whose `β` was clipped to `1 − α`.
    pub beta_clips: u64,
    pub steps: u64,
}

impl<T: Scalar> TrainingLog<T> {
    pub fn snapshot_at(&self, epoch: usize) -> Option<&[QTable<T>]> {
        self.snapshots
            .iter()
            .find(|(e, _)| *e == epoch)
            .map(|(_, t)| t.as_slice())
    }
}

/// Runs the epoch loop: freeze `Q⋆` from the tables at epoch start, then
/// take `inner_steps` ε-greedy interactions with per-agent updates.
pub fn train_tabular<T: Scalar>(
    env: &mut dyn Environment<T>,
    cfg: &PRConfig,
    learner: Learner,
    opts: &TrainOptions,
    seed: u64,
) -> Result<TrainingLog<T>> {
    let n = env.n_agents();
    cfg.validate(env.state_space().dim(), n)?;
    opts.validate()?;
    let n_actions = env.n_actions();
    let spaces = (0..n).map(|i| env.local_space(i)).collect::<Result<Vec<_>>>()?;

    let reciprocity = match learner {
        Learner::TabularPr => Some(Reciprocity::new(&spaces, &cfg.adjacency, cfg.kappa)?),
        Learner::Iql => None,
    };

    let mut init_rng = rng::stream(seed, rng::TABLE_INIT);
    let mut tables: Vec<QTable<T>> = spaces
        .iter()
        .map(|sp| match cfg.init {
            TableInit::Zeros => QTable::zeros(sp.len(), n_actions),
            TableInit::Uniform { c } => QTable::uniform(sp.len(), n_actions, c, &mut init_rng),
        })
        .collect();

    let gamma = T::lit(cfg.gamma);
    let oracle = match env.model() {
        Some(model) => Some(oracle::value_iteration_averaged(model, gamma, T::lit(1e-10))?),
        None => None,
    };
    let common_shape = tables.windows(2).all(|w| w[0].same_shape(&w[1]));

    let mut env_rng = EnvRng::new(seed, n);
    let mut agent_rngs: Vec<StreamRng> = (0..n).map(|i| rng::agent_stream(seed, i)).collect();
    let mut graph_rng = rng::stream(seed, rng::GRAPH);

    let state = env.reset(&mut env_rng);
    let mut local: Vec<usize> = (0..n)
        .map(|i| spaces[i].index_of_global(&state))
        .collect::<Result<_>>()?;

    let mut log = TrainingLog {
        epochs: Vec::with_capacity(opts.epochs),
        snapshots: Vec::new(),
        tables: Vec::new(),
        oracle: None,
        max_abs_q: tables.iter().fold(T::zero(), |m, t| m.max(t.max_abs())),
        beta_clips: 0,
        steps: 0,
    };
    let mut episode_return = vec![T::zero(); n];
    let mut joint = vec![ActionId(0); n];

    for epoch in 1..=opts.epochs {
        let nbrs: Neighbourhoods = cfg.graph.sample(n, &mut graph_rng);
        let stars: Option<Vec<Vec<Option<T>>>> = match &reciprocity {
            Some(rec) => Some(
                (0..n)
                    .map(|i| rec.star_table(i, &tables, nbrs.of(i)))
                    .collect::<Result<_>>()?,
            ),
            None => None,
        };

        let mut reward_sum = T::zero();
        let mut finished = Vec::new();
        for _ in 0..opts.inner_steps {
            match env.action_protocol() {
                ActionProtocol::Shared => {
                    let leader = (log.steps % n as u64) as usize;
                    let a = epsilon_greedy(
                        tables[leader].row(local[leader]),
                        cfg.epsilon_greedy,
                        &mut agent_rngs[leader],
                    );
                    joint.iter_mut().for_each(|x| *x = a);
                }
                ActionProtocol::Independent => {
                    for i in 0..n {
                        joint[i] = epsilon_greedy(tables[i].row(local[i]), cfg.epsilon_greedy, &mut agent_rngs[i]);
                    }
                }
            }
            let step = env.step(&joint, &mut env_rng)?;
            log.steps += 1;

            for i in 0..n {
                let next_local = spaces[i].index_of_global(&step.state)?;
                let tr = Transition {
                    s: local[i],
                    a: joint[i],
                    r: step.rewards[i],
                    next: if step.terminal { None } else { Some(next_local) },
                };
                let k = tables[i].visits(tr.s, tr.a);
                let (alpha, beta): (T, T) = cfg.schedule.step_sizes(Some(k));
                let value = match &stars {
                    None => iql_update(&mut tables[i], &tr, alpha, gamma),
                    Some(stars) => {
                        let star = stars[i][tr.s * n_actions + tr.a.0];
                        match star {
                            Some(star) => {
                                let (alpha, beta, clipped) = guard_steps(alpha, beta);
                                if clipped {
                                    if log.beta_clips == 0 {
                                        warn!("alpha + beta > 1; clipping beta to 1 - alpha");
                                    }
                                    log.beta_clips += 1;
                                }
                                pr_update(&mut tables[i], &tr, star, alpha, beta, gamma)
                            }
                            None => pr_update(&mut tables[i], &tr, T::zero(), alpha, T::zero(), gamma),
                        }
                    }
                };
                if !value.is_finite() {
                    return Err(Error::Divergence {
                        epoch,
                        detail: format!("agent {i} produced {value} at ({}, {})", tr.s, tr.a.0),
                    });
                }
                log.max_abs_q = log.max_abs_q.max(value.abs());
                local[i] = next_local;
                episode_return[i] += step.rewards[i];
                reward_sum += step.rewards[i];
            }

            if step.done {
                finished.push(episode_return.iter().copied().sum::<T>() / T::from_usize_lossy(n));
                episode_return.iter_mut().for_each(|r| *r = T::zero());
                let state = env.reset(&mut env_rng);
                for i in 0..n {
                    local[i] = spaces[i].index_of_global(&state)?;
                }
            }
        }

        let mean_return = if env.is_continuing() {
            Some(reward_sum / T::from_usize_lossy(n * opts.inner_steps))
        } else if finished.is_empty() {
            None
        } else {
            Some(finished.iter().copied().sum::<T>() / T::from_usize_lossy(finished.len()))
        };
        let (consensus_error, policy_mse) = if common_shape {
            (
                Some(oracle::consensus_error(&tables)?),
                Some(oracle::policy_distribution_mse(&tables, T::lit(opts.temperature))?),
            )
        } else {
            (None, None)
        };
        let oracle_gap = match &oracle {
            Some(o) => Some(o.max_gap(&tables)?),
            None => None,
        };
        log.epochs.push(EpochMetrics {
            epoch,
            mean_return,
            consensus_error,
            oracle_gap,
            policy_mse,
            min_visits: tables.iter().map(|t| t.min_visits()).min().unwrap_or(0),
        });
        if let Some(every) = opts.snapshot_every {
            if epoch % every == 0 {
                log.snapshots.push((epoch, tables.clone()));
            }
        }
    }

    log.tables = tables;
    log.oracle = oracle;
    Ok(log)
}
