use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::agent::{actor_step, td_loss_step, Batch, DeepAgent, DeepPRConfig, PeerCritic};
use super::mlp::Mlp;
use super::pointmass::{PointMass, PointMassConfig};
use super::replay::{Experience, ReplayBuffer};
use crate::error::{Error, Result};
use crate::rng::{self, StreamRng};
use crate::scalar::Scalar;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DeepTrainOptions {
    pub epochs: usize,
    /// Environment interactions per epoch; defaults to the horizon.
    #[serde(default)]
    pub steps_per_epoch: Option<usize>,
}

impl DeepTrainOptions {
    pub fn new(epochs: usize) -> Self {
        DeepTrainOptions { epochs, steps_per_epoch: None }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct DeepEpoch<T> {
    pub epoch: usize,
    /// Agent-averaged return of the episodes finished in the epoch.
    pub mean_return: Option<T>,
    /// Mean pre-step TD loss over agents and updates; `None` before warm-up ends.
    pub td_loss: Option<T>,
    pub actor_grad_norm: Option<T>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct DeepLog<T> {
    pub epochs: Vec<DeepEpoch<T>>,
    pub agents: Vec<DeepAgent<T>>,
    pub updates: u64,
}

fn at_epoch(e: Error, epoch: usize) -> Error {
    match e {
        Error::Divergence { detail, .. } => Error::Divergence { epoch, detail },
        other => other,
    }
}

/// Algorithm loop: freeze the peers' target critics and draw the graph at
/// each epoch start, act with Gaussian-perturbed actors, then give every
/// agent one critic and one actor step per interaction on a shared batch.
pub fn train_deep<T: Scalar>(env_cfg: &PointMassConfig, cfg: &DeepPRConfig, opts: &DeepTrainOptions, seed: u64) -> Result<DeepLog<T>> {
    let mut env = PointMass::<T>::new(env_cfg.clone())?;
    let n = env.n_agents();
    cfg.validate(n)?;
    if opts.epochs == 0 {
        return Err(Error::config("training.epochs", "must be positive"));
    }
    let steps = opts.steps_per_epoch.unwrap_or(env.horizon());
    if steps == 0 {
        return Err(Error::config("training.steps_per_epoch", "must be positive"));
    }

    let mut init_rng = rng::stream(seed, rng::NETWORK_INIT);
    let mut agents: Vec<DeepAgent<T>> = (0..n)
        .map(|i| DeepAgent::new(env.observation_dim(i), env.state_dim(), n, &cfg.hidden, &mut init_rng))
        .collect::<Result<_>>()?;
    let masks: Vec<Vec<bool>> = (0..n).map(|i| env.mask(i).to_vec()).collect();

    let mut env_rng = rng::stream(seed, rng::ENV_TRANSITIONS);
    let mut replay_rng = rng::stream(seed, rng::REPLAY);
    let mut graph_rng = rng::stream(seed, rng::GRAPH);
    let mut noise_rngs: Vec<StreamRng> = (0..n).map(|i| rng::agent_stream(seed, i)).collect();
    let noise = Normal::new(0.0, cfg.exploration_noise)
        .map_err(|e| Error::config("deep.exploration_noise", e.to_string()))?;

    let mut buffer = ReplayBuffer::new(cfg.buffer_capacity)?;
    let warmup = cfg.warmup.max(1);
    let mut state = env.reset(&mut env_rng);
    let mut episode_return = T::zero();
    let mut log = DeepLog { epochs: Vec::with_capacity(opts.epochs), agents: Vec::new(), updates: 0 };
    let (rho, one) = (T::lit(cfg.soft_update_rate), T::one());

    for epoch in 1..=opts.epochs {
        let nbrs = cfg.graph.sample(n, &mut graph_rng);
        let frozen: Vec<Mlp<T>> = agents.iter().map(|a| a.target_critic.clone()).collect();
        let mut finished = Vec::new();
        let (mut loss_sum, mut grad_sum, mut n_updates) = (T::zero(), T::zero(), 0usize);

        for _ in 0..steps {
            let mut joint = Vec::with_capacity(2 * n);
            for (i, ag) in agents.iter().enumerate() {
                let a = ag.act(&env.observe(i, &state)).map_err(|e| at_epoch(e, epoch))?;
                for v in a {
                    let eps = if cfg.exploration_noise > 0.0 {
                        T::lit(noise.sample(&mut noise_rngs[i]))
                    } else {
                        T::zero()
                    };
                    joint.push((v + eps).max(-one).min(one));
                }
            }
            let (next, rewards, done) = env.step(&joint)?;
            episode_return += rewards.iter().copied().sum::<T>() / T::from_usize_lossy(n);
            buffer.push(Experience {
                state: std::mem::replace(&mut state, next.clone()),
                actions: joint,
                rewards,
                next_state: next,
                terminal: false,
            });
            if done {
                finished.push(episode_return);
                episode_return = T::zero();
                state = env.reset(&mut env_rng);
            }

            if buffer.len() < warmup {
                continue;
            }
            let ids = buffer.sample_indices(cfg.batch_size, &mut replay_rng)?;
            let items: Vec<&Experience<T>> = ids.iter().map(|&k| buffer.get(k).unwrap()).collect();
            let next_actions = items
                .iter()
                .map(|e| {
                    let mut a = Vec::with_capacity(2 * n);
                    for (j, ag) in agents.iter().enumerate() {
                        a.extend(ag.target_act(&env.observe(j, &e.next_state))?);
                    }
                    Ok(a)
                })
                .collect::<Result<Vec<_>>>()
                .map_err(|e| at_epoch(e, epoch))?;
            let batch = Batch::new(ids, items, next_actions)?;
            for i in 0..n {
                let peers: Vec<PeerCritic<'_, T>> = nbrs
                    .of(i)
                    .iter()
                    .map(|&j| PeerCritic {
                        critic: &frozen[j],
                        mask: masks[i].iter().zip(&masks[j]).map(|(a, b)| *a && *b).collect(),
                    })
                    .collect();
                let loss = td_loss_step(&mut agents[i], i, &batch, &peers, cfg).map_err(|e| at_epoch(e, epoch))?;
                let g = actor_step(&mut agents[i], i, &masks[i], &batch, cfg).map_err(|e| at_epoch(e, epoch))?;
                agents[i].soft_update(rho)?;
                loss_sum += loss;
                grad_sum += g;
                n_updates += 1;
            }
            log.updates += 1;
        }

        if agents.iter().any(|a| !a.actor.is_finite() || !a.critic.is_finite()) {
            return Err(Error::Divergence { epoch, detail: "non-finite parameters".into() });
        }
        let mean = |s: T, k: usize| if k == 0 { None } else { Some(s / T::from_usize_lossy(k)) };
        log.epochs.push(DeepEpoch {
            epoch,
            mean_return: mean(finished.iter().copied().sum(), finished.len()),
            td_loss: mean(loss_sum, n_updates),
            actor_grad_norm: mean(grad_sum, n_updates),
        });
    }
    log.agents = agents;
    Ok(log)
}
