//! Seeded random streams. Every consumer draws from its own ChaCha stream so
//! adding a consumer never perturbs the draws of another.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type StreamRng = ChaCha8Rng;

pub const ENV_TRANSITIONS: u64 = 0;
pub const ENV_GENERATION: u64 = 1;
pub const GRAPH: u64 = 2;
pub const TABLE_INIT: u64 = 3;
pub const SHARED_BEHAVIOUR: u64 = 4;
pub const NETWORK_INIT: u64 = 5;
pub const REPLAY: u64 = 6;
const REWARD_BASE: u64 = 1 << 16;
const AGENT_BASE: u64 = 2 << 16;

pub fn stream(seed: u64, stream: u64) -> StreamRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Reward-noise stream of agent `i`.
pub fn reward_stream(seed: u64, agent: usize) -> StreamRng {
    stream(seed, REWARD_BASE + agent as u64)
}

/// Behaviour-policy stream of agent `i`.
pub fn agent_stream(seed: u64, agent: usize) -> StreamRng {
    stream(seed, AGENT_BASE + agent as u64)
}

/// Random state consumed by environment dynamics.
#[derive(Clone, Debug)]
pub struct EnvRng {
    pub transitions: StreamRng,
    pub rewards: Vec<StreamRng>,
}

impl EnvRng {
    pub fn new(seed: u64, n_agents: usize) -> Self {
        EnvRng {
            transitions: stream(seed, ENV_TRANSITIONS),
            rewards: (0..n_agents).map(|i| reward_stream(seed, i)).collect(),
        }
    }
}
