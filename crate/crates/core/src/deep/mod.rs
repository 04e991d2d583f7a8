//! Actor-critic policy reciprocity on a continuous toy task.
//!
//! Each agent owns a deterministic actor and a centralized critic. The
//! critic's TD target blends the agent's own target critic with its peers'
//! target critics evaluated around the successor state, where "around"
//! means within a Euclidean ball over the coordinates both agents observe.

pub mod agent;
pub mod mlp;
pub mod pointmass;
pub mod replay;
pub mod train;

pub use agent::{
    actor_objective_and_grad, actor_step, adjacent_states, deep_aggregate, td_loss_and_grad, td_loss_step,
    td_targets, Batch, DeepAgent, DeepPRConfig, PeerCritic, PeerView,
};
pub use mlp::Mlp;
pub use pointmass::{PointMass, PointMassConfig};
pub use replay::{Experience, ReplayBuffer};
pub use train::{train_deep, DeepEpoch, DeepLog, DeepTrainOptions};
