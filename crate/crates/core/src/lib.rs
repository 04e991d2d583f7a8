//! Multi-agent policy reciprocity.
//!
//! Agents running independent Q-learning additionally pull each value
//! towards an aggregate of their peers' estimates, both at the same state
//! and at *adjacent* states, i.e. states of a peer whose observation differs
//! from the agent's in at most a few global coordinates. The crate ships
//! the tabular learner, exact averaged-reward oracles to check it against,
//! desk-scale environments, and a small actor-critic variant whose TD
//! target mixes target critics across agents.
//!
//! Numeric code is generic over [`Scalar`] (`f32` or `f64`); the `*64`
//! aliases below fix it to `f64`.

pub mod adjacency;
pub mod deep;
pub mod env;
pub mod error;
pub mod graph;
pub mod mdp;
pub mod oracle;
pub mod policy;
pub mod qtable;
pub mod rng;
pub mod scalar;
pub mod schedule;
pub mod tabular;

pub use adjacency::{AdjacencyConfig, AdjacencyMode, AdjacencySpace};
pub use env::{EnvSpec, Environment};
pub use error::{Error, Result};
pub use graph::{ConnectivityGraph, GraphMode};
pub use mdp::{ActionId, GlobalState, LocalState, ObservationMatrix, StateSpace, TransitionModel};
pub use oracle::OracleQ;
pub use qtable::QTable;
pub use scalar::Scalar;
pub use schedule::ScheduleConfig;
pub use tabular::{Learner, PRConfig, TrainOptions, TrainingLog};

pub type QTable64 = QTable<f64>;
pub type TransitionModel64 = TransitionModel<f64>;
pub type OracleQ64 = OracleQ<f64>;
pub type TrainingLog64 = TrainingLog<f64>;
pub type Mlp64 = deep::Mlp<f64>;
pub type DeepLog64 = deep::DeepLog<f64>;
