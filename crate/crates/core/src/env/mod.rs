//! Desk-scale tabular environments.

mod digital;
mod landmarks;

use std::sync::Arc;

use serde::{Deserialize, Serialize};

pub use digital::DigitalEnv;
pub use landmarks::{GridLandmarks, LandmarksConfig, LandmarksSnapshot};

use crate::error::Result;
use crate::mdp::{ActionId, GlobalState, LocalSpace, LocalState, ObservationMatrix, StateSpace, TransitionModel};
use crate::rng::EnvRng;
use crate::scalar::Scalar;

/// How the joint action of a step is formed.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ActionProtocol {
    /// Every agent executes one network action; the behaviour agent
    /// rotates round-robin over steps.
    Shared,
    /// Every agent acts on its own observation.
    Independent,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Step<T> {
    pub state: GlobalState,
    pub rewards: Vec<T>,
    /// The episode is over; the environment must be reset.
    pub done: bool,
    /// The episode ended in an absorbing state, so successors carry no value.
    pub terminal: bool,
}

pub trait Environment<T: Scalar> {
    fn n_agents(&self) -> usize;
    fn n_actions(&self) -> usize;
    fn state_space(&self) -> &StateSpace;
    fn observation(&self, agent: usize) -> &Arc<ObservationMatrix>;
    fn action_protocol(&self) -> ActionProtocol;
    /// Continuing tasks never report `done`.
    fn is_continuing(&self) -> bool;
    /// Bound on `|r_i|` for any agent and step.
    fn reward_bound(&self) -> T;

    fn reset(&mut self, rng: &mut EnvRng) -> GlobalState;
    fn step(&mut self, joint: &[ActionId], rng: &mut EnvRng) -> Result<Step<T>>;

    /// Exact transition model, when the environment has one.
    fn model(&self) -> Option<&TransitionModel<T>> {
        None
    }

    fn observe(&self, agent: usize, state: &GlobalState) -> Result<LocalState> {
        LocalState::observe(state, Arc::clone(self.observation(agent)))
    }

    fn local_space(&self, agent: usize) -> Result<LocalSpace> {
        LocalSpace::new(self.state_space(), Arc::clone(self.observation(agent)))
    }
}

/// Environment section of an experiment config.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EnvSpec {
    Digital {
        n_states: usize,
        n_agents: usize,
        /// Seed of the random model; the run seed drives the dynamics.
        model_seed: u64,
    },
    GridLandmarks(LandmarksConfig),
    /// Continuous task of the actor-critic learner.
    PointMass(crate::deep::PointMassConfig),
}

impl EnvSpec {
    pub fn validate(&self) -> Result<()> {
        match self {
            EnvSpec::Digital { n_states, n_agents, .. } => {
                if *n_states < 2 {
                    return Err(crate::Error::config("env.n_states", "must be at least 2"));
                }
                if *n_agents < 1 {
                    return Err(crate::Error::config("env.n_agents", "must be at least 1"));
                }
                Ok(())
            }
            EnvSpec::GridLandmarks(cfg) => cfg.validate(),
            EnvSpec::PointMass(cfg) => cfg.validate(),
        }
    }

    /// Whether the environment has finite states and actions.
    pub fn is_discrete(&self) -> bool {
        !matches!(self, EnvSpec::PointMass(_))
    }

    pub fn n_agents(&self) -> usize {
        match self {
            EnvSpec::Digital { n_agents, .. } => *n_agents,
            EnvSpec::GridLandmarks(cfg) => cfg.n_agents,
            EnvSpec::PointMass(cfg) => cfg.n_agents,
        }
    }

    pub fn build<T: Scalar>(&self) -> Result<Box<dyn Environment<T>>> {
        self.validate()?;
        Ok(match self {
            EnvSpec::Digital { n_states, n_agents, model_seed } => Box::new(DigitalEnv::new(
                crate::mdp::generate_digital(*n_states, *n_agents, *model_seed)?,
            )?),
            EnvSpec::GridLandmarks(cfg) => Box::new(GridLandmarks::new(cfg.clone())?),
            EnvSpec::PointMass(_) => {
                return Err(crate::Error::config("env.kind", "point_mass is continuous; use the deep_pr algorithm"))
            }
        })
    }
}
