use std::sync::Arc;

use rand::Rng;

use super::{ActionProtocol, Environment, Step};
use crate::error::{Error, Result};
use crate::mdp::{ActionId, GlobalState, ObservationMatrix, StateSpace, TransitionModel};
use crate::rng::EnvRng;
use crate::scalar::Scalar;

/// Continuing random MDP shared by all agents; every agent observes the
/// full (single-coordinate) state.
#[derive(Clone, Debug)]
pub struct DigitalEnv<T> {
    model: TransitionModel<T>,
    space: StateSpace,
    obs: Arc<ObservationMatrix>,
    state: Option<GlobalState>,
}

impl<T: Scalar> DigitalEnv<T> {
    pub fn new(model: TransitionModel<T>) -> Result<Self> {
        model.validate()?;
        Ok(DigitalEnv {
            space: StateSpace::flat(model.n_states())?,
            obs: Arc::new(ObservationMatrix::identity(1)),
            model,
            state: None,
        })
    }

    pub fn state(&self) -> Option<&GlobalState> {
        self.state.as_ref()
    }
}

impl<T: Scalar> Environment<T> for DigitalEnv<T> {
    fn n_agents(&self) -> usize {
        self.model.n_agents()
    }

    fn n_actions(&self) -> usize {
        self.model.n_actions()
    }

    fn state_space(&self) -> &StateSpace {
        &self.space
    }

    fn observation(&self, _agent: usize) -> &Arc<ObservationMatrix> {
        &self.obs
    }

    fn action_protocol(&self) -> ActionProtocol {
        ActionProtocol::Shared
    }

    fn is_continuing(&self) -> bool {
        true
    }

    fn reward_bound(&self) -> T {
        self.model.reward_bound()
    }

    fn reset(&mut self, rng: &mut EnvRng) -> GlobalState {
        let index = rng.transitions.random_range(0..self.model.n_states());
        let s = GlobalState { index, coords: vec![index] };
        self.state = Some(s.clone());
        s
    }

    fn step(&mut self, joint: &[ActionId], rng: &mut EnvRng) -> Result<Step<T>> {
        let s = self
            .state
            .as_ref()
            .ok_or_else(|| Error::Usage("step before reset".into()))?;
        let (next, rewards) = self.model.sample_transition(s, joint, rng)?;
        self.state = Some(next.clone());
        Ok(Step {
            state: next,
            rewards,
            done: false,
            terminal: false,
        })
    }

    fn model(&self) -> Option<&TransitionModel<T>> {
        Some(&self.model)
    }
}
