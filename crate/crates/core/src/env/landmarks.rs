use std::sync::Arc;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{ActionProtocol, Environment, Step};
use crate::error::{Error, Result};
use crate::mdp::{ActionId, GlobalState, ObservationMatrix, StateSpace};
use crate::rng::{self, EnvRng};
use crate::scalar::Scalar;

/// Agents walk a `width × height` grid towards their own landmark.
///
/// Global coordinates are `(x_0, y_0, x_1, y_1, …)`. Each agent observes
/// every coordinate but one. Reaching the landmark pays `landmark_reward`
/// once and parks the agent; every other step of an unparked agent costs
/// `step_cost`. The episode ends when all agents are parked or after
/// `horizon` steps.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LandmarksConfig {
    pub width: usize,
    pub height: usize,
    pub n_agents: usize,
    pub horizon: usize,
    /// Landmark `(x, y)` per agent; drawn from `layout_seed` when omitted.
    #[serde(default)]
    pub landmarks: Option<Vec<[usize; 2]>>,
    /// Global coordinate hidden from each agent; defaults to the `y` of the
    /// next agent.
    #[serde(default)]
    pub dropped_dims: Option<Vec<usize>>,
    #[serde(default = "default_step_cost")]
    pub step_cost: f64,
    #[serde(default = "default_landmark_reward")]
    pub landmark_reward: f64,
    #[serde(default)]
    pub layout_seed: u64,
}

fn default_step_cost() -> f64 {
    0.01
}

fn default_landmark_reward() -> f64 {
    1.0
}

impl LandmarksConfig {
    pub fn new(width: usize, height: usize, n_agents: usize, horizon: usize) -> Self {
        LandmarksConfig {
            width,
            height,
            n_agents,
            horizon,
            landmarks: None,
            dropped_dims: None,
            step_cost: default_step_cost(),
            landmark_reward: default_landmark_reward(),
            layout_seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.width == 0 || self.height == 0 {
            return Err(Error::config("env.width", "grid must be non-empty"));
        }
        if self.n_agents < 2 {
            return Err(Error::config("env.n_agents", "landmarks needs at least 2 agents"));
        }
        if self.horizon < 1 {
            return Err(Error::config("env.horizon", "must be at least 1"));
        }
        if let Some(l) = &self.landmarks {
            if l.len() != self.n_agents {
                return Err(Error::config("env.landmarks", "one landmark per agent"));
            }
            if l.iter().any(|&[x, y]| x >= self.width || y >= self.height) {
                return Err(Error::config("env.landmarks", "landmark off the grid"));
            }
        }
        if let Some(d) = &self.dropped_dims {
            if d.len() != self.n_agents {
                return Err(Error::config("env.dropped_dims", "one dropped coordinate per agent"));
            }
            if d.iter().any(|&k| k >= 2 * self.n_agents) {
                return Err(Error::config("env.dropped_dims", "coordinate outside the global state"));
            }
        }
        if !(self.step_cost >= 0.0 && self.step_cost.is_finite()) {
            return Err(Error::config("env.step_cost", "must be finite and non-negative"));
        }
        if !self.landmark_reward.is_finite() {
            return Err(Error::config("env.landmark_reward", "must be finite"));
        }
        Ok(())
    }
}

/// Replayable mid-episode state.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LandmarksSnapshot {
    pub positions: Vec<[usize; 2]>,
    pub parked: Vec<bool>,
    pub t: usize,
    pub done: bool,
}

#[derive(Clone, Debug)]
pub struct GridLandmarks<T> {
    cfg: LandmarksConfig,
    landmarks: Vec<[usize; 2]>,
    space: StateSpace,
    obs: Vec<Arc<ObservationMatrix>>,
    positions: Vec<[usize; 2]>,
    parked: Vec<bool>,
    t: usize,
    done: bool,
    started: bool,
    _scalar: std::marker::PhantomData<T>,
}

/// `0` stay, `1` up, `2` down, `3` left, `4` right.
pub const MOVES: [(isize, isize); 5] = [(0, 0), (0, 1), (0, -1), (-1, 0), (1, 0)];

impl<T: Scalar> GridLandmarks<T> {
    pub fn new(cfg: LandmarksConfig) -> Result<Self> {
        cfg.validate()?;
        let n = cfg.n_agents;
        let landmarks = match &cfg.landmarks {
            Some(l) => l.clone(),
            None => {
                let mut r = rng::stream(cfg.layout_seed, rng::ENV_GENERATION);
                (0..n)
                    .map(|_| [r.random_range(0..cfg.width), r.random_range(0..cfg.height)])
                    .collect()
            }
        };
        let dims = (0..n).flat_map(|_| [cfg.width, cfg.height]).collect();
        let d = 2 * n;
        let dropped: Vec<usize> = match &cfg.dropped_dims {
            Some(v) => v.clone(),
            None => (0..n).map(|i| 2 * ((i + 1) % n) + 1).collect(),
        };
        let obs = dropped
            .iter()
            .map(|&k| ObservationMatrix::dropping(d, k).map(Arc::new))
            .collect::<Result<Vec<_>>>()?;
        Ok(GridLandmarks {
            space: StateSpace::new(dims)?,
            landmarks,
            obs,
            positions: vec![[0, 0]; n],
            parked: vec![false; n],
            t: 0,
            done: false,
            started: false,
            cfg,
            _scalar: std::marker::PhantomData,
        })
    }

    pub fn landmarks(&self) -> &[[usize; 2]] {
        &self.landmarks
    }

    pub fn snapshot(&self) -> LandmarksSnapshot {
        LandmarksSnapshot {
            positions: self.positions.clone(),
            parked: self.parked.clone(),
            t: self.t,
            done: self.done,
        }
    }

    pub fn restore(&mut self, snap: &LandmarksSnapshot) -> Result<()> {
        if snap.positions.len() != self.cfg.n_agents || snap.parked.len() != self.cfg.n_agents {
            return Err(Error::contract("snapshot agent count differs"));
        }
        if snap
            .positions
            .iter()
            .any(|&[x, y]| x >= self.cfg.width || y >= self.cfg.height)
        {
            return Err(Error::contract("snapshot position off the grid"));
        }
        self.positions = snap.positions.clone();
        self.parked = snap.parked.clone();
        self.t = snap.t;
        self.done = snap.done;
        self.started = true;
        Ok(())
    }

    fn global(&self) -> GlobalState {
        let coords: Vec<usize> = self.positions.iter().flat_map(|&[x, y]| [x, y]).collect();
        self.space
            .state_from_coords(coords)
            .expect("positions stay on the grid")
    }

    fn moved(&self, [x, y]: [usize; 2], a: ActionId) -> [usize; 2] {
        let (dx, dy) = MOVES[a.0];
        let nx = x as isize + dx;
        let ny = y as isize + dy;
        if nx < 0 || ny < 0 || nx >= self.cfg.width as isize || ny >= self.cfg.height as isize {
            [x, y]
        } else {
            [nx as usize, ny as usize]
        }
    }
}

impl<T: Scalar> Environment<T> for GridLandmarks<T> {
    fn n_agents(&self) -> usize {
        self.cfg.n_agents
    }

    fn n_actions(&self) -> usize {
        MOVES.len()
    }

    fn state_space(&self) -> &StateSpace {
        &self.space
    }

    fn observation(&self, agent: usize) -> &Arc<ObservationMatrix> {
        &self.obs[agent]
    }

    fn action_protocol(&self) -> ActionProtocol {
        ActionProtocol::Independent
    }

    fn is_continuing(&self) -> bool {
        false
    }

    fn reward_bound(&self) -> T {
        T::lit(self.cfg.landmark_reward.abs().max(self.cfg.step_cost))
    }

    fn reset(&mut self, rng: &mut EnvRng) -> GlobalState {
        for p in &mut self.positions {
            *p = [
                rng.transitions.random_range(0..self.cfg.width),
                rng.transitions.random_range(0..self.cfg.height),
            ];
        }
        self.parked.iter_mut().for_each(|p| *p = false);
        self.t = 0;
        self.done = false;
        self.started = true;
        self.global()
    }

    fn step(&mut self, joint: &[ActionId], _rng: &mut EnvRng) -> Result<Step<T>> {
        if !self.started {
            return Err(Error::Usage("step before reset".into()));
        }
        if self.done {
            return Err(Error::Usage("step after the episode finished".into()));
        }
        if joint.len() != self.cfg.n_agents {
            return Err(Error::contract(format!(
                "joint action has {} entries for {} agents",
                joint.len(),
                self.cfg.n_agents
            )));
        }
        if let Some(a) = joint.iter().find(|a| a.0 >= MOVES.len()) {
            return Err(Error::contract(format!("action {} outside 0..{}", a.0, MOVES.len())));
        }
        let mut rewards = vec![T::zero(); self.cfg.n_agents];
        for i in 0..self.cfg.n_agents {
            if self.parked[i] {
                continue;
            }
            self.positions[i] = self.moved(self.positions[i], joint[i]);
            if self.positions[i] == self.landmarks[i] {
                self.parked[i] = true;
                rewards[i] = T::lit(self.cfg.landmark_reward);
            } else {
                rewards[i] = -T::lit(self.cfg.step_cost);
            }
        }
        self.t += 1;
        let all_parked = self.parked.iter().all(|&p| p);
        self.done = all_parked || self.t >= self.cfg.horizon;
        Ok(Step {
            state: self.global(),
            rewards,
            done: self.done,
            terminal: all_parked,
        })
    }
}
