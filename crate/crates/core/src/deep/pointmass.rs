use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{self, StreamRng};
use crate::scalar::Scalar;

/// Point masses on a plane, each steering towards its own goal.
///
/// The global state is `(x_0, y_0, x_1, y_1, …)`; each action is a velocity
/// in `[−1, 1]²` applied for `dt`. Agent `i` is paid `−‖p_i − g_i‖` after
/// every step. Positions are clamped to `[−arena, arena]²`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PointMassConfig {
    pub n_agents: usize,
    #[serde(default = "default_horizon")]
    pub horizon: usize,
    #[serde(default = "default_dt")]
    pub dt: f64,
    #[serde(default = "default_arena")]
    pub arena: f64,
    /// Goal per agent; drawn from `layout_seed` when omitted.
    #[serde(default)]
    pub goals: Option<Vec<[f64; 2]>>,
    /// Global coordinates hidden from each agent's actor.
    #[serde(default)]
    pub hidden_dims: Option<Vec<Vec<usize>>>,
    #[serde(default)]
    pub layout_seed: u64,
}

fn default_horizon() -> usize {
    50
}

fn default_dt() -> f64 {
    0.1
}

fn default_arena() -> f64 {
    1.0
}

impl PointMassConfig {
    pub fn new(n_agents: usize) -> Self {
        PointMassConfig {
            n_agents,
            horizon: default_horizon(),
            dt: default_dt(),
            arena: default_arena(),
            goals: None,
            hidden_dims: None,
            layout_seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_agents == 0 {
            return Err(Error::config("env.n_agents", "must be positive"));
        }
        if self.horizon == 0 {
            return Err(Error::config("env.horizon", "must be positive"));
        }
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::config("env.dt", "must be positive"));
        }
        if !(self.arena > 0.0 && self.arena.is_finite()) {
            return Err(Error::config("env.arena", "must be positive"));
        }
        if let Some(g) = &self.goals {
            if g.len() != self.n_agents {
                return Err(Error::config("env.goals", "one goal per agent"));
            }
            if g.iter().flatten().any(|c| !(c.abs() <= self.arena)) {
                return Err(Error::config("env.goals", "goal outside the arena"));
            }
        }
        if let Some(h) = &self.hidden_dims {
            if h.len() != self.n_agents {
                return Err(Error::config("env.hidden_dims", "one list per agent"));
            }
            let d = 2 * self.n_agents;
            if h.iter().any(|l| l.iter().any(|&k| k >= d) || l.len() >= d) {
                return Err(Error::config(
                    "env.hidden_dims",
                    "coordinate outside the state or nothing left observed",
                ));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct PointMass<T> {
    cfg: PointMassConfig,
    goals: Vec<[T; 2]>,
    masks: Vec<Vec<bool>>,
    pos: Vec<T>,
    t: usize,
    done: bool,
}

pub const ACTION_DIM: usize = 2;

impl<T: Scalar> PointMass<T> {
    pub fn new(cfg: PointMassConfig) -> Result<Self> {
        cfg.validate()?;
        let n = cfg.n_agents;
        let goals = match &cfg.goals {
            Some(g) => g.iter().map(|&[x, y]| [T::lit(x), T::lit(y)]).collect(),
            None => {
                let mut r = rng::stream(cfg.layout_seed, rng::ENV_GENERATION);
                let a = cfg.arena;
                (0..n)
                    .map(|_| [T::lit(r.random_range(-a..=a)), T::lit(r.random_range(-a..=a))])
                    .collect()
            }
        };
        let masks = (0..n)
            .map(|i| {
                let mut m = vec![true; 2 * n];
                if let Some(h) = &cfg.hidden_dims {
                    h[i].iter().for_each(|&k| m[k] = false);
                }
                m
            })
            .collect();
        Ok(PointMass {
            cfg,
            goals,
            masks,
            pos: vec![T::zero(); 2 * n],
            t: 0,
            done: true,
        })
    }

    pub fn n_agents(&self) -> usize {
        self.cfg.n_agents
    }

    pub fn state_dim(&self) -> usize {
        2 * self.cfg.n_agents
    }

    pub fn horizon(&self) -> usize {
        self.cfg.horizon
    }

    /// Coordinates of the global state agent `i` observes.
    pub fn mask(&self, agent: usize) -> &[bool] {
        &self.masks[agent]
    }

    pub fn goals(&self) -> &[[T; 2]] {
        &self.goals
    }

    pub fn observe(&self, agent: usize, state: &[T]) -> Vec<T> {
        state
            .iter()
            .zip(&self.masks[agent])
            .filter(|(_, &m)| m)
            .map(|(&x, _)| x)
            .collect()
    }

    pub fn observation_dim(&self, agent: usize) -> usize {
        self.masks[agent].iter().filter(|&&m| m).count()
    }

    pub fn reset(&mut self, rng: &mut StreamRng) -> Vec<T> {
        let a = self.cfg.arena;
        self.pos = (0..self.state_dim())
            .map(|_| T::lit(rng.random_range(-a..=a)))
            .collect();
        self.t = 0;
        self.done = false;
        self.pos.clone()
    }

    /// Applies the joint action; returns `(next_state, rewards, done)`.
    pub fn step(&mut self, actions: &[T]) -> Result<(Vec<T>, Vec<T>, bool)> {
        if self.done {
            return Err(Error::Usage("step on a finished episode; call reset".into()));
        }
        if actions.len() != ACTION_DIM * self.cfg.n_agents {
            return Err(Error::contract("joint action has the wrong length"));
        }
        let (dt, a) = (T::lit(self.cfg.dt), T::lit(self.cfg.arena));
        for (p, &u) in self.pos.iter_mut().zip(actions) {
            let u = u.max(-T::one()).min(T::one());
            *p = (*p + dt * u).max(-a).min(a);
        }
        let rewards = (0..self.cfg.n_agents)
            .map(|i| {
                let dx = self.pos[2 * i] - self.goals[i][0];
                let dy = self.pos[2 * i + 1] - self.goals[i][1];
                -(dx * dx + dy * dy).sqrt()
            })
            .collect();
        self.t += 1;
        self.done = self.t >= self.cfg.horizon;
        Ok((self.pos.clone(), rewards, self.done))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fixed() -> PointMass<f64> {
        let mut c = PointMassConfig::new(2);
        c.goals = Some(vec![[0.5, 0.0], [0.0, 0.0]]);
        c.horizon = 3;
        PointMass::new(c).unwrap()
    }

    #[test]
    fn velocity_moves_by_dt() {
        let mut e = fixed();
        e.reset(&mut rng::stream(0, rng::ENV_TRANSITIONS));
        e.pos = vec![0.0, 0.0, 0.3, 0.4];
        let (s, r, done) = e.step(&[1.0, 0.0, 0.0, 0.0]).unwrap();
        assert!((s[0] - 0.1).abs() < 1e-15);
        assert!((r[0] + 0.4).abs() < 1e-15);
        assert!((r[1] + 0.5).abs() < 1e-15);
        assert!(!done);
    }

    #[test]
    fn actions_and_positions_are_clamped() {
        let mut e = fixed();
        e.reset(&mut rng::stream(0, rng::ENV_TRANSITIONS));
        e.pos = vec![0.95, 0.0, 0.0, 0.0];
        let (s, _, _) = e.step(&[5.0, -5.0, 0.0, 0.0]).unwrap();
        assert_eq!(s[0], 1.0);
        assert!((s[1] + 0.1).abs() < 1e-15);
    }

    #[test]
    fn episode_ends_at_horizon() {
        let mut e = fixed();
        e.reset(&mut rng::stream(0, rng::ENV_TRANSITIONS));
        let z = [0.0; 4];
        assert!(!e.step(&z).unwrap().2);
        assert!(!e.step(&z).unwrap().2);
        assert!(e.step(&z).unwrap().2);
        assert!(matches!(e.step(&z), Err(Error::Usage(_))));
    }

    #[test]
    fn hidden_coordinates_are_masked() {
        let mut c = PointMassConfig::new(2);
        c.hidden_dims = Some(vec![vec![3], vec![]]);
        let e = PointMass::<f64>::new(c).unwrap();
        assert_eq!(e.observe(0, &[1.0, 2.0, 3.0, 4.0]), vec![1.0, 2.0, 3.0]);
        assert_eq!(e.observation_dim(1), 4);
    }

    #[test]
    fn generated_goals_lie_in_the_arena() {
        let e = PointMass::<f64>::new(PointMassConfig::new(5)).unwrap();
        assert!(e.goals().iter().flatten().all(|c| c.abs() <= 1.0));
    }
}
