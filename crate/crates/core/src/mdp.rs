//! Finite multi-agent MDPs: enumerable global states, per-agent observation
//! matrices and seeded stochastic dynamics.

use std::fmt;
use std::path::Path;
use std::sync::Arc;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{self, EnvRng};
use crate::scalar::Scalar;

/// Index of an action inside an agent's action set.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ActionId(pub usize);

impl ActionId {
    #[inline]
    pub fn index(self) -> usize {
        self.0
    }
}

/// Mixed-radix enumeration of global states: coordinate `k` ranges over
/// `0..dims[k]`, the last coordinate varies fastest.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct StateSpace {
    dims: Vec<usize>,
}

impl StateSpace {
    pub fn new(dims: Vec<usize>) -> Result<Self> {
        if dims.is_empty() || dims.contains(&0) {
            return Err(Error::config("dims", "every coordinate needs a non-empty domain"));
        }
        dims.iter()
            .try_fold(1usize, |acc, &n| acc.checked_mul(n))
            .ok_or_else(|| Error::config("dims", "state space too large to enumerate"))?;
        Ok(StateSpace { dims })
    }

    /// One coordinate taking `n` values; the Digital environment's layout.
    pub fn flat(n: usize) -> Result<Self> {
        Self::new(vec![n])
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    /// Global dimension `d`.
    pub fn dim(&self) -> usize {
        self.dims.len()
    }

    pub fn len(&self) -> usize {
        self.dims.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn index_of(&self, coords: &[usize]) -> Result<usize> {
        mixed_radix_index(&self.dims, coords)
    }

    pub fn coords_of(&self, index: usize) -> Result<Vec<usize>> {
        if index >= self.len() {
            return Err(Error::contract(format!(
                "state index {index} outside 0..{}",
                self.len()
            )));
        }
        Ok(mixed_radix_coords(&self.dims, index))
    }

    pub fn state(&self, index: usize) -> Result<GlobalState> {
        Ok(GlobalState {
            index,
            coords: self.coords_of(index)?,
        })
    }

    pub fn state_from_coords(&self, coords: Vec<usize>) -> Result<GlobalState> {
        let index = self.index_of(&coords)?;
        Ok(GlobalState { index, coords })
    }
}

fn mixed_radix_index(dims: &[usize], coords: &[usize]) -> Result<usize> {
    if coords.len() != dims.len() {
        return Err(Error::contract(format!(
            "expected {} coordinates, got {}",
            dims.len(),
            coords.len()
        )));
    }
    let mut index = 0;
    for (&c, &n) in coords.iter().zip(dims) {
        if c >= n {
            return Err(Error::contract(format!("coordinate {c} outside 0..{n}")));
        }
        index = index * n + c;
    }
    Ok(index)
}

fn mixed_radix_coords(dims: &[usize], mut index: usize) -> Vec<usize> {
    let mut coords = vec![0; dims.len()];
    for (slot, &n) in coords.iter_mut().zip(dims).rev() {
        *slot = index % n;
        index /= n;
    }
    coords
}

/// A global state `s_G`: its enumeration index and coordinate vector.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct GlobalState {
    pub index: usize,
    pub coords: Vec<usize>,
}

/// Row-selection matrix: row `r` has its single one in column `rows[r]`.
///
/// Stored as the selected column indices, strictly increasing.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ObservationMatrix {
    global_dim: usize,
    rows: Vec<usize>,
}

impl ObservationMatrix {
    pub fn new(global_dim: usize, rows: Vec<usize>) -> Result<Self> {
        if rows.len() > global_dim {
            return Err(Error::config(
                "rows",
                format!("{} rows exceed global dimension {global_dim}", rows.len()),
            ));
        }
        if rows.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::config("rows", "row indices must be strictly increasing"));
        }
        if let Some(&last) = rows.last() {
            if last >= global_dim {
                return Err(Error::config(
                    "rows",
                    format!("row index {last} outside 0..{global_dim}"),
                ));
            }
        }
        Ok(ObservationMatrix { global_dim, rows })
    }

    pub fn identity(global_dim: usize) -> Self {
        ObservationMatrix {
            global_dim,
            rows: (0..global_dim).collect(),
        }
    }

    /// Observes every coordinate except `dropped`.
    pub fn dropping(global_dim: usize, dropped: usize) -> Result<Self> {
        if dropped >= global_dim {
            return Err(Error::config(
                "dropped_dim",
                format!("{dropped} outside 0..{global_dim}"),
            ));
        }
        Self::new(global_dim, (0..global_dim).filter(|&k| k != dropped).collect())
    }

    pub fn global_dim(&self) -> usize {
        self.global_dim
    }

    pub fn rows(&self) -> &[usize] {
        &self.rows
    }

    /// Observed dimension `d_s`.
    pub fn local_dim(&self) -> usize {
        self.rows.len()
    }

    pub fn observes(&self, coord: usize) -> bool {
        self.rows.binary_search(&coord).is_ok()
    }

    /// `Π_s · s_G`.
    pub fn apply(&self, global: &[usize]) -> Result<Vec<usize>> {
        if global.len() != self.global_dim {
            return Err(Error::contract(format!(
                "global vector has {} coordinates, observation expects {}",
                global.len(),
                self.global_dim
            )));
        }
        Ok(self.rows.iter().map(|&r| global[r]).collect())
    }

    /// `Π_sᵀ · s`, with unobserved coordinates left absent.
    pub fn lift(&self, values: &[usize]) -> Result<Lifted> {
        if values.len() != self.rows.len() {
            return Err(Error::contract(format!(
                "local vector has {} values, observation selects {}",
                values.len(),
                self.rows.len()
            )));
        }
        let mut out = vec![None; self.global_dim];
        for (&r, &v) in self.rows.iter().zip(values) {
            out[r] = Some(v);
        }
        Ok(Lifted(out))
    }

    /// Inverse of [`lift`](Self::lift) for vectors with this matrix's support.
    pub fn unlift(&self, lifted: &Lifted) -> Result<Vec<usize>> {
        if lifted.0.len() != self.global_dim {
            return Err(Error::contract("lifted vector has the wrong global dimension"));
        }
        for (k, slot) in lifted.0.iter().enumerate() {
            if slot.is_some() != self.observes(k) {
                return Err(Error::contract(format!(
                    "coordinate {k} support does not match the observation rows"
                )));
            }
        }
        Ok(self.rows.iter().map(|&r| lifted.0[r].unwrap()).collect())
    }
}

/// A local observation vector in global coordinates; `None` marks a
/// coordinate the observer does not see. Absent never equals a value.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Lifted(pub Vec<Option<usize>>);

impl Lifted {
    pub fn dim(&self) -> usize {
        self.0.len()
    }
}

impl fmt::Display for Lifted {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("(")?;
        for (k, v) in self.0.iter().enumerate() {
            if k > 0 {
                f.write_str(",")?;
            }
            match v {
                Some(v) => write!(f, "{v}")?,
                None => f.write_str("⊥")?,
            }
        }
        f.write_str(")")
    }
}

/// An agent's observation `s_i = Π_s s_G` together with the matrix that produced it.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct LocalState {
    values: Vec<usize>,
    obs: Arc<ObservationMatrix>,
}

impl LocalState {
    pub fn new(values: Vec<usize>, obs: Arc<ObservationMatrix>) -> Result<Self> {
        if values.len() != obs.local_dim() {
            return Err(Error::contract(format!(
                "local state has {} values, observation selects {}",
                values.len(),
                obs.local_dim()
            )));
        }
        Ok(LocalState { values, obs })
    }

    pub fn observe(global: &GlobalState, obs: Arc<ObservationMatrix>) -> Result<Self> {
        let values = obs.apply(&global.coords)?;
        Ok(LocalState { values, obs })
    }

    pub fn values(&self) -> &[usize] {
        &self.values
    }

    pub fn observation(&self) -> &Arc<ObservationMatrix> {
        &self.obs
    }

    pub fn lift(&self) -> Lifted {
        self.obs.lift(&self.values).expect("length checked at construction")
    }
}

/// The state set an agent can observe: the product of the domains of its
/// observed coordinates, enumerated in mixed radix.
#[derive(Clone, Debug)]
pub struct LocalSpace {
    obs: Arc<ObservationMatrix>,
    dims: Vec<usize>,
}

impl LocalSpace {
    pub fn new(space: &StateSpace, obs: Arc<ObservationMatrix>) -> Result<Self> {
        if obs.global_dim() != space.dim() {
            return Err(Error::contract(format!(
                "observation over {} coordinates used with a {}-dimensional state space",
                obs.global_dim(),
                space.dim()
            )));
        }
        let dims = obs.rows().iter().map(|&r| space.dims()[r]).collect();
        Ok(LocalSpace { obs, dims })
    }

    pub fn observation(&self) -> &Arc<ObservationMatrix> {
        &self.obs
    }

    pub fn len(&self) -> usize {
        self.dims.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn index_of(&self, state: &LocalState) -> Result<usize> {
        if state.obs.as_ref() != self.obs.as_ref() {
            return Err(Error::contract("local state belongs to another observation"));
        }
        mixed_radix_index(&self.dims, &state.values)
    }

    /// Local index of the observation of a global state.
    pub fn index_of_global(&self, global: &GlobalState) -> Result<usize> {
        mixed_radix_index(&self.dims, &self.obs.apply(&global.coords)?)
    }

    pub fn state(&self, index: usize) -> LocalState {
        LocalState {
            values: mixed_radix_coords(&self.dims, index),
            obs: Arc::clone(&self.obs),
        }
    }

    pub fn states(&self) -> impl Iterator<Item = LocalState> + '_ {
        (0..self.len()).map(|i| self.state(i))
    }
}

/// Dynamics and reward statistics of a finite MDP shared by `N` agents.
///
/// Transitions are driven by the single network action all agents execute
/// at the step; agent `i`'s reward depends on that action through
/// `mean_reward[i][s][a]` plus uniform noise of half-width `reward_half_width`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct TransitionModel<T> {
    n_states: usize,
    n_actions: usize,
    n_agents: usize,
    probs: Vec<T>,
    mean_reward: Vec<T>,
    reward_half_width: T,
}

impl<T: Scalar> TransitionModel<T> {
    pub fn new(
        n_states: usize,
        n_actions: usize,
        n_agents: usize,
        probs: Vec<T>,
        mean_reward: Vec<T>,
        reward_half_width: T,
    ) -> Result<Self> {
        let model = TransitionModel {
            n_states,
            n_actions,
            n_agents,
            probs,
            mean_reward,
            reward_half_width,
        };
        model.validate()?;
        Ok(model)
    }

    pub fn validate(&self) -> Result<()> {
        let (s, a, n) = (self.n_states, self.n_actions, self.n_agents);
        if s == 0 || a == 0 || n == 0 {
            return Err(Error::config("model", "states, actions and agents must be non-empty"));
        }
        if self.probs.len() != s * a * s {
            return Err(Error::config("probs", format!("expected {} entries", s * a * s)));
        }
        if self.mean_reward.len() != n * s * a {
            return Err(Error::config("mean_reward", format!("expected {} entries", n * s * a)));
        }
        if !(self.reward_half_width >= T::zero()) || !self.reward_half_width.is_finite() {
            return Err(Error::config("reward_half_width", "must be finite and non-negative"));
        }
        let tol = T::lit(1e-12).max(T::epsilon() * T::from_usize_lossy(4 * s));
        for state in 0..s {
            for action in 0..a {
                let row = self.row(state, action);
                if row.iter().any(|&p| !(p >= T::zero()) || !p.is_finite()) {
                    return Err(Error::config("probs", format!("row ({state},{action}) has an invalid entry")));
                }
                let total: T = row.iter().copied().sum();
                if (total - T::one()).abs() > tol {
                    return Err(Error::config(
                        "probs",
                        format!("row ({state},{action}) sums to {total}"),
                    ));
                }
            }
        }
        if self.mean_reward.iter().any(|r| !r.is_finite()) {
            return Err(Error::config("mean_reward", "entries must be finite"));
        }
        Ok(())
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    pub fn n_actions(&self) -> usize {
        self.n_actions
    }

    pub fn n_agents(&self) -> usize {
        self.n_agents
    }

    pub fn reward_half_width(&self) -> T {
        self.reward_half_width
    }

    /// `p^a_{s,·}`.
    pub fn row(&self, s: usize, a: usize) -> &[T] {
        let start = (s * self.n_actions + a) * self.n_states;
        &self.probs[start..start + self.n_states]
    }

    pub fn probs(&self) -> &[T] {
        &self.probs
    }

    pub fn mean_rewards(&self) -> &[T] {
        &self.mean_reward
    }

    /// `E[r_i(s, a)]`.
    pub fn mean_reward(&self, agent: usize, s: usize, a: usize) -> T {
        self.mean_reward[(agent * self.n_states + s) * self.n_actions + a]
    }

    /// Network-average mean reward `(1/N) Σ_i E[r_i(s, a)]`.
    pub fn average_reward(&self, s: usize, a: usize) -> T {
        let total: T = (0..self.n_agents).map(|i| self.mean_reward(i, s, a)).sum();
        total / T::from_usize_lossy(self.n_agents)
    }

    /// Largest attainable instantaneous reward magnitude.
    pub fn reward_bound(&self) -> T {
        self.mean_reward
            .iter()
            .fold(T::zero(), |m, r| m.max(r.abs()))
            + self.reward_half_width
    }

    /// Draws `s' ~ p^a_{s,·}` and one noisy reward per agent.
    ///
    /// All agents must execute the same action: the model has a single
    /// network action per step.
    pub fn sample_transition(
        &self,
        s: &GlobalState,
        joint: &[ActionId],
        rng: &mut EnvRng,
    ) -> Result<(GlobalState, Vec<T>)> {
        if s.index >= self.n_states {
            return Err(Error::contract(format!("state {} outside 0..{}", s.index, self.n_states)));
        }
        if joint.len() != self.n_agents {
            return Err(Error::contract(format!(
                "joint action has {} entries for {} agents",
                joint.len(),
                self.n_agents
            )));
        }
        let action = joint[0];
        if joint.iter().any(|&a| a != action) {
            return Err(Error::contract("agents disagree on the shared network action"));
        }
        if action.0 >= self.n_actions {
            return Err(Error::contract(format!("action {} outside 0..{}", action.0, self.n_actions)));
        }
        if rng.rewards.len() != self.n_agents {
            return Err(Error::contract("one reward stream per agent is required"));
        }
        let next = sample_index(self.row(s.index, action.0), &mut rng.transitions);
        let rewards = (0..self.n_agents)
            .map(|i| {
                let mean = self.mean_reward(i, s.index, action.0);
                let h = self.reward_half_width;
                if h == T::zero() {
                    mean
                } else {
                    let u = T::lit(rng.rewards[i].random::<f64>());
                    mean - h + (h + h) * u
                }
            })
            .collect();
        Ok((
            GlobalState {
                index: next,
                coords: vec![next],
            },
            rewards,
        ))
    }
}

/// Inverse-CDF draw, restricted to the support of `probs`.
pub(crate) fn sample_index<T: Scalar, R: Rng + ?Sized>(probs: &[T], rng: &mut R) -> usize {
    let u = T::lit(rng.random::<f64>());
    let mut acc = T::zero();
    let mut last_support = 0;
    for (k, &p) in probs.iter().enumerate() {
        if p > T::zero() {
            acc += p;
            last_support = k;
            if u < acc {
                return k;
            }
        }
    }
    last_support
}

/// Random MDP of the Digital benchmark: binary actions, transition rows
/// drawn uniformly from `[0, 1]` and normalised, mean rewards uniform on
/// `[0, 4]`, instantaneous noise of half-width `0.5`.
pub fn generate_digital<T: Scalar>(n_states: usize, n_agents: usize, seed: u64) -> Result<TransitionModel<T>> {
    if n_states < 2 {
        return Err(Error::config("n_states", "Digital needs at least 2 states"));
    }
    if n_agents < 1 {
        return Err(Error::config("n_agents", "Digital needs at least 1 agent"));
    }
    let n_actions = 2;
    let mut rng = rng::stream(seed, rng::ENV_GENERATION);
    let mut probs = Vec::with_capacity(n_states * n_actions * n_states);
    for _ in 0..n_states * n_actions {
        let raw: Vec<f64> = (0..n_states).map(|_| rng.random::<f64>()).collect();
        let total: f64 = raw.iter().sum();
        probs.extend(raw.iter().map(|&p| T::lit(p / total)));
    }
    let mean_reward = (0..n_agents * n_states * n_actions)
        .map(|_| T::lit(rng.random_range(0.0..=4.0)))
        .collect();
    TransitionModel::new(n_states, n_actions, n_agents, probs, mean_reward, T::lit(0.5))
}

pub const ENV_FORMAT_VERSION: u32 = 1;

/// Versioned on-disk form of a tabular environment model.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct ModelFile<T> {
    pub format_version: u32,
    pub kind: String,
    pub seed: Option<u64>,
    pub model: TransitionModel<T>,
}

impl<T: Scalar> ModelFile<T> {
    pub fn digital(model: TransitionModel<T>, seed: u64) -> Self {
        ModelFile {
            format_version: ENV_FORMAT_VERSION,
            kind: "digital".into(),
            seed: Some(seed),
            model,
        }
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, serde_json::to_string_pretty(self)?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let file: ModelFile<T> = serde_json::from_str(&std::fs::read_to_string(path)?)?;
        if file.format_version != ENV_FORMAT_VERSION {
            return Err(Error::config(
                "format_version",
                format!("unsupported version {}", file.format_version),
            ));
        }
        file.model.validate()?;
        Ok(file)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rows(d: usize, r: &[usize]) -> Arc<ObservationMatrix> {
        Arc::new(ObservationMatrix::new(d, r.to_vec()).unwrap())
    }

    #[test]
    fn lift_marks_unobserved_coordinates() {
        let (a, b, c, d) = (10, 11, 12, 13);
        let s = LocalState::new(vec![a, b, c], rows(4, &[0, 1, 2])).unwrap();
        assert_eq!(s.lift(), Lifted(vec![Some(a), Some(b), Some(c), None]));
        let t = LocalState::new(vec![a, b, d], rows(4, &[0, 1, 3])).unwrap();
        assert_eq!(t.lift(), Lifted(vec![Some(a), Some(b), None, Some(d)]));
        assert_eq!(t.lift().to_string(), "(10,11,⊥,13)");
    }

    #[test]
    fn identity_lift_is_embedding() {
        let obs = ObservationMatrix::identity(3);
        let lifted = obs.lift(&[4, 0, 2]).unwrap();
        assert_eq!(lifted, Lifted(vec![Some(4), Some(0), Some(2)]));
        assert_eq!(obs.unlift(&lifted).unwrap(), vec![4, 0, 2]);
    }

    #[test]
    fn lift_rejects_dimension_mismatch() {
        let obs = ObservationMatrix::new(4, vec![0, 1, 2]).unwrap();
        assert!(matches!(obs.lift(&[1, 2]), Err(Error::Contract(_))));
        assert!(LocalState::new(vec![1], Arc::new(obs)).is_err());
    }

    #[test]
    fn observation_rows_are_validated() {
        assert!(ObservationMatrix::new(3, vec![1, 0]).is_err());
        assert!(ObservationMatrix::new(3, vec![0, 0]).is_err());
        assert!(ObservationMatrix::new(3, vec![0, 3]).is_err());
        assert!(ObservationMatrix::new(2, vec![0, 1, 2]).is_err());
        assert_eq!(ObservationMatrix::dropping(4, 3).unwrap().rows(), &[0, 1, 2]);
    }

    #[test]
    fn state_space_roundtrips_indices() {
        let space = StateSpace::new(vec![3, 4, 2]).unwrap();
        for i in 0..space.len() {
            let coords = space.coords_of(i).unwrap();
            assert_eq!(space.index_of(&coords).unwrap(), i);
        }
        assert!(space.coords_of(24).is_err());
        assert!(space.index_of(&[3, 0, 0]).is_err());
    }

    #[test]
    fn local_space_enumerates_observed_product() {
        let space = StateSpace::new(vec![3, 4, 2]).unwrap();
        let local = LocalSpace::new(&space, rows(3, &[0, 2])).unwrap();
        assert_eq!(local.len(), 6);
        let g = space.state(space.index_of(&[2, 3, 1]).unwrap()).unwrap();
        let idx = local.index_of_global(&g).unwrap();
        assert_eq!(local.state(idx).values(), &[2, 1]);
    }

    fn deterministic_model(half_width: f64) -> TransitionModel<f64> {
        // 3-state cycle 0 -> 1 -> 2 -> 0 under action 0, self loops under action 1.
        let mut probs = vec![0.0; 3 * 2 * 3];
        for s in 0..3 {
            probs[(s * 2) * 3 + (s + 1) % 3] = 1.0;
            probs[(s * 2 + 1) * 3 + s] = 1.0;
        }
        let mean = (0..2 * 3 * 2).map(|k| k as f64 * 0.25).collect();
        TransitionModel::new(3, 2, 2, probs, mean, half_width).unwrap()
    }

    #[test]
    fn zero_half_width_returns_mean_rewards() {
        let model = deterministic_model(0.0);
        let mut rng = EnvRng::new(3, 2);
        let s = GlobalState { index: 1, coords: vec![1] };
        let (next, rewards) = model
            .sample_transition(&s, &[ActionId(0), ActionId(0)], &mut rng)
            .unwrap();
        assert_eq!(next.index, 2);
        assert_eq!(rewards, vec![model.mean_reward(0, 1, 0), model.mean_reward(1, 1, 0)]);
    }

    #[test]
    fn deterministic_rows_always_pick_their_successor() {
        let model = deterministic_model(0.5);
        let mut rng = EnvRng::new(11, 2);
        let s = GlobalState { index: 2, coords: vec![2] };
        for _ in 0..200 {
            let (next, rewards) = model
                .sample_transition(&s, &[ActionId(1), ActionId(1)], &mut rng)
                .unwrap();
            assert_eq!(next.index, 2);
            for (i, r) in rewards.iter().enumerate() {
                let m = model.mean_reward(i, 2, 1);
                assert!((m - 0.5..=m + 0.5).contains(r));
            }
        }
    }

    #[test]
    fn disagreeing_actions_are_rejected() {
        let model = deterministic_model(0.0);
        let mut rng = EnvRng::new(3, 2);
        let s = GlobalState { index: 0, coords: vec![0] };
        let err = model.sample_transition(&s, &[ActionId(0), ActionId(1)], &mut rng);
        assert!(matches!(err, Err(Error::Contract(_))));
    }

    #[test]
    fn sampling_is_seed_deterministic() {
        let model: TransitionModel<f64> = generate_digital(6, 3, 9).unwrap();
        let run = |seed| {
            let mut rng = EnvRng::new(seed, 3);
            let mut s = GlobalState { index: 0, coords: vec![0] };
            let mut out = Vec::new();
            for t in 0..50 {
                let a = ActionId(t % 2);
                let (n, r) = model.sample_transition(&s, &[a; 3], &mut rng).unwrap();
                out.push((n.index, r));
                s = n;
            }
            out
        };
        assert_eq!(run(42), run(42));
        assert_ne!(run(42), run(43));
    }

    #[test]
    fn digital_shapes_and_ranges() {
        let model: TransitionModel<f64> = generate_digital(20, 20, 1).unwrap();
        assert_eq!(model.probs().len(), 20 * 2 * 20);
        assert_eq!(model.mean_rewards().len(), 20 * 20 * 2);
        assert_eq!(model.reward_half_width(), 0.5);
        assert!(model.mean_rewards().iter().all(|r| (0.0..=4.0).contains(r)));

        let small: TransitionModel<f64> = generate_digital(2, 1, 5).unwrap();
        for s in 0..2 {
            for a in 0..2 {
                let total: f64 = small.row(s, a).iter().sum();
                assert!((total - 1.0).abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn digital_rejects_bad_sizes() {
        assert!(generate_digital::<f64>(1, 3, 0).is_err());
        assert!(generate_digital::<f64>(4, 0, 0).is_err());
    }

    #[test]
    fn digital_generation_is_bit_identical_per_seed() {
        let a: TransitionModel<f64> = generate_digital(8, 4, 77).unwrap();
        let b: TransitionModel<f64> = generate_digital(8, 4, 77).unwrap();
        assert_eq!(a, b);
        let c: TransitionModel<f64> = generate_digital(8, 4, 78).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn model_file_roundtrips_exactly() {
        let model: TransitionModel<f64> = generate_digital(5, 2, 3).unwrap();
        let dir = std::env::temp_dir().join(format!("reciprocity-model-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("env.json");
        ModelFile::digital(model.clone(), 3).save(&path).unwrap();
        let back = ModelFile::<f64>::load(&path).unwrap();
        assert_eq!(back.model, model);
        assert_eq!(back.seed, Some(3));
        std::fs::remove_dir_all(dir).ok();
    }

    #[test]
    fn f32_models_work() {
        let model: TransitionModel<f32> = generate_digital(4, 2, 3).unwrap();
        assert_eq!(model.n_actions(), 2);
    }
}
