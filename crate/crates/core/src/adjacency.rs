//! Adjacency spaces between mismatched observations and the reciprocity
//! aggregate `Q♯`.
//!
//! Two local states are compared after lifting both into global
//! coordinates. A coordinate observed by only one side counts as a
//! mismatch, so two agents dropping different coordinates are at distance
//! at least 2 even when they agree on everything they both see.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mdp::{ActionId, LocalSpace, LocalState};
use crate::scalar::Scalar;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AdjacencyMode {
    /// Members weighted by `exp(d − ρ) / Z`.
    SoftmaxWeighted,
    /// Uniform weights over members.
    SimpleAverage,
    /// Flat states whose indices differ by exactly one, uniform weights.
    /// Does not wrap at the ends of the index range.
    CustomDigital,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AdjacencyConfig {
    /// Maximum ℓ0 mismatch `ρ♯`.
    pub level: usize,
    pub mode: AdjacencyMode,
}

impl AdjacencyConfig {
    pub fn new(level: usize, mode: AdjacencyMode) -> Self {
        AdjacencyConfig { level, mode }
    }

    pub fn validate(&self, global_dim: usize) -> Result<()> {
        if self.level > global_dim {
            return Err(Error::config(
                "adjacency.level",
                format!("level {} exceeds global dimension {global_dim}", self.level),
            ));
        }
        if self.mode == AdjacencyMode::CustomDigital && global_dim != 1 {
            return Err(Error::config(
                "adjacency.mode",
                "custom_digital needs single-coordinate states",
            ));
        }
        Ok(())
    }
}

/// One member `(s♯, ρ_{s♯})`; `index` is the member's position in the
/// candidate list it was drawn from.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AdjacentMember {
    pub index: usize,
    pub state: LocalState,
    pub rho: usize,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AdjacencySpace {
    pub anchor: LocalState,
    pub members: Vec<AdjacentMember>,
}

impl AdjacencySpace {
    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }
}

/// `‖Π_xᵀ x − Π_yᵀ y‖₀` under absent-sentinel semantics.
pub fn l0_distance(x: &LocalState, y: &LocalState) -> Result<usize> {
    let (lx, ly) = (x.lift(), y.lift());
    if lx.dim() != ly.dim() {
        return Err(Error::contract(format!(
            "states live in global dimensions {} and {}",
            lx.dim(),
            ly.dim()
        )));
    }
    Ok(lx.0.iter().zip(&ly.0).filter(|(a, b)| a != b).count())
}

/// All candidates within `cfg.level` of `anchor`, in candidate order.
pub fn build_adjacency_space(
    anchor: &LocalState,
    candidates: &[LocalState],
    cfg: &AdjacencyConfig,
) -> Result<AdjacencySpace> {
    let mut members = Vec::new();
    match cfg.mode {
        AdjacencyMode::CustomDigital => {
            let [a] = anchor.values() else {
                return Err(Error::contract("custom_digital anchor must be a single coordinate"));
            };
            for (index, c) in candidates.iter().enumerate() {
                let [v] = c.values() else {
                    return Err(Error::contract("custom_digital candidate must be a single coordinate"));
                };
                if a.abs_diff(*v) == 1 {
                    members.push(AdjacentMember {
                        index,
                        state: c.clone(),
                        rho: 1,
                    });
                }
            }
        }
        AdjacencyMode::SoftmaxWeighted | AdjacencyMode::SimpleAverage => {
            for (index, c) in candidates.iter().enumerate() {
                let rho = l0_distance(anchor, c)?;
                if rho <= cfg.level {
                    members.push(AdjacentMember {
                        index,
                        state: c.clone(),
                        rho,
                    });
                }
            }
        }
    }
    Ok(AdjacencySpace {
        anchor: anchor.clone(),
        members,
    })
}

/// Aggregation weights of the members of a space; they sum to one.
pub fn member_weights<T: Scalar>(rhos: &[usize], mode: AdjacencyMode) -> Result<Vec<T>> {
    if rhos.is_empty() {
        return Err(Error::NoAdjacentState);
    }
    match mode {
        AdjacencyMode::SoftmaxWeighted => {
            // exp(d − ρ) / Σ exp(d − ρ'): the factor exp(d − ρ_min) cancels.
            let rho_min = *rhos.iter().min().unwrap();
            let raw: Vec<T> = rhos
                .iter()
                .map(|&r| (-T::from_usize_lossy(r - rho_min)).exp())
                .collect();
            let z: T = raw.iter().copied().sum();
            Ok(raw.into_iter().map(|w| w / z).collect())
        }
        AdjacencyMode::SimpleAverage | AdjacencyMode::CustomDigital => {
            let w = T::one() / T::from_usize_lossy(rhos.len());
            Ok(vec![w; rhos.len()])
        }
    }
}

/// `Q♯(s, a)`: the weighted value of `action` over the adjacency space.
///
/// The global dimension `d` of the softmax weights cancels in the
/// normalisation and is therefore not a parameter.
pub fn q_sharp<T, F>(space: &AdjacencySpace, lookup: F, action: ActionId, mode: AdjacencyMode) -> Result<T>
where
    T: Scalar,
    F: Fn(&AdjacentMember, ActionId) -> T,
{
    let rhos: Vec<usize> = space.members.iter().map(|m| m.rho).collect();
    let weights = member_weights::<T>(&rhos, mode)?;
    Ok(space
        .members
        .iter()
        .zip(weights)
        .map(|(m, w)| w * lookup(m, action))
        .sum())
}

/// Precomputed adjacency of every state of one agent against the states of
/// one peer: member indices and levels into the peer's table, plus the
/// peer state identical to the anchor after lifting, if any.
#[derive(Clone, Debug)]
pub struct PeerAdjacency {
    members: Vec<Vec<(usize, usize)>>,
    exact: Vec<Option<usize>>,
}

impl PeerAdjacency {
    pub fn build(own: &LocalSpace, peer: &LocalSpace, cfg: &AdjacencyConfig) -> Result<Self> {
        let candidates: Vec<LocalState> = peer.states().collect();
        let mut members = Vec::with_capacity(own.len());
        let mut exact = Vec::with_capacity(own.len());
        for anchor in own.states() {
            let space = build_adjacency_space(&anchor, &candidates, cfg)?;
            members.push(space.members.iter().map(|m| (m.index, m.rho)).collect());
            let mut same = None;
            for (k, c) in candidates.iter().enumerate() {
                if l0_distance(&anchor, c)? == 0 {
                    same = Some(k);
                    break;
                }
            }
            exact.push(same);
        }
        Ok(PeerAdjacency { members, exact })
    }

    /// `(peer state index, ρ)` pairs of the adjacency space of `state`.
    pub fn members(&self, state: usize) -> &[(usize, usize)] {
        &self.members[state]
    }

    pub fn exact(&self, state: usize) -> Option<usize> {
        self.exact[state]
    }
}
