//! Agent communication graphs. A fresh graph is drawn at every aggregation
//! step; Erdős–Rényi graphs are connected only in expectation.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case", deny_unknown_fields)]
pub enum GraphMode {
    Complete,
    /// Each undirected edge present independently with probability `p`.
    ErdosRenyi { p: f64 },
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConnectivityGraph {
    #[serde(flatten)]
    pub mode: GraphMode,
    /// Whether an agent counts itself among its neighbours.
    #[serde(default)]
    pub include_self: bool,
}

impl Default for ConnectivityGraph {
    fn default() -> Self {
        ConnectivityGraph {
            mode: GraphMode::Complete,
            include_self: false,
        }
    }
}

/// Neighbour lists, one per agent, sorted ascending.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Neighbourhoods(pub Vec<Vec<usize>>);

impl Neighbourhoods {
    pub fn of(&self, agent: usize) -> &[usize] {
        &self.0[agent]
    }
}

impl ConnectivityGraph {
    pub fn complete() -> Self {
        Self::default()
    }

    pub fn validate(&self, n: usize) -> Result<()> {
        if let GraphMode::ErdosRenyi { p } = self.mode {
            if !(p > 0.0 && p <= 1.0) {
                return Err(Error::config("graph.p", format!("{p} outside (0, 1]")));
            }
            if n >= 2 && !(self.expected_algebraic_connectivity(n) > 0.0) {
                return Err(Error::config("graph.p", "graph is not connected in expectation"));
            }
        }
        Ok(())
    }

    pub fn sample<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Neighbourhoods {
        let mut adj = vec![Vec::new(); n];
        match self.mode {
            GraphMode::Complete => {
                for (i, list) in adj.iter_mut().enumerate() {
                    list.extend((0..n).filter(|&j| j != i));
                }
            }
            GraphMode::ErdosRenyi { p } => {
                for i in 0..n {
                    for j in i + 1..n {
                        if rng.random::<f64>() < p {
                            adj[i].push(j);
                            adj[j].push(i);
                        }
                    }
                }
            }
        }
        if self.include_self {
            for (i, list) in adj.iter_mut().enumerate() {
                list.push(i);
            }
        }
        for list in &mut adj {
            list.sort_unstable();
        }
        Neighbourhoods(adj)
    }

    /// `E[L_t]`: `p·(nI − 11ᵀ)` for Erdős–Rényi, `p = 1` for the complete graph.
    pub fn expected_laplacian(&self, n: usize) -> Vec<Vec<f64>> {
        let p = match self.mode {
            GraphMode::Complete => 1.0,
            GraphMode::ErdosRenyi { p } => p,
        };
        (0..n)
            .map(|i| {
                (0..n)
                    .map(|j| if i == j { p * (n as f64 - 1.0) } else { -p })
                    .collect()
            })
            .collect()
    }

    /// `λ2(E[L_t])`; the eigenvalues of `p·(nI − 11ᵀ)` are `0` and `p·n`.
    pub fn expected_algebraic_connectivity(&self, n: usize) -> f64 {
        if n < 2 {
            return 0.0;
        }
        match self.mode {
            GraphMode::Complete => n as f64,
            GraphMode::ErdosRenyi { p } => p * n as f64,
        }
    }
}

/// Graph Laplacian of sampled neighbourhoods; self loops are ignored.
pub fn laplacian(nbrs: &Neighbourhoods) -> Vec<Vec<f64>> {
    let n = nbrs.0.len();
    let mut l = vec![vec![0.0; n]; n];
    for (i, list) in nbrs.0.iter().enumerate() {
        for &j in list.iter().filter(|&&j| j != i) {
            l[i][j] = -1.0;
            l[i][i] += 1.0;
        }
    }
    l
}
