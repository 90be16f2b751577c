//! Finite discounted MDP model and its JSON document form.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{dim, Error, Result};
use crate::{StateVec, Table};

const PROB_TOL: f64 = 1e-12;

/// A finite MDP `(S, A, P, R, gamma, mu)`.
///
/// Transition probabilities are stored flat in `[s][a][s']` order so that a
/// single `(s, a)` row is a contiguous slice.
#[derive(Debug, Clone, PartialEq)]
pub struct TabularMdp {
    n_states: usize,
    n_actions: usize,
    discount: f64,
    transition: Vec<f64>,
    reward: Table,
    initial_dist: StateVec,
}

/// On-disk JSON layout. Field names and nesting are part of the file format.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MdpDocument {
    pub n_states: usize,
    pub n_actions: usize,
    pub discount: f64,
    pub transition: Vec<Vec<Vec<f64>>>,
    pub reward: Vec<Vec<f64>>,
    pub initial_dist: Vec<f64>,
}

impl TabularMdp {
    /// Builds and validates an MDP from nested `[s][a][s']` / `[s][a]` arrays.
    pub fn new(
        transition: Vec<Vec<Vec<f64>>>,
        reward: Vec<Vec<f64>>,
        discount: f64,
        initial_dist: Vec<f64>,
    ) -> Result<Self> {
        let n_states = transition.len();
        if n_states == 0 {
            return Err(Error::InvalidMdp("at least one state is required".into()));
        }
        let n_actions = transition[0].len();
        if n_actions == 0 {
            return Err(Error::InvalidMdp("at least one action is required".into()));
        }
        let mut flat = Vec::with_capacity(n_states * n_actions * n_states);
        for (s, rows) in transition.iter().enumerate() {
            if rows.len() != n_actions {
                return Err(dim("transition actions", n_actions, format!("{} at state {s}", rows.len())));
            }
            for (a, row) in rows.iter().enumerate() {
                if row.len() != n_states {
                    return Err(dim(
                        "transition successors",
                        n_states,
                        format!("{} at ({s},{a})", row.len()),
                    ));
                }
                flat.extend_from_slice(row);
            }
        }
        if reward.len() != n_states {
            return Err(dim("reward states", n_states, reward.len()));
        }
        let mut r = Table::zeros(n_states, n_actions);
        for (s, row) in reward.iter().enumerate() {
            if row.len() != n_actions {
                return Err(dim("reward actions", n_actions, format!("{} at state {s}", row.len())));
            }
            for (a, &v) in row.iter().enumerate() {
                r[(s, a)] = v;
            }
        }
        if initial_dist.len() != n_states {
            return Err(dim("initial distribution", n_states, initial_dist.len()));
        }
        Self::from_parts(n_states, n_actions, discount, flat, r, StateVec::from_vec(initial_dist))
    }

    /// Builds from already-flat storage. `transition` must be `S*A*S` long in
    /// `[s][a][s']` order.
    pub fn from_parts(
        n_states: usize,
        n_actions: usize,
        discount: f64,
        transition: Vec<f64>,
        reward: Table,
        initial_dist: StateVec,
    ) -> Result<Self> {
        let mdp = Self {
            n_states,
            n_actions,
            discount,
            transition,
            reward,
            initial_dist,
        };
        mdp.validate()?;
        Ok(mdp)
    }

    fn validate(&self) -> Result<()> {
        let (s_n, a_n) = (self.n_states, self.n_actions);
        if s_n == 0 || a_n == 0 {
            return Err(Error::InvalidMdp("state and action counts must be positive".into()));
        }
        if self.transition.len() != s_n * a_n * s_n {
            return Err(dim("transition tensor", s_n * a_n * s_n, self.transition.len()));
        }
        if self.reward.shape() != (s_n, a_n) {
            return Err(dim("reward table", format!("{s_n}x{a_n}"), format!("{:?}", self.reward.shape())));
        }
        if self.initial_dist.len() != s_n {
            return Err(dim("initial distribution", s_n, self.initial_dist.len()));
        }
        if !(self.discount.is_finite() && (0.0..1.0).contains(&self.discount)) {
            return Err(Error::InvalidMdp(format!("discount must lie in [0, 1), got {}", self.discount)));
        }
        for s in 0..s_n {
            for a in 0..a_n {
                let row = self.next_state_probs(s, a);
                if row.iter().any(|p| !p.is_finite() || *p < 0.0) {
                    return Err(Error::InvalidMdp(format!("transition row ({s},{a}) has a negative or non-finite entry")));
                }
                let sum: f64 = row.iter().sum();
                if (sum - 1.0).abs() > PROB_TOL {
                    return Err(Error::InvalidMdp(format!("transition row ({s},{a}) sums to {sum}")));
                }
            }
        }
        if self.reward.iter().any(|r| !r.is_finite() || r.abs() > 1.0) {
            return Err(Error::InvalidMdp("rewards must be finite with |R| <= 1".into()));
        }
        if self.initial_dist.iter().any(|p| !p.is_finite() || *p < 0.0) {
            return Err(Error::InvalidMdp("initial distribution has a negative or non-finite entry".into()));
        }
        let mu_sum = self.initial_dist.sum();
        if (mu_sum - 1.0).abs() > PROB_TOL {
            return Err(Error::InvalidMdp(format!("initial distribution sums to {mu_sum}")));
        }
        Ok(())
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    pub fn n_actions(&self) -> usize {
        self.n_actions
    }

    pub fn discount(&self) -> f64 {
        self.discount
    }

    pub fn reward(&self) -> &Table {
        &self.reward
    }

    pub fn initial_dist(&self) -> &StateVec {
        &self.initial_dist
    }

    /// `P(. | s, a)` as a contiguous slice of length `S`.
    #[inline]
    pub fn next_state_probs(&self, s: usize, a: usize) -> &[f64] {
        let start = (s * self.n_actions + a) * self.n_states;
        &self.transition[start..start + self.n_states]
    }

    #[inline]
    pub fn prob(&self, s: usize, a: usize, s_next: usize) -> f64 {
        self.transition[(s * self.n_actions + a) * self.n_states + s_next]
    }

    /// Copy of this MDP with a different discount factor.
    pub fn with_discount(&self, discount: f64) -> Result<Self> {
        let mut m = self.clone();
        m.discount = discount;
        m.validate()?;
        Ok(m)
    }

    /// Copy of this MDP with a different initial distribution.
    pub fn with_initial_dist(&self, initial_dist: StateVec) -> Result<Self> {
        let mut m = self.clone();
        m.initial_dist = initial_dist;
        m.validate()?;
        Ok(m)
    }

    /// Smallest initial-distribution entry and the state attaining it.
    pub fn min_initial_mass(&self) -> (usize, f64) {
        self.initial_dist
            .iter()
            .copied()
            .enumerate()
            .fold((0, f64::INFINITY), |best, (s, p)| if p < best.1 { (s, p) } else { best })
    }

    pub fn to_document(&self) -> MdpDocument {
        let (s_n, a_n) = (self.n_states, self.n_actions);
        MdpDocument {
            n_states: s_n,
            n_actions: a_n,
            discount: self.discount,
            transition: (0..s_n)
                .map(|s| (0..a_n).map(|a| self.next_state_probs(s, a).to_vec()).collect())
                .collect(),
            reward: (0..s_n)
                .map(|s| (0..a_n).map(|a| self.reward[(s, a)]).collect())
                .collect(),
            initial_dist: self.initial_dist.iter().copied().collect(),
        }
    }

    pub fn from_document(doc: MdpDocument) -> Result<Self> {
        if doc.transition.len() != doc.n_states {
            return Err(dim("transition states", doc.n_states, doc.transition.len()));
        }
        if doc.transition.first().map(Vec::len) != Some(doc.n_actions) {
            return Err(dim(
                "transition actions",
                doc.n_actions,
                doc.transition.first().map_or(0, Vec::len),
            ));
        }
        Self::new(doc.transition, doc.reward, doc.discount, doc.initial_dist)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&self.to_document())?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Self::from_document(serde_json::from_str(text)?)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&fs::read_to_string(path)?)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut text = self.to_json()?;
        text.push('\n');
        fs::write(path, text)?;
        Ok(())
    }
}

#[cfg(test)]
pub(crate) mod fixtures {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// S=1, A=1, R=1.
    pub fn single(gamma: f64) -> TabularMdp {
        TabularMdp::new(vec![vec![vec![1.0]]], vec![vec![1.0]], gamma, vec![1.0]).unwrap()
    }

    /// Two-state chain: s0 -> s1, s1 absorbing, R = (0, 1), every action identical.
    pub fn chain(gamma: f64, n_actions: usize) -> TabularMdp {
        TabularMdp::new(
            vec![vec![vec![0.0, 1.0]; n_actions], vec![vec![0.0, 1.0]; n_actions]],
            vec![vec![0.0; n_actions], vec![1.0; n_actions]],
            gamma,
            vec![1.0, 0.0],
        )
        .unwrap()
    }

    /// Dense random MDP with Dirichlet(1) rows, uniform rewards in [0,1] and uniform mu.
    pub fn random(n_states: usize, n_actions: usize, gamma: f64, seed: u64) -> TabularMdp {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let transition = (0..n_states)
            .map(|_| {
                (0..n_actions)
                    .map(|_| {
                        let w: Vec<f64> = (0..n_states).map(|_| -(1.0 - rng.random::<f64>()).ln()).collect();
                        let z: f64 = w.iter().sum();
                        w.into_iter().map(|x| x / z).collect()
                    })
                    .collect()
            })
            .collect();
        let reward = (0..n_states)
            .map(|_| (0..n_actions).map(|_| rng.random::<f64>()).collect())
            .collect();
        TabularMdp::new(transition, reward, gamma, vec![1.0 / n_states as f64; n_states]).unwrap()
    }
}
