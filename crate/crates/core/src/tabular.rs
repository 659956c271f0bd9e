//! Dense tabular POMDP: the common currency of the solver, the flat-file
//! exporter and the MDP oracle.

use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct TabularPomdp {
    pub state_labels: Vec<String>,
    pub action_labels: Vec<String>,
    pub observation_labels: Vec<String>,
    /// `transitions[a][s * n_states + s']`
    pub transitions: Vec<Vec<f64>>,
    /// `observations[a][s' * n_observations + o]`
    pub observations: Vec<Vec<f64>>,
    /// `rewards[a][s]`
    pub rewards: Vec<Vec<f64>>,
}

impl TabularPomdp {
    /// Allocates an all-zero model with positional labels.
    pub fn zeros(n_states: usize, n_actions: usize, n_observations: usize) -> Self {
        Self {
            state_labels: (0..n_states).map(|s| format!("s{s}")).collect(),
            action_labels: (0..n_actions).map(|a| format!("a{a}")).collect(),
            observation_labels: (0..n_observations).map(|o| format!("o{o}")).collect(),
            transitions: vec![vec![0.0; n_states * n_states]; n_actions],
            observations: vec![vec![0.0; n_states * n_observations]; n_actions],
            rewards: vec![vec![0.0; n_states]; n_actions],
        }
    }

    pub fn n_states(&self) -> usize {
        self.state_labels.len()
    }

    pub fn n_actions(&self) -> usize {
        self.action_labels.len()
    }

    pub fn n_observations(&self) -> usize {
        self.observation_labels.len()
    }

    #[inline]
    pub fn t(&self, a: usize, s: usize, s_next: usize) -> f64 {
        self.transitions[a][s * self.n_states() + s_next]
    }

    #[inline]
    pub fn z(&self, a: usize, s_next: usize, o: usize) -> f64 {
        self.observations[a][s_next * self.n_observations() + o]
    }

    #[inline]
    pub fn r(&self, a: usize, s: usize) -> f64 {
        self.rewards[a][s]
    }

    pub fn transition_row(&self, a: usize, s: usize) -> &[f64] {
        let n = self.n_states();
        &self.transitions[a][s * n..(s + 1) * n]
    }

    pub fn set_t(&mut self, a: usize, s: usize, s_next: usize, p: f64) {
        let n = self.n_states();
        self.transitions[a][s * n + s_next] = p;
    }

    pub fn set_z(&mut self, a: usize, s_next: usize, o: usize, p: f64) {
        let n_o = self.n_observations();
        self.observations[a][s_next * n_o + o] = p;
    }

    /// For each action and observation, the `(s', Z(o|s',a))` pairs with nonzero mass.
    pub fn observation_support(&self) -> Vec<Vec<Vec<(usize, f64)>>> {
        (0..self.n_actions())
            .map(|a| {
                let mut per_obs = vec![Vec::new(); self.n_observations()];
                for s_next in 0..self.n_states() {
                    for (o, bucket) in per_obs.iter_mut().enumerate() {
                        let z = self.z(a, s_next, o);
                        if z != 0.0 {
                            bucket.push((s_next, z));
                        }
                    }
                }
                per_obs
            })
            .collect()
    }

    /// Checks shapes and that every T and Z row is a distribution within `tol`.
    pub fn validate(&self, tol: f64) -> Result<()> {
        let (n, n_a, n_o) = (self.n_states(), self.n_actions(), self.n_observations());
        if n == 0 || n_a == 0 || n_o == 0 {
            return Err(Error::Config("empty state, action or observation set".into()));
        }
        let shapes_ok = self.transitions.len() == n_a
            && self.observations.len() == n_a
            && self.rewards.len() == n_a
            && self.transitions.iter().all(|t| t.len() == n * n)
            && self.observations.iter().all(|z| z.len() == n * n_o)
            && self.rewards.iter().all(|r| r.len() == n);
        if !shapes_ok {
            return Err(Error::Config("tensor shapes do not match label counts".into()));
        }
        for a in 0..n_a {
            for s in 0..n {
                let row: f64 = self.transition_row(a, s).iter().sum();
                if (row - 1.0).abs() > tol {
                    return Err(Error::Config(format!(
                        "T row (a={a}, s={s}) sums to {row}"
                    )));
                }
                let zrow: f64 = (0..n_o).map(|o| self.z(a, s, o)).sum();
                if (zrow - 1.0).abs() > tol {
                    return Err(Error::Config(format!(
                        "O row (a={a}, s'={s}) sums to {zrow}"
                    )));
                }
            }
        }
        Ok(())
    }

    /// SHA-256 over the discount and every tensor entry, hex encoded.
    pub fn fingerprint(&self, gamma: f64) -> String {
        let mut h = Sha256::new();
        for n in [self.n_states(), self.n_actions(), self.n_observations()] {
            h.update((n as u64).to_le_bytes());
        }
        h.update(gamma.to_bits().to_le_bytes());
        for block in self
            .transitions
            .iter()
            .chain(&self.observations)
            .chain(&self.rewards)
        {
            for v in block {
                h.update(v.to_bits().to_le_bytes());
            }
        }
        h.finalize()
            .iter()
            .map(|b| format!("{b:02x}"))
            .collect()
    }
}
