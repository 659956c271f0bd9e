//! Exact discounted value iteration over alpha vectors.
//!
//! Each backup forms, per action, the projected vector sets for every
//! observation and combines them with an incrementally pruned cross-sum, so
//! intermediate sets never hold more than the pruned product of two factors.

mod belief;
mod prune;

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

pub use belief::{belief_update, observation_distribution, predict, Belief};
pub use prune::{dot, prune_dominated, prune_pointwise};

use crate::error::{Error, Result};
use crate::tabular::TabularPomdp;

/// Number of random interior beliefs the Bellman residual is measured on.
pub const RESIDUAL_SAMPLE: usize = 512;
const RESIDUAL_SEED: u64 = 0x5eed_a1fa;

#[derive(Clone, Debug, PartialEq)]
pub struct SolverConfig {
    pub gamma: f64,
    pub bellman_eps: f64,
    pub max_iters: usize,
    pub prune_eps: f64,
    /// Largest state space the exact solver accepts.
    pub max_states: usize,
    /// Largest cross-sum the solver will enumerate in one step.
    pub max_vectors: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            gamma: 0.9,
            bellman_eps: 1e-6,
            max_iters: 1000,
            prune_eps: 1e-9,
            max_states: 512,
            max_vectors: 200_000,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..1.0).contains(&self.gamma) {
            return Err(Error::Config(format!("gamma = {} outside [0, 1)", self.gamma)));
        }
        if !(self.bellman_eps > 0.0) || !(self.prune_eps > 0.0) {
            return Err(Error::Config("tolerances must be > 0".into()));
        }
        if self.max_iters == 0 {
            return Err(Error::Config("max_iters must be >= 1".into()));
        }
        Ok(())
    }
}

/// A value hyperplane over states, tagged with the action ordinal that
/// generated it.
#[derive(Clone, Debug, PartialEq)]
pub struct AlphaVector {
    pub values: Vec<f64>,
    pub action: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct PolicySet {
    pub alphas: Vec<AlphaVector>,
}

impl PolicySet {
    /// One zero vector per action, pruned to a single representative.
    pub fn zeros(n_states: usize, n_actions: usize) -> Self {
        let alphas = (0..n_actions)
            .map(|action| AlphaVector {
                values: vec![0.0; n_states],
                action,
            })
            .collect();
        Self {
            alphas: prune_pointwise(alphas, 0.0),
        }
    }

    pub fn value(&self, b: &[f64]) -> f64 {
        self.alphas
            .iter()
            .map(|a| dot(b, &a.values))
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// Value at the point-mass belief on `s`.
    pub fn corner_value(&self, s: usize) -> f64 {
        self.alphas
            .iter()
            .map(|a| a.values[s])
            .fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn len(&self) -> usize {
        self.alphas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.alphas.is_empty()
    }
}

/// Action ordinal of the vector maximizing `b · α`; exact ties go to the
/// lowest ordinal.
pub fn best_action(b: &[f64], policy: &PolicySet) -> usize {
    let mut best: Option<(f64, usize)> = None;
    for a in &policy.alphas {
        let v = dot(b, &a.values);
        best = match best {
            None => Some((v, a.action)),
            Some((bv, ba)) if v > bv || (v == bv && a.action < ba) => Some((v, a.action)),
            keep => keep,
        };
    }
    best.expect("policy set is empty").1
}

/// Backup engine bound to one model; caches the observation support.
pub struct Backup<'m> {
    pomdp: &'m TabularPomdp,
    support: Vec<Vec<Vec<(usize, f64)>>>,
    cfg: SolverConfig,
}

impl<'m> Backup<'m> {
    pub fn new(pomdp: &'m TabularPomdp, cfg: &SolverConfig) -> Result<Self> {
        cfg.validate()?;
        if pomdp.n_states() > cfg.max_states {
            return Err(Error::Refused(format!(
                "{} states exceed the exact-solver limit of {}; use the eb policy instead",
                pomdp.n_states(),
                cfg.max_states
            )));
        }
        Ok(Self {
            pomdp,
            support: pomdp.observation_support(),
            cfg: cfg.clone(),
        })
    }

    fn project(&self, a: usize, o: usize, alpha: &AlphaVector) -> AlphaVector {
        let n = self.pomdp.n_states();
        let support = &self.support[a][o];
        let values = (0..n)
            .map(|s| {
                let row = self.pomdp.transition_row(a, s);
                self.cfg.gamma
                    * support
                        .iter()
                        .map(|&(sn, z)| row[sn] * z * alpha.values[sn])
                        .sum::<f64>()
            })
            .collect();
        AlphaVector { values, action: a }
    }

    fn action_set(&self, a: usize, prev: &PolicySet) -> Result<Vec<AlphaVector>> {
        let eps = self.cfg.prune_eps;
        let mut acc: Option<Vec<AlphaVector>> = None;
        for o in 0..self.pomdp.n_observations() {
            let proj: Vec<_> = prev.alphas.iter().map(|al| self.project(a, o, al)).collect();
            let proj = prune_dominated(proj, eps);
            acc = Some(match acc {
                None => proj,
                Some(left) => {
                    let size = left.len() * proj.len();
                    if size > self.cfg.max_vectors {
                        return Err(Error::Refused(format!(
                            "cross-sum of {size} vectors exceeds limit {}; use the eb policy instead",
                            self.cfg.max_vectors
                        )));
                    }
                    let mut sums = Vec::with_capacity(size);
                    for l in &left {
                        for r in &proj {
                            let values = l.values.iter().zip(&r.values).map(|(x, y)| x + y).collect();
                            sums.push(AlphaVector { values, action: a });
                        }
                    }
                    prune_dominated(sums, eps)
                }
            });
        }
        let mut set = acc.unwrap_or_default();
        for v in &mut set {
            for (x, r) in v.values.iter_mut().zip(&self.pomdp.rewards[a]) {
                *x += r;
            }
        }
        Ok(set)
    }

    /// One exact Bellman backup of `prev`.
    pub fn run(&self, prev: &PolicySet) -> Result<PolicySet> {
        if prev.is_empty() {
            return Err(Error::Config("backup needs a nonempty vector set".into()));
        }
        let per_action: Vec<Vec<AlphaVector>> = (0..self.pomdp.n_actions())
            .into_par_iter()
            .map(|a| self.action_set(a, prev))
            .collect::<Result<_>>()?;
        let all: Vec<_> = per_action.into_iter().flatten().collect();
        Ok(PolicySet {
            alphas: prune_dominated(all, self.cfg.prune_eps),
        })
    }
}

pub fn backup(prev: &PolicySet, pomdp: &TabularPomdp, cfg: &SolverConfig) -> Result<PolicySet> {
    Backup::new(pomdp, cfg)?.run(prev)
}

#[derive(Clone, Debug, PartialEq)]
pub struct IterationRecord {
    pub iteration: usize,
    pub residual: f64,
    pub alpha_count: usize,
    pub wall_time_ms: f64,
}

#[derive(Clone, Debug)]
pub struct ValueIteration {
    pub policy: PolicySet,
    pub log: Vec<IterationRecord>,
    /// False when `max_iters` was hit first; the policy is still usable.
    pub converged: bool,
}

impl ValueIteration {
    /// CSV with columns `iteration,residual,alpha_count,wall_time_ms`.
    pub fn log_csv(&self) -> String {
        let mut out = String::from("iteration,residual,alpha_count,wall_time_ms\n");
        for r in &self.log {
            out.push_str(&format!(
                "{},{:e},{},{:.3}\n",
                r.iteration, r.residual, r.alpha_count, r.wall_time_ms
            ));
        }
        out
    }
}

/// Simplex corners followed by a fixed pseudo-random interior sample.
pub fn residual_beliefs(n: usize) -> Vec<Vec<f64>> {
    let mut out: Vec<Vec<f64>> = (0..n)
        .map(|s| {
            let mut b = vec![0.0; n];
            b[s] = 1.0;
            b
        })
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(RESIDUAL_SEED);
    for _ in 0..RESIDUAL_SAMPLE {
        // flat Dirichlet via normalized exponentials
        let mut b: Vec<f64> = (0..n).map(|_| -(1.0 - rng.random::<f64>()).ln()).collect();
        let total: f64 = b.iter().sum();
        b.iter_mut().for_each(|x| *x /= total);
        out.push(b);
    }
    out
}

/// Repeats backups from the zero set until the Bellman residual drops to
/// `bellman_eps` or `max_iters` is reached.
pub fn value_iterate(pomdp: &TabularPomdp, cfg: &SolverConfig) -> Result<ValueIteration> {
    let engine = Backup::new(pomdp, cfg)?;
    let beliefs = residual_beliefs(pomdp.n_states());
    let mut current = PolicySet::zeros(pomdp.n_states(), pomdp.n_actions());
    let mut values: Vec<f64> = beliefs.iter().map(|b| current.value(b)).collect();
    let mut log = Vec::new();
    let start = Instant::now();
    for iteration in 1..=cfg.max_iters {
        let next = engine.run(&current)?;
        let next_values: Vec<f64> = beliefs.iter().map(|b| next.value(b)).collect();
        let residual = values
            .iter()
            .zip(&next_values)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        log.push(IterationRecord {
            iteration,
            residual,
            alpha_count: next.len(),
            wall_time_ms: start.elapsed().as_secs_f64() * 1e3,
        });
        current = next;
        values = next_values;
        // with γ = 0 the first backup already is the fixed point
        if residual <= cfg.bellman_eps || cfg.gamma == 0.0 {
            return Ok(ValueIteration {
                policy: current,
                log,
                converged: true,
            });
        }
    }
    Ok(ValueIteration {
        policy: current,
        log,
        converged: false,
    })
}
