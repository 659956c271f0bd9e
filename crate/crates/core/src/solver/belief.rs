use crate::error::{Error, Result};
use crate::tabular::TabularPomdp;

/// Probability distribution over joint states.
#[derive(Clone, Debug, PartialEq)]
pub struct Belief {
    pub probs: Vec<f64>,
}

impl Belief {
    pub fn uniform(n: usize) -> Self {
        Self {
            probs: vec![1.0 / n as f64; n],
        }
    }

    pub fn point(n: usize, s: usize) -> Self {
        let mut probs = vec![0.0; n];
        probs[s] = 1.0;
        Self { probs }
    }

    pub fn new(probs: Vec<f64>) -> Result<Self> {
        if probs.iter().any(|p| !(*p >= 0.0)) {
            return Err(Error::Domain("belief has a negative or NaN entry".into()));
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::Domain(format!("belief sums to {total}")));
        }
        Ok(Self { probs })
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    /// Most likely state and its probability.
    pub fn mode(&self) -> (usize, f64) {
        self.probs
            .iter()
            .copied()
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |acc, (i, p)| if p > acc.1 { (i, p) } else { acc })
    }
}

/// One-step predicted state distribution `Σ_s b(s) T(s'|s,a)`.
pub fn predict(b: &Belief, a: usize, pomdp: &TabularPomdp) -> Vec<f64> {
    let n = pomdp.n_states();
    let mut out = vec![0.0; n];
    for (s, &p) in b.probs.iter().enumerate() {
        if p == 0.0 {
            continue;
        }
        for (o, t) in out.iter_mut().zip(pomdp.transition_row(a, s)) {
            *o += p * t;
        }
    }
    out
}

/// `Pr(o | b, a)` for every observation.
pub fn observation_distribution(b: &Belief, a: usize, pomdp: &TabularPomdp) -> Vec<f64> {
    let pred = predict(b, a, pomdp);
    let mut out = vec![0.0; pomdp.n_observations()];
    for (sn, p) in pred.iter().enumerate() {
        for (o, slot) in out.iter_mut().enumerate() {
            *slot += pomdp.z(a, sn, o) * p;
        }
    }
    out
}

/// Bayes filter step after taking `a` and receiving observation `o`.
pub fn belief_update(b: &Belief, a: usize, o: usize, pomdp: &TabularPomdp) -> Result<Belief> {
    let pred = predict(b, a, pomdp);
    let mut post: Vec<f64> = pred
        .iter()
        .enumerate()
        .map(|(sn, p)| pomdp.z(a, sn, o) * p)
        .collect();
    let total: f64 = post.iter().sum();
    if !(total > 0.0) {
        return Err(Error::Inconsistent(format!(
            "observation {} has zero probability after action {}",
            pomdp.observation_labels[o], pomdp.action_labels[a]
        )));
    }
    post.iter_mut().for_each(|p| *p /= total);
    Ok(Belief { probs: post })
}
