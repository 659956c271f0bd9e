//! Energy-based heuristic: act so that the network harvests as much solar
//! energy as possible in the next slot.

use crate::model::{harvest_moments, transmit_levels, ActionChoice, EhModel, Harvest, SystemState};
use crate::solver::{predict, Belief};

use super::PolicyContext;

/// Relative tolerance under which two action scores count as tied.
const TIE_TOL: f64 = 1e-12;

/// Capped expected harvest of each BS in one joint state under one action.
#[derive(Clone, Debug, PartialEq)]
pub struct EbEnergyTerms {
    pub per_bs: Vec<f64>,
}

impl EbEnergyTerms {
    pub fn total(&self) -> f64 {
        self.per_bs.iter().sum()
    }
}

/// `E[min(E_H, E_T + B_M − Q_B)]` for every BS, with the charge inside a
/// level represented by the level midpoint (the top level is exactly `B_M`).
pub fn eb_terms(s: &SystemState, a: ActionChoice, model: &EhModel) -> EbEnergyTerms {
    let granted = model.granted(s, a);
    let per_bs = model
        .bs_configs()
        .iter()
        .zip(&s.per_bs)
        .enumerate()
        .map(|(i, (cfg, &bs))| {
            let eps = cfg.quantum();
            let e_t = transmit_levels(bs, granted && i == a.target) as f64 * eps;
            let q_b = ((bs.s_b as f64 + 0.5) * eps).min(cfg.capacity());
            let cap = e_t + cfg.capacity() - q_b;
            harvest_moments(&cfg.solar).expected_min(cap)
        })
        .collect();
    EbEnergyTerms { per_bs }
}

/// Table of `H(s, a)` for every joint state and action.
#[derive(Clone, Debug)]
pub struct EbTable {
    /// `values[a][s]`
    values: Vec<Vec<f64>>,
}

impl EbTable {
    pub fn build(model: &EhModel) -> Self {
        let space = model.space();
        let states: Vec<SystemState> = (0..model.n_states())
            .map(|i| space.decode(i).expect("index in range"))
            .collect();
        let values = model
            .actions()
            .iter()
            .map(|&a| states.iter().map(|s| eb_terms(s, a, model).total()).collect())
            .collect();
        Self { values }
    }

    pub fn get(&self, a: usize, s: usize) -> f64 {
        self.values[a][s]
    }
}

/// Belief-weighted capped harvest `H(β, Φ)` summed over base stations.
pub fn eb_expected_harvest(b: &Belief, a: ActionChoice, model: &EhModel) -> f64 {
    let space = model.space();
    b.probs
        .iter()
        .enumerate()
        .filter(|(_, p)| **p > 0.0)
        .map(|(i, p)| p * eb_terms(&space.decode(i).expect("index in range"), a, model).total())
        .sum()
}

/// Expected `H(β', a)` over the observations that action `a` can produce.
pub fn eb_scores(b: &Belief, model: &EhModel, table: &EbTable) -> Vec<f64> {
    let tables = model.tables();
    let space = model.space();
    model
        .actions()
        .iter()
        .map(|&a| {
            let ai = a.ordinal();
            let pred = predict(b, ai, tables);
            let n_obs = space.local_size(a.target);
            let mut mass = vec![0.0; n_obs];
            let mut weighted = vec![0.0; n_obs];
            for (s, p) in pred.iter().enumerate() {
                let o = space.local_of(s, a.target);
                mass[o] += p;
                weighted[o] += p * table.get(ai, s);
            }
            // Σ_o Pr(o) · H(β'_o) with β'_o = pred restricted to o, renormalized
            mass.iter()
                .zip(&weighted)
                .filter(|(m, _)| **m > 0.0)
                .map(|(m, w)| m * (w / m))
                .sum()
        })
        .collect()
}

/// Argmax over scores with ties to the lowest ordinal; a winning Sense is
/// redirected to the BS observed least recently.
pub fn eb_choose(scores: &[f64], ctx: &PolicyContext) -> ActionChoice {
    let mut best = 0;
    for (i, &v) in scores.iter().enumerate().skip(1) {
        let b = scores[best];
        if v > b + TIE_TOL * b.abs().max(1e-300) {
            best = i;
        }
    }
    let choice = ActionChoice::from_ordinal(best);
    if choice.is_access() {
        return choice;
    }
    ActionChoice::sense(ctx.stalest_bs())
}

pub fn eb_action(ctx: &PolicyContext, model: &EhModel, table: &EbTable) -> ActionChoice {
    eb_choose(&eb_scores(&ctx.belief, model, table), ctx)
}

/// The per-BS harvest law, re-exported for callers computing their own terms.
pub fn bs_harvest(model: &EhModel, bs: usize) -> Harvest {
    harvest_moments(&model.bs_configs()[bs].solar)
}
