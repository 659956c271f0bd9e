//! Per-slot decision rules: the solved POMDP policy, the energy-based
//! heuristic and the sensing baselines, behind one `Agent` interface.

mod csma;
mod eb;

use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub use csma::{csma_ca_action, csma_cd_action, csma_cd_register_failure, MAX_BACKOFF_EXPONENT};
pub use eb::{
    bs_harvest, eb_action, eb_choose, eb_expected_harvest, eb_scores, eb_terms, EbEnergyTerms,
    EbTable,
};

use crate::error::{Error, Result};
use crate::model::{access_feasible, ActionChoice, EhModel, ObservationMsg};
use crate::solver::{
    belief_update, best_action, predict, value_iterate, Belief, PolicySet, SolverConfig,
    ValueIteration,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum PolicyKind {
    Pomdp,
    Eb,
    CsmaCd,
    CsmaCa,
    Random,
}

impl PolicyKind {
    pub const ALL: [PolicyKind; 5] = [
        PolicyKind::Pomdp,
        PolicyKind::Eb,
        PolicyKind::CsmaCd,
        PolicyKind::CsmaCa,
        PolicyKind::Random,
    ];

    pub fn name(self) -> &'static str {
        match self {
            PolicyKind::Pomdp => "pomdp",
            PolicyKind::Eb => "eb",
            PolicyKind::CsmaCd => "csma_cd",
            PolicyKind::CsmaCa => "csma_ca",
            PolicyKind::Random => "random",
        }
    }

    /// Whether the agent keeps a Bayesian belief for this policy.
    pub fn tracks_belief(self) -> bool {
        matches!(self, PolicyKind::Pomdp | PolicyKind::Eb)
    }
}

impl fmt::Display for PolicyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for PolicyKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        PolicyKind::ALL
            .into_iter()
            .find(|k| k.name() == s.trim())
            .ok_or_else(|| {
                Error::Config(format!(
                    "unknown policy '{s}' (expected pomdp, eb, csma_cd, csma_ca or random)"
                ))
            })
    }
}

/// Mutable per-user decision state. One context per simulated user; never
/// shared between trials.
#[derive(Clone, Debug)]
pub struct PolicyContext {
    pub belief: Belief,
    /// Index of the slot about to be decided.
    pub slot: u64,
    pub last_sensed_slot: Vec<Option<u64>>,
    /// Consecutive access failures.
    pub backoff: u32,
    pub sleep_remaining: u64,
    pub last_known_feasible: Vec<Option<bool>>,
    /// Action taken in the previous slot.
    pub last_action: Option<ActionChoice>,
    /// Next BS in the sensing rotation.
    pub round_robin: usize,
    pub rng: ChaCha8Rng,
}

impl PolicyContext {
    pub fn new(n_bs: usize, belief: Belief, rng: ChaCha8Rng) -> Self {
        Self {
            belief,
            slot: 0,
            last_sensed_slot: vec![None; n_bs],
            backoff: 0,
            sleep_remaining: 0,
            last_known_feasible: vec![None; n_bs],
            last_action: None,
            round_robin: 0,
            rng,
        }
    }

    pub fn n_bs(&self) -> usize {
        self.last_sensed_slot.len()
    }

    /// BS whose latest observation is oldest; never-observed BSs come first,
    /// ties go to the lowest index.
    pub fn stalest_bs(&self) -> usize {
        (0..self.n_bs())
            .min_by_key(|&i| self.last_sensed_slot[i].map_or(0, |t| t + 1))
            .unwrap_or(0)
    }

    pub(crate) fn next_round_robin(&mut self) -> usize {
        let bs = self.round_robin % self.n_bs();
        self.round_robin = (bs + 1) % self.n_bs();
        bs
    }

    /// Records the action of the last slot and whether the reply showed its
    /// target BS able to grant access.
    pub fn record(&mut self, a: ActionChoice, feasible: bool) {
        self.last_sensed_slot[a.target] = Some(self.slot);
        self.last_known_feasible[a.target] = Some(feasible);
        self.last_action = Some(a);
        self.slot += 1;
    }
}

pub fn random_action(ctx: &mut PolicyContext) -> ActionChoice {
    let n = 2 * ctx.n_bs();
    ActionChoice::from_ordinal(ctx.rng.random_range(0..n))
}

/// Per-model resources a policy needs before simulation starts.
#[derive(Clone, Debug)]
pub enum Planner {
    Pomdp(PolicySet),
    Eb(EbTable),
    CsmaCd,
    CsmaCa,
    Random,
}

/// A prepared planner together with what it cost to prepare.
#[derive(Clone, Debug)]
pub struct Prepared {
    pub planner: Planner,
    pub solve_ms: f64,
    /// Present for the POMDP policy.
    pub solution: Option<ValueIteration>,
}

impl Planner {
    pub fn kind(&self) -> PolicyKind {
        match self {
            Planner::Pomdp(_) => PolicyKind::Pomdp,
            Planner::Eb(_) => PolicyKind::Eb,
            Planner::CsmaCd => PolicyKind::CsmaCd,
            Planner::CsmaCa => PolicyKind::CsmaCa,
            Planner::Random => PolicyKind::Random,
        }
    }

    pub fn prepare(kind: PolicyKind, model: &EhModel, solver: &SolverConfig) -> Result<Prepared> {
        let start = Instant::now();
        let (planner, solution) = match kind {
            PolicyKind::Pomdp => {
                let vi = value_iterate(model.tables(), solver)?;
                (Planner::Pomdp(vi.policy.clone()), Some(vi))
            }
            PolicyKind::Eb => (Planner::Eb(EbTable::build(model)), None),
            PolicyKind::CsmaCd => (Planner::CsmaCd, None),
            PolicyKind::CsmaCa => (Planner::CsmaCa, None),
            PolicyKind::Random => (Planner::Random, None),
        };
        Ok(Prepared {
            planner,
            solve_ms: start.elapsed().as_secs_f64() * 1e3,
            solution,
        })
    }
}

/// One simulated user: picks an action each slot and digests the reply.
pub struct Agent<'a> {
    model: &'a EhModel,
    planner: &'a Planner,
    pub ctx: PolicyContext,
    /// Abort on an observation the model deems impossible instead of
    /// re-seeding the belief.
    strict: bool,
    filter_resets: u64,
}

impl<'a> Agent<'a> {
    pub fn new(model: &'a EhModel, planner: &'a Planner, belief: Belief, rng: ChaCha8Rng) -> Self {
        Self {
            model,
            planner,
            ctx: PolicyContext::new(model.n_bs(), belief, rng),
            strict: false,
            filter_resets: 0,
        }
    }

    pub fn strict(mut self, strict: bool) -> Self {
        self.strict = strict;
        self
    }

    pub fn kind(&self) -> PolicyKind {
        self.planner.kind()
    }

    /// Times the belief had to be re-seeded from an observation outside the
    /// model's support.
    pub fn filter_resets(&self) -> u64 {
        self.filter_resets
    }

    pub fn act(&mut self) -> ActionChoice {
        match self.planner {
            Planner::Pomdp(policy) => {
                ActionChoice::from_ordinal(best_action(&self.ctx.belief.probs, policy))
            }
            Planner::Eb(table) => eb_action(&self.ctx, self.model, table),
            Planner::CsmaCd => csma_cd_action(&mut self.ctx),
            Planner::CsmaCa => csma_ca_action(&mut self.ctx),
            Planner::Random => random_action(&mut self.ctx),
        }
    }

    pub fn observe(&mut self, a: ActionChoice, obs: &ObservationMsg) -> Result<()> {
        let cfg = &self.model.bs_configs()[a.target];
        let feasible = access_feasible(obs.state(), cfg);
        if self.kind().tracks_belief() {
            self.update_belief(a, obs)?;
        }
        if matches!(self.planner, Planner::CsmaCd) && a.is_access() {
            if obs.granted {
                self.ctx.backoff = 0;
            } else {
                csma_cd_register_failure(&mut self.ctx);
            }
        }
        self.ctx.record(a, feasible);
        Ok(())
    }

    fn update_belief(&mut self, a: ActionChoice, obs: &ObservationMsg) -> Result<()> {
        let tables = self.model.tables();
        let o = self.model.observation_index(a.target, obs);
        match belief_update(&self.ctx.belief, a.ordinal(), o, tables) {
            Ok(b) => self.ctx.belief = b,
            Err(e @ Error::Inconsistent(_)) if self.strict => return Err(e),
            Err(Error::Inconsistent(_)) => {
                self.ctx.belief = reseed(self.model, &self.ctx.belief, a, o);
                self.filter_resets += 1;
            }
            Err(e) => return Err(e),
        }
        Ok(())
    }
}

/// Belief after an observation the model gives zero probability: the
/// observed BS is pinned to what was seen and the other BSs keep their
/// predicted marginal.
fn reseed(model: &EhModel, b: &Belief, a: ActionChoice, o: usize) -> Belief {
    let space = model.space();
    let tables = model.tables();
    let pred = predict(b, a.ordinal(), tables);
    let stride: usize = (0..a.target).map(|i| space.local_size(i)).product();
    let key = |s: usize| s - space.local_of(s, a.target) * stride;
    let mut others = vec![0.0; space.size()];
    for (s, p) in pred.iter().enumerate() {
        others[key(s)] += p;
    }
    let mut post: Vec<f64> = (0..space.size())
        .map(|s| tables.z(a.ordinal(), s, o) * others[key(s)])
        .collect();
    let mut total: f64 = post.iter().sum();
    if !(total > 0.0) {
        post = (0..space.size()).map(|s| tables.z(a.ordinal(), s, o)).collect();
        total = post.iter().sum();
    }
    post.iter_mut().for_each(|p| *p /= total);
    Belief { probs: post }
}

#[cfg(test)]
mod tests;
