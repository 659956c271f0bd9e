//! Ground-truth environment and Monte Carlo harness.
//!
//! The environment tracks each battery as a continuous charge in joules; the
//! discretized kernel is only what the agent believes. Random draws per slot
//! do not depend on the action taken, so policies evaluated with the same
//! seed face the same harvests and user arrivals.

mod sweep;

use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

pub use sweep::{run_sweep, sweep_csv_header, SweepOutcome, SweepRow, SWEEP_COLUMNS};

use crate::error::{Error, Result};
use crate::model::{
    access_feasible, depleted, discretize_battery, harvest_moments, transmit_levels, ActionChoice,
    BsConfig, BsState, DeltaDist, EhModel, ObservationMsg, SystemState,
};
use crate::policies::{Agent, Planner};
use crate::solver::Belief;
use crate::tabular::TabularPomdp;

#[derive(Clone, Debug, PartialEq)]
pub struct SimConfig {
    /// Slots per trial.
    pub n_t: u64,
    pub trials: usize,
    pub seed: u64,
    /// Keep a per-slot record.
    pub trace: bool,
    /// Abort a trial when the agent's model rules out an observation.
    pub strict_filter: bool,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            n_t: 10_000,
            trials: 20,
            seed: 0,
            trace: false,
            strict_filter: false,
        }
    }
}

/// True network state: user counts and continuous battery charge.
#[derive(Clone, Debug, PartialEq)]
pub struct EnvState {
    pub users: Vec<usize>,
    /// Joules stored in each battery.
    pub charge: Vec<f64>,
}

impl EnvState {
    /// Charge at the middle of each level; a full battery holds exactly its
    /// capacity.
    pub fn from_levels(model: &EhModel, levels: &[BsState]) -> Self {
        let bss = model.bs_configs();
        Self {
            users: levels.iter().map(|s| s.s_u).collect(),
            charge: levels
                .iter()
                .zip(bss)
                .map(|(s, cfg)| level_midpoint(s.s_b, cfg))
                .collect(),
        }
    }

    /// Uniform over the discrete states, with a uniform residue inside the
    /// drawn level.
    pub fn random<R: Rng + ?Sized>(model: &EhModel, rng: &mut R) -> Self {
        let idx = rng.random_range(0..model.n_states());
        let s = model.space().decode(idx).expect("index in range");
        let mut users = Vec::new();
        let mut charge = Vec::new();
        for (bs, cfg) in s.per_bs.iter().zip(model.bs_configs()) {
            users.push(bs.s_u);
            let u: f64 = rng.random();
            charge.push(if bs.s_b + 1 == cfg.n_b {
                cfg.capacity()
            } else {
                (bs.s_b as f64 + u) * cfg.quantum()
            });
        }
        Self { users, charge }
    }

    pub fn level(&self, bs: usize, cfg: &BsConfig) -> usize {
        discretize_battery(self.charge[bs].clamp(0.0, cfg.capacity()), cfg).expect("clamped charge")
    }

    pub fn local(&self, bs: usize, cfg: &BsConfig) -> BsState {
        BsState::new(self.users[bs], self.level(bs, cfg))
    }

    pub fn discrete(&self, model: &EhModel) -> SystemState {
        let per_bs = model
            .bs_configs()
            .iter()
            .enumerate()
            .map(|(i, cfg)| self.local(i, cfg))
            .collect();
        model.space().state(per_bs).expect("state within the model")
    }
}

fn level_midpoint(s_b: usize, cfg: &BsConfig) -> f64 {
    if s_b + 1 >= cfg.n_b {
        cfg.capacity()
    } else {
        (s_b as f64 + 0.5) * cfg.quantum()
    }
}

/// Everything that happened in one slot.
#[derive(Clone, Debug, PartialEq)]
pub struct StepOutcome {
    pub next: EnvState,
    pub observation: ObservationMsg,
    pub reward: f64,
    /// Joules harvested per BS.
    pub harvest: Vec<f64>,
    /// Joules spent on transmission per BS.
    pub consumed: Vec<f64>,
    /// Joules lost to a full battery per BS.
    pub spill: Vec<f64>,
}

/// Advances the true state by one slot under action `a`.
///
/// Each BS draws one harvest and one uniform for user dynamics regardless of
/// the action.
pub fn step_environment<R: Rng + ?Sized>(
    state: &EnvState,
    a: ActionChoice,
    model: &EhModel,
    rng: &mut R,
) -> StepOutcome {
    let bss = model.bs_configs();
    let mut next = state.clone();
    let mut harvest = Vec::with_capacity(bss.len());
    let mut consumed = Vec::with_capacity(bss.len());
    let mut spill = Vec::with_capacity(bss.len());
    let mut granted_any = false;
    for (i, cfg) in bss.iter().enumerate() {
        let e_h = harvest_moments(&cfg.solar).sample(rng);
        let u: f64 = rng.random();
        let s = state.local(i, cfg);
        let granted = i == a.target && a.is_access() && access_feasible(s, cfg);
        granted_any |= granted;
        let e_t = transmit_levels(s, granted) as f64 * cfg.quantum();
        let raw = state.charge[i] + e_h - e_t;
        next.charge[i] = raw.min(cfg.capacity()).max(0.0);
        next.users[i] = next_users(s, u, cfg);
        harvest.push(e_h);
        consumed.push(e_t);
        spill.push((raw - cfg.capacity()).max(0.0));
    }
    let target = next.local(a.target, &bss[a.target]);
    StepOutcome {
        observation: ObservationMsg {
            s_u_o: target.s_u,
            s_b_o: target.s_b,
            granted: granted_any,
        },
        reward: if granted_any { 1.0 } else { 0.0 },
        next,
        harvest,
        consumed,
        spill,
    }
}

/// Birth-death step driven by one uniform; a BS that cannot carry its users
/// drops them all.
fn next_users(s: BsState, u: f64, cfg: &BsConfig) -> usize {
    if depleted(s) {
        return 0;
    }
    let arrive = if s.s_u + 1 < cfg.n_u { cfg.lambda } else { 0.0 };
    let depart = cfg.mu * s.s_u as f64;
    if u < arrive {
        s.s_u + 1
    } else if u < arrive + depart {
        s.s_u - 1
    } else {
        s.s_u
    }
}

/// One slot of an audited trial.
#[derive(Clone, Debug, PartialEq)]
pub struct TraceRecord {
    pub slot: u64,
    pub state: SystemState,
    pub charge: Vec<f64>,
    /// Most likely state under the agent's belief, if it keeps one.
    pub belief_mode: Option<(usize, f64)>,
    pub action: ActionChoice,
    pub observation: ObservationMsg,
    pub reward: f64,
    pub harvest: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrialResult {
    pub n_slots: u64,
    pub n_success: u64,
    pub eta_a: f64,
    /// Slots in which at least one BS would have granted access.
    pub feasible_slots: u64,
    /// Observations the agent's model ruled out and that reset its belief.
    pub filter_resets: u64,
    pub trace: Option<Vec<TraceRecord>>,
}

/// Independent streams for the environment and the policy of one trial.
pub fn trial_rngs(seed: u64, trial: u64) -> (ChaCha8Rng, ChaCha8Rng) {
    let mut env = ChaCha8Rng::seed_from_u64(seed);
    env.set_stream(2 * trial);
    let mut policy = ChaCha8Rng::seed_from_u64(seed);
    policy.set_stream(2 * trial + 1);
    (env, policy)
}

/// Runs trial number `trial` of `sim` from a uniformly drawn start.
pub fn run_trial(model: &EhModel, planner: &Planner, sim: &SimConfig, trial: u64) -> Result<TrialResult> {
    let (mut env_rng, policy_rng) = trial_rngs(sim.seed, trial);
    let start = EnvState::random(model, &mut env_rng);
    let belief = Belief::uniform(model.n_states());
    simulate(model, planner, sim, trial, start, belief, env_rng, policy_rng)
}

/// Runs one trial from a given true state and initial belief.
pub fn run_trial_from(
    model: &EhModel,
    planner: &Planner,
    sim: &SimConfig,
    trial: u64,
    start: EnvState,
    belief: Belief,
) -> Result<TrialResult> {
    let (env_rng, policy_rng) = trial_rngs(sim.seed, trial);
    simulate(model, planner, sim, trial, start, belief, env_rng, policy_rng)
}

#[allow(clippy::too_many_arguments)]
fn simulate(
    model: &EhModel,
    planner: &Planner,
    sim: &SimConfig,
    trial: u64,
    start: EnvState,
    belief: Belief,
    mut env_rng: ChaCha8Rng,
    policy_rng: ChaCha8Rng,
) -> Result<TrialResult> {
    if sim.n_t < 1 {
        return Err(Error::Config("n_t must be >= 1".into()));
    }
    let mut agent = Agent::new(model, planner, belief, policy_rng).strict(sim.strict_filter);
    let mut state = start;
    let mut n_success = 0;
    let mut feasible_slots = 0;
    let mut trace = sim.trace.then(Vec::new);
    let bss = model.bs_configs();
    for slot in 0..sim.n_t {
        let discrete = state.discrete(model);
        if discrete.per_bs.iter().zip(bss).any(|(s, cfg)| access_feasible(*s, cfg)) {
            feasible_slots += 1;
        }
        let belief_mode = agent.kind().tracks_belief().then(|| agent.ctx.belief.mode());
        let a = agent.act();
        let out = step_environment(&state, a, model, &mut env_rng);
        agent.observe(a, &out.observation).map_err(|e| match e {
            Error::Inconsistent(msg) => Error::Inconsistent(format!(
                "trial {trial} slot {slot}: {msg} (state {}, action {a})",
                model.space().label(discrete.index)
            )),
            other => other,
        })?;
        if out.reward > 0.0 {
            n_success += 1;
        }
        if let Some(t) = trace.as_mut() {
            t.push(TraceRecord {
                slot,
                state: discrete,
                charge: state.charge.clone(),
                belief_mode,
                action: a,
                observation: out.observation,
                reward: out.reward,
                harvest: out.harvest.clone(),
            });
        }
        state = out.next;
    }
    Ok(TrialResult {
        n_slots: sim.n_t,
        n_success,
        eta_a: n_success as f64 / sim.n_t as f64,
        feasible_slots,
        filter_resets: agent.filter_resets(),
        trace,
    })
}

/// All trials of `sim`, in parallel, in trial order.
pub fn run_trials(model: &EhModel, planner: &Planner, sim: &SimConfig) -> Result<Vec<TrialResult>> {
    (0..sim.trials as u64)
        .into_par_iter()
        .map(|t| run_trial(model, planner, sim, t))
        .collect()
}

/// Per-slot CSV of a traced trial.
pub fn trace_csv(model: &EhModel, records: &[TraceRecord]) -> String {
    let mut out = String::from(
        "slot,state,charge_j,belief_mode,belief_mode_prob,action,obs_s_u,obs_s_b,reward,harvest_j\n",
    );
    let join = |v: &[f64]| v.iter().map(|x| format!("{x:.6e}")).collect::<Vec<_>>().join(";");
    for r in records {
        let (mode, prob) = match r.belief_mode {
            Some((s, p)) => (model.space().label(s), format!("{p:.6}")),
            None => (String::new(), String::new()),
        };
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{}",
            r.slot,
            model.space().label(r.state.index),
            join(&r.charge),
            mode,
            prob,
            r.action.label(),
            r.observation.s_u_o,
            r.observation.s_b_o,
            r.reward,
            join(&r.harvest)
        );
    }
    out
}

/// Optimal values of the fully observed chain, iterated until successive
/// sweeps differ by at most `1e-9·(1−γ)`.
pub fn mdp_oracle_value(pomdp: &TabularPomdp, gamma: f64) -> Vec<f64> {
    let n = pomdp.n_states();
    let mut v = vec![0.0; n];
    let tol = 1e-9 * (1.0 - gamma);
    loop {
        let next: Vec<f64> = (0..n)
            .map(|s| {
                (0..pomdp.n_actions())
                    .map(|a| {
                        let future: f64 = pomdp
                            .transition_row(a, s)
                            .iter()
                            .zip(&v)
                            .map(|(t, x)| t * x)
                            .sum();
                        pomdp.r(a, s) + gamma * future
                    })
                    .fold(f64::NEG_INFINITY, f64::max)
            })
            .collect();
        let change = next.iter().zip(&v).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        v = next;
        if change <= tol {
            return v;
        }
    }
}

/// Empirical distribution of per-slot level changes of one BS held at
/// `s_u` users, taken from `steps` environment steps.
///
/// Users are pinned, and the charge is moved back to the middle of a deep
/// battery by whole quanta whenever it nears either end, so neither
/// saturation nor depletion truncates a change and the residue inside the
/// level evolves untouched.
pub fn empirical_delta_dist<R: Rng + ?Sized>(
    cfg: &BsConfig,
    s_u: usize,
    granted: bool,
    steps: usize,
    rng: &mut R,
) -> Result<DeltaDist> {
    if s_u >= cfg.n_u {
        return Err(Error::Domain(format!("{s_u} users outside 0..{}", cfg.n_u)));
    }
    let span = 64;
    let deep = BsConfig {
        n_b: span,
        lambda: 0.0,
        mu: 0.0,
        ..cfg.clone()
    };
    let model = EhModel::build_with_limit(vec![deep.clone()], deep.local_states())?;
    let mid = span / 2;
    let a = if granted {
        ActionChoice::access(0)
    } else {
        ActionChoice::sense(0)
    };
    let mut state = EnvState::from_levels(&model, &[BsState::new(s_u, mid)]);
    state.charge[0] = (mid as f64 + rng.random::<f64>()) * deep.quantum();
    let mut counts: std::collections::BTreeMap<i64, usize> = Default::default();
    for _ in 0..steps {
        let level = state.level(0, &deep);
        if !(span / 4..3 * span / 4).contains(&level) {
            state.charge[0] += (mid as f64 - level as f64) * deep.quantum();
        }
        state.users[0] = s_u;
        let before = state.level(0, &deep) as i64;
        let out = step_environment(&state, a, &model, rng);
        if (out.reward > 0.0) != granted {
            return Err(Error::Domain(format!(
                "grant = {granted} is not reachable with {s_u} users"
            )));
        }
        *counts.entry(out.next.level(0, &deep) as i64 - before).or_default() += 1;
        state = out.next;
    }
    let min_delta = *counts.keys().next().unwrap_or(&0);
    let max_delta = *counts.keys().last().unwrap_or(&0);
    let probs = (min_delta..=max_delta)
        .map(|d| counts.get(&d).copied().unwrap_or(0) as f64 / steps as f64)
        .collect();
    Ok(DeltaDist { min_delta, probs })
}

/// Total-variation distance between two delta distributions.
pub fn total_variation(a: &DeltaDist, b: &DeltaDist) -> f64 {
    let lo = a.min_delta.min(b.min_delta);
    let hi = a.max_delta().max(b.max_delta());
    0.5 * (lo..=hi).map(|d| (a.get(d) - b.get(d)).abs()).sum::<f64>()
}
