//! Joint transition, observation and reward tables for the whole network.

use super::battery::{battery_delta_dist, DeltaTable};
use super::space::{StateSpace, SystemState};
use super::types::{ActionChoice, ActionKind, BsConfig, BsEffect, BsState, ObservationMsg};
use super::users::{access_feasible, transmit_levels, user_transition};
use crate::error::{Error, Result};
use crate::tabular::TabularPomdp;

/// Largest joint state space the dense tables are built for.
pub const DEFAULT_STATE_LIMIT: usize = 2048;

/// Resolves what the user's action does to one BS in state `s`.
pub fn resolve_effect(kind: Option<ActionKind>, s: BsState, cfg: &BsConfig) -> BsEffect {
    match kind {
        Some(ActionKind::Access) if access_feasible(s, cfg) => BsEffect::Granted,
        Some(ActionKind::Access) => BsEffect::Denied,
        Some(ActionKind::Sense) => BsEffect::Sensed,
        None => BsEffect::Untouched,
    }
}

/// `P(s_next | s, action)` for a single BS; `kind` is `None` when the action
/// targets another BS.
pub fn bs_joint_transition(
    s_next: BsState,
    s: BsState,
    kind: Option<ActionKind>,
    cfg: &BsConfig,
) -> Result<f64> {
    if !cfg.contains(s_next) {
        return Ok(0.0);
    }
    let effect = resolve_effect(kind, s, cfg);
    let users = user_transition(s_next.s_u, s, effect, cfg);
    if users == 0.0 {
        return Ok(0.0);
    }
    let dist = battery_delta_dist(transmit_levels(s, effect.granted()), cfg)?;
    Ok(users * dist.level_distribution(s.s_b, cfg.n_b)[s_next.s_b])
}

/// Single-BS kernel for the two consumption regimes: `rows[g][l * n + l']`
/// with `g = 1` when the rational user is granted service.
#[derive(Clone, Debug)]
pub struct BsKernel {
    n_local: usize,
    rows: [Vec<f64>; 2],
}

impl BsKernel {
    fn build(bs: usize, cfg: &BsConfig, space: &StateSpace) -> Result<Self> {
        let deltas = DeltaTable::build(cfg)?;
        let n_local = cfg.local_states();
        let mut rows = [vec![0.0; n_local * n_local], vec![0.0; n_local * n_local]];
        for l in 0..n_local {
            let s = space.local_state(bs, l);
            for (g, table) in rows.iter_mut().enumerate() {
                let granted = g == 1;
                if granted && !access_feasible(s, cfg) {
                    continue;
                }
                let effect = if granted {
                    BsEffect::Granted
                } else {
                    BsEffect::Untouched
                };
                let battery = deltas
                    .for_levels(transmit_levels(s, granted))
                    .level_distribution(s.s_b, cfg.n_b);
                for l_next in 0..n_local {
                    let sn = space.local_state(bs, l_next);
                    table[l * n_local + l_next] =
                        user_transition(sn.s_u, s, effect, cfg) * battery[sn.s_b];
                }
            }
        }
        Ok(Self { n_local, rows })
    }

    #[inline]
    pub fn p(&self, granted: bool, l: usize, l_next: usize) -> f64 {
        self.rows[usize::from(granted)][l * self.n_local + l_next]
    }
}

/// The energy-harvesting access problem as an explicit POMDP.
#[derive(Clone, Debug)]
pub struct EhModel {
    bss: Vec<BsConfig>,
    space: StateSpace,
    kernels: Vec<BsKernel>,
    feasible: Vec<Vec<bool>>,
    actions: Vec<ActionChoice>,
    tables: TabularPomdp,
}

impl EhModel {
    pub fn build(bss: Vec<BsConfig>) -> Result<Self> {
        Self::build_with_limit(bss, DEFAULT_STATE_LIMIT)
    }

    pub fn build_with_limit(bss: Vec<BsConfig>, state_limit: usize) -> Result<Self> {
        if bss.is_empty() {
            return Err(Error::Config("scenario has no base stations".into()));
        }
        for (i, c) in bss.iter().enumerate() {
            c.validate()
                .map_err(|e| Error::Config(format!("bs[{i}]: {e}")))?;
        }
        let space = StateSpace::new(&bss);
        if space.size() > state_limit {
            return Err(Error::Refused(format!(
                "joint state space has {} states, limit is {state_limit}; \
                 use the eb policy or fewer base stations",
                space.size()
            )));
        }
        let kernels = bss
            .iter()
            .enumerate()
            .map(|(i, c)| BsKernel::build(i, c, &space))
            .collect::<Result<Vec<_>>>()?;
        let feasible = bss
            .iter()
            .enumerate()
            .map(|(i, c)| {
                (0..c.local_states())
                    .map(|l| access_feasible(space.local_state(i, l), c))
                    .collect()
            })
            .collect();
        let actions = ActionChoice::all(bss.len());
        let mut model = Self {
            bss,
            space,
            kernels,
            feasible,
            actions,
            tables: TabularPomdp::zeros(0, 0, 0),
        };
        model.tables = model.tabulate();
        Ok(model)
    }

    fn tabulate(&self) -> TabularPomdp {
        let n = self.space.size();
        let n_obs = (0..self.n_bs())
            .map(|i| self.space.local_size(i))
            .max()
            .unwrap_or(1);
        let mut t = TabularPomdp::zeros(n, self.actions.len(), n_obs);
        t.state_labels = (0..n).map(|s| self.space.label(s)).collect();
        t.action_labels = self.actions.iter().map(|a| a.label()).collect();
        for (ai, &a) in self.actions.iter().enumerate() {
            for s in 0..n {
                let granted = self.granted_index(s, a);
                t.rewards[ai][s] = if granted { 1.0 } else { 0.0 };
                for s_next in 0..n {
                    let mut p = 1.0;
                    for (bs, k) in self.kernels.iter().enumerate() {
                        let g = granted && bs == a.target;
                        p *= k.p(g, self.space.local_of(s, bs), self.space.local_of(s_next, bs));
                        if p == 0.0 {
                            break;
                        }
                    }
                    t.set_t(ai, s, s_next, p);
                }
                t.set_z(ai, s, self.space.local_of(s, a.target), 1.0);
            }
        }
        t
    }

    fn granted_index(&self, s: usize, a: ActionChoice) -> bool {
        a.is_access() && self.feasible[a.target][self.space.local_of(s, a.target)]
    }

    pub fn bs_configs(&self) -> &[BsConfig] {
        &self.bss
    }

    pub fn n_bs(&self) -> usize {
        self.bss.len()
    }

    pub fn space(&self) -> &StateSpace {
        &self.space
    }

    pub fn n_states(&self) -> usize {
        self.space.size()
    }

    pub fn actions(&self) -> &[ActionChoice] {
        &self.actions
    }

    pub fn tables(&self) -> &TabularPomdp {
        &self.tables
    }

    pub fn kernel(&self, bs: usize) -> &BsKernel {
        &self.kernels[bs]
    }

    /// Access feasibility of `bs` when its local index is `local`.
    pub fn feasible_local(&self, bs: usize, local: usize) -> bool {
        self.feasible[bs][local]
    }

    /// Whether action `a` in joint state `s` is granted.
    pub fn granted(&self, s: &SystemState, a: ActionChoice) -> bool {
        self.granted_index(s.index, a)
    }

    /// Product over base stations; only the target BS sees the action.
    pub fn system_transition(&self, s_next: &SystemState, s: &SystemState, a: ActionChoice) -> f64 {
        let granted = self.granted(s, a);
        self.kernels
            .iter()
            .enumerate()
            .map(|(bs, k)| {
                let l = self.space.local_index(bs, s.per_bs[bs]);
                let ln = self.space.local_index(bs, s_next.per_bs[bs]);
                k.p(granted && bs == a.target, l, ln)
            })
            .product()
    }

    /// Indicator that `o` reports the target BS's component of `s_next`.
    pub fn observation_prob(&self, o: &ObservationMsg, s_next: &SystemState, a: ActionChoice) -> f64 {
        if s_next.per_bs[a.target] == o.state() {
            1.0
        } else {
            0.0
        }
    }

    pub fn reward(&self, s: &SystemState, a: ActionChoice) -> f64 {
        if self.granted(s, a) {
            1.0
        } else {
            0.0
        }
    }

    /// Observation index used by the tabular model for a message from `target`.
    pub fn observation_index(&self, target: usize, o: &ObservationMsg) -> usize {
        self.space.local_index(target, o.state())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::types::SolarModel;

    fn fig3_bs() -> BsConfig {
        BsConfig {
            n_u: 4,
            n_b: 8,
            p_t: 0.04,
            lambda: 0.4,
            mu: 0.05,
            solar: SolarModel::reference(1.0, 0.5),
            reserve_levels: 1,
        }
    }

    #[test]
    fn single_bs_matches_per_bs_law() {
        let cfg = fig3_bs();
        let model = EhModel::build(vec![cfg.clone()]).unwrap();
        assert_eq!(model.n_states(), 32);
        let space = model.space().clone();
        for a in model.actions().to_vec() {
            for i in 0..32 {
                let s = space.decode(i).unwrap();
                for j in 0..32 {
                    let sn = space.decode(j).unwrap();
                    let direct =
                        bs_joint_transition(sn.per_bs[0], s.per_bs[0], Some(a.kind), &cfg).unwrap();
                    let joint = model.system_transition(&sn, &s, a);
                    assert!((direct - joint).abs() < 1e-12);
                    assert_eq!(joint, model.tables().t(a.ordinal(), i, j));
                }
            }
        }
    }

    #[test]
    fn depleted_bs_drops_users() {
        let cfg = fig3_bs();
        let s = BsState::new(3, 2);
        for s_u in 1..4 {
            for s_b in 0..8 {
                let p = bs_joint_transition(BsState::new(s_u, s_b), s, None, &cfg).unwrap();
                assert_eq!(p, 0.0);
            }
        }
        let mass: f64 = (0..8)
            .map(|b| bs_joint_transition(BsState::new(0, b), s, None, &cfg).unwrap())
            .sum();
        assert!((mass - 1.0).abs() < 1e-9);
    }

    #[test]
    fn tables_are_stochastic() {
        let mut b2 = fig3_bs();
        b2.n_u = 2;
        b2.n_b = 3;
        b2.lambda = 0.6;
        let model = EhModel::build(vec![b2.clone(), b2]).unwrap();
        assert_eq!(model.n_states(), 36);
        model.tables().validate(1e-8).unwrap();
    }

    #[test]
    fn observation_is_target_component() {
        let mut b2 = fig3_bs();
        b2.n_u = 2;
        b2.n_b = 3;
        let model = EhModel::build(vec![b2.clone(), b2]).unwrap();
        let sn = model
            .space()
            .state(vec![BsState::new(1, 2), BsState::new(0, 1)])
            .unwrap();
        let a = ActionChoice::sense(1);
        let hit = ObservationMsg { s_u_o: 0, s_b_o: 1, granted: false };
        let miss = ObservationMsg { s_u_o: 1, s_b_o: 2, granted: false };
        assert_eq!(model.observation_prob(&hit, &sn, a), 1.0);
        assert_eq!(model.observation_prob(&miss, &sn, a), 0.0);
        let total: f64 = (0..2)
            .flat_map(|u| (0..3).map(move |b| (u, b)))
            .map(|(u, b)| {
                let o = ObservationMsg { s_u_o: u, s_b_o: b, granted: false };
                model.observation_prob(&o, &sn, ActionChoice::access(0))
            })
            .sum();
        assert_eq!(total, 1.0);
    }

    #[test]
    fn oversized_space_is_refused() {
        let cfg = fig3_bs();
        let err = EhModel::build_with_limit(vec![cfg.clone(), cfg.clone(), cfg], 1000).unwrap_err();
        assert!(matches!(err, Error::Refused(_)));
    }

    #[test]
    fn invalid_user_rates_rejected() {
        let mut cfg = fig3_bs();
        cfg.lambda = 0.9;
        cfg.mu = 0.1;
        assert!(matches!(EhModel::build(vec![cfg]), Err(Error::Config(_))));
    }
}
