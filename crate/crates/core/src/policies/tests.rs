use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use statrs::distribution::{ContinuousCDF, Normal};

use super::*;
use crate::model::{harvest_moments, BsConfig, BsState, SolarModel};

fn bs(mu_s: f64) -> BsConfig {
    BsConfig {
        n_u: 4,
        n_b: 8,
        p_t: 0.04,
        lambda: 0.4,
        mu: 0.05,
        solar: SolarModel::reference(mu_s, 0.5),
        reserve_levels: 1,
    }
}

fn two_bs() -> Vec<BsConfig> {
    let cfg = BsConfig {
        n_u: 2,
        n_b: 3,
        lambda: 0.6,
        ..bs(1.0)
    };
    vec![cfg.clone(), cfg]
}

fn ctx(n_bs: usize, n_states: usize, seed: u64) -> PolicyContext {
    PolicyContext::new(n_bs, Belief::uniform(n_states), ChaCha8Rng::seed_from_u64(seed))
}

/// `E[min(max(X, 0), cap)]` for `X ~ N(m, s²)` by stratified sampling of the
/// inverse CDF: one uniform draw per equal-probability stratum.
fn stratified_capped_mean(m: f64, s: f64, cap: f64, n: usize, seed: u64) -> f64 {
    let normal = Normal::new(m, s).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut total = 0.0;
    for i in 0..n {
        let u = (i as f64 + rng.random::<f64>()) / n as f64;
        let x = normal.inverse_cdf(u.clamp(1e-300, 1.0 - 1e-16));
        total += x.max(0.0).min(cap);
    }
    total / n as f64
}

#[test]
fn policy_names_round_trip() {
    for k in PolicyKind::ALL {
        assert_eq!(k.name().parse::<PolicyKind>().unwrap(), k);
        assert_eq!(k.to_string(), k.name());
    }
    assert!(matches!("csma".parse::<PolicyKind>(), Err(Error::Config(_))));
}

#[test]
fn eb_term_near_full_battery_matches_sampling() {
    // one level below the top: the midpoint leaves half a quantum of room
    let cfg = bs(1.0);
    let model = EhModel::build(vec![cfg.clone()]).unwrap();
    let s = model.space().state(vec![BsState::new(0, cfg.n_b - 2)]).unwrap();
    let term = eb_terms(&s, ActionChoice::sense(0), &model).per_bs[0];
    let h = harvest_moments(&cfg.solar);
    let cap = 0.5 * cfg.quantum();
    let oracle = stratified_capped_mean(h.mean, h.std, cap, 1_000_000, 3);
    assert!(((term - oracle) / oracle).abs() < 1e-4, "{term} vs {oracle}");
    assert!(term < cap);
}

#[test]
fn eb_term_full_battery_has_no_room() {
    let cfg = bs(1.0);
    let model = EhModel::build(vec![cfg.clone()]).unwrap();
    let s = model.space().state(vec![BsState::new(0, cfg.n_b - 1)]).unwrap();
    assert_eq!(eb_terms(&s, ActionChoice::sense(0), &model).per_bs[0], 0.0);
    // a grant frees exactly one transmission's worth
    let granted = eb_terms(&s, ActionChoice::access(0), &model).per_bs[0];
    let h = harvest_moments(&cfg.solar);
    let oracle = stratified_capped_mean(h.mean, h.std, cfg.quantum(), 1_000_000, 4);
    assert!(((granted - oracle) / oracle).abs() < 1e-4);
}

#[test]
fn eb_term_empty_battery_is_uncapped_harvest() {
    let cfg = bs(1.0);
    let model = EhModel::build(vec![cfg.clone()]).unwrap();
    let s = model.space().state(vec![BsState::new(0, 0)]).unwrap();
    let term = eb_terms(&s, ActionChoice::sense(0), &model).per_bs[0];
    let h = harvest_moments(&cfg.solar);
    let oracle = stratified_capped_mean(h.mean, h.std, f64::INFINITY, 1_000_000, 5);
    assert!(((term - oracle) / oracle).abs() < 1e-4);
    // clipping at zero adds a little on top of the scaled mean
    assert!(term > h.mean && term < 1.01 * h.mean);
}

#[test]
fn no_harvest_gives_zero_score() {
    let mut cfg = bs(0.0);
    cfg.solar.p_h = 0.0;
    let model = EhModel::build(vec![cfg]).unwrap();
    let b = Belief::uniform(model.n_states());
    for &a in model.actions() {
        assert_eq!(eb_expected_harvest(&b, a, &model), 0.0);
    }
    let table = EbTable::build(&model);
    assert!(eb_scores(&b, &model, &table).iter().all(|&v| v == 0.0));
}

#[test]
fn eb_prefers_access_on_full_feasible_bs() {
    let cfg = bs(1.0);
    let model = EhModel::build(vec![cfg.clone()]).unwrap();
    let table = EbTable::build(&model);
    let s = model.space().state(vec![BsState::new(0, cfg.n_b - 1)]).unwrap();
    let b = Belief::point(model.n_states(), s.index);
    let scores = eb_scores(&b, &model, &table);
    // the observation reveals the whole state, so the lookahead is an
    // expectation of H over the successor distribution
    for &a in model.actions() {
        let direct: f64 = (0..model.n_states())
            .map(|j| {
                let sn = model.space().decode(j).unwrap();
                model.system_transition(&sn, &s, a) * eb_terms(&sn, a, &model).total()
            })
            .sum();
        assert!((scores[a.ordinal()] - direct).abs() < 1e-15);
    }
    assert!(scores[0] > scores[1]);
    let c = PolicyContext::new(1, b, ChaCha8Rng::seed_from_u64(0));
    assert_eq!(eb_action(&c, &model, &table), ActionChoice::access(0));
}

#[test]
fn tied_sense_goes_to_stalest_bs() {
    let mut c = ctx(2, 1, 0);
    let scores = [0.0, 1.0, 0.0, 1.0];
    // never observed: lowest index
    assert_eq!(eb_choose(&scores, &c), ActionChoice::sense(0));
    c.last_sensed_slot = vec![Some(5), Some(2)];
    assert_eq!(eb_choose(&scores, &c), ActionChoice::sense(1));
    c.last_sensed_slot = vec![Some(5), None];
    assert_eq!(eb_choose(&scores, &c), ActionChoice::sense(1));
    // a winning Sense on BS 0 is still redirected
    c.last_sensed_slot = vec![Some(1), Some(4)];
    assert_eq!(eb_choose(&[0.0, 0.0, 0.0, 2.0], &c), ActionChoice::sense(0));
}

#[test]
fn symmetric_bss_break_ties_to_bs_zero() {
    let model = EhModel::build(two_bs()).unwrap();
    let table = EbTable::build(&model);
    let c = ctx(2, model.n_states(), 0);
    let scores = eb_scores(&c.belief, &model, &table);
    assert!((scores[0] - scores[2]).abs() < 1e-15);
    assert_eq!(eb_action(&c, &model, &table), ActionChoice::access(0));
}

#[test]
fn csma_cd_fresh_start_senses_bs_zero() {
    let mut c = ctx(2, 1, 0);
    assert_eq!(csma_cd_action(&mut c), ActionChoice::sense(0));
    assert_eq!(csma_cd_action(&mut c), ActionChoice::sense(1));
    assert_eq!(csma_cd_action(&mut c), ActionChoice::sense(0));
}

#[test]
fn csma_cd_accesses_after_sensing_available_bs() {
    let mut c = ctx(2, 1, 0);
    c.record(ActionChoice::sense(1), true);
    assert_eq!(csma_cd_action(&mut c), ActionChoice::access(1));
    c.record(ActionChoice::sense(1), false);
    assert!(!csma_cd_action(&mut c).is_access());
    // a reply to an access does not count as sensing
    c.record(ActionChoice::access(0), true);
    assert!(!csma_cd_action(&mut c).is_access());
}

#[test]
fn csma_cd_sleeper_keeps_sensing() {
    let mut c = ctx(2, 1, 0);
    c.record(ActionChoice::sense(0), true);
    c.sleep_remaining = 3;
    let acts: Vec<_> = (0..3).map(|_| csma_cd_action(&mut c)).collect();
    assert_eq!(
        acts,
        [ActionChoice::sense(0), ActionChoice::sense(1), ActionChoice::sense(0)]
    );
    assert_eq!(c.sleep_remaining, 0);
    c.record(acts[2], true);
    assert_eq!(csma_cd_action(&mut c), ActionChoice::access(0));
}

#[test]
fn csma_cd_backoff_is_uniform_at_c3() {
    let mut c = ctx(1, 1, 17);
    let n = 80_000;
    let mut counts = [0usize; 8];
    for _ in 0..n {
        c.backoff = 2;
        csma_cd_register_failure(&mut c);
        assert_eq!(c.backoff, 3);
        counts[c.sleep_remaining as usize] += 1;
    }
    // chi-square with 7 degrees of freedom; 24.3 is the 0.999 quantile
    let e = n as f64 / 8.0;
    let chi2: f64 = counts.iter().map(|&k| (k as f64 - e).powi(2) / e).sum();
    assert!(chi2 < 24.3, "{counts:?}");
}

#[test]
fn csma_cd_backoff_exponent_is_capped() {
    let mut c = ctx(1, 1, 1);
    for _ in 0..50 {
        csma_cd_register_failure(&mut c);
        assert!(c.sleep_remaining < 1 << MAX_BACKOFF_EXPONENT);
    }
    assert_eq!(c.backoff, MAX_BACKOFF_EXPONENT);
}

#[test]
fn csma_ca_senses_until_feasible() {
    let mut c = ctx(1, 1, 0);
    c.record(ActionChoice::sense(0), false);
    assert_eq!(csma_ca_action(&mut c), ActionChoice::sense(0));
}

#[test]
fn csma_ca_alternates_on_feasible_replies() {
    let mut c = ctx(1, 1, 0);
    let mut trace = Vec::new();
    for _ in 0..6 {
        let a = csma_ca_action(&mut c);
        trace.push(a);
        c.record(a, true);
    }
    let s = ActionChoice::sense(0);
    let a = ActionChoice::access(0);
    assert_eq!(trace, vec![s, a, s, a, s, a]);
}

#[test]
fn random_policy_is_uniform() {
    for n_bs in [1, 2] {
        let mut c = ctx(n_bs, 1, 9);
        let n = 100_000;
        let mut counts = vec![0usize; 2 * n_bs];
        for _ in 0..n {
            counts[random_action(&mut c).ordinal()] += 1;
        }
        let p = 1.0 / (2 * n_bs) as f64;
        for k in counts {
            assert!((k as f64 / n as f64 - p).abs() < 0.01);
        }
    }
}

/// Replays an agent against observations derived from a fixed stream.
fn trace(kind: PolicyKind, seed: u64) -> Vec<ActionChoice> {
    let model = EhModel::build(two_bs()).unwrap();
    let prepared = Planner::prepare(kind, &model, &SolverConfig::default()).unwrap();
    let mut agent = Agent::new(
        &model,
        &prepared.planner,
        Belief::uniform(model.n_states()),
        ChaCha8Rng::seed_from_u64(seed),
    );
    let mut world = ChaCha8Rng::seed_from_u64(99);
    (0..300)
        .map(|_| {
            let a = agent.act();
            let obs = ObservationMsg {
                s_u_o: world.random_range(0..2),
                s_b_o: world.random_range(0..3),
                granted: a.is_access() && world.random_bool(0.5),
            };
            agent.observe(a, &obs).unwrap();
            a
        })
        .collect()
}

#[test]
fn agents_are_deterministic_per_seed() {
    for kind in [PolicyKind::CsmaCd, PolicyKind::CsmaCa, PolicyKind::Random, PolicyKind::Eb] {
        assert_eq!(trace(kind, 5), trace(kind, 5), "{kind}");
    }
    assert_ne!(trace(PolicyKind::Random, 5), trace(PolicyKind::Random, 6));
}

#[test]
fn impossible_observation_is_reseeded_or_refused() {
    let model = EhModel::build(vec![bs(1.0)]).unwrap();
    let prepared = Planner::prepare(PolicyKind::Eb, &model, &SolverConfig::default()).unwrap();
    let start = model.space().encode(&[BsState::new(0, 0)]).unwrap();
    let jump = ObservationMsg { s_u_o: 0, s_b_o: 7, granted: false };

    let mut strict = Agent::new(
        &model,
        &prepared.planner,
        Belief::point(model.n_states(), start),
        ChaCha8Rng::seed_from_u64(0),
    )
    .strict(true);
    let err = strict.observe(ActionChoice::sense(0), &jump).unwrap_err();
    assert!(matches!(err, Error::Inconsistent(_)));

    let mut lenient = Agent::new(
        &model,
        &prepared.planner,
        Belief::point(model.n_states(), start),
        ChaCha8Rng::seed_from_u64(0),
    );
    lenient.observe(ActionChoice::sense(0), &jump).unwrap();
    assert_eq!(lenient.filter_resets(), 1);
    let seen = model.space().encode(&[BsState::new(0, 7)]).unwrap();
    assert_eq!(lenient.ctx.belief.mode(), (seen, 1.0));
}

#[test]
fn reseed_keeps_other_bs_marginal() {
    let model = EhModel::build(two_bs()).unwrap();
    let space = model.space();
    let start = space.encode(&[BsState::new(1, 0), BsState::new(0, 2)]).unwrap();
    let b = Belief::point(model.n_states(), start);
    let a = ActionChoice::sense(0);
    // BS 0 is serving a user with an empty battery: users must drop to zero
    let obs = ObservationMsg { s_u_o: 1, s_b_o: 2, granted: false };
    let o = model.observation_index(0, &obs);
    assert!(belief_update(&b, a.ordinal(), o, model.tables()).is_err());
    let post = reseed(&model, &b, a, o);
    let pred = predict(&b, a.ordinal(), model.tables());
    for l1 in 0..space.local_size(1) {
        let marginal: f64 = (0..space.size())
            .filter(|&s| space.local_of(s, 1) == l1)
            .map(|s| pred[s])
            .sum();
        let s = space.encode(&[obs.state(), space.local_state(1, l1)]).unwrap();
        assert!((post.probs[s] - marginal).abs() < 1e-12);
    }
}

proptest! {
    #[test]
    fn eb_terms_respect_cap(s_u in 0usize..4, s_b in 0usize..8, mu_s in 0.0f64..4.0, access: bool) {
        let cfg = bs(mu_s);
        let model = EhModel::build(vec![cfg.clone()]).unwrap();
        let s = model.space().state(vec![BsState::new(s_u, s_b)]).unwrap();
        let a = if access { ActionChoice::access(0) } else { ActionChoice::sense(0) };
        let e_t = crate::model::transmit_levels(s.per_bs[0], model.granted(&s, a)) as f64 * cfg.quantum();
        let term = eb_terms(&s, a, &model).per_bs[0];
        prop_assert!(term >= 0.0);
        prop_assert!(term <= e_t + cfg.capacity());
    }

    #[test]
    fn eb_harvest_monotone_in_intensity(
        raw in prop::collection::vec(0.0f64..1.0, 32),
        lo in 0.0f64..3.0,
        step in 0.0f64..1.0,
        ordinal in 0usize..2,
    ) {
        let total: f64 = raw.iter().sum::<f64>() + 1e-9;
        let b = Belief { probs: raw.iter().map(|x| (x + 1e-9 / 32.0) / total).collect() };
        let a = ActionChoice::from_ordinal(ordinal);
        let low = EhModel::build(vec![bs(lo)]).unwrap();
        let high = EhModel::build(vec![bs(lo + step)]).unwrap();
        prop_assert!(eb_expected_harvest(&b, a, &high) >= eb_expected_harvest(&b, a, &low) - 1e-15);
    }
}
