mod common;

use common::bs_with_harvest;
use eh_access::config::Scenario;
use eh_access::model::{bs_joint_transition, BsConfig, BsState, EhModel};

fn hand_toy() -> BsConfig {
    BsConfig {
        lambda: 0.3,
        mu: 0.2,
        ..bs_with_harvest(2, 2, 0.5, 1e-3)
    }
}

#[test]
fn two_level_toy_matches_hand_computation() {
    let cfg = hand_toy();
    // rows indexed by (s_u, s_b), columns by s_u' * n_b + s_b'
    let expected = [
        ((0, 0), [0.35, 0.35, 0.15, 0.15]),
        ((0, 1), [0.0, 0.7, 0.0, 0.3]),
        ((1, 0), [0.5, 0.5, 0.0, 0.0]),
        ((1, 1), [0.1, 0.1, 0.4, 0.4]),
    ];
    for ((s_u, s_b), row) in expected {
        let s = BsState::new(s_u, s_b);
        for (col, want) in row.iter().enumerate() {
            let next = BsState::new(col / 2, col % 2);
            let got = bs_joint_transition(next, s, None, &cfg).unwrap();
            assert!((got - want).abs() < 1e-9, "{s:?} -> {next:?}: {got} vs {want}");
        }
    }
    // sensing the only BS leaves its dynamics alone
    let model = EhModel::build(vec![cfg]).unwrap();
    let t = model.tables();
    for (s, (_, row)) in expected.iter().enumerate() {
        for (s_next, want) in row.iter().enumerate() {
            assert!((t.t(1, s, s_next) - want).abs() < 1e-9);
        }
    }
}

fn heterogeneous_pair() -> EhModel {
    let mut bss = Scenario::two_bs(0.6, 1.0).bs_configs();
    bss[1].n_b = 4;
    bss[1].lambda = 0.3;
    EhModel::build(bss).unwrap()
}

#[test]
fn joint_table_is_product_of_per_bs_kernels() {
    for model in [Scenario::two_bs(0.6, 1.0).build_model().unwrap(), heterogeneous_pair()] {
        let space = model.space();
        let t = model.tables();
        for &a in model.actions() {
            for s in 0..space.size() {
                let from = space.decode(s).unwrap();
                for s_next in 0..space.size() {
                    let to = space.decode(s_next).unwrap();
                    let mut want = 1.0;
                    for (i, cfg) in model.bs_configs().iter().enumerate() {
                        let kind = (i == a.target).then_some(a.kind);
                        want *= bs_joint_transition(to.per_bs[i], from.per_bs[i], kind, cfg).unwrap();
                    }
                    let got = t.t(a.ordinal(), s, s_next);
                    assert!((got - want).abs() < 1e-14, "{a} {s} -> {s_next}: {got} vs {want}");
                }
            }
        }
    }
}

#[test]
fn every_transition_row_is_stochastic() {
    for model in [
        Scenario::single_bs(0.4, 1.0).build_model().unwrap(),
        Scenario::two_bs(0.6, 1.0).build_model().unwrap(),
        heterogeneous_pair(),
    ] {
        let t = model.tables();
        for a in 0..t.n_actions() {
            for s in 0..t.n_states() {
                let sum: f64 = t.transition_row(a, s).iter().sum();
                assert!((sum - 1.0).abs() <= 1e-8, "a {a} s {s}: {sum}");
            }
        }
    }
}

#[test]
fn state_encoding_is_a_bijection() {
    let model = heterogeneous_pair();
    let space = model.space();
    assert_eq!(space.size(), 6 * 8);
    for i in 0..space.size() {
        let s = space.decode(i).unwrap();
        assert_eq!(space.encode(&s.per_bs).unwrap(), i);
    }
    assert!(space.decode(space.size()).is_err());
    assert!(space.encode(&[BsState::new(2, 0), BsState::new(0, 0)]).is_err());
}
