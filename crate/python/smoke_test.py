"""Smoke test for the eh_access extension module.

Build and run from the repository root:

    cargo build --release -p eh-access-py --features extension-module
    cp target/release/libeh_access_py.so python/eh_access.so
    python3 python/smoke_test.py
"""

import math
import os
import sys

sys.path.insert(0, os.path.dirname(os.path.abspath(__file__)))

import eh_access  # noqa: E402


def close(a, b, tol):
    return abs(a - b) <= tol


def main():
    # 1.32 mW * 40 cells * 0.75 * 0.2 s per unit of intensity
    mean, std = eh_access.harvest_moments(1.0, 0.5)
    assert close(mean, 0.00792, 1e-12), mean
    assert close(std, 0.00396, 1e-12), std

    lo, probs = eh_access.battery_delta_dist(1, 1.0, 0.5)
    assert lo <= 0 and close(sum(probs), 1.0, 1e-12), (lo, probs)

    single = eh_access.Model.single_bs(0.4, 1.0)
    assert single.n_states == 32 and single.n_actions == 2
    for a in range(single.n_actions):
        for row in single.transition(a):
            assert close(sum(row), 1.0, 1e-8)
    assert "states:" in single.export()

    policy = single.solve()
    assert policy.converged and len(policy) >= 1
    assert policy.residuals[-1] <= 1e-6
    uniform = [1.0 / single.n_states] * single.n_states
    assert policy.best_action(uniform) in range(single.n_actions)
    assert policy.value(uniform) > 0.0
    assert policy.save().splitlines()[1].startswith("model_hash ")

    pair = eh_access.Model.two_bs(0.6, 1.0)
    assert pair.n_states == 36 and pair.n_observations == 6
    post = pair.belief_update([1.0 / 36] * 36, 1, 5)
    assert close(sum(post), 1.0, 1e-9) and min(post) >= 0.0

    r = pair.run_trial("eb", trial=0, n_t=2000)
    assert r["n_slots"] == 2000
    assert 0.0 <= r["eta_a"] <= 1.0
    assert r["n_success"] <= r["feasible_slots"]
    assert r == pair.run_trial("eb", trial=0, n_t=2000)

    try:
        pair.run_trial("aloha")
    except ValueError as e:
        assert "csma_cd" in str(e)
    else:
        raise AssertionError("unknown policy accepted")

    tweaked = eh_access.Model.from_toml(single.to_toml(), ["bs.0.lambda=0.2"])
    assert tweaked.config_hash() != single.config_hash()
    assert not math.isnan(tweaked.solve().value(uniform))

    print("eh_access smoke test: ok")


if __name__ == "__main__":
    main()
