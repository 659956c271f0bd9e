//! Reference computations shared by the integration tests. Nothing here calls
//! into the library's quadrature or harvest code.

#![allow(dead_code)]

use eh_access::model::{BsConfig, SolarModel};

/// Energy per served user per slot for the reference device (40 mW, 200 ms).
pub const QUANTUM: f64 = 0.008;

/// Reference-device BS whose per-slot harvest has the given mean and
/// standard deviation, both in battery quanta.
pub fn bs_with_harvest(n_u: usize, n_b: usize, mean_quanta: f64, std_quanta: f64) -> BsConfig {
    // 1.32 mW * 40 cells * 0.75 * 0.2 s per unit intensity
    let joules_per_unit = 1.32e-3 * 40.0 * 0.75 * 0.2;
    BsConfig {
        n_u,
        n_b,
        p_t: 0.04,
        lambda: 0.4,
        mu: 0.05,
        solar: SolarModel::reference(
            mean_quanta * QUANTUM / joules_per_unit,
            std_quanta * QUANTUM / joules_per_unit,
        ),
        reserve_levels: 1,
    }
}

/// Level-delta law by brute-force trapezoid integration of the tent kernel
/// against the clipped Gaussian, with `points` nodes on the positive part.
/// Returns `(min_delta, probs)` after dropping tail entries below `cutoff`.
pub fn trapezoid_delta_dist(
    mean: f64,
    std: f64,
    e_t: f64,
    eps: f64,
    points: usize,
    cutoff: f64,
) -> (i64, Vec<f64>) {
    let pdf = |e: f64| {
        let z = (e - mean) / std;
        (-0.5 * z * z).exp() / (std * (2.0 * std::f64::consts::PI).sqrt())
    };
    let trapezoid = |lo: f64, hi: f64, f: &mut dyn FnMut(f64, f64)| {
        if hi <= lo {
            return;
        }
        let h = (hi - lo) / points as f64;
        for i in 0..=points {
            let w = if i == 0 || i == points { 0.5 * h } else { h };
            f(lo + i as f64 * h, w);
        }
    };
    let span = 14.0 * std;
    let top = (mean + span).max(0.0);
    let lo_delta = -((e_t / eps).round() as i64) - 1;
    let hi_delta = ((top - e_t) / eps).ceil() as i64 + 2;
    let mut probs = vec![0.0; (hi_delta - lo_delta + 1) as usize];
    let mut deposit = |e: f64, mass: f64| {
        let x = (e - e_t) / eps;
        let j = x.floor();
        let frac = x - j;
        let i = (j as i64 - lo_delta) as usize;
        probs[i] += mass * (1.0 - frac);
        probs[i + 1] += mass * frac;
    };
    let mut zero_mass = 0.0;
    trapezoid((mean - span).min(0.0), 0.0, &mut |e, w| zero_mass += w * pdf(e));
    deposit(0.0, zero_mass);
    trapezoid(0.0, top, &mut |e, w| deposit(e, w * pdf(e)));

    let mut start = 0;
    while start + 1 < probs.len() && probs[start] < cutoff {
        start += 1;
    }
    let mut end = probs.len();
    while end - 1 > start && probs[end - 1] < cutoff {
        end -= 1;
    }
    let kept = &probs[start..end];
    let total: f64 = kept.iter().sum();
    (lo_delta + start as i64, kept.iter().map(|p| p / total).collect())
}
