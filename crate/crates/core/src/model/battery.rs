//! Battery quantization and the level-change law.
//!
//! Inside a level the residual charge is taken to be uniform on `[0, ε_T)`,
//! so a real change of `x` quanta moves the level by `⌊x⌋` or `⌊x⌋ + 1` with
//! probabilities linear in the fractional part. Averaging that tent-shaped
//! kernel against the clipped Gaussian harvest gives the per-slot level-delta
//! distribution used by the transition tables.

use super::harvest::{harvest_moments, norm_pdf, Harvest};
use super::types::{BsConfig, BsState};
use super::users::transmit_levels;
use crate::error::{Error, Result};
use crate::quadrature::GaussLegendre;

/// Deltas whose probability is below this at either tail are dropped.
pub const DELTA_TAIL_CUTOFF: f64 = 1e-4;

/// Gaussian support is clipped to `mean ± GAUSS_SPAN · std`.
const GAUSS_SPAN: f64 = 12.0;
const QUAD_ORDER: usize = 16;
const QUAD_TOL: f64 = 1e-13;
const MAX_PANELS: usize = 1 << 12;

pub fn discretize_battery(q_b: f64, cfg: &BsConfig) -> Result<usize> {
    let cap = cfg.capacity();
    if !(q_b >= 0.0) || q_b > cap * (1.0 + 1e-12) {
        return Err(Error::Domain(format!(
            "battery charge {q_b} J outside [0, {cap}] J"
        )));
    }
    let level = (q_b / cfg.quantum()).floor() as usize;
    Ok(level.min(cfg.n_b - 1))
}

/// Probability that the level moves by `delta` given a harvest `e_h` and a
/// consumption `e_t` (both joules) and quantum `eps`.
pub fn battery_delta_given_harvest(delta: i64, e_h: f64, e_t: f64, eps: f64) -> f64 {
    let x = (e_h - e_t) / eps;
    let j = x.floor();
    let frac = x - j;
    let j = j as i64;
    if delta == j + 1 {
        frac
    } else if delta == j {
        1.0 - frac
    } else {
        0.0
    }
}

/// A distribution over consecutive integer level deltas.
#[derive(Clone, Debug, PartialEq)]
pub struct DeltaDist {
    pub min_delta: i64,
    pub probs: Vec<f64>,
}

impl DeltaDist {
    pub fn max_delta(&self) -> i64 {
        self.min_delta + self.probs.len() as i64 - 1
    }

    pub fn get(&self, delta: i64) -> f64 {
        let i = delta - self.min_delta;
        if i < 0 {
            return 0.0;
        }
        self.probs.get(i as usize).copied().unwrap_or(0.0)
    }

    pub fn iter(&self) -> impl Iterator<Item = (i64, f64)> + '_ {
        self.probs
            .iter()
            .enumerate()
            .map(move |(i, &p)| (self.min_delta + i as i64, p))
    }

    pub fn total(&self) -> f64 {
        self.probs.iter().sum()
    }

    /// Drops tail entries below `cutoff` and renormalizes.
    pub fn trimmed(mut self, cutoff: f64) -> Self {
        while self.probs.len() > 1 && self.probs[self.probs.len() - 1] < cutoff {
            self.probs.pop();
        }
        let lead = self
            .probs
            .iter()
            .take(self.probs.len() - 1)
            .take_while(|&&p| p < cutoff)
            .count();
        self.probs.drain(..lead);
        self.min_delta += lead as i64;
        let total = self.total();
        for p in &mut self.probs {
            *p /= total;
        }
        self
    }

    /// Distribution of the next level starting from `s_b`, saturating at
    /// both ends of `0..n_b`.
    pub fn level_distribution(&self, s_b: usize, n_b: usize) -> Vec<f64> {
        let mut out = vec![0.0; n_b];
        let top = n_b as i64 - 1;
        for (delta, p) in self.iter() {
            let next = (s_b as i64 + delta).clamp(0, top);
            out[next as usize] += p;
        }
        out
    }
}

/// Unit bands `x ∈ [k, k+1]` of `x = (E_H − E_T)/ε_T` and the two linear
/// moments of the harvest density over each band.
struct BandMoments {
    first_band: i64,
    /// `∫ (k + 1 − x) dF` per band
    lower: Vec<f64>,
    /// `∫ (x − k) dF` per band
    upper: Vec<f64>,
}

fn band_moments(
    harvest: &Harvest,
    e_t: f64,
    eps: f64,
    first_band: i64,
    last_band: i64,
    gl: &GaussLegendre,
    panels: usize,
) -> BandMoments {
    let n = (last_band - first_band + 1).max(0) as usize;
    let mut lower = vec![0.0; n];
    let mut upper = vec![0.0; n];
    if !harvest.is_degenerate() {
        let support_lo = (harvest.mean - GAUSS_SPAN * harvest.std).max(0.0);
        let support_hi = harvest.mean + GAUSS_SPAN * harvest.std;
        for (i, k) in (first_band..=last_band).enumerate() {
            let band_lo = e_t + k as f64 * eps;
            let lo = band_lo.max(support_lo);
            let hi = (band_lo + eps).min(support_hi);
            if hi <= lo {
                continue;
            }
            let kf = k as f64;
            // integrate in standard-normal units so narrow harvests stay well conditioned
            let (m, sd) = (harvest.mean, harvest.std);
            let x_of = |z: f64| (m + sd * z - e_t) / eps;
            let (z_lo, z_hi) = ((lo - m) / sd, (hi - m) / sd);
            lower[i] = gl.integrate(|z| (kf + 1.0 - x_of(z)) * norm_pdf(z), z_lo, z_hi, panels);
            upper[i] = gl.integrate(|z| (x_of(z) - kf) * norm_pdf(z), z_lo, z_hi, panels);
        }
    }
    BandMoments {
        first_band,
        lower,
        upper,
    }
}

fn assemble(
    harvest: &Harvest,
    e_t: f64,
    eps: f64,
    bands: &BandMoments,
    min_delta: i64,
    max_delta: i64,
) -> DeltaDist {
    let zero_mass = harvest.mass_at_zero();
    let band = |k: i64, v: &Vec<f64>| -> f64 {
        let i = k - bands.first_band;
        if i < 0 {
            0.0
        } else {
            v.get(i as usize).copied().unwrap_or(0.0)
        }
    };
    let point = if harvest.is_degenerate() {
        (harvest.mean.max(0.0), 1.0)
    } else {
        (0.0, zero_mass)
    };
    let probs = (min_delta..=max_delta)
        .map(|delta| {
            band(delta - 1, &bands.upper)
                + band(delta, &bands.lower)
                + point.1 * battery_delta_given_harvest(delta, point.0, e_t, eps)
        })
        .collect();
    DeltaDist { min_delta, probs }
}

fn delta_range(harvest: &Harvest, levels: usize, eps: f64) -> (i64, i64) {
    let e_t = levels as f64 * eps;
    let top = (harvest.mean + GAUSS_SPAN * harvest.std).max(0.0);
    let last_band = ((top - e_t) / eps).ceil() as i64;
    (-(levels as i64), last_band.max(-(levels as i64)) + 1)
}

/// Level-delta distribution when `e_t_levels` quanta are consumed, with the
/// quadrature refined until successive estimates agree.
pub fn battery_delta_dist(e_t_levels: usize, cfg: &BsConfig) -> Result<DeltaDist> {
    let harvest = harvest_moments(&cfg.solar);
    let eps = cfg.quantum();
    let e_t = e_t_levels as f64 * eps;
    let (min_delta, max_delta) = delta_range(&harvest, e_t_levels, eps);
    let gl = GaussLegendre::new(QUAD_ORDER);
    let mut panels = 1;
    let mut prev = band_moments(&harvest, e_t, eps, min_delta - 1, max_delta, &gl, panels);
    loop {
        panels *= 2;
        let next = band_moments(&harvest, e_t, eps, min_delta - 1, max_delta, &gl, panels);
        let change = prev
            .lower
            .iter()
            .zip(&next.lower)
            .chain(prev.upper.iter().zip(&next.upper))
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        if change <= QUAD_TOL {
            let raw = assemble(&harvest, e_t, eps, &next, min_delta, max_delta);
            return Ok(raw.trimmed(DELTA_TAIL_CUTOFF));
        }
        if panels >= MAX_PANELS {
            return Err(Error::Internal(format!(
                "level-delta quadrature did not converge: change {change:e} with {panels} panels \
                 (mean {} J, std {} J, E_T {e_t} J)",
                harvest.mean, harvest.std
            )));
        }
        prev = next;
    }
}

/// Same as [`battery_delta_dist`] with a fixed number of quadrature panels per
/// band; used to check step-size convergence.
pub fn battery_delta_dist_with_panels(
    e_t_levels: usize,
    cfg: &BsConfig,
    panels: usize,
) -> DeltaDist {
    let harvest = harvest_moments(&cfg.solar);
    let eps = cfg.quantum();
    let e_t = e_t_levels as f64 * eps;
    let (min_delta, max_delta) = delta_range(&harvest, e_t_levels, eps);
    let gl = GaussLegendre::new(QUAD_ORDER);
    let bands = band_moments(&harvest, e_t, eps, min_delta - 1, max_delta, &gl, panels);
    assemble(&harvest, e_t, eps, &bands, min_delta, max_delta).trimmed(DELTA_TAIL_CUTOFF)
}

/// Per-BS cache of the level-delta distributions for every consumption the
/// BS can incur.
#[derive(Clone, Debug)]
pub struct DeltaTable {
    dists: Vec<DeltaDist>,
}

impl DeltaTable {
    pub fn build(cfg: &BsConfig) -> Result<Self> {
        let max_levels = (cfg.n_u - 1).min(cfg.n_b - 1);
        let dists = (0..=max_levels)
            .map(|l| battery_delta_dist(l, cfg))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { dists })
    }

    pub fn for_levels(&self, e_t_levels: usize) -> &DeltaDist {
        &self.dists[e_t_levels]
    }
}

/// Probability of reaching level `s_b_next` from `s` in one slot.
pub fn battery_transition(
    s_b_next: usize,
    s: BsState,
    granted: bool,
    cfg: &BsConfig,
) -> Result<f64> {
    if s_b_next >= cfg.n_b {
        return Ok(0.0);
    }
    let dist = battery_delta_dist(transmit_levels(s, granted), cfg)?;
    Ok(dist.level_distribution(s.s_b, cfg.n_b)[s_b_next])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::types::SolarModel;

    fn cfg_with(mean_quanta: f64, std_quanta: f64) -> BsConfig {
        // p_t * t_l = 0.008 J; scale solar so that mean/std land on the given multiples
        let mut solar = SolarModel::reference(1.0, 1.0);
        let k = solar.joules_per_intensity();
        solar.mu_s = mean_quanta * 0.008 / k;
        solar.sigma_s = std_quanta * 0.008 / k;
        BsConfig {
            n_u: 4,
            n_b: 8,
            p_t: 0.04,
            lambda: 0.4,
            mu: 0.05,
            solar,
            reserve_levels: 1,
        }
    }

    fn reference_cfg() -> BsConfig {
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
    fn discretize_examples() {
        let cfg = reference_cfg();
        assert_eq!(discretize_battery(0.0, &cfg).unwrap(), 0);
        assert_eq!(discretize_battery(cfg.capacity(), &cfg).unwrap(), 7);
        assert!((cfg.quantum() - 0.008).abs() < 1e-15);
        assert_eq!(discretize_battery(0.0123, &cfg).unwrap(), 1);
    }

    #[test]
    fn discretize_rejects_out_of_range() {
        let cfg = reference_cfg();
        assert!(matches!(discretize_battery(-1e-6, &cfg), Err(Error::Domain(_))));
        assert!(matches!(discretize_battery(0.1, &cfg), Err(Error::Domain(_))));
    }

    #[test]
    fn delta_given_harvest_examples() {
        let eps = 0.008;
        assert!((battery_delta_given_harvest(1, 0.5 * eps, 0.0, eps) - 0.5).abs() < 1e-12);
        assert!((battery_delta_given_harvest(0, 0.5 * eps, 0.0, eps) - 0.5).abs() < 1e-12);
        assert_eq!(battery_delta_given_harvest(0, 2.0 * eps, 2.0 * eps, eps), 1.0);
        assert_eq!(battery_delta_given_harvest(1, 2.0 * eps, 2.0 * eps, eps), 0.0);
        // e_h - e_t = -1.25 quanta: j = -2
        let (e_h, e_t) = (0.75 * eps, 2.0 * eps);
        assert!((battery_delta_given_harvest(-1, e_h, e_t, eps) - 0.75).abs() < 1e-12);
        assert!((battery_delta_given_harvest(-2, e_h, e_t, eps) - 0.25).abs() < 1e-12);
        let total: f64 = (-4..=2)
            .map(|d| battery_delta_given_harvest(d, e_h, e_t, eps))
            .sum();
        assert!((total - 1.0).abs() < 1e-12);
    }

    #[test]
    fn narrow_harvest_reduces_to_point_law() {
        // mean = E_T + 0.5 quanta with one level consumed, std tiny
        let cfg = cfg_with(1.5, 1e-9);
        let d = battery_delta_dist(1, &cfg).unwrap();
        assert!((d.get(0) - 0.5).abs() < 1e-6, "{d:?}");
        assert!((d.get(1) - 0.5).abs() < 1e-6, "{d:?}");
    }

    #[test]
    fn zero_harvest_only_drains() {
        let mut cfg = reference_cfg();
        cfg.solar.p_h = 0.0;
        let d = battery_delta_dist(2, &cfg).unwrap();
        assert_eq!(d.min_delta, -2);
        assert_eq!(d.probs, vec![1.0]);
    }

    #[test]
    fn distributions_are_normalized() {
        for (m, s) in [(0.0, 0.3), (0.99, 0.495), (2.5, 1.2), (0.2, 3.0), (6.0, 0.01)] {
            let cfg = cfg_with(m, s);
            for l in 0..4 {
                let d = battery_delta_dist(l, &cfg).unwrap();
                assert!((d.total() - 1.0).abs() < 1e-9);
                assert!(d.min_delta >= -(l as i64));
                assert!(d.probs.iter().all(|&p| p >= DELTA_TAIL_CUTOFF || d.probs.len() == 1));
            }
        }
    }

    #[test]
    fn saturating_top_level_absorbs_tail() {
        let cfg = cfg_with(3.0, 0.5);
        let d = battery_delta_dist(0, &cfg).unwrap();
        let row = d.level_distribution(cfg.n_b - 1, cfg.n_b);
        let positive: f64 = d.iter().filter(|(k, _)| *k >= 0).map(|(_, p)| p).sum();
        assert!((row[cfg.n_b - 1] - positive).abs() < 1e-12);
        assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn transition_rows_sum_to_one() {
        let cfg = reference_cfg();
        for s_u in 0..cfg.n_u {
            for s_b in 0..cfg.n_b {
                for granted in [false, true] {
                    let s = BsState::new(s_u, s_b);
                    let total: f64 = (0..cfg.n_b)
                        .map(|n| battery_transition(n, s, granted, &cfg).unwrap())
                        .sum();
                    assert!((total - 1.0).abs() < 1e-9);
                }
            }
        }
    }
}
