use rand::Rng;
use rand_distr::StandardNormal;
use statrs::function::erf::erfc;

use super::types::SolarModel;

const INV_SQRT_2PI: f64 = 0.398_942_280_401_432_7;

/// Standard normal CDF.
pub(crate) fn norm_cdf(z: f64) -> f64 {
    0.5 * erfc(-z / std::f64::consts::SQRT_2)
}

pub(crate) fn norm_pdf(z: f64) -> f64 {
    INV_SQRT_2PI * (-0.5 * z * z).exp()
}

/// Per-slot harvested energy: a Gaussian in joules, clipped at zero with the
/// negative mass lumped onto `E_H = 0`.
///
/// A zero standard deviation is a point mass at `max(mean, 0)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Harvest {
    pub mean: f64,
    pub std: f64,
}

impl Harvest {
    pub fn new(mean: f64, std: f64) -> Self {
        debug_assert!(std >= 0.0);
        Self { mean, std }
    }

    pub fn is_degenerate(&self) -> bool {
        self.std == 0.0
    }

    /// Probability that the unclipped Gaussian is at or below zero.
    pub fn mass_at_zero(&self) -> f64 {
        if self.is_degenerate() {
            return if self.mean <= 0.0 { 1.0 } else { 0.0 };
        }
        norm_cdf(-self.mean / self.std)
    }

    /// Density of the continuous part at `e > 0`.
    pub fn density(&self, e: f64) -> f64 {
        if self.is_degenerate() {
            return 0.0;
        }
        norm_pdf((e - self.mean) / self.std) / self.std
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let z: f64 = rng.sample(StandardNormal);
        (self.mean + self.std * z).max(0.0)
    }

    /// `E[min(E_H, cap)]` in closed form; a negative cap is treated as zero.
    pub fn expected_min(&self, cap: f64) -> f64 {
        if cap <= 0.0 {
            return 0.0;
        }
        if self.is_degenerate() {
            return self.mean.clamp(0.0, cap);
        }
        let (m, s) = (self.mean, self.std);
        let a = -m / s;
        let c = (cap - m) / s;
        let body = m * (norm_cdf(c) - norm_cdf(a)) + s * (norm_pdf(a) - norm_pdf(c));
        (body + cap * (1.0 - norm_cdf(c))).max(0.0)
    }
}

/// Mean and standard deviation of the harvested energy per slot, in joules.
pub fn harvest_moments(solar: &SolarModel) -> Harvest {
    let k = solar.joules_per_intensity();
    Harvest::new(solar.mu_s * k, solar.sigma_s * k)
}
