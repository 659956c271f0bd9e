use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Solar harvest statistics and the harvesting device that converts them into
/// energy per slot.
///
/// Intensities are in multiples of the reference intensity (1 kW/m²).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolarModel {
    pub mu_s: f64,
    pub sigma_s: f64,
    /// Harvested power per unit of reference intensity, in watts.
    pub p_h: f64,
    pub omega_s: u32,
    pub eta_h: f64,
    /// Slot length in seconds.
    pub t_l: f64,
}

impl SolarModel {
    /// Device constants used throughout the single- and two-BS studies:
    /// 1.32 mW per reference intensity, 40 cells, 75 % efficiency, 200 ms slots.
    pub fn reference(mu_s: f64, sigma_s: f64) -> Self {
        Self {
            mu_s,
            sigma_s,
            p_h: 1.32e-3,
            omega_s: 40,
            eta_h: 0.75,
            t_l: 0.2,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::Config(format!("solar: {msg}")));
        if !(self.sigma_s > 0.0) || !self.sigma_s.is_finite() {
            return bad("sigma_s must be finite and > 0");
        }
        if !(self.eta_h > 0.0 && self.eta_h <= 1.0) {
            return bad("eta must lie in (0, 1]");
        }
        if self.omega_s < 1 {
            return bad("omega_s must be >= 1");
        }
        if !(self.t_l > 0.0) || !self.t_l.is_finite() {
            return bad("t_l_seconds must be finite and > 0");
        }
        if !(self.mu_s >= 0.0) || !self.mu_s.is_finite() {
            return bad("mu_s must be finite and >= 0");
        }
        if !(self.p_h >= 0.0) || !self.p_h.is_finite() {
            return bad("p_h_watts must be finite and >= 0");
        }
        Ok(())
    }

    /// Joules per slot harvested per unit of intensity.
    pub fn joules_per_intensity(&self) -> f64 {
        self.p_h * f64::from(self.omega_s) * self.eta_h * self.t_l
    }
}

/// Static parameters of one base station.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BsConfig {
    /// Number of user-count states; users range over `0..n_u`.
    pub n_u: usize,
    /// Number of battery levels; levels range over `0..n_b`.
    pub n_b: usize,
    /// Transmit power for one user, in watts.
    pub p_t: f64,
    pub lambda: f64,
    pub mu: f64,
    pub solar: SolarModel,
    pub reserve_levels: usize,
}

impl BsConfig {
    pub fn validate(&self) -> Result<()> {
        self.solar.validate()?;
        let bad = |msg: String| Err(Error::Config(msg));
        if self.n_u < 1 {
            return bad("n_u must be >= 1".into());
        }
        if self.n_b < 2 {
            return bad("n_b must be >= 2".into());
        }
        if !(self.p_t > 0.0) || !self.p_t.is_finite() {
            return bad("p_t_watts must be finite and > 0".into());
        }
        if !(self.lambda >= 0.0) || !(self.mu >= 0.0) {
            return bad("lambda and mu must be >= 0".into());
        }
        let worst = self.lambda + self.mu * (self.n_u - 1) as f64;
        if worst > 1.0 + 1e-12 {
            return bad(format!(
                "lambda + mu*(n_u-1) = {worst} exceeds 1; user transition is not a distribution"
            ));
        }
        Ok(())
    }

    /// Energy that serves one user for one slot (joules).
    pub fn quantum(&self) -> f64 {
        self.p_t * self.solar.t_l
    }

    /// Battery volume B_M in joules.
    pub fn capacity(&self) -> f64 {
        (self.n_b - 1) as f64 * self.quantum()
    }

    pub fn local_states(&self) -> usize {
        self.n_u * self.n_b
    }

    pub fn contains(&self, s: BsState) -> bool {
        s.s_u < self.n_u && s.s_b < self.n_b
    }
}

/// User count and battery level of a single base station.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct BsState {
    pub s_u: usize,
    pub s_b: usize,
}

impl BsState {
    pub const fn new(s_u: usize, s_b: usize) -> Self {
        Self { s_u, s_b }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ActionKind {
    Access,
    Sense,
}

/// One of the `2 * N_A` per-slot choices of the rational user.
///
/// Ordinals interleave by target: `Access(0), Sense(0), Access(1), Sense(1), ...`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct ActionChoice {
    pub kind: ActionKind,
    pub target: usize,
}

impl ActionChoice {
    pub const fn access(target: usize) -> Self {
        Self {
            kind: ActionKind::Access,
            target,
        }
    }

    pub const fn sense(target: usize) -> Self {
        Self {
            kind: ActionKind::Sense,
            target,
        }
    }

    pub fn ordinal(self) -> usize {
        2 * self.target
            + match self.kind {
                ActionKind::Access => 0,
                ActionKind::Sense => 1,
            }
    }

    pub fn from_ordinal(ordinal: usize) -> Self {
        let target = ordinal / 2;
        if ordinal.is_multiple_of(2) {
            Self::access(target)
        } else {
            Self::sense(target)
        }
    }

    pub fn all(n_bs: usize) -> Vec<Self> {
        (0..2 * n_bs).map(Self::from_ordinal).collect()
    }

    pub fn is_access(self) -> bool {
        self.kind == ActionKind::Access
    }

    /// Short name used in exported files and CSVs, e.g. `access0`.
    pub fn label(self) -> String {
        match self.kind {
            ActionKind::Access => format!("access{}", self.target),
            ActionKind::Sense => format!("sense{}", self.target),
        }
    }
}

impl std::fmt::Display for ActionChoice {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.label())
    }
}

/// Short message returned by the target BS: its state in the next slot.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ObservationMsg {
    pub s_u_o: usize,
    pub s_b_o: usize,
    pub granted: bool,
}

impl ObservationMsg {
    pub fn state(&self) -> BsState {
        BsState::new(self.s_u_o, self.s_b_o)
    }
}

/// What the rational user's action does to one particular BS in a slot.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BsEffect {
    Granted,
    Denied,
    Sensed,
    Untouched,
}

impl BsEffect {
    pub fn granted(self) -> bool {
        self == BsEffect::Granted
    }
}
