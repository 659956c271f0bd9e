//! Admission, consumption and the user birth-death law.

use super::types::{BsConfig, BsEffect, BsState};

/// Whether an access request from the rational user would be granted.
///
/// Needs a free service slot and charge for one more user, and an idle BS at
/// or below its reserve refuses new users.
pub fn access_feasible(s: BsState, cfg: &BsConfig) -> bool {
    let has_room = s.s_u + 1 < cfg.n_u;
    let has_charge = s.s_b > s.s_u;
    let protected = s.s_u == 0 && s.s_b <= cfg.reserve_levels;
    has_room && has_charge && !protected
}

/// Battery levels spent this slot. Best effort when the battery is short.
pub fn transmit_levels(s: BsState, granted: bool) -> usize {
    (s.s_u + usize::from(granted)).min(s.s_b)
}

/// The battery cannot carry the users currently being served.
pub fn depleted(s: BsState) -> bool {
    s.s_b < s.s_u
}

/// Probability of `s_u_next` users in the next slot.
///
/// A depleted BS drops everybody. Otherwise at most one arrival (blocked at
/// capacity) or one departure happens, and the remaining mass stays put. The
/// rational user never joins the served population, so `effect` does not
/// change the law.
pub fn user_transition(s_u_next: usize, s: BsState, _effect: BsEffect, cfg: &BsConfig) -> f64 {
    if depleted(s) {
        return if s_u_next == 0 { 1.0 } else { 0.0 };
    }
    let can_arrive = s.s_u + 1 < cfg.n_u;
    let arrive = if can_arrive { cfg.lambda } else { 0.0 };
    let depart = cfg.mu * s.s_u as f64;
    if can_arrive && s_u_next == s.s_u + 1 {
        arrive
    } else if s.s_u > 0 && s_u_next + 1 == s.s_u {
        depart
    } else if s_u_next == s.s_u {
        1.0 - arrive - depart
    } else {
        0.0
    }
}
