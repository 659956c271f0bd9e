use rand::Rng;

use crate::model::ActionChoice;

use super::PolicyContext;

/// Cap on the backoff exponent so the sleep window stays below 1024 slots.
pub const MAX_BACKOFF_EXPONENT: u32 = 10;

/// Access a BS only right after sensing it available; otherwise sense the
/// next BS in rotation.
fn access_if_just_sensed(ctx: &mut PolicyContext) -> ActionChoice {
    match ctx.last_action {
        Some(a) if !a.is_access() && ctx.last_known_feasible[a.target] == Some(true) => {
            ActionChoice::access(a.target)
        }
        _ => ActionChoice::sense(ctx.next_round_robin()),
    }
}

/// Sense-before-access with exponential backoff after failed requests.
/// A sleeping user keeps sensing in rotation but never requests access.
pub fn csma_cd_action(ctx: &mut PolicyContext) -> ActionChoice {
    if ctx.sleep_remaining > 0 {
        ctx.sleep_remaining -= 1;
        return ActionChoice::sense(ctx.next_round_robin());
    }
    access_if_just_sensed(ctx)
}

/// Counts one more failure and draws the sleep length from
/// `{0, …, 2^c − 1}`.
pub fn csma_cd_register_failure(ctx: &mut PolicyContext) {
    ctx.backoff = (ctx.backoff + 1).min(MAX_BACKOFF_EXPONENT);
    ctx.sleep_remaining = ctx.rng.random_range(0..1u64 << ctx.backoff);
}

/// Sense-before-access without backoff.
pub fn csma_ca_action(ctx: &mut PolicyContext) -> ActionChoice {
    access_if_just_sensed(ctx)
}
