//! Energy-harvesting network model: domain types, the per-BS battery and
//! user laws, and the joint POMDP tables built from them.

mod battery;
mod harvest;
mod space;
mod system;
mod types;
mod users;

pub use battery::{
    battery_delta_dist, battery_delta_dist_with_panels, battery_delta_given_harvest,
    battery_transition, discretize_battery, DeltaDist, DeltaTable, DELTA_TAIL_CUTOFF,
};
pub use harvest::{harvest_moments, Harvest};
pub use space::{StateSpace, SystemState};
pub use system::{bs_joint_transition, resolve_effect, BsKernel, EhModel, DEFAULT_STATE_LIMIT};
pub use types::{
    ActionChoice, ActionKind, BsConfig, BsEffect, BsState, ObservationMsg, SolarModel,
};
pub use users::{access_feasible, depleted, transmit_levels, user_transition};
