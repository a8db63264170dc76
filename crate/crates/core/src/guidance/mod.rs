//! Guidance velocities, RK4 trajectory integration and the divergence-free
//! modification of the guidance law.

mod modified;
mod trajectory;
mod velocity;

pub use modified::{build_divergence_free, build_divergence_free_with, ModifiedGuidance};
pub use trajectory::{
    advance_ensemble, advance_trajectory, FlowSlab, TrajectoryLog, TrajectoryState, MAX_REFINEMENTS,
};
pub use velocity::{velocity_from_branches, velocity_from_psi, velocity_from_psi_with, VelocityField};
