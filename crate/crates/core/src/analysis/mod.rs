//! Verification tools: projections of joint-state policies onto the
//! polynomial relaxations, projection gaps, and the extremal tail bound.

pub mod gap;
pub mod grind;
pub mod projection;

pub use gap::{projection_gap, GapReport};
pub use grind::{beta, grind_bound, grid_sweep, GrindBound, GridSweep};
pub use projection::{check_relaxation, project_policy, ProjectionCertificate};
