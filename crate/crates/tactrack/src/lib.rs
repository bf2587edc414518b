//! Rigid-body 6D pose tracking from tactile contact kinematics.
//!
//! The toolkit estimates an object's twist (linear + angular velocity) from
//! contact-point positions and velocities, integrates those twists into a
//! kinematics-only pose track, and fuses them with per-frame pose hypotheses
//! from an external (visual) tracker through a sliding-window optimization
//! that keeps consecutive poses consistent with the estimated twists while
//! pulling the window toward the hypotheses.
//!
//! Module map:
//! - [`geom`]: rotations, poses, twists, Rodrigues exponential, rotation
//!   distances.
//! - [`kinematics`]: twist estimation from contact observations via
//!   alternating least squares.
//! - [`optim`]: a small Adam-style minimizer with finite-difference fallback
//!   and a gradient checker.
//! - [`tracker`]: pose integration, the sliding-window objective, and the
//!   three tracking modes (kinematics-only, visual-only, fused).
//! - [`sim`]: synthetic trajectory, contact, and hypothesis generation with
//!   seeded noise models.
//! - [`dataset`]: the on-disk JSON trajectory format and pose files.
//! - [`metrics`]: rotation/translation error metrics and their aggregates.
//! - [`experiment`]: config-driven batch runs, sweeps, and speed measurement.

pub mod dataset;
pub mod experiment;
pub mod geom;
pub mod kinematics;
pub mod metrics;
pub mod optim;
pub mod sim;
pub mod tracker;
