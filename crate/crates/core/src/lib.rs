//! Obstacle-aware passive damping control for point-mass agents.
//!
//! The crate is organised bottom-up:
//!
//! - [`geometry`]: star-shaped obstacles, the `Γ` distance field, surface normals
//!   and the danger assessment (averaged normal and danger weight).
//! - [`flowfield`]: nominal desired-velocity fields and their obstacle-avoiding
//!   modulation.
//! - [`controller`]: damping-matrix construction (velocity preserving and
//!   obstacle aware) and the passive control force `τc = g + D (f − ξ̇)`.
//! - [`simulator`]: discrete-time point-mass plant with measurement noise,
//!   impulse disturbances, trajectory logging and Monte-Carlo sweeps.
//! - [`analysis`]: passivity-region geometry, the discrete damping limit, the
//!   collision impulse bound and controller comparison statistics.
//! - [`config`]: TOML experiment and scene files plus the bundled presets.

pub mod analysis;
pub mod config;
pub mod controller;
pub mod error;
pub mod flowfield;
pub mod geometry;
pub mod linalg;
pub mod simulator;

pub use error::{Error, Result};

/// Column vector of dynamic dimension.
pub type Vector = nalgebra::DVector<f64>;
/// Square matrix of dynamic dimension.
pub type Matrix = nalgebra::DMatrix<f64>;
