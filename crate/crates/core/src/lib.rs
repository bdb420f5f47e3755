//! Planning core for intention-aware aerial target tracking.
//!
//! The pipeline is split into one module per stage:
//!
//! - [`env`]: occupancy grid and the geometric queries everything else uses
//! - [`target_state`]: landmark localization, body rotation, constant-velocity filter
//! - [`intention`]: reachable regions and the four-intention probability model
//! - [`prediction`]: intention-driven hybrid A* over target motion primitives
//! - [`corridor`]: occlusion-free waypoints, flight corridors, visible regions
//! - [`trajopt`]: piecewise quintic trajectory class and its penalty optimizer
//!
//! All planning is planar (x, y) at a fixed flight altitude.

pub mod corridor;
pub mod env;
pub mod error;
pub mod geom;
pub mod intention;
pub mod prediction;
pub mod target_state;
pub mod trajopt;

pub use error::{Error, Result};
pub use nalgebra;
pub use geom::Vec2;
