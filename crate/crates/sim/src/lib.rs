//! Deterministic closed-loop simulator for the itrack planner.
//!
//! A scripted walker moves through a grid world; synthetic torso landmarks
//! feed the planner at the perception rate, the planner replans at its own
//! rate, and the tracker follows each accepted trajectory exactly. Every
//! run is reproducible from its config and seed.

pub mod config;
pub mod error;
pub mod planner;
pub mod runner;
pub mod scenarios;
pub mod script;
pub mod trace;
pub mod world;

pub use config::ScenarioConfig;
pub use error::{SimError, SimResult};
pub use runner::{run_scenario, run_scenario_with, RunOutput, Scenario};
