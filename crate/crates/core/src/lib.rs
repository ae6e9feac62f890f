//! Bearing-only guidance to the Fermat-Weber point.
//!
//! An autonomous agent that can only measure unit bearing vectors toward a
//! set of beacons steers itself to the point minimizing the weighted sum of
//! distances to them. This crate provides:
//!
//! - the bearing/projection geometry and the objective with its derivatives
//!   ([`vecgeom`]),
//! - independent Fermat-Weber solvers used as ground truth ([`fw`]),
//! - the family of bearing-only control laws for single- and
//!   double-integrator agents, stationary or moving beacons, with and
//!   without bearing noise ([`laws`]),
//! - a fixed-step simulator with a collision guard ([`world`]),
//! - certificate evaluation along trajectories ([`analysis`]),
//! - scenario configuration, presets, and the CSV output format
//!   ([`scenario`], [`trajcsv`]).
//!
//! The `fwguide` binary wraps all of it behind `run`, `batch`, `solve`, and
//! `check` subcommands.

pub mod analysis;
pub mod error;
pub mod fw;
pub mod laws;
pub mod scenario;
pub mod trajcsv;
pub mod vecgeom;
pub mod world;

pub use error::{Error, Result};
pub use scenario::{load_scenario, preset, run_scenario, Scenario, PRESET_NAMES};
pub use vecgeom::Vector;
pub use world::{simulate, Trajectory};
