//! Grand-canonical Monte Carlo for hard-core, finite-range particle systems:
//! equilibrium sampling of conditional Gibbs distributions in a box with a
//! fixed exterior, temperature-ladder annealing toward ground states, local
//! energy-minimality certification, separation/covering observables, and the
//! one-dimensional boundary-pumping experiments.

pub mod annealing;
pub mod configuration;
pub mod config;
pub mod counterexample;
pub mod energy;
pub mod geometry;
pub mod ground_state;
pub mod observables;
pub mod potential;
pub mod rng;
pub mod runner;
pub mod sampler;
mod stats;

pub use configuration::{Configuration, ConfigurationError, Snapshot};
pub use energy::Energy;
pub use geometry::{BoxRegion, GeometryError, Point};
pub use potential::{FamilyKind, PairPotential, PotentialError};
