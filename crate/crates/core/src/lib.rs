//! Simulation core for two-species (and more) cross-diffusion systems that are
//! small perturbations of decoupled linear drift-diffusion equations.
//!
//! The crate is `no_std` with `alloc`. It contains the model catalog, the
//! staggered positivity-preserving spatial operator, an adaptive TR-BDF2
//! integrator with banded Newton solves, discrete trajectory norms and
//! ellipticity diagnostics, the a priori constants ledger, and the frozen
//! coefficient (Picard) solver path. File formats and the command line live in
//! the `crossdiff` crate.

#![no_std]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod analysis;
pub mod banded;
pub mod certificates;
pub mod discretization;
mod error;
pub mod grid;
pub mod integrator;
pub mod linearized;
pub(crate) mod math;
pub mod models;
pub mod potential;
pub mod scenarios;

pub use error::{Error, Result};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");
pub use grid::{FluxField, Grid, StateField};
pub use integrator::{integrate, steady_state, SolverOptions, SteadyState, Trajectory};
pub use models::{Coefficients, Family, ModelSpec, PhysicalParams, SpeciesMatrix, MAX_SPECIES};
pub use potential::Potential;
