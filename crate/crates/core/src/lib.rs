//! Semiclassical Monte Carlo of atoms in a dissipative 3D lin⊥lin optical
//! lattice driven by a moving pump-probe interference pattern.
//!
//! The crate is organised bottom-up:
//!
//! - [`model`]: lattice potentials, pumping rates and the moving modulation;
//! - [`theory`]: closed-form mode velocity, resonance detunings and grating
//!   wavevectors;
//! - [`engine`]: the stochastic ensemble integrator;
//! - [`observables`]: centre-of-mass drift, spectra, moving-frame densities
//!   and the stimulated-scattering proxy;
//! - [`harness`]: configuration files, sweeps and CSV/JSON export.

pub mod engine;
pub mod error;
pub mod harness;
pub mod model;
pub mod observables;
pub mod rng;
pub mod theory;
pub mod units;

pub use error::{Error, Result};
