//! Numerical realization of the fluctuation-dissipation route to invariant
//! measures of the Benjamin-Ono equation on the torus: a pseudospectral
//! integrator for the deterministic flow and its stochastic viscous
//! regularization, exact evaluation of the conserved functionals, and the
//! statistical machinery that tests the stationary identities.

pub mod config;
pub mod conservation;
pub mod dynamics;
pub mod error;
mod fft;
pub mod experiments;
pub mod measure;
pub mod noise;
pub mod spectral;
pub mod stats;

pub use error::{Error, Result};
