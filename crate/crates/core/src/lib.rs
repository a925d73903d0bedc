//! Numerical toolkit for the convex-integration construction of solutions to the
//! Navier–Stokes system with linear multiplicative noise, transformed by Θ = e^B.
pub mod error;
pub mod spectral;

pub use error::{Error, Result};
pub mod experiment;
pub mod frame;
pub mod integrator;
pub mod jets;
pub mod noise;
pub mod params;
pub mod quad;
pub mod verify;
