//! The iteration: mollification, amplitudes, perturbations and the new stress, streamed in time.
pub mod identity;
pub mod level;
pub mod mollify;
pub mod products;
pub mod run;
