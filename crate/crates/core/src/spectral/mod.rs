//! Periodic fields on the 3-torus [0, 2π)³ and their Fourier-multiplier calculus.
pub mod container;
mod fft;
mod field;
mod grid;
pub mod norms;
pub mod ops;

pub use fft::fft3;
pub use field::{tc, PhysicalField, Rank, SpectralField};
pub use grid::Grid3;
pub use norms::NormReport;
