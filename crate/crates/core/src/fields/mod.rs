//! Grids, wavefunctions, polar decomposition, the quantum potential and
//! `|psi|^2`-weighted measures of regions.

mod dump;
mod field;
mod grid;
mod polar;
mod potential;
mod region;
mod spectral;

pub use dump::{read_field, write_field, HEADER_TAG};
pub use field::{interpolate_real, ComplexField, Stencil, NODE_FLOOR_RELATIVE};
pub use grid::{grid_norm, wrap_periodic, GridSpec, Position, MAX_DIMS};
pub use polar::{polar_decompose, quantum_potential, quantum_potential_with, PolarPair, QuantumPotential};
pub use potential::{Aperture, PotentialSpec};
pub use region::{measure_of_region, Interval, Region};
pub use spectral::Spectral;
