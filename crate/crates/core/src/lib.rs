//! Numerical laboratory for pilot-wave (de Broglie-Bohm) dynamics.
//!
//! Wavefunctions live on periodic grids and are propagated with a split-step
//! Fourier scheme; configuration points are guided by the current-over-density
//! velocity and integrated with RK4. On top of that sit ensemble statistics
//! (equilibrium sampling, coarse-grained H-function, distribution distances),
//! ergodic time averages on tori, and end-to-end measurement scenarios.

pub mod ensemble;
pub mod ergodic;
pub mod error;
pub mod fields;
pub mod guidance;
pub mod propagator;
pub mod rng;
pub mod scenarios;
pub mod table;

pub use error::{Error, Result};
