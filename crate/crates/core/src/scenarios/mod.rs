//! End-to-end experiments built from the propagator, guidance, ensemble and
//! ergodic layers. Each run returns a [`ScenarioReport`] holding headline
//! statistics, tolerance checks and CSV tables.

mod common;
mod kicked;
mod measurement;
mod report;
mod stern_gerlach;
mod torus;
mod two_slit;

pub use report::{binomial_halfwidth, empty_summary, Check, Heatmap, ScenarioReport, Status};
pub use torus::{run_torus, ConditionalSpec, Integrator, LengthSpec, RationalSpec, TorusConfig, TorusControl, TranslationSpec};
pub use common::{dominant_branch, LineGrid, OutcomeRecord, PacketSpec};
pub use measurement::{run_measurement, MeasurementConfig};
pub use stern_gerlach::{run_stern_gerlach, InternalSpec, Magnet, SternGerlachConfig, XPrior};
pub use kicked::{run_kicked_relaxation, BoxGrid, Expectation, InitialSpec, KickedConfig, ReferenceSpec};
pub use two_slit::{fringe_visibility, run_two_slit, tv_noise_floor, EdgeMask, PlaneGrid, PlanePacket, ScreenBins, SlitBarrier, SmoothPrior, TwoSlitConfig};
