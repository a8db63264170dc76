//! Time-average occupancy statistics, exact torus flows, rational
//! independence of torus frequencies and iterated measure-preserving maps.

mod cf;
mod maps;
mod occupancy;
mod surd;
mod torus;

pub use cf::{continued_fraction, CfReport};
pub use maps::{
    apply_map_sequence, audit_measure_preservation, IteratedMap, MapFamily, MapRun, MeasureAudit, ProductMeasure,
};
pub use occupancy::{Checkpoint, OccupancyAccumulator};
pub use surd::{check_rational_independence, Multiquadratic, SurdLength, TorusLength, Verdict, VerdictKind};
pub use torus::{torus_flow_exact, TorusFlow};
