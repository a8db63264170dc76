//! Initial-condition sampling, coarse-grained histograms, the subquantum
//! H-function, f-ratio tracking and distribution distances.

mod distance;
mod fratio;
mod histogram;
mod sampling;

pub use distance::{distribution_distance, ks_statistic, Distances, LinearCdf};
pub use fratio::{track_f_ratio, DensityEstimator, EnsembleSnapshot, FRatioTrack, FSummary, FTrackConfig};
pub use histogram::{
    coarse_grain, histogram_table, subquantum_entropy, total_variation, tv_noise_estimate, Entropy, Histogram,
    Partition, DEFAULT_CELL_POINTS,
};
pub use sampling::{sample_initial, DensitySpec, SampleSet, MIN_ACCEPTANCE};
