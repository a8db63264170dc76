use thiserror::Error;

/// Errors raised by the numerical kernels and scenario drivers.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("non-finite value at node {node}")]
    NonFinite { node: usize },
    #[error("amplitude below floor everywhere")]
    AmplitudeBelowFloor,
    #[error("field has zero norm")]
    ZeroNorm,
    #[error("grid mismatch: {0}")]
    GridMismatch(String),
    #[error("stability guard violated: dt*max|V| = {product:.4} exceeds {limit}; require |dt| < {required_dt:.6e}")]
    StabilityGuard {
        product: f64,
        limit: f64,
        required_dt: f64,
    },
    #[error("aliased quantum number {n} on axis {axis} (must satisfy |n| < {bound})")]
    AliasedQuantumNumber { axis: usize, n: i64, bound: usize },
    #[error("invalid potential: {0}")]
    InvalidPotential(String),
    #[error("invalid region: {0}")]
    InvalidRegion(String),
    #[error("rejection sampling acceptance rate {rate:.3e} below 1e-4 (envelope {envelope:.4e})")]
    LowAcceptance { rate: f64, envelope: f64 },
    #[error("density exceeds envelope: {value:.4e} > {envelope:.4e}")]
    EnvelopeViolation { value: f64, envelope: f64 },
    #[error("invalid coarse-graining cell: {0}")]
    InvalidCell(String),
    #[error("partition mismatch")]
    PartitionMismatch,
    #[error("stream generator overlaps flagged nodes ({count} nodes)")]
    FlaggedSupport { count: usize },
    #[error("unsupported dimension: {0}")]
    UnsupportedDimension(String),
    #[error("invalid branch superposition: {0}")]
    InvalidBranches(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("parse error: {0}")]
    Parse(String),
    #[error("config error: {0}")]
    Config(String),
    #[error("numerical validity failure: {0}")]
    Validity(String),
}

pub type Result<T> = std::result::Result<T, Error>;
