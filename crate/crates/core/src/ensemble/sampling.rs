use std::fmt;
use std::sync::Arc;

use rand::Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::fields::{interpolate_real, ComplexField, GridSpec, Position, MAX_DIMS};
use crate::rng::stream;

/// Below this acceptance rate rejection sampling is abandoned.
pub const MIN_ACCEPTANCE: f64 = 1e-4;

const PILOT_PROPOSALS: usize = 100_000;

type DensityFn = dyn Fn(&Position) -> f64 + Send + Sync;

/// Unnormalized target density on the periodic box of a grid.
#[derive(Clone)]
pub enum DensitySpec {
    /// `|psi|^2`, multilinearly interpolated between nodes.
    Equilibrium(ComplexField),
    Uniform,
    /// Node values, multilinearly interpolated.
    Tabulated(Vec<f64>),
    /// Arbitrary density with a caller-supplied upper bound.
    Custom { density: Arc<DensityFn>, bound: f64 },
}

impl fmt::Debug for DensitySpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DensitySpec::Equilibrium(_) => write!(f, "Equilibrium"),
            DensitySpec::Uniform => write!(f, "Uniform"),
            DensitySpec::Tabulated(v) => write!(f, "Tabulated({} nodes)", v.len()),
            DensitySpec::Custom { bound, .. } => write!(f, "Custom {{ bound: {bound} }}"),
        }
    }
}

impl DensitySpec {
    pub fn custom(bound: f64, density: impl Fn(&Position) -> f64 + Send + Sync + 'static) -> Self {
        DensitySpec::Custom {
            density: Arc::new(density),
            bound,
        }
    }
}

/// Equally weighted sample set.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleSet {
    pub dims: usize,
    pub points: Vec<Position>,
}

impl SampleSet {
    pub fn new(dims: usize, points: Vec<Position>) -> Self {
        Self { dims, points }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Uniform weights `1/n`.
    pub fn weights(&self) -> Vec<f64> {
        let n = self.points.len();
        vec![1.0 / n as f64; n]
    }

    pub fn mean(&self, axis: usize) -> f64 {
        self.points.iter().map(|p| p[axis]).sum::<f64>() / self.points.len() as f64
    }
}

struct Target<'a> {
    grid: &'a GridSpec,
    nodes: Option<Vec<f64>>,
    custom: Option<&'a DensityFn>,
    envelope: f64,
}

impl Target<'_> {
    fn eval(&self, x: &Position) -> f64 {
        match (&self.nodes, self.custom) {
            (Some(v), _) => interpolate_real(self.grid, v, x),
            (None, Some(f)) => f(x),
            (None, None) => 1.0,
        }
    }
}

fn check_nodes(values: &[f64]) -> Result<(f64, f64)> {
    let mut max = 0.0f64;
    let mut sum = 0.0;
    for (node, &v) in values.iter().enumerate() {
        if !v.is_finite() {
            return Err(Error::NonFinite { node });
        }
        if v < 0.0 {
            return Err(Error::InvalidArgument(format!("negative density at node {node}")));
        }
        max = max.max(v);
        sum += v;
    }
    Ok((max, sum / values.len() as f64))
}

fn propose(rng: &mut impl Rng, grid: &GridSpec) -> Position {
    let mut x = [0.0; MAX_DIMS];
    for d in 0..grid.dims() {
        x[d] = grid.wrap(d, rng.gen::<f64>() * grid.lengths()[d]);
    }
    x
}

/// `n` independent draws by rejection against a uniform envelope on the box
/// spanned by `grid`. Draw `k` uses stream `k` of `seed`, so results do not
/// depend on thread count or on `n`.
pub fn sample_initial(density: &DensitySpec, grid: &GridSpec, n: usize, seed: u64) -> Result<SampleSet> {
    let dims = grid.dims();
    if n == 0 {
        return Ok(SampleSet::new(dims, Vec::new()));
    }
    let target = match density {
        DensitySpec::Uniform => Target {
            grid,
            nodes: None,
            custom: None,
            envelope: 1.0,
        },
        DensitySpec::Equilibrium(psi) => {
            grid.check_same(psi.grid())?;
            tabulated_target(grid, psi.density())?
        }
        DensitySpec::Tabulated(values) => {
            if values.len() != grid.len() {
                return Err(Error::GridMismatch("tabulated density size differs from grid".into()));
            }
            tabulated_target(grid, values.clone())?
        }
        DensitySpec::Custom { density, bound } => {
            if !(bound.is_finite() && *bound > 0.0) {
                return Err(Error::InvalidArgument(format!("envelope bound must be positive, got {bound}")));
            }
            let t = Target {
                grid,
                nodes: None,
                custom: Some(density.as_ref()),
                envelope: *bound,
            };
            let mut rng = stream(seed, u64::MAX);
            let mut mean = 0.0;
            for _ in 0..PILOT_PROPOSALS {
                let v = t.eval(&propose(&mut rng, grid));
                if !(v.is_finite() && v >= 0.0) {
                    return Err(Error::InvalidArgument(format!("density value {v} is not a valid density")));
                }
                if v > *bound {
                    return Err(Error::EnvelopeViolation { value: v, envelope: *bound });
                }
                mean += v;
            }
            check_rate(mean / PILOT_PROPOSALS as f64 / bound, *bound)?;
            t
        }
    };
    let points = (0..n)
        .into_par_iter()
        .map(|k| draw(&target, seed, k as u64))
        .collect::<Result<Vec<_>>>()?;
    Ok(SampleSet::new(dims, points))
}

fn tabulated_target(grid: &GridSpec, values: Vec<f64>) -> Result<Target<'_>> {
    let (max, mean) = check_nodes(&values)?;
    if max == 0.0 {
        return Err(Error::ZeroNorm);
    }
    // multilinear interpolants peak at nodes, so the node maximum is an
    // exact envelope and the node mean is the exact acceptance rate
    check_rate(mean / max, max)?;
    Ok(Target {
        grid,
        nodes: Some(values),
        custom: None,
        envelope: max,
    })
}

fn check_rate(rate: f64, envelope: f64) -> Result<()> {
    if rate < MIN_ACCEPTANCE {
        Err(Error::LowAcceptance { rate, envelope })
    } else {
        Ok(())
    }
}

fn draw(target: &Target, seed: u64, index: u64) -> Result<Position> {
    let mut rng = stream(seed, index);
    let cap = (100.0 / MIN_ACCEPTANCE) as u64;
    for _ in 0..cap {
        let x = propose(&mut rng, target.grid);
        let v = target.eval(&x);
        if v > target.envelope {
            return Err(Error::EnvelopeViolation {
                value: v,
                envelope: target.envelope,
            });
        }
        if rng.gen::<f64>() * target.envelope < v {
            return Ok(x);
        }
    }
    Err(Error::LowAcceptance {
        rate: 1.0 / cap as f64,
        envelope: target.envelope,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_complex::Complex64;

    #[test]
    fn empty_request_is_valid() {
        let g = GridSpec::new(&[8], &[1.0]).unwrap();
        assert!(sample_initial(&DensitySpec::Uniform, &g, 0, 1).unwrap().is_empty());
    }

    #[test]
    fn prefix_stability_under_growth() {
        let g = GridSpec::new(&[16, 16], &[1.0, 2.0]).unwrap();
        let d = DensitySpec::Tabulated((0..g.len()).map(|i| 1.0 + (i % 5) as f64).collect());
        let a = sample_initial(&d, &g, 50, 9).unwrap();
        let b = sample_initial(&d, &g, 80, 9).unwrap();
        assert_eq!(a.points[..], b.points[..50]);
    }

    #[test]
    fn gaussian_mean_within_clt_bound() {
        let l = 20.0;
        let g = GridSpec::new(&[256], &[l]).unwrap();
        let sigma = 1.0;
        let psi = ComplexField::from_fn(&g, |x| {
            let d = x[0] - 10.0;
            Complex64::new((-d * d / (4.0 * sigma * sigma)).exp(), 0.0)
        });
        let n = 10_000;
        let s = sample_initial(&DensitySpec::Equilibrium(psi), &g, n, 3).unwrap();
        assert!((s.mean(0) - 10.0).abs() < 4.0 * sigma / (n as f64).sqrt());
    }

    #[test]
    fn narrow_density_triggers_low_acceptance() {
        let g = GridSpec::new(&[65536], &[1.0]).unwrap();
        let mut v = vec![0.0; g.len()];
        v[100] = 1.0;
        assert!(matches!(
            sample_initial(&DensitySpec::Tabulated(v), &g, 10, 1),
            Err(Error::LowAcceptance { .. })
        ));
    }

    #[test]
    fn custom_bound_is_enforced() {
        let g = GridSpec::new(&[8], &[1.0]).unwrap();
        let d = DensitySpec::custom(0.5, |x| 1.0 + x[0]);
        assert!(matches!(
            sample_initial(&d, &g, 10, 1),
            Err(Error::EnvelopeViolation { .. })
        ));
    }
}
