use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Highest supported number of spatial dimensions.
pub const MAX_DIMS: usize = 3;

/// A point in configuration space. Components beyond the grid dimension are
/// ignored and kept at zero.
pub type Position = [f64; MAX_DIMS];

/// Periodic rectangular grid. Node `j` along axis `d` sits at `j * h_d` with
/// `h_d = lengths[d] / points[d]`; storage is row-major with axis 0 slowest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    points: Vec<usize>,
    lengths: Vec<f64>,
    masses: Vec<f64>,
    hbar: f64,
}

impl GridSpec {
    /// Unit masses and `hbar = 1`.
    pub fn new(points: &[usize], lengths: &[f64]) -> Result<Self> {
        let masses = vec![1.0; points.len()];
        Self::with_physics(points, lengths, &masses, 1.0)
    }

    pub fn with_physics(points: &[usize], lengths: &[f64], masses: &[f64], hbar: f64) -> Result<Self> {
        let dims = points.len();
        if dims == 0 || dims > MAX_DIMS {
            return Err(Error::InvalidGrid(format!("dims must be 1..=3, got {dims}")));
        }
        if lengths.len() != dims || masses.len() != dims {
            return Err(Error::InvalidGrid(
                "points, lengths and masses must have equal length".into(),
            ));
        }
        for (d, &p) in points.iter().enumerate() {
            if p < 8 || p % 2 != 0 {
                return Err(Error::InvalidGrid(format!(
                    "axis {d}: points must be even and >= 8, got {p}"
                )));
            }
        }
        for (d, &l) in lengths.iter().enumerate() {
            let h = l / points[d] as f64;
            if !(l.is_finite() && l > 0.0 && h.is_finite() && h > 0.0) {
                return Err(Error::InvalidGrid(format!("axis {d}: bad length {l}")));
            }
        }
        if masses.iter().any(|&m| !(m.is_finite() && m > 0.0)) {
            return Err(Error::InvalidGrid("masses must be positive".into()));
        }
        if !(hbar.is_finite() && hbar > 0.0) {
            return Err(Error::InvalidGrid("hbar must be positive".into()));
        }
        Ok(Self {
            points: points.to_vec(),
            lengths: lengths.to_vec(),
            masses: masses.to_vec(),
            hbar,
        })
    }

    pub fn dims(&self) -> usize {
        self.points.len()
    }

    pub fn points(&self) -> &[usize] {
        &self.points
    }

    pub fn lengths(&self) -> &[f64] {
        &self.lengths
    }

    pub fn masses(&self) -> &[f64] {
        &self.masses
    }

    pub fn hbar(&self) -> f64 {
        self.hbar
    }

    /// Total node count.
    pub fn len(&self) -> usize {
        self.points.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn spacing(&self, axis: usize) -> f64 {
        self.lengths[axis] / self.points[axis] as f64
    }

    pub fn cell_volume(&self) -> f64 {
        (0..self.dims()).map(|d| self.spacing(d)).product()
    }

    pub fn volume(&self) -> f64 {
        self.lengths.iter().product()
    }

    pub fn stride(&self, axis: usize) -> usize {
        self.points[axis + 1..].iter().product()
    }

    pub fn coord(&self, axis: usize, j: usize) -> f64 {
        j as f64 * self.spacing(axis)
    }

    pub fn flat_index(&self, multi: &[usize]) -> usize {
        multi
            .iter()
            .zip(&self.points)
            .fold(0, |acc, (&j, &n)| acc * n + j)
    }

    pub fn multi_index(&self, mut flat: usize) -> [usize; MAX_DIMS] {
        let mut out = [0; MAX_DIMS];
        for d in (0..self.dims()).rev() {
            out[d] = flat % self.points[d];
            flat /= self.points[d];
        }
        out
    }

    pub fn node_position(&self, flat: usize) -> Position {
        let idx = self.multi_index(flat);
        let mut x = [0.0; MAX_DIMS];
        for d in 0..self.dims() {
            x[d] = self.coord(d, idx[d]);
        }
        x
    }

    /// Angular wavenumbers in FFT order. The Nyquist entry carries `-pi/h`.
    pub fn wavenumbers(&self, axis: usize) -> Vec<f64> {
        let n = self.points[axis];
        let dk = 2.0 * PI / self.lengths[axis];
        (0..n)
            .map(|j| {
                let m = if j < n / 2 { j as i64 } else { j as i64 - n as i64 };
                m as f64 * dk
            })
            .collect()
    }

    /// Reduce a coordinate into `[0, l)` along `axis`.
    pub fn wrap(&self, axis: usize, x: f64) -> f64 {
        wrap_periodic(x, self.lengths[axis])
    }

    pub fn wrap_position(&self, x: &Position) -> Position {
        let mut out = *x;
        for d in 0..self.dims() {
            out[d] = self.wrap(d, x[d]);
        }
        out
    }

    /// Shortest signed displacement from `a` to `b` on the periodic domain.
    pub fn min_image(&self, axis: usize, a: f64, b: f64) -> f64 {
        let l = self.lengths[axis];
        let mut d = (b - a) % l;
        if d > 0.5 * l {
            d -= l;
        } else if d < -0.5 * l {
            d += l;
        }
        d
    }

    /// True when two grids describe the same nodes and physics.
    pub fn same_as(&self, other: &GridSpec) -> bool {
        self == other
    }

    pub fn check_same(&self, other: &GridSpec) -> Result<()> {
        if self.same_as(other) {
            Ok(())
        } else {
            Err(Error::GridMismatch(format!(
                "{:?}/{:?} vs {:?}/{:?}",
                self.points, self.lengths, other.points, other.lengths
            )))
        }
    }
}

pub fn wrap_periodic(x: f64, l: f64) -> f64 {
    let r = x.rem_euclid(l);
    // rem_euclid can round up to exactly l for tiny negative inputs
    if r >= l {
        0.0
    } else {
        r
    }
}

/// Grid-weighted L2 norm `sqrt(sum v^2 * cell_volume)`.
pub fn grid_norm(grid: &GridSpec, values: &[f64]) -> f64 {
    (values.iter().map(|v| v * v).sum::<f64>() * grid.cell_volume()).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_odd_or_small_axes() {
        assert!(GridSpec::new(&[7], &[1.0]).is_err());
        assert!(GridSpec::new(&[6], &[1.0]).is_err());
        assert!(GridSpec::new(&[8], &[0.0]).is_err());
        assert!(GridSpec::new(&[8, 8, 8, 8], &[1.0; 4]).is_err());
        assert!(GridSpec::new(&[8, 16], &[1.0, 2.0]).is_ok());
    }

    #[test]
    fn index_round_trip() {
        let g = GridSpec::new(&[8, 10, 12], &[1.0, 1.0, 1.0]).unwrap();
        for flat in [0, 1, 17, 500, g.len() - 1] {
            let m = g.multi_index(flat);
            assert_eq!(g.flat_index(&m[..3]), flat);
        }
        assert_eq!(g.stride(0), 120);
        assert_eq!(g.stride(2), 1);
    }

    #[test]
    fn wrap_and_min_image() {
        let g = GridSpec::new(&[8], &[2.0]).unwrap();
        assert_eq!(g.wrap(0, -0.5), 1.5);
        assert_eq!(g.wrap(0, 4.25), 0.25);
        assert!((g.min_image(0, 1.9, 0.1) - 0.2).abs() < 1e-12);
        assert!((g.min_image(0, 0.1, 1.9) + 0.2).abs() < 1e-12);
        assert!(wrap_periodic(-1e-18, 1.0) < 1.0);
    }
}
