use num_complex::Complex64;

use super::grid::{GridSpec, Position, MAX_DIMS};
use crate::error::{Error, Result};

/// Relative amplitude floor below which phase and velocity are undefined.
pub const NODE_FLOOR_RELATIVE: f64 = 1e-8;

/// Complex wavefunction sampled on a periodic grid.
///
/// Immutable once built; transformations return new fields.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexField {
    grid: GridSpec,
    values: Vec<Complex64>,
}

impl ComplexField {
    pub fn new(grid: GridSpec, values: Vec<Complex64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::GridMismatch(format!(
                "expected {} values, got {}",
                grid.len(),
                values.len()
            )));
        }
        Ok(Self { grid, values })
    }

    pub fn from_fn(grid: &GridSpec, f: impl Fn(&Position) -> Complex64) -> Self {
        let values = (0..grid.len()).map(|i| f(&grid.node_position(i))).collect();
        Self {
            grid: grid.clone(),
            values,
        }
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<Complex64> {
        self.values
    }

    pub(crate) fn values_mut(&mut self) -> &mut [Complex64] {
        &mut self.values
    }

    /// `sum |psi|^2 * cell_volume`.
    pub fn norm_sqr(&self) -> f64 {
        self.values.iter().map(|z| z.norm_sqr()).sum::<f64>() * self.grid.cell_volume()
    }

    pub fn normalize(&self) -> Result<Self> {
        let n = self.norm_sqr();
        if !(n.is_finite() && n > 0.0) {
            return Err(Error::ZeroNorm);
        }
        let s = 1.0 / n.sqrt();
        Ok(Self {
            grid: self.grid.clone(),
            values: self.values.iter().map(|z| z * s).collect(),
        })
    }

    pub fn scale(&self, c: Complex64) -> Self {
        Self {
            grid: self.grid.clone(),
            values: self.values.iter().map(|z| z * c).collect(),
        }
    }

    pub fn density(&self) -> Vec<f64> {
        self.values.iter().map(|z| z.norm_sqr()).collect()
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    /// `1e-8 * max|psi|`.
    pub fn node_floor(&self) -> f64 {
        NODE_FLOOR_RELATIVE * self.max_abs()
    }

    pub fn check_finite(&self) -> Result<()> {
        match self.values.iter().position(|z| !(z.re.is_finite() && z.im.is_finite())) {
            Some(node) => Err(Error::NonFinite { node }),
            None => Ok(()),
        }
    }

    /// `<a|b>` with the grid measure.
    pub fn inner(&self, other: &ComplexField) -> Result<Complex64> {
        self.grid.check_same(&other.grid)?;
        let s: Complex64 = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| a.conj() * b)
            .sum();
        Ok(s * self.grid.cell_volume())
    }

    /// Largest pointwise difference.
    pub fn sup_distance(&self, other: &ComplexField) -> Result<f64> {
        self.grid.check_same(&other.grid)?;
        Ok(self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max))
    }

    /// Mean position and variance of `|psi|^2` along one axis, measured
    /// without wrapping (suitable for packets away from the box edge).
    pub fn moments(&self, axis: usize) -> (f64, f64) {
        let g = &self.grid;
        let mut mass = 0.0;
        let mut m1 = 0.0;
        let mut m2 = 0.0;
        for (i, z) in self.values.iter().enumerate() {
            let x = g.node_position(i)[axis];
            let p = z.norm_sqr();
            mass += p;
            m1 += p * x;
            m2 += p * x * x;
        }
        let mean = m1 / mass;
        (mean, m2 / mass - mean * mean)
    }
}

/// Multilinear interpolation of real node samples at an arbitrary point of
/// the periodic domain.
pub fn interpolate_real(grid: &GridSpec, values: &[f64], x: &Position) -> f64 {
    let stencil = Stencil::new(grid, x);
    stencil.apply(values)
}

/// Corner nodes and weights of the multilinear stencil around a point.
#[derive(Debug, Clone)]
pub struct Stencil {
    pub nodes: [usize; 1 << MAX_DIMS],
    pub weights: [f64; 1 << MAX_DIMS],
    pub count: usize,
}

impl Stencil {
    pub fn new(grid: &GridSpec, x: &Position) -> Self {
        let dims = grid.dims();
        let mut lo = [0usize; MAX_DIMS];
        let mut hi = [0usize; MAX_DIMS];
        let mut frac = [0.0; MAX_DIMS];
        for d in 0..dims {
            let n = grid.points()[d];
            let s = grid.wrap(d, x[d]) / grid.spacing(d);
            let base = s.floor();
            let mut j = base as usize;
            let mut t = s - base;
            if j >= n {
                j = n - 1;
                t = 1.0;
            }
            lo[d] = j;
            hi[d] = (j + 1) % n;
            frac[d] = t;
        }
        let count = 1 << dims;
        let mut nodes = [0usize; 1 << MAX_DIMS];
        let mut weights = [0.0; 1 << MAX_DIMS];
        for corner in 0..count {
            let mut flat = 0;
            let mut w = 1.0;
            for d in 0..dims {
                let upper = corner >> d & 1 == 1;
                let j = if upper { hi[d] } else { lo[d] };
                flat = flat * grid.points()[d] + j;
                w *= if upper { frac[d] } else { 1.0 - frac[d] };
            }
            nodes[corner] = flat;
            weights[corner] = w;
        }
        Self { nodes, weights, count }
    }

    pub fn apply(&self, values: &[f64]) -> f64 {
        (0..self.count).map(|c| self.weights[c] * values[self.nodes[c]]).sum()
    }

    pub fn touches(&self, flags: &[bool]) -> bool {
        (0..self.count).any(|c| flags[self.nodes[c]])
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn normalize_gives_unit_norm() {
        let g = GridSpec::new(&[16, 8], &[3.0, 2.0]).unwrap();
        let f = ComplexField::from_fn(&g, |x| Complex64::new(1.0 + x[0], x[1]));
        let n = f.normalize().unwrap();
        assert!((n.norm_sqr() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn zero_field_cannot_normalize() {
        let g = GridSpec::new(&[8], &[1.0]).unwrap();
        let f = ComplexField::from_fn(&g, |_| Complex64::new(0.0, 0.0));
        assert_eq!(f.normalize(), Err(Error::ZeroNorm));
    }

    #[test]
    fn interpolation_is_exact_for_linear_data_and_periodic() {
        let g = GridSpec::new(&[8, 8], &[8.0, 8.0]).unwrap();
        let vals: Vec<f64> = (0..g.len())
            .map(|i| {
                let x = g.node_position(i);
                2.0 * x[0] + 3.0 * x[1]
            })
            .collect();
        let v = interpolate_real(&g, &vals, &[2.5, 3.25, 0.0]);
        assert!((v - (5.0 + 9.75)).abs() < 1e-12);
        // wraps between the last node (7) and node 0
        let w = interpolate_real(&g, &vals, &[7.5, 0.0, 0.0]);
        assert!((w - 0.5 * 14.0).abs() < 1e-12);
    }
}
