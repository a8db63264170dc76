use serde::{Deserialize, Serialize};

use super::field::ComplexField;
use super::grid::{wrap_periodic, GridSpec, Position};
use crate::error::{Error, Result};

/// Closed arc `[start, start + length]` on a circle of circumference `period`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    start: f64,
    length: f64,
    period: f64,
}

impl Interval {
    /// `[a, b]` on the circle. `a > b` wraps through the origin; a span of at
    /// least one period is the whole circle.
    pub fn new(a: f64, b: f64, period: f64) -> Result<Self> {
        if !(a.is_finite() && b.is_finite() && period > 0.0) {
            return Err(Error::InvalidRegion(format!("bad interval [{a}, {b}]")));
        }
        let (start, length) = if a <= b {
            if b - a >= period {
                (0.0, period)
            } else {
                (wrap_periodic(a, period), b - a)
            }
        } else {
            let a = wrap_periodic(a, period);
            let b = wrap_periodic(b, period);
            let len = if a > b { b + period - a } else { b - a };
            (a, len)
        };
        Ok(Self { start, length, period })
    }

    pub fn full(period: f64) -> Self {
        Self {
            start: 0.0,
            length: period,
            period,
        }
    }

    pub fn start(&self) -> f64 {
        self.start
    }

    pub fn length(&self) -> f64 {
        self.length
    }

    pub fn period(&self) -> f64 {
        self.period
    }

    pub fn is_full(&self) -> bool {
        self.length >= self.period
    }

    pub fn contains(&self, x: f64) -> bool {
        self.is_full() || wrap_periodic(x - self.start, self.period) <= self.length
    }

    /// Length of `[lo, hi]` (unwrapped, `hi - lo <= period`) inside the arc.
    pub fn overlap(&self, lo: f64, hi: f64) -> f64 {
        if self.is_full() {
            return hi - lo;
        }
        let p = self.period;
        let k0 = ((lo - self.start - self.length) / p).floor() as i64;
        let k1 = ((hi - self.start) / p).ceil() as i64;
        (k0..=k1)
            .map(|k| {
                let a = self.start + k as f64 * p;
                let b = a + self.length;
                (hi.min(b) - lo.max(a)).max(0.0)
            })
            .sum()
    }

    /// Parameter ranges `s in [0,1]` for which `x0 + s * dx` lies in the arc.
    pub fn crossing_parameters(&self, x0: f64, dx: f64, out: &mut Vec<(f64, f64)>) {
        out.clear();
        if self.is_full() {
            out.push((0.0, 1.0));
            return;
        }
        if dx == 0.0 {
            if self.contains(x0) {
                out.push((0.0, 1.0));
            }
            return;
        }
        let p = self.period;
        let (lo, hi) = if dx > 0.0 { (x0, x0 + dx) } else { (x0 + dx, x0) };
        let k0 = ((lo - self.start - self.length) / p).floor() as i64;
        let k1 = ((hi - self.start) / p).ceil() as i64;
        for k in k0..=k1 {
            let a = self.start + k as f64 * p;
            let b = a + self.length;
            let (mut s0, mut s1) = ((a - x0) / dx, (b - x0) / dx);
            if s0 > s1 {
                std::mem::swap(&mut s0, &mut s1);
            }
            let s0 = s0.max(0.0);
            let s1 = s1.min(1.0);
            if s1 > s0 {
                out.push((s0, s1));
            }
        }
        out.sort_by(|a, b| a.0.total_cmp(&b.0));
    }
}

/// Axis-aligned box on the periodic domain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Region {
    intervals: Vec<Interval>,
}

impl Region {
    pub fn new(bounds: &[(f64, f64)], periods: &[f64]) -> Result<Self> {
        if bounds.len() != periods.len() || bounds.is_empty() {
            return Err(Error::InvalidRegion("bounds must match the domain dimension".into()));
        }
        let intervals = bounds
            .iter()
            .zip(periods)
            .map(|(&(a, b), &p)| Interval::new(a, b, p))
            .collect::<Result<_>>()?;
        Ok(Self { intervals })
    }

    pub fn on_grid(bounds: &[(f64, f64)], grid: &GridSpec) -> Result<Self> {
        Self::new(bounds, grid.lengths())
    }

    pub fn from_intervals(intervals: Vec<Interval>) -> Self {
        Self { intervals }
    }

    pub fn full(grid: &GridSpec) -> Self {
        Self {
            intervals: grid.lengths().iter().map(|&l| Interval::full(l)).collect(),
        }
    }

    pub fn dims(&self) -> usize {
        self.intervals.len()
    }

    pub fn intervals(&self) -> &[Interval] {
        &self.intervals
    }

    pub fn contains(&self, x: &Position) -> bool {
        self.intervals.iter().enumerate().all(|(d, iv)| iv.contains(x[d]))
    }

    /// Lebesgue measure as a fraction of the domain volume.
    pub fn volume_fraction(&self) -> f64 {
        self.intervals.iter().map(|iv| iv.length / iv.period).product()
    }

    /// Per-node overlap fractions along one axis, treating node `j` as the
    /// cell `[x_j - h/2, x_j + h/2]`.
    pub fn node_weights(&self, grid: &GridSpec, axis: usize) -> Vec<f64> {
        let h = grid.spacing(axis);
        let iv = &self.intervals[axis];
        (0..grid.points()[axis])
            .map(|j| {
                let x = grid.coord(axis, j);
                (iv.overlap(x - 0.5 * h, x + 0.5 * h) / h).clamp(0.0, 1.0)
            })
            .collect()
    }
}

/// `mu_psi(omega)`: sum of `|psi|^2 * cell_volume` over nodes in `omega`,
/// boundary nodes weighted by their fractional cell overlap.
pub fn measure_of_region(psi: &ComplexField, omega: &Region) -> Result<f64> {
    let grid = psi.grid();
    if omega.dims() != grid.dims() {
        return Err(Error::InvalidRegion("region dimension differs from grid".into()));
    }
    for (iv, &l) in omega.intervals.iter().zip(grid.lengths()) {
        if (iv.period - l).abs() > 1e-12 * l {
            return Err(Error::InvalidRegion("region periods differ from grid lengths".into()));
        }
    }
    let weights: Vec<Vec<f64>> = (0..grid.dims()).map(|d| omega.node_weights(grid, d)).collect();
    let total: f64 = psi
        .values()
        .iter()
        .enumerate()
        .map(|(i, z)| {
            let idx = grid.multi_index(i);
            let w: f64 = (0..grid.dims()).map(|d| weights[d][idx[d]]).product();
            w * z.norm_sqr()
        })
        .sum();
    Ok(total * grid.cell_volume())
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_complex::Complex64;

    #[test]
    fn wrapping_interval_contains_both_ends() {
        let iv = Interval::new(0.9, 0.1, 1.0).unwrap();
        assert!(iv.contains(0.95));
        assert!(iv.contains(0.05));
        assert!(!iv.contains(0.5));
        assert!((iv.length() - 0.2).abs() < 1e-12);
    }

    #[test]
    fn overlap_handles_wrap() {
        let iv = Interval::new(0.9, 0.1, 1.0).unwrap();
        assert!((iv.overlap(-0.05, 0.05) - 0.1).abs() < 1e-12);
        assert!((iv.overlap(0.85, 0.95) - 0.05).abs() < 1e-12);
    }

    #[test]
    fn crossing_parameters_across_wrap() {
        let iv = Interval::new(0.0, 0.25, 1.0).unwrap();
        let mut out = Vec::new();
        iv.crossing_parameters(0.9, 0.5, &mut out);
        assert_eq!(out.len(), 1);
        assert!((out[0].0 - 0.2).abs() < 1e-12 && (out[0].1 - 0.7).abs() < 1e-12);
    }

    #[test]
    fn uniform_half_circle() {
        let g = GridSpec::new(&[64], &[2.0]).unwrap();
        let psi = ComplexField::from_fn(&g, |_| Complex64::new(1.0, 0.0)).normalize().unwrap();
        let half = Region::on_grid(&[(0.3, 1.3)], &g).unwrap();
        assert!((measure_of_region(&psi, &half).unwrap() - 0.5).abs() < 1e-12);
        let full = Region::full(&g);
        assert!((measure_of_region(&psi, &full).unwrap() - 1.0).abs() < 1e-12);
        let empty = Region::on_grid(&[(0.7, 0.7)], &g).unwrap();
        assert_eq!(measure_of_region(&psi, &empty).unwrap(), 0.0);
    }
}
