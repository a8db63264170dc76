//! Fourier machinery on periodic grids: N-dimensional transforms assembled
//! from one-dimensional line transforms, and spectral derivatives built on top.

use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use super::grid::GridSpec;

/// Planned forward/inverse transforms for every axis of one grid.
///
/// Transforms are deterministic: lines are processed in a fixed order.
pub struct Spectral {
    grid: GridSpec,
    forward: Vec<Arc<dyn Fft<f64>>>,
    inverse: Vec<Arc<dyn Fft<f64>>>,
    wavenumbers: Vec<Vec<f64>>,
}

impl std::fmt::Debug for Spectral {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Spectral").field("grid", &self.grid).finish()
    }
}

impl Spectral {
    pub fn new(grid: &GridSpec) -> Self {
        let mut planner = FftPlanner::new();
        let forward = grid.points().iter().map(|&n| planner.plan_fft_forward(n)).collect();
        let inverse = grid.points().iter().map(|&n| planner.plan_fft_inverse(n)).collect();
        let wavenumbers = (0..grid.dims()).map(|d| grid.wavenumbers(d)).collect();
        Self {
            grid: grid.clone(),
            forward,
            inverse,
            wavenumbers,
        }
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn wavenumbers(&self, axis: usize) -> &[f64] {
        &self.wavenumbers[axis]
    }

    /// Unnormalized forward transform in place.
    pub fn forward(&self, data: &mut [Complex64]) {
        self.transform(data, &self.forward);
    }

    /// Inverse transform in place, including the `1/N` normalization.
    pub fn inverse(&self, data: &mut [Complex64]) {
        self.transform(data, &self.inverse);
        let scale = 1.0 / data.len() as f64;
        for z in data.iter_mut() {
            *z *= scale;
        }
    }

    fn transform(&self, data: &mut [Complex64], plans: &[Arc<dyn Fft<f64>>]) {
        assert_eq!(data.len(), self.grid.len(), "buffer does not match grid");
        let dims = self.grid.dims();
        for axis in 0..dims {
            let n = self.grid.points()[axis];
            let plan = &plans[axis];
            let mut scratch = vec![Complex64::new(0.0, 0.0); plan.get_inplace_scratch_len()];
            let stride = self.grid.stride(axis);
            if stride == 1 {
                plan.process_with_scratch(data, &mut scratch);
                continue;
            }
            let block = n * stride;
            let mut line = vec![Complex64::new(0.0, 0.0); n];
            for outer in (0..data.len()).step_by(block) {
                for inner in 0..stride {
                    let base = outer + inner;
                    for (j, slot) in line.iter_mut().enumerate() {
                        *slot = data[base + j * stride];
                    }
                    plan.process_with_scratch(&mut line, &mut scratch);
                    for (j, value) in line.iter().enumerate() {
                        data[base + j * stride] = *value;
                    }
                }
            }
        }
    }

    /// Multiply a spectrum by a per-axis factor `f(k_axis)`.
    pub fn apply_axis_factor(&self, spectrum: &mut [Complex64], axis: usize, factor: &[Complex64]) {
        let n = self.grid.points()[axis];
        let stride = self.grid.stride(axis);
        for (flat, z) in spectrum.iter_mut().enumerate() {
            *z *= factor[(flat / stride) % n];
        }
    }

    /// First derivative along `axis` of a field given by its spectrum.
    /// The Nyquist mode is dropped so real inputs keep real derivatives.
    pub fn derivative_from_spectrum(&self, spectrum: &[Complex64], axis: usize) -> Vec<Complex64> {
        let n = self.grid.points()[axis];
        let factor: Vec<Complex64> = self.wavenumbers[axis]
            .iter()
            .enumerate()
            .map(|(j, &k)| {
                if j == n / 2 {
                    Complex64::new(0.0, 0.0)
                } else {
                    Complex64::new(0.0, k)
                }
            })
            .collect();
        let mut out = spectrum.to_vec();
        self.apply_axis_factor(&mut out, axis, &factor);
        self.inverse(&mut out);
        out
    }

    /// Spectral gradient of complex samples, one vector per axis.
    pub fn gradient(&self, values: &[Complex64]) -> Vec<Vec<Complex64>> {
        let mut spectrum = values.to_vec();
        self.forward(&mut spectrum);
        (0..self.grid.dims())
            .map(|d| self.derivative_from_spectrum(&spectrum, d))
            .collect()
    }

    /// Spectral gradient of real samples.
    pub fn gradient_real(&self, values: &[f64]) -> Vec<Vec<f64>> {
        let complex: Vec<Complex64> = values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        self.gradient(&complex)
            .into_iter()
            .map(|g| g.into_iter().map(|z| z.re).collect())
            .collect()
    }

    /// Second derivative along one axis, keeping the Nyquist mode (`-k^2`).
    pub fn second_derivative(&self, values: &[Complex64], axis: usize) -> Vec<Complex64> {
        let mut spectrum = values.to_vec();
        self.forward(&mut spectrum);
        let factor: Vec<Complex64> = self.wavenumbers[axis]
            .iter()
            .map(|&k| Complex64::new(-k * k, 0.0))
            .collect();
        self.apply_axis_factor(&mut spectrum, axis, &factor);
        self.inverse(&mut spectrum);
        spectrum
    }

    /// Full Laplacian `sum_d d^2/dx_d^2`.
    pub fn laplacian(&self, values: &[Complex64]) -> Vec<Complex64> {
        let mut spectrum = values.to_vec();
        self.forward(&mut spectrum);
        let k2 = self.k_squared_weighted(&vec![1.0; self.grid.dims()]);
        for (z, &w) in spectrum.iter_mut().zip(&k2) {
            *z *= -w;
        }
        self.inverse(&mut spectrum);
        spectrum
    }

    /// `sum_d weights[d] * k_d^2` at every spectral node.
    pub fn k_squared_weighted(&self, weights: &[f64]) -> Vec<f64> {
        let g = &self.grid;
        (0..g.len())
            .map(|flat| {
                let idx = g.multi_index(flat);
                (0..g.dims())
                    .map(|d| {
                        let k = self.wavenumbers[d][idx[d]];
                        weights[d] * k * k
                    })
                    .sum()
            })
            .collect()
    }

    /// Spectral divergence of a real vector field.
    pub fn divergence(&self, components: &[Vec<f64>]) -> Vec<f64> {
        let mut total = vec![0.0; self.grid.len()];
        for (d, comp) in components.iter().enumerate() {
            let mut spectrum: Vec<Complex64> = comp.iter().map(|&v| Complex64::new(v, 0.0)).collect();
            self.forward(&mut spectrum);
            let deriv = self.derivative_from_spectrum(&spectrum, d);
            for (t, z) in total.iter_mut().zip(deriv) {
                *t += z.re;
            }
        }
        total
    }
}
