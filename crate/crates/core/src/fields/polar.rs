use num_complex::Complex64;

use super::field::ComplexField;
use super::grid::GridSpec;
use super::spectral::Spectral;
use crate::error::{Error, Result};

/// Amplitude/phase split `psi = R exp(i S / hbar)`.
#[derive(Debug, Clone)]
pub struct PolarPair {
    pub grid: GridSpec,
    pub amplitude: Vec<f64>,
    /// Principal-value phase in action units, in `(-pi hbar, pi hbar]`.
    pub phase: Vec<f64>,
    /// `false` where `R <= node_floor`; the phase there is meaningless.
    pub defined: Vec<bool>,
}

impl PolarPair {
    pub fn recompose(&self) -> ComplexField {
        let hbar = self.grid.hbar();
        let values = self
            .amplitude
            .iter()
            .zip(&self.phase)
            .map(|(&r, &s)| Complex64::from_polar(r, s / hbar))
            .collect();
        ComplexField::new(self.grid.clone(), values).expect("sizes match by construction")
    }

    pub fn undefined_count(&self) -> usize {
        self.defined.iter().filter(|d| !**d).count()
    }
}

pub fn polar_decompose(psi: &ComplexField) -> Result<PolarPair> {
    psi.check_finite()?;
    let hbar = psi.grid().hbar();
    let floor = psi.node_floor();
    let mut amplitude = Vec::with_capacity(psi.values().len());
    let mut phase = Vec::with_capacity(psi.values().len());
    let mut defined = Vec::with_capacity(psi.values().len());
    for z in psi.values() {
        let r = z.norm();
        amplitude.push(r);
        phase.push(hbar * z.arg());
        defined.push(r > floor);
    }
    Ok(PolarPair {
        grid: psi.grid().clone(),
        amplitude,
        phase,
        defined,
    })
}

/// Quantum potential sampled on the grid, with undefined nodes masked.
#[derive(Debug, Clone)]
pub struct QuantumPotential {
    pub values: Vec<f64>,
    pub defined: Vec<bool>,
}

/// `Q = -sum_d hbar^2/(2 m_d) (d_d^2 R)/R` with spectral second derivatives.
pub fn quantum_potential(psi: &ComplexField) -> Result<QuantumPotential> {
    let spectral = Spectral::new(psi.grid());
    quantum_potential_with(&spectral, psi)
}

pub fn quantum_potential_with(spectral: &Spectral, psi: &ComplexField) -> Result<QuantumPotential> {
    psi.check_finite()?;
    let grid = psi.grid();
    let floor = psi.node_floor();
    let r: Vec<Complex64> = psi.values().iter().map(|z| Complex64::new(z.norm(), 0.0)).collect();
    let defined: Vec<bool> = r.iter().map(|z| z.re > floor).collect();
    if floor == 0.0 || !defined.iter().any(|&d| d) {
        return Err(Error::AmplitudeBelowFloor);
    }
    let hbar = grid.hbar();
    let mut q = vec![0.0; grid.len()];
    for d in 0..grid.dims() {
        let coef = hbar * hbar / (2.0 * grid.masses()[d]);
        let d2 = spectral.second_derivative(&r, d);
        for i in 0..q.len() {
            if defined[i] {
                q[i] -= coef * d2[i].re / r[i].re;
            }
        }
    }
    for (v, &ok) in q.iter_mut().zip(&defined) {
        if !ok {
            *v = f64::NAN;
        }
    }
    Ok(QuantumPotential { values: q, defined })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn unit_field_has_zero_phase() {
        let g = GridSpec::new(&[16], &[1.0]).unwrap();
        let psi = ComplexField::from_fn(&g, |_| Complex64::new(1.0, 0.0));
        let p = polar_decompose(&psi).unwrap();
        assert!(p.amplitude.iter().all(|&r| (r - 1.0).abs() < 1e-15));
        assert!(p.phase.iter().all(|&s| s == 0.0));
    }

    #[test]
    fn pure_phase_on_circle() {
        let l = 3.0;
        let g = GridSpec::new(&[32], &[l]).unwrap();
        let psi = ComplexField::from_fn(&g, |x| Complex64::from_polar(1.0, 2.0 * PI * x[0] / l));
        let p = polar_decompose(&psi).unwrap();
        for (i, &s) in p.phase.iter().enumerate() {
            let expected = 2.0 * PI * g.coord(0, i) / l;
            let diff = (s - expected).rem_euclid(2.0 * PI);
            assert!(diff < 1e-12 || (2.0 * PI - diff) < 1e-12);
        }
    }

    #[test]
    fn nan_input_is_rejected() {
        let g = GridSpec::new(&[8], &[1.0]).unwrap();
        let mut v = vec![Complex64::new(1.0, 0.0); 8];
        v[3] = Complex64::new(f64::NAN, 0.0);
        let psi = ComplexField::new(g, v).unwrap();
        assert_eq!(polar_decompose(&psi).unwrap_err(), Error::NonFinite { node: 3 });
    }

    #[test]
    fn plane_wave_has_zero_quantum_potential() {
        let g = GridSpec::new(&[32], &[2.0]).unwrap();
        let psi = ComplexField::from_fn(&g, |x| Complex64::from_polar(1.0, 2.0 * PI * 3.0 * x[0] / 2.0))
            .normalize()
            .unwrap();
        let q = quantum_potential(&psi).unwrap();
        assert!(q.values.iter().all(|v| v.abs() < 1e-10));
    }

    #[test]
    fn all_zero_field_errors() {
        let g = GridSpec::new(&[8], &[1.0]).unwrap();
        let psi = ComplexField::from_fn(&g, |_| Complex64::new(0.0, 0.0));
        assert_eq!(quantum_potential(&psi).unwrap_err(), Error::AmplitudeBelowFloor);
    }
}
