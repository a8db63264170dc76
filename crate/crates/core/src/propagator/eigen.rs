use std::f64::consts::PI;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::fields::{ComplexField, GridSpec};

/// Momentum eigenstate `prod_d exp(i 2 pi n_d x_d / l_d)`, normalized, with
/// its energy `sum_d (2 pi n_d / l_d)^2 hbar^2 / 2 m_d`.
pub fn stationary_eigenfield(grid: &GridSpec, ns: &[i64]) -> Result<(ComplexField, f64)> {
    if ns.len() != grid.dims() {
        return Err(Error::InvalidArgument(format!(
            "expected {} quantum numbers, got {}",
            grid.dims(),
            ns.len()
        )));
    }
    for (axis, &n) in ns.iter().enumerate() {
        let bound = grid.points()[axis] / 2;
        if n.unsigned_abs() as usize >= bound {
            return Err(Error::AliasedQuantumNumber { axis, n, bound });
        }
    }
    let hbar = grid.hbar();
    let ks: Vec<f64> = ns
        .iter()
        .zip(grid.lengths())
        .map(|(&n, &l)| 2.0 * PI * n as f64 / l)
        .collect();
    let energy = ks
        .iter()
        .zip(grid.masses())
        .map(|(k, m)| k * k * hbar * hbar / (2.0 * m))
        .sum();
    let amp = 1.0 / grid.volume().sqrt();
    let field = ComplexField::from_fn(grid, |x| {
        let phase: f64 = ks.iter().enumerate().map(|(d, k)| k * x[d]).sum();
        Complex64::from_polar(amp, phase)
    });
    Ok((field, energy))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn energies() {
        let g = GridSpec::new(&[16], &[2.0 * PI]).unwrap();
        assert_eq!(stationary_eigenfield(&g, &[0]).unwrap().1, 0.0);
        let (psi, e) = stationary_eigenfield(&g, &[1]).unwrap();
        assert!((e - 0.5).abs() < 1e-14);
        assert!((psi.norm_sqr() - 1.0).abs() < 1e-12);
        let g2 = GridSpec::new(&[16, 16], &[1.0, 1.0]).unwrap();
        let e2 = stationary_eigenfield(&g2, &[1, 2]).unwrap().1;
        assert!((e2 - 10.0 * PI * PI).abs() < 1e-10);
    }

    #[test]
    fn aliased_numbers_rejected() {
        let g = GridSpec::new(&[16], &[1.0]).unwrap();
        assert!(matches!(
            stationary_eigenfield(&g, &[8]),
            Err(Error::AliasedQuantumNumber { n: 8, bound: 8, .. })
        ));
        assert!(stationary_eigenfield(&g, &[-7]).is_ok());
    }
}
