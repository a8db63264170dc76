use super::velocity::VelocityField;
use crate::error::{Error, Result};
use crate::fields::{grid_norm, ComplexField, Spectral};

/// Relative size below which a stream-function gradient counts as zero when
/// checking its support against flagged nodes.
const SUPPORT_THRESHOLD: f64 = 1e-12;

/// Extra guidance term `v' = eps (-d2 chi, d1 chi) / |psi|^2` on a 2-D
/// domain. The flux `|psi|^2 v'` is a rotated gradient, hence divergence free.
#[derive(Debug, Clone)]
pub struct ModifiedGuidance {
    chi: Vec<f64>,
    eps: f64,
    flux: Vec<Vec<f64>>,
    velocity: VelocityField,
}

impl ModifiedGuidance {
    pub fn eps(&self) -> f64 {
        self.eps
    }

    pub fn chi(&self) -> &[f64] {
        &self.chi
    }

    /// The extra velocity `v'` as a node field.
    pub fn field(&self) -> &VelocityField {
        &self.velocity
    }

    /// `|psi|^2 v'` per node and axis.
    pub fn flux(&self) -> &[Vec<f64>] {
        &self.flux
    }

    /// Grid norm of the spectral divergence of `|psi|^2 v'`, recomputed
    /// from the stored velocity and the supplied density.
    pub fn divergence_residual(&self, spectral: &Spectral, psi: &ComplexField) -> Result<f64> {
        let grid = spectral.grid();
        grid.check_same(psi.grid())?;
        let density = psi.density();
        let flux: Vec<Vec<f64>> = (0..2)
            .map(|d| {
                self.velocity
                    .component(d)
                    .iter()
                    .zip(&density)
                    .map(|(v, r)| v * r)
                    .collect()
            })
            .collect();
        Ok(grid_norm(grid, &spectral.divergence(&flux)))
    }
}

pub fn build_divergence_free(psi: &ComplexField, chi: &[f64], eps: f64) -> Result<ModifiedGuidance> {
    build_divergence_free_with(&Spectral::new(psi.grid()), psi, chi, eps)
}

pub fn build_divergence_free_with(
    spectral: &Spectral,
    psi: &ComplexField,
    chi: &[f64],
    eps: f64,
) -> Result<ModifiedGuidance> {
    let grid = psi.grid();
    if grid.dims() != 2 {
        return Err(Error::UnsupportedDimension(format!(
            "divergence-free modification needs a 2-D domain, got {}",
            grid.dims()
        )));
    }
    spectral.grid().check_same(grid)?;
    if chi.len() != grid.len() {
        return Err(Error::GridMismatch("stream generator size differs from grid".into()));
    }
    if !(eps.is_finite() && eps >= 0.0) {
        return Err(Error::InvalidArgument(format!("eps must be >= 0, got {eps}")));
    }
    if let Some(node) = chi.iter().position(|c| !c.is_finite()) {
        return Err(Error::NonFinite { node });
    }
    let grad = spectral.gradient_real(chi);
    let floor = psi.node_floor();
    let flagged: Vec<bool> = psi.values().iter().map(|z| z.norm() <= floor).collect();
    let scale = grad
        .iter()
        .flat_map(|g| g.iter())
        .fold(0.0f64, |m, v| m.max(v.abs()));
    let cut = SUPPORT_THRESHOLD * scale;
    let overlap = (0..grid.len())
        .filter(|&i| flagged[i] && (grad[0][i].abs() > cut || grad[1][i].abs() > cut))
        .count();
    if scale > 0.0 && overlap > 0 {
        return Err(Error::FlaggedSupport { count: overlap });
    }
    let flux = vec![
        grad[1].iter().map(|g| -eps * g).collect::<Vec<f64>>(),
        grad[0].iter().map(|g| eps * g).collect::<Vec<f64>>(),
    ];
    let density = psi.density();
    let components = flux
        .iter()
        .map(|f| {
            f.iter()
                .zip(&density)
                .zip(&flagged)
                .map(|((f, r), &bad)| if bad { 0.0 } else { f / r })
                .collect()
        })
        .collect();
    let velocity = VelocityField::new(grid.clone(), components, vec![false; grid.len()]);
    Ok(ModifiedGuidance {
        chi: chi.to_vec(),
        eps,
        flux,
        velocity,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::GridSpec;
    use num_complex::Complex64;
    use std::f64::consts::PI;

    #[test]
    fn zero_generator_adds_nothing() {
        let g = GridSpec::new(&[16, 16], &[1.0, 1.0]).unwrap();
        let psi = ComplexField::from_fn(&g, |_| Complex64::new(1.0, 0.0));
        let m = build_divergence_free(&psi, &vec![0.0; g.len()], 0.5).unwrap();
        assert!(m.field().component(0).iter().all(|v| *v == 0.0));
    }

    #[test]
    fn sine_generator_on_uniform_density() {
        let (l1, l2) = (2.0, 3.0);
        let g = GridSpec::new(&[32, 16], &[l1, l2]).unwrap();
        let psi = ComplexField::from_fn(&g, |_| Complex64::new(1.0, 0.0)).normalize().unwrap();
        let rho = psi.values()[0].norm_sqr();
        let chi: Vec<f64> = (0..g.len())
            .map(|i| (2.0 * PI * g.node_position(i)[0] / l1).sin())
            .collect();
        let eps = 0.3;
        let spectral = Spectral::new(&g);
        let m = build_divergence_free_with(&spectral, &psi, &chi, eps).unwrap();
        for i in 0..g.len() {
            let x = g.node_position(i)[0];
            let expected = eps * (2.0 * PI / l1) * (2.0 * PI * x / l1).cos() / rho;
            assert!(m.field().component(0)[i].abs() < 1e-12);
            assert!((m.field().component(1)[i] - expected).abs() < 1e-10);
        }
        assert!(m.divergence_residual(&spectral, &psi).unwrap() < 1e-10);
    }

    #[test]
    fn rejects_one_dimensional_and_flagged_support() {
        let g1 = GridSpec::new(&[16], &[1.0]).unwrap();
        let psi1 = ComplexField::from_fn(&g1, |_| Complex64::new(1.0, 0.0));
        assert!(matches!(
            build_divergence_free(&psi1, &vec![0.0; 16], 1.0),
            Err(Error::UnsupportedDimension(_))
        ));
        let g = GridSpec::new(&[16, 16], &[1.0, 1.0]).unwrap();
        let psi = ComplexField::from_fn(&g, |x| Complex64::new((PI * x[0]).sin(), 0.0));
        let chi: Vec<f64> = (0..g.len())
            .map(|i| (2.0 * PI * g.node_position(i)[1]).sin())
            .collect();
        assert!(matches!(
            build_divergence_free(&psi, &chi, 1.0),
            Err(Error::FlaggedSupport { .. })
        ));
    }
}
