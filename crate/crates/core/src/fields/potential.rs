use serde::{Deserialize, Serialize};

use super::grid::{GridSpec, Position};
use crate::error::{Error, Result};

/// Opening in a barrier, measured along the transverse axis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Aperture {
    pub center: f64,
    pub width: f64,
}

/// Real external potential, evaluable at every grid node.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PotentialSpec {
    Zero,
    /// `sum_d m_d w_d^2 (x_d - c_d)^2 / 2 + quartic_d (x_d - c_d)^4`.
    Harmonic {
        center: Vec<f64>,
        omega: Vec<f64>,
        #[serde(default)]
        quartic: Vec<f64>,
    },
    /// Wall of height `height` across the plane `x_axis = position`, thickness
    /// `thickness`, with apertures along the other axis (2-D grids only).
    /// Edges are smoothed with a `tanh` profile of width `edge`.
    Barrier {
        axis: usize,
        position: f64,
        thickness: f64,
        height: f64,
        apertures: Vec<Aperture>,
        #[serde(default)]
        edge: f64,
    },
    /// Constant-gradient ramp `gradient * clamp(x - center, -half_width, half_width)`.
    Ramp {
        axis: usize,
        center: f64,
        gradient: f64,
        half_width: f64,
    },
    Tabulated { values: Vec<f64> },
}

fn smooth_step(x: f64, edge: f64) -> f64 {
    if edge <= 0.0 {
        if x >= 0.0 {
            1.0
        } else {
            0.0
        }
    } else {
        0.5 * (1.0 + (x / edge).tanh())
    }
}

/// Smooth indicator of `|x - c| <= w/2`.
fn window(x: f64, c: f64, w: f64, edge: f64) -> f64 {
    smooth_step(x - (c - 0.5 * w), edge) * smooth_step((c + 0.5 * w) - x, edge)
}

impl PotentialSpec {
    pub fn harmonic(center: &[f64], omega: &[f64]) -> Self {
        PotentialSpec::Harmonic {
            center: center.to_vec(),
            omega: omega.to_vec(),
            quartic: Vec::new(),
        }
    }

    pub fn tabulate(grid: &GridSpec, f: impl Fn(&Position) -> f64) -> Self {
        PotentialSpec::Tabulated {
            values: (0..grid.len()).map(|i| f(&grid.node_position(i))).collect(),
        }
    }

    pub fn is_zero(&self) -> bool {
        matches!(self, PotentialSpec::Zero)
    }

    /// Value at one point; `Tabulated` has no pointwise form and panics.
    fn at(&self, grid: &GridSpec, x: &Position) -> f64 {
        match self {
            PotentialSpec::Zero => 0.0,
            PotentialSpec::Harmonic { center, omega, quartic } => (0..grid.dims())
                .map(|d| {
                    let dx = x[d] - center[d];
                    let q = quartic.get(d).copied().unwrap_or(0.0);
                    0.5 * grid.masses()[d] * omega[d] * omega[d] * dx * dx + q * dx.powi(4)
                })
                .sum(),
            PotentialSpec::Barrier {
                axis,
                position,
                thickness,
                height,
                apertures,
                edge,
            } => {
                let other = 1 - axis;
                let wall = window(x[*axis], *position, *thickness, *edge);
                let open: f64 = apertures
                    .iter()
                    .map(|a| window(x[other], a.center, a.width, *edge))
                    .sum::<f64>()
                    .min(1.0);
                height * wall * (1.0 - open)
            }
            PotentialSpec::Ramp {
                axis,
                center,
                gradient,
                half_width,
            } => gradient * (x[*axis] - center).clamp(-half_width, *half_width),
            PotentialSpec::Tabulated { .. } => unreachable!("tabulated potentials are evaluated by node"),
        }
    }

    fn check_shape(&self, grid: &GridSpec) -> Result<()> {
        let dims = grid.dims();
        match self {
            PotentialSpec::Zero => Ok(()),
            PotentialSpec::Harmonic { center, omega, quartic } => {
                if center.len() != dims || omega.len() != dims || quartic.len() > dims {
                    Err(Error::InvalidPotential("harmonic parameters must match grid dims".into()))
                } else {
                    Ok(())
                }
            }
            PotentialSpec::Barrier { axis, thickness, .. } => {
                if dims != 2 || *axis > 1 {
                    Err(Error::InvalidPotential("barrier requires a 2-D grid and axis 0 or 1".into()))
                } else if *thickness <= 0.0 {
                    Err(Error::InvalidPotential("barrier thickness must be positive".into()))
                } else {
                    Ok(())
                }
            }
            PotentialSpec::Ramp { axis, half_width, .. } => {
                if *axis >= dims || *half_width < 0.0 {
                    Err(Error::InvalidPotential("ramp axis out of range".into()))
                } else {
                    Ok(())
                }
            }
            PotentialSpec::Tabulated { values } => {
                if values.len() != grid.len() {
                    Err(Error::InvalidPotential(format!(
                        "tabulated potential has {} values for {} nodes",
                        values.len(),
                        grid.len()
                    )))
                } else {
                    Ok(())
                }
            }
        }
    }

    /// Node values; rejects non-finite results.
    pub fn evaluate(&self, grid: &GridSpec) -> Result<Vec<f64>> {
        self.check_shape(grid)?;
        let values: Vec<f64> = match self {
            PotentialSpec::Tabulated { values } => values.clone(),
            _ => (0..grid.len()).map(|i| self.at(grid, &grid.node_position(i))).collect(),
        };
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidPotential(format!("non-finite value at node {i}")));
        }
        Ok(values)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn harmonic_matches_formula() {
        let g = GridSpec::with_physics(&[16], &[4.0], &[2.0], 1.0).unwrap();
        let v = PotentialSpec::harmonic(&[2.0], &[3.0]).evaluate(&g).unwrap();
        for (i, &vi) in v.iter().enumerate() {
            let dx = g.coord(0, i) - 2.0;
            assert!((vi - 0.5 * 2.0 * 9.0 * dx * dx).abs() < 1e-12);
        }
    }

    #[test]
    fn barrier_is_open_at_apertures() {
        let g = GridSpec::new(&[64, 64], &[32.0, 32.0]).unwrap();
        let spec = PotentialSpec::Barrier {
            axis: 0,
            position: 16.0,
            thickness: 2.0,
            height: 10.0,
            apertures: vec![Aperture { center: 10.0, width: 4.0 }],
            edge: 0.0,
        };
        let v = spec.evaluate(&g).unwrap();
        let at = |x: f64, y: f64| v[g.flat_index(&[(x / 0.5) as usize, (y / 0.5) as usize])];
        assert_eq!(at(16.0, 20.0), 10.0);
        assert_eq!(at(16.0, 10.0), 0.0);
        assert_eq!(at(5.0, 20.0), 0.0);
    }

    #[test]
    fn tabulated_size_checked() {
        let g = GridSpec::new(&[8], &[1.0]).unwrap();
        assert!(PotentialSpec::Tabulated { values: vec![0.0; 7] }.evaluate(&g).is_err());
        assert!(PotentialSpec::Tabulated { values: vec![f64::INFINITY; 8] }
            .evaluate(&g)
            .is_err());
    }

    #[test]
    fn ramp_is_clamped() {
        let g = GridSpec::new(&[16], &[16.0]).unwrap();
        let v = PotentialSpec::Ramp {
            axis: 0,
            center: 8.0,
            gradient: 2.0,
            half_width: 3.0,
        }
        .evaluate(&g)
        .unwrap();
        assert_eq!(v[8], 0.0);
        assert_eq!(v[10], 4.0);
        assert_eq!(v[15], 6.0);
        assert_eq!(v[0], -6.0);
    }
}
