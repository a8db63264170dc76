use std::f64::consts::PI;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::ensemble::LinearCdf;
use crate::error::{Error, Result};
use crate::fields::{ComplexField, GridSpec, Position, Region, MAX_DIMS};
use crate::rng::{derive_seed, stream};

/// Product reference measure `rho(x) = prod_d rho_d(x_d)`, each factor the
/// piecewise-linear interpolant of node values. Maps act in the CDF
/// coordinates `u_d = F_d(x_d)`, where the measure becomes Lebesgue.
#[derive(Debug, Clone)]
pub struct ProductMeasure {
    marginals: Vec<LinearCdf>,
}

impl ProductMeasure {
    pub fn new(marginals: Vec<LinearCdf>) -> Result<Self> {
        if marginals.is_empty() || marginals.len() > MAX_DIMS {
            return Err(Error::UnsupportedDimension(format!("{} marginals", marginals.len())));
        }
        Ok(Self { marginals })
    }

    /// `|psi|^2` of a 1-D field.
    pub fn from_field(psi: &ComplexField) -> Result<Self> {
        Self::new(vec![LinearCdf::from_field(psi)?])
    }

    pub fn uniform(grid: &GridSpec) -> Result<Self> {
        let marginals = (0..grid.dims())
            .map(|d| LinearCdf::new(grid.spacing(d), &vec![1.0; grid.points()[d]]))
            .collect::<Result<_>>()?;
        Self::new(marginals)
    }

    pub fn dims(&self) -> usize {
        self.marginals.len()
    }

    pub fn marginal(&self, axis: usize) -> &LinearCdf {
        &self.marginals[axis]
    }

    pub fn to_unit(&self, x: &Position) -> Position {
        let mut u = [0.0; MAX_DIMS];
        for (d, m) in self.marginals.iter().enumerate() {
            u[d] = m.eval(crate::fields::wrap_periodic(x[d], m.length()));
        }
        u
    }

    pub fn from_unit(&self, u: &Position) -> Position {
        let mut x = [0.0; MAX_DIMS];
        for (d, m) in self.marginals.iter().enumerate() {
            x[d] = crate::fields::wrap_periodic(m.inverse(u[d]), m.length());
        }
        x
    }

    pub fn density(&self, x: &Position) -> f64 {
        self.marginals.iter().enumerate().map(|(d, m)| m.density(x[d])).product()
    }
}

/// Parameterized families of measure-preserving maps on the unit torus.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum MapFamily {
    Identity,
    /// `u -> u + theta (mod 1)` with `theta ~ U[-max_kick, max_kick]` per
    /// axis, drawn once per step or independently per ensemble member.
    Rotation { max_kick: f64, per_member: bool },
    /// Two-dimensional kicked shear
    /// `u1 += a sin(2 pi u2) + b; u2 += c sin(2 pi u1') + d`, with
    /// `a, c ~ U[-strength, strength]` and `b, d ~ U[0, 1)` shared by all members.
    Shear { strength: f64 },
}

/// A seeded sequence `U_1, U_2, ...` from one family, acting on the
/// configuration space through a product reference measure.
#[derive(Debug, Clone)]
pub struct IteratedMap {
    family: MapFamily,
    measure: ProductMeasure,
    seed: u64,
}

fn wrap_unit(u: f64) -> f64 {
    crate::fields::wrap_periodic(u, 1.0)
}

impl IteratedMap {
    pub fn new(family: MapFamily, measure: ProductMeasure, seed: u64) -> Result<Self> {
        if let MapFamily::Shear { .. } = family {
            if measure.dims() != 2 {
                return Err(Error::UnsupportedDimension("the shear family needs two dimensions".into()));
            }
        }
        Ok(Self { family, measure, seed })
    }

    pub fn family(&self) -> &MapFamily {
        &self.family
    }

    pub fn measure(&self) -> &ProductMeasure {
        &self.measure
    }

    /// Step `step` (from 1) in unit-torus coordinates for ensemble member `member`.
    pub fn apply_unit(&self, step: u64, member: u64, u: &Position) -> Position {
        let dims = self.measure.dims();
        let mut out = *u;
        match &self.family {
            MapFamily::Identity => {}
            MapFamily::Rotation { max_kick, per_member } => {
                let mut rng = if *per_member {
                    stream(derive_seed(self.seed, step), member)
                } else {
                    stream(self.seed, step)
                };
                for x in out.iter_mut().take(dims) {
                    let theta = max_kick * (2.0 * rng.gen::<f64>() - 1.0);
                    *x = wrap_unit(*x + theta);
                }
            }
            MapFamily::Shear { strength } => {
                let [a, b, c, d] = self.shear_parameters(step, *strength);
                out[0] = wrap_unit(u[0] + a * (2.0 * PI * u[1]).sin() + b);
                out[1] = wrap_unit(u[1] + c * (2.0 * PI * out[0]).sin() + d);
            }
        }
        out
    }

    fn shear_parameters(&self, step: u64, strength: f64) -> [f64; 4] {
        let mut rng = stream(self.seed, step);
        let a = strength * (2.0 * rng.gen::<f64>() - 1.0);
        let b = rng.gen::<f64>();
        let c = strength * (2.0 * rng.gen::<f64>() - 1.0);
        let d = rng.gen::<f64>();
        [a, b, c, d]
    }

    pub fn apply(&self, step: u64, member: u64, x: &Position) -> Position {
        self.measure
            .from_unit(&self.apply_unit(step, member, &self.measure.to_unit(x)))
    }
}

/// Numerical check that one map preserves the reference measure.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MeasureAudit {
    /// `max | |det DT(u)| - 1 |` by central differences on the unit torus.
    pub jacobian_defect: f64,
    /// `max |F^-1(F(x)) - x| / l` of the coordinate change.
    pub roundtrip_error: f64,
}

impl MeasureAudit {
    pub fn passes(&self, tolerance: f64) -> bool {
        self.jacobian_defect < tolerance && self.roundtrip_error < tolerance
    }
}

pub fn audit_measure_preservation(map: &IteratedMap, step: u64, probes: usize, seed: u64) -> MeasureAudit {
    let dims = map.measure.dims();
    let eps = 1e-6;
    let mut rng = stream(seed, 0);
    let mut jac = 0.0f64;
    let mut rt = 0.0f64;
    for member in 0..probes as u64 {
        let mut u = [0.0; MAX_DIMS];
        for x in u.iter_mut().take(dims) {
            // stay away from the seam so differences do not wrap
            *x = 0.05 + 0.9 * rng.gen::<f64>();
        }
        let mut m = [[0.0; MAX_DIMS]; MAX_DIMS];
        for j in 0..dims {
            let mut up = u;
            let mut dn = u;
            up[j] += eps;
            dn[j] -= eps;
            let a = map.apply_unit(step, member, &up);
            let b = map.apply_unit(step, member, &dn);
            for i in 0..dims {
                let mut diff = a[i] - b[i];
                diff -= diff.round();
                m[i][j] = diff / (2.0 * eps);
            }
        }
        let det = match dims {
            1 => m[0][0],
            2 => m[0][0] * m[1][1] - m[0][1] * m[1][0],
            _ => {
                m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
                    + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
            }
        };
        jac = jac.max((det.abs() - 1.0).abs());
        let x = map.measure.from_unit(&u);
        let back = map.measure.from_unit(&map.measure.to_unit(&x));
        for d in 0..dims {
            let l = map.measure.marginal(d).length();
            let mut e = (back[d] - x[d]) / l;
            e -= e.round();
            rt = rt.max(e.abs());
        }
    }
    MeasureAudit {
        jacobian_defect: jac,
        roundtrip_error: rt,
    }
}

/// Result of iterating a map sequence over an ensemble.
#[derive(Debug, Clone)]
pub struct MapRun {
    pub positions: Vec<Position>,
    /// `visits[r][k]`: iterates of sample `k` that landed in region `r`.
    pub visits: Vec<Vec<u64>>,
    pub steps: u64,
}

impl MapRun {
    /// Fraction of all iterates of all samples inside region `r`.
    pub fn occupancy(&self, r: usize) -> f64 {
        let total: u64 = self.visits[r].iter().sum();
        total as f64 / (self.steps as f64 * self.visits[r].len() as f64)
    }
}

/// `X_n = U_n(X_{n-1})` for every sample, counting per-iterate visits to each
/// region. `observe(n, positions)` runs after every step.
pub fn apply_map_sequence(
    x0: &[Position],
    map: &IteratedMap,
    n_steps: u64,
    regions: &[Region],
    mut observe: impl FnMut(u64, &[Position]),
) -> MapRun {
    let mut positions = x0.to_vec();
    let mut visits = vec![vec![0u64; x0.len()]; regions.len()];
    for step in 1..=n_steps {
        if !matches!(map.family, MapFamily::Identity) {
            positions
                .par_iter_mut()
                .enumerate()
                .for_each(|(k, x)| *x = map.apply(step, k as u64, x));
        }
        for (r, region) in regions.iter().enumerate() {
            for (k, x) in positions.iter().enumerate() {
                if region.contains(x) {
                    visits[r][k] += 1;
                }
            }
        }
        observe(step, &positions);
    }
    MapRun {
        positions,
        visits,
        steps: n_steps,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_complex::Complex64;

    fn bumpy_measure() -> ProductMeasure {
        let g = GridSpec::new(&[64], &[4.0]).unwrap();
        let psi = ComplexField::from_fn(&g, |x| Complex64::new(1.2 + (PI * x[0] / 2.0).sin(), 0.0));
        ProductMeasure::from_field(&psi).unwrap()
    }

    #[test]
    fn identity_never_moves() {
        let map = IteratedMap::new(MapFamily::Identity, bumpy_measure(), 1).unwrap();
        let x0 = vec![[0.3, 0.0, 0.0], [2.2, 0.0, 0.0]];
        let run = apply_map_sequence(&x0, &map, 50, &[], |_, _| {});
        assert_eq!(run.positions, x0);
    }

    #[test]
    fn rotation_and_shear_pass_audit() {
        let rot = IteratedMap::new(
            MapFamily::Rotation {
                max_kick: 0.1,
                per_member: true,
            },
            bumpy_measure(),
            3,
        )
        .unwrap();
        assert!(audit_measure_preservation(&rot, 1, 200, 9).passes(1e-8));
        let g = GridSpec::new(&[32, 32], &[1.0, 2.0]).unwrap();
        let shear = IteratedMap::new(MapFamily::Shear { strength: 0.8 }, ProductMeasure::uniform(&g).unwrap(), 4).unwrap();
        let a = audit_measure_preservation(&shear, 7, 200, 9);
        assert!(a.passes(1e-8), "{a:?}");
    }

    #[test]
    fn shear_rejects_one_dimension() {
        assert!(IteratedMap::new(MapFamily::Shear { strength: 0.5 }, bumpy_measure(), 1).is_err());
    }
}
