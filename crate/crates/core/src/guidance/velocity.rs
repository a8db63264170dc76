use crate::fields::{ComplexField, GridSpec, Position, Spectral, Stencil, MAX_DIMS};
use crate::propagator::BranchSuperposition;

/// Guidance velocity sampled at grid nodes, with node-proximity flags.
#[derive(Debug, Clone, PartialEq)]
pub struct VelocityField {
    grid: GridSpec,
    components: Vec<Vec<f64>>,
    flagged: Vec<bool>,
}

impl VelocityField {
    pub fn new(grid: GridSpec, components: Vec<Vec<f64>>, flagged: Vec<bool>) -> Self {
        assert_eq!(components.len(), grid.dims());
        assert!(components.iter().all(|c| c.len() == grid.len()));
        assert_eq!(flagged.len(), grid.len());
        Self {
            grid,
            components,
            flagged,
        }
    }

    pub fn zero(grid: &GridSpec) -> Self {
        Self::constant(grid, &vec![0.0; grid.dims()])
    }

    pub fn constant(grid: &GridSpec, v: &[f64]) -> Self {
        Self {
            grid: grid.clone(),
            components: v.iter().map(|&c| vec![c; grid.len()]).collect(),
            flagged: vec![false; grid.len()],
        }
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn component(&self, axis: usize) -> &[f64] {
        &self.components[axis]
    }

    pub fn flagged(&self) -> &[bool] {
        &self.flagged
    }

    pub fn flagged_count(&self) -> usize {
        self.flagged.iter().filter(|f| **f).count()
    }

    pub fn at_node(&self, flat: usize) -> Option<Position> {
        if self.flagged[flat] {
            return None;
        }
        let mut v = [0.0; MAX_DIMS];
        for (d, c) in self.components.iter().enumerate() {
            v[d] = c[flat];
        }
        Some(v)
    }

    pub(crate) fn eval_stencil(&self, s: &Stencil) -> Option<Position> {
        if s.touches(&self.flagged) {
            return None;
        }
        let mut v = [0.0; MAX_DIMS];
        for (d, c) in self.components.iter().enumerate() {
            v[d] = s.apply(c);
        }
        if v.iter().all(|x| x.is_finite()) {
            Some(v)
        } else {
            None
        }
    }

    /// Multilinear interpolation from the surrounding nodes; `None` when any
    /// of them is flagged or the result is not finite.
    pub fn interpolate(&self, x: &Position) -> Option<Position> {
        self.eval_stencil(&Stencil::new(&self.grid, x))
    }
}

/// `v_d = (hbar/m_d) Im(psi* d_d psi) / |psi|^2` at each node.
pub fn velocity_from_psi(psi: &ComplexField) -> VelocityField {
    velocity_from_psi_with(&Spectral::new(psi.grid()), psi)
}

pub fn velocity_from_psi_with(spectral: &Spectral, psi: &ComplexField) -> VelocityField {
    let grid = psi.grid();
    let floor = psi.node_floor();
    let flagged: Vec<bool> = psi
        .values()
        .iter()
        .map(|z| !(z.norm() > floor && z.re.is_finite() && z.im.is_finite()))
        .collect();
    let grad = spectral.gradient(psi.values());
    let components = grad
        .iter()
        .enumerate()
        .map(|(d, g)| {
            let coef = grid.hbar() / grid.masses()[d];
            psi.values()
                .iter()
                .zip(g)
                .zip(&flagged)
                .map(|((z, dz), &f)| if f { 0.0 } else { coef * (z.conj() * dz).im / z.norm_sqr() })
                .collect()
        })
        .collect();
    VelocityField::new(grid.clone(), components, flagged)
}

/// Velocity for a configuration guided by decoupled branches:
/// `v = sum_n |c_n|^2 j_n / sum_n |c_n|^2 |phi_n|^2`, where each branch
/// current includes the drift term `u_n |phi_n|^2`.
pub fn velocity_from_branches(spectral: &Spectral, b: &BranchSuperposition) -> VelocityField {
    let grid = b.grid();
    let dims = grid.dims();
    let mut density = vec![0.0; grid.len()];
    let mut current = vec![vec![0.0; grid.len()]; dims];
    for br in b.branches() {
        let w = br.weight();
        if w == 0.0 {
            continue;
        }
        let vals = br.field.values();
        let grad = spectral.gradient(vals);
        for (i, z) in vals.iter().enumerate() {
            let rho = z.norm_sqr();
            density[i] += w * rho;
            for d in 0..dims {
                let coef = grid.hbar() / grid.masses()[d];
                current[d][i] += w * (coef * (z.conj() * grad[d][i]).im + br.drift[d] * rho);
            }
        }
    }
    let max_amp = density.iter().fold(0.0f64, |m, &r| m.max(r)).sqrt();
    let floor = crate::fields::NODE_FLOOR_RELATIVE * max_amp;
    let flagged: Vec<bool> = density
        .iter()
        .map(|&r| !(r.is_finite() && r.sqrt() > floor))
        .collect();
    for comp in current.iter_mut() {
        for (i, c) in comp.iter_mut().enumerate() {
            *c = if flagged[i] { 0.0 } else { *c / density[i] };
        }
    }
    VelocityField::new(grid.clone(), current, flagged)
}
