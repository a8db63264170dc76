use std::sync::Arc;

use num_complex::Complex64;
use rayon::prelude::*;

use super::{Propagator, PropagatorConfig};
use crate::error::{Error, Result};
use crate::fields::{ComplexField, GridSpec, PotentialSpec, Spectral};

/// Shared factor multiplying every branch.
#[derive(Debug, Clone, PartialEq)]
pub enum SystemFactor {
    /// Stationary eigenfield of energy `energy`; contributes only a global
    /// phase `exp(-iEt/hbar)`.
    Stationary { energy: f64 },
    /// Discrete orthogonal eigenlabels with eigenvalues `Lambda_n`, one per branch.
    Eigenlabels { eigenvalues: Vec<f64> },
}

/// One term `c_n (system)_n phi_n` of a branch superposition.
#[derive(Debug, Clone, PartialEq)]
pub struct Branch {
    pub label: String,
    pub coefficient: Complex64,
    pub field: ComplexField,
    /// Sign `s_n` multiplying the coupling potential.
    pub potential_sign: f64,
    /// Constant drift velocity per axis generated by a `u . p` coupling.
    pub drift: Vec<f64>,
}

impl Branch {
    pub fn new(label: impl Into<String>, coefficient: Complex64, field: ComplexField) -> Self {
        let dims = field.grid().dims();
        Self {
            label: label.into(),
            coefficient,
            field,
            potential_sign: 0.0,
            drift: vec![0.0; dims],
        }
    }

    pub fn with_sign(mut self, sign: f64) -> Self {
        self.potential_sign = sign;
        self
    }

    pub fn with_drift(mut self, drift: Vec<f64>) -> Self {
        self.drift = drift;
        self
    }

    pub fn weight(&self) -> f64 {
        self.coefficient.norm_sqr()
    }
}

const COEFFICIENT_TOLERANCE: f64 = 1e-10;
const FIELD_NORM_TOLERANCE: f64 = 1e-9;

/// `sum_n c_n (system)_n phi_n` with orthogonal system factors, so the
/// branches never interfere in configuration-space densities.
#[derive(Debug, Clone, PartialEq)]
pub struct BranchSuperposition {
    branches: Vec<Branch>,
    system: SystemFactor,
    time: f64,
}

impl BranchSuperposition {
    pub fn new(branches: Vec<Branch>, system: SystemFactor) -> Result<Self> {
        if branches.is_empty() {
            return Err(Error::InvalidBranches("at least one branch required".into()));
        }
        let total: f64 = branches.iter().map(Branch::weight).sum();
        if (total - 1.0).abs() > COEFFICIENT_TOLERANCE {
            return Err(Error::InvalidBranches(format!("sum |c_n|^2 = {total}, expected 1")));
        }
        let grid = branches[0].field.grid().clone();
        for b in &branches {
            grid.check_same(b.field.grid())?;
            let n = b.field.norm_sqr();
            if (n - 1.0).abs() > FIELD_NORM_TOLERANCE {
                return Err(Error::InvalidBranches(format!("branch '{}' has norm {n}", b.label)));
            }
            if b.drift.len() != grid.dims() {
                return Err(Error::InvalidBranches(format!("branch '{}' drift has wrong length", b.label)));
            }
        }
        if let SystemFactor::Eigenlabels { eigenvalues } = &system {
            if eigenvalues.len() != branches.len() {
                return Err(Error::InvalidBranches("one eigenvalue per branch required".into()));
            }
        }
        Ok(Self {
            branches,
            system,
            time: 0.0,
        })
    }

    pub fn branches(&self) -> &[Branch] {
        &self.branches
    }

    pub fn system(&self) -> &SystemFactor {
        &self.system
    }

    pub fn grid(&self) -> &GridSpec {
        self.branches[0].field.grid()
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    /// Phase picked up by the shared system factor.
    pub fn global_phase(&self) -> Complex64 {
        match self.system {
            SystemFactor::Stationary { energy } => {
                Complex64::from_polar(1.0, -energy * self.time / self.grid().hbar())
            }
            SystemFactor::Eigenlabels { .. } => Complex64::new(1.0, 0.0),
        }
    }

    /// Configuration-space density `sum_n |c_n phi_n|^2` at every node.
    pub fn density(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.grid().len()];
        for b in &self.branches {
            let w = b.weight();
            if w == 0.0 {
                continue;
            }
            for (o, z) in out.iter_mut().zip(b.field.values()) {
                *o += w * z.norm_sqr();
            }
        }
        out
    }

    /// `integral |phi_a| |phi_b|` over the grid.
    pub fn overlap(&self, a: usize, b: usize) -> f64 {
        let fa = self.branches[a].field.values();
        let fb = self.branches[b].field.values();
        fa.iter().zip(fb).map(|(x, y)| x.norm() * y.norm()).sum::<f64>() * self.grid().cell_volume()
    }

    /// Largest pairwise overlap among branches with nonzero weight.
    pub fn max_overlap(&self) -> f64 {
        let live: Vec<usize> = (0..self.branches.len())
            .filter(|&i| self.branches[i].weight() > 0.0)
            .collect();
        let mut worst = 0.0f64;
        for (k, &a) in live.iter().enumerate() {
            for &b in &live[k + 1..] {
                worst = worst.max(self.overlap(a, b));
            }
        }
        worst
    }
}

/// Steps every branch under `H_q + s_n V_q` with its own drift.
#[derive(Debug, Clone)]
pub struct BranchPropagator {
    propagators: Vec<Propagator>,
    dt: f64,
}

impl BranchPropagator {
    pub fn new(
        b: &BranchSuperposition,
        h_q: &PotentialSpec,
        v_q: &PotentialSpec,
        cfg: &PropagatorConfig,
    ) -> Result<Self> {
        Self::with_spectral(Arc::new(Spectral::new(b.grid())), b, h_q, v_q, cfg)
    }

    pub fn with_spectral(
        spectral: Arc<Spectral>,
        b: &BranchSuperposition,
        h_q: &PotentialSpec,
        v_q: &PotentialSpec,
        cfg: &PropagatorConfig,
    ) -> Result<Self> {
        spectral.grid().check_same(b.grid())?;
        let base = h_q.evaluate(b.grid())?;
        let coupling = v_q.evaluate(b.grid())?;
        let propagators = b
            .branches
            .iter()
            .map(|br| {
                let values = base
                    .iter()
                    .zip(&coupling)
                    .map(|(h, v)| h + br.potential_sign * v)
                    .collect();
                Propagator::from_values(spectral.clone(), values, cfg, &br.drift)
            })
            .collect::<Result<_>>()?;
        Ok(Self {
            propagators,
            dt: cfg.dt,
        })
    }

    pub fn step(&self, b: &mut BranchSuperposition) -> Result<()> {
        if b.branches.len() != self.propagators.len() {
            return Err(Error::InvalidBranches("branch count differs from propagator".into()));
        }
        for br in &b.branches {
            self.propagators[0].grid().check_same(br.field.grid())?;
        }
        b.branches
            .par_iter_mut()
            .zip(self.propagators.par_iter())
            .for_each(|(br, p)| p.step_in_place(br.field.values_mut()));
        b.time += self.dt;
        Ok(())
    }
}

/// One step of every branch; coefficients are untouched.
pub fn evolve_branches(
    b: &BranchSuperposition,
    h_q: &PotentialSpec,
    v_q: &PotentialSpec,
    dt: f64,
) -> Result<BranchSuperposition> {
    let prop = BranchPropagator::new(b, h_q, v_q, &PropagatorConfig::new(dt))?;
    let mut out = b.clone();
    prop.step(&mut out)?;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::propagator::step;

    fn packet(grid: &GridSpec, x0: f64, sigma: f64) -> ComplexField {
        ComplexField::from_fn(grid, |x| {
            let d = x[0] - x0;
            Complex64::new((-d * d / (4.0 * sigma * sigma)).exp(), 0.0)
        })
        .normalize()
        .unwrap()
    }

    #[test]
    fn single_branch_matches_plain_step() {
        let g = GridSpec::new(&[128], &[32.0]).unwrap();
        let psi = packet(&g, 16.0, 1.5);
        let h = PotentialSpec::harmonic(&[16.0], &[0.3]);
        let b = BranchSuperposition::new(
            vec![Branch::new("only", Complex64::new(1.0, 0.0), psi.clone())],
            SystemFactor::Stationary { energy: 0.5 },
        )
        .unwrap();
        let out = evolve_branches(&b, &h, &PotentialSpec::Zero, 0.01).unwrap();
        let direct = step(&psi, &h, &PropagatorConfig::new(0.01)).unwrap();
        assert!(out.branches()[0].field.sup_distance(&direct).unwrap() < 1e-12);
        let expected = Complex64::from_polar(1.0, -0.5 * 0.01);
        assert!((out.global_phase() - expected).norm() < 1e-14);
    }

    #[test]
    fn opposite_forces_separate_centers() {
        let g = GridSpec::new(&[512], &[128.0]).unwrap();
        let psi = packet(&g, 64.0, 2.0);
        let c = Complex64::new(0.5f64.sqrt(), 0.0);
        let mut b = BranchSuperposition::new(
            vec![
                Branch::new("up", c, psi.clone()).with_sign(1.0),
                Branch::new("down", c, psi).with_sign(-1.0),
            ],
            SystemFactor::Stationary { energy: 0.0 },
        )
        .unwrap();
        let grad = 0.2;
        let v_q = PotentialSpec::Ramp {
            axis: 0,
            center: 64.0,
            gradient: grad,
            half_width: 60.0,
        };
        let dt = 0.01;
        let prop = BranchPropagator::new(&b, &PotentialSpec::Zero, &v_q, &PropagatorConfig::new(dt)).unwrap();
        for _ in 0..500 {
            prop.step(&mut b).unwrap();
        }
        let t = b.time();
        let up = b.branches()[0].field.moments(0).0;
        let down = b.branches()[1].field.moments(0).0;
        // each branch accelerates at -/+ g/m, so separation is g t^2
        assert!(((down - up) - grad * t * t).abs() < 1e-6);
    }

    #[test]
    fn rejects_bad_coefficients_and_grids() {
        let g = GridSpec::new(&[16], &[4.0]).unwrap();
        let g2 = GridSpec::new(&[32], &[4.0]).unwrap();
        let a = packet(&g, 2.0, 0.5);
        let z = Complex64::new(0.8, 0.0);
        assert!(BranchSuperposition::new(vec![Branch::new("a", z, a.clone())], SystemFactor::Stationary { energy: 0.0 }).is_err());
        let c = Complex64::new(0.5f64.sqrt(), 0.0);
        let r = BranchSuperposition::new(
            vec![Branch::new("a", c, a), Branch::new("b", c, packet(&g2, 2.0, 0.5))],
            SystemFactor::Stationary { energy: 0.0 },
        );
        assert!(matches!(r, Err(Error::GridMismatch(_))));
    }
}
