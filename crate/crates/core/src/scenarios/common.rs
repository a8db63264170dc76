use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fields::{interpolate_real, ComplexField, GridSpec, Position, Spectral};
use crate::guidance::{advance_ensemble, velocity_from_branches, FlowSlab, TrajectoryState};
use crate::propagator::{BranchPropagator, BranchSuperposition};

/// Periodic line `[0, length)` with `points` nodes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LineGrid {
    pub points: usize,
    pub length: f64,
    #[serde(default = "one")]
    pub mass: f64,
}

fn one() -> f64 {
    1.0
}

impl LineGrid {
    pub fn build(&self) -> Result<GridSpec> {
        if !(8..=1 << 16).contains(&self.points) {
            return Err(Error::Config(format!("grid points {} outside [8, 65536]", self.points)));
        }
        if !(self.length.is_finite() && self.length > 0.0 && self.mass.is_finite() && self.mass > 0.0) {
            return Err(Error::Config("grid length and mass must be positive".into()));
        }
        GridSpec::with_physics(&[self.points], &[self.length], &[self.mass], 1.0)
    }
}

/// Gaussian packet `exp(-(x - c)^2 / 4 sigma^2 + i k x)`; `sigma` is the
/// standard deviation of `|psi|^2`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PacketSpec {
    /// Defaults to the middle of the box.
    #[serde(default)]
    pub center: Option<f64>,
    pub sigma: f64,
    #[serde(default)]
    pub momentum: f64,
}

impl PacketSpec {
    pub fn validate(&self, length: f64) -> Result<()> {
        if !(self.sigma.is_finite() && self.sigma > 0.0 && self.sigma < length / 8.0) {
            return Err(Error::Config(format!("packet sigma {} must lie in (0, L/8)", self.sigma)));
        }
        if !self.momentum.is_finite() || self.center.is_some_and(|c| !c.is_finite()) {
            return Err(Error::Config("packet center and momentum must be finite".into()));
        }
        Ok(())
    }

    pub fn center_in(&self, length: f64) -> f64 {
        self.center.unwrap_or(0.5 * length)
    }

    pub fn field(&self, grid: &GridSpec) -> Result<ComplexField> {
        let l = grid.lengths()[0];
        let c = self.center_in(l);
        ComplexField::from_fn(grid, |x| {
            let dx = grid.min_image(0, c, x[0]);
            Complex64::from_polar((-dx * dx / (4.0 * self.sigma * self.sigma)).exp(), self.momentum * dx)
        })
        .normalize()
    }

    /// `sigma(t) = sigma sqrt(1 + (hbar t / 2 m sigma^2)^2)` for free flight.
    pub fn free_width(&self, t: f64, mass: f64) -> f64 {
        let s2 = self.sigma * self.sigma;
        self.sigma * (1.0 + (t / (2.0 * mass * s2)).powi(2)).sqrt()
    }
}

/// Guided ensemble on a branch superposition, stepped through a sequence
/// of propagation phases.
pub(crate) struct BranchEnsemble {
    pub spectral: Spectral,
    pub states: Vec<TrajectoryState>,
}

impl BranchEnsemble {
    pub fn new(grid: &GridSpec, states: Vec<TrajectoryState>) -> Self {
        Self {
            spectral: Spectral::new(grid),
            states,
        }
    }

    /// Runs `steps` steps with `prop`; `observe(step, sup)` after each.
    pub fn run(
        &mut self,
        sup: &mut BranchSuperposition,
        prop: &BranchPropagator,
        steps: usize,
        dt: f64,
        mut observe: impl FnMut(&BranchSuperposition),
    ) -> Result<()> {
        let mut v0 = velocity_from_branches(&self.spectral, sup);
        for _ in 0..steps {
            prop.step(sup)?;
            let v1 = velocity_from_branches(&self.spectral, sup);
            advance_ensemble(&mut self.states, &FlowSlab::between(&v0, &v1), dt);
            v0 = v1;
            observe(sup);
        }
        Ok(())
    }

    pub fn node_events(&self) -> u64 {
        self.states.iter().map(|s| s.node_events as u64).sum()
    }
}

/// Branch carrying the largest share of `sum |c_a phi_a(x)|^2` at `x`, and
/// that share. `None` when every branch vanishes at `x`.
pub fn dominant_branch(sup: &BranchSuperposition, densities: &[Vec<f64>], x: &Position) -> Option<(usize, f64)> {
    let grid = sup.grid();
    let mut total = 0.0;
    let mut best = (0usize, -1.0f64);
    for (a, br) in sup.branches().iter().enumerate() {
        let w = br.weight() * interpolate_real(grid, &densities[a], x).max(0.0);
        total += w;
        if w > best.1 {
            best = (a, w);
        }
    }
    if total > 0.0 {
        Some((best.0, best.1 / total))
    } else {
        None
    }
}

/// Outcome tallies for one ensemble.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OutcomeRecord {
    pub labels: Vec<String>,
    /// Final branch index per trajectory; `None` if no unique branch.
    pub outcomes: Vec<Option<usize>>,
    pub counts: Vec<usize>,
    pub frequencies: Vec<f64>,
    /// Trajectories whose dominant branch holds less than `1 - 1e-6` of the
    /// weighted density.
    pub ambiguous: usize,
}

pub(crate) const UNIQUE_SHARE: f64 = 1.0 - 1e-6;

impl OutcomeRecord {
    pub fn assign(sup: &BranchSuperposition, positions: impl Iterator<Item = Position>) -> Self {
        let densities: Vec<Vec<f64>> = sup.branches().iter().map(|b| b.field.density()).collect();
        let labels: Vec<String> = sup.branches().iter().map(|b| b.label.clone()).collect();
        let mut counts = vec![0usize; labels.len()];
        let mut ambiguous = 0;
        let outcomes: Vec<Option<usize>> = positions
            .map(|x| match dominant_branch(sup, &densities, &x) {
                Some((a, share)) if share >= UNIQUE_SHARE => {
                    counts[a] += 1;
                    Some(a)
                }
                _ => {
                    ambiguous += 1;
                    None
                }
            })
            .collect();
        let n = outcomes.len().max(1) as f64;
        let frequencies = counts.iter().map(|&c| c as f64 / n).collect();
        Self {
            labels,
            outcomes,
            counts,
            frequencies,
            ambiguous,
        }
    }
}
