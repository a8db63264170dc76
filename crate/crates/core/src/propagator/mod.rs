//! Split-step Fourier time evolution, including decoupled multi-branch
//! evolution for spinor and pointer superpositions.

mod branches;
mod eigen;

use std::sync::Arc;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::fields::{ComplexField, GridSpec, PotentialSpec, Spectral};
use crate::table::{num, Table};

pub use branches::{evolve_branches, Branch, BranchPropagator, BranchSuperposition, SystemFactor};
pub use eigen::stationary_eigenfield;

/// Default bound on `|dt| * max|V| / hbar`.
pub const DEFAULT_STABILITY_LIMIT: f64 = 0.5;

#[derive(Debug, Clone, PartialEq)]
pub struct PropagatorConfig {
    /// Time step; negative values run the evolution backwards.
    pub dt: f64,
    /// Per-node damping factors in `[0, 1]`, applied after every step.
    pub absorbing_mask: Option<Vec<f64>>,
    pub steps_per_output: usize,
    pub stability_limit: f64,
}

impl PropagatorConfig {
    pub fn new(dt: f64) -> Self {
        Self {
            dt,
            absorbing_mask: None,
            steps_per_output: 1,
            stability_limit: DEFAULT_STABILITY_LIMIT,
        }
    }

    pub fn with_mask(mut self, mask: Vec<f64>) -> Self {
        self.absorbing_mask = Some(mask);
        self
    }

    pub fn reversed(&self) -> Self {
        Self {
            dt: -self.dt,
            ..self.clone()
        }
    }
}

/// Strang-split propagator `e^{-iV dt/2} e^{-iT dt} e^{-iV dt/2}` with the
/// kinetic factor applied in Fourier space. An optional constant drift
/// velocity `u` adds the term `u . p` to the Hamiltonian.
#[derive(Debug, Clone)]
pub struct Propagator {
    spectral: Arc<Spectral>,
    potential: Vec<f64>,
    half_potential: Vec<Complex64>,
    kinetic: Vec<Complex64>,
    kinetic_energy: Vec<f64>,
    mask: Option<Vec<f64>>,
    dt: f64,
}

impl Propagator {
    pub fn new(grid: &GridSpec, potential: &PotentialSpec, cfg: &PropagatorConfig) -> Result<Self> {
        Self::with_spectral(Arc::new(Spectral::new(grid)), potential, cfg, &[])
    }

    pub fn with_spectral(
        spectral: Arc<Spectral>,
        potential: &PotentialSpec,
        cfg: &PropagatorConfig,
        drift: &[f64],
    ) -> Result<Self> {
        let values = potential.evaluate(spectral.grid())?;
        Self::from_values(spectral, values, cfg, drift)
    }

    pub fn from_values(
        spectral: Arc<Spectral>,
        potential: Vec<f64>,
        cfg: &PropagatorConfig,
        drift: &[f64],
    ) -> Result<Self> {
        let grid = spectral.grid().clone();
        if potential.len() != grid.len() {
            return Err(Error::GridMismatch("potential size differs from grid".into()));
        }
        if !(cfg.dt.is_finite() && cfg.dt != 0.0) {
            return Err(Error::InvalidArgument(format!("dt must be finite and nonzero, got {}", cfg.dt)));
        }
        let hbar = grid.hbar();
        let vmax = potential.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let product = cfg.dt.abs() * vmax / hbar;
        if product >= cfg.stability_limit {
            return Err(Error::StabilityGuard {
                product,
                limit: cfg.stability_limit,
                required_dt: cfg.stability_limit * hbar / vmax,
            });
        }
        if let Some(mask) = &cfg.absorbing_mask {
            if mask.len() != grid.len() {
                return Err(Error::GridMismatch("mask size differs from grid".into()));
            }
            if mask.iter().any(|m| !(0.0..=1.0).contains(m)) {
                return Err(Error::InvalidArgument("mask values must lie in [0, 1]".into()));
            }
        }
        let dt = cfg.dt;
        let half_potential = potential
            .iter()
            .map(|&v| Complex64::from_polar(1.0, -0.5 * v * dt / hbar))
            .collect();
        let weights: Vec<f64> = grid.masses().iter().map(|m| hbar * hbar / (2.0 * m)).collect();
        let kinetic_energy = spectral.k_squared_weighted(&weights);
        let kinetic = (0..grid.len())
            .map(|flat| {
                let mut phase = kinetic_energy[flat] * dt / hbar;
                if !drift.is_empty() {
                    let idx = grid.multi_index(flat);
                    for (d, &u) in drift.iter().enumerate() {
                        phase += u * spectral.wavenumbers(d)[idx[d]] * dt;
                    }
                }
                Complex64::from_polar(1.0, -phase)
            })
            .collect();
        Ok(Self {
            spectral,
            potential,
            half_potential,
            kinetic,
            kinetic_energy,
            mask: cfg.absorbing_mask.clone(),
            dt,
        })
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn grid(&self) -> &GridSpec {
        self.spectral.grid()
    }

    pub fn spectral(&self) -> &Arc<Spectral> {
        &self.spectral
    }

    pub fn potential(&self) -> &[f64] {
        &self.potential
    }

    pub fn step_in_place(&self, values: &mut [Complex64]) {
        for (z, p) in values.iter_mut().zip(&self.half_potential) {
            *z *= p;
        }
        self.spectral.forward(values);
        for (z, p) in values.iter_mut().zip(&self.kinetic) {
            *z *= p;
        }
        self.spectral.inverse(values);
        for (z, p) in values.iter_mut().zip(&self.half_potential) {
            *z *= p;
        }
        if let Some(mask) = &self.mask {
            for (z, m) in values.iter_mut().zip(mask) {
                *z *= *m;
            }
        }
    }

    pub fn step(&self, psi: &ComplexField) -> Result<ComplexField> {
        self.grid().check_same(psi.grid())?;
        let mut out = psi.clone();
        self.step_in_place(out.values_mut());
        Ok(out)
    }

    /// `<H>/<psi|psi>` using the spectral kinetic energy.
    pub fn energy(&self, psi: &ComplexField) -> f64 {
        let grid = self.grid();
        let mut spectrum = psi.values().to_vec();
        self.spectral.forward(&mut spectrum);
        let n = grid.len() as f64;
        let kinetic: f64 = spectrum
            .iter()
            .zip(&self.kinetic_energy)
            .map(|(z, t)| z.norm_sqr() * t)
            .sum::<f64>()
            / n;
        let potential: f64 = psi
            .values()
            .iter()
            .zip(&self.potential)
            .map(|(z, v)| z.norm_sqr() * v)
            .sum();
        let norm: f64 = psi.values().iter().map(|z| z.norm_sqr()).sum();
        (kinetic + potential) / norm
    }
}

/// One split-step update of `psi`.
pub fn step(psi: &ComplexField, potential: &PotentialSpec, cfg: &PropagatorConfig) -> Result<ComplexField> {
    Propagator::new(psi.grid(), potential, cfg)?.step(psi)
}

/// Per-output scalars of an evolution run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NormEnergy {
    pub t: f64,
    pub norm: f64,
    pub energy: f64,
}

/// Advance `steps` times, recording `t,norm,energy` every
/// `steps_per_output` steps (and at `t = 0`).
pub fn evolve(
    psi: &ComplexField,
    potential: &PotentialSpec,
    cfg: &PropagatorConfig,
    steps: usize,
) -> Result<(ComplexField, Vec<NormEnergy>)> {
    let prop = Propagator::new(psi.grid(), potential, cfg)?;
    let every = cfg.steps_per_output.max(1);
    let mut state = psi.clone();
    let mut series = vec![NormEnergy {
        t: 0.0,
        norm: state.norm_sqr(),
        energy: prop.energy(&state),
    }];
    for n in 1..=steps {
        prop.step_in_place(state.values_mut());
        if n % every == 0 || n == steps {
            series.push(NormEnergy {
                t: n as f64 * cfg.dt,
                norm: state.norm_sqr(),
                energy: prop.energy(&state),
            });
        }
    }
    Ok((state, series))
}

pub fn norm_energy_table(series: &[NormEnergy]) -> Table {
    let mut table = Table::new(["t", "norm", "energy"]);
    for row in series {
        table.push(vec![num(row.t), num(row.norm), num(row.energy)]);
    }
    table
}

/// Multiplicative edge damping: within `widths[d]` of a box edge the factor
/// is `1 - strength * cos^2(pi/2 * dist / width)`, and 1 elsewhere.
pub fn absorbing_mask(grid: &GridSpec, widths: &[f64], strength: f64) -> Vec<f64> {
    (0..grid.len())
        .map(|flat| {
            let x = grid.node_position(flat);
            (0..grid.dims())
                .map(|d| {
                    let w = widths.get(d).copied().unwrap_or(0.0);
                    let l = grid.lengths()[d];
                    let dist = x[d].min(l - x[d]);
                    if w > 0.0 && dist < w {
                        let c = (0.5 * std::f64::consts::PI * dist / w).cos();
                        1.0 - strength * c * c
                    } else {
                        1.0
                    }
                })
                .product()
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn gaussian(grid: &GridSpec, x0: f64, sigma: f64, k0: f64) -> ComplexField {
        ComplexField::from_fn(grid, |x| {
            let dx = x[0] - x0;
            Complex64::from_polar((-dx * dx / (4.0 * sigma * sigma)).exp(), k0 * dx)
        })
        .normalize()
        .unwrap()
    }

    #[test]
    fn momentum_eigenstate_gains_phase_only() {
        let l = 4.0;
        let g = GridSpec::new(&[32], &[l]).unwrap();
        let n = 3.0;
        let psi = ComplexField::from_fn(&g, |x| Complex64::from_polar(1.0, 2.0 * PI * n * x[0] / l))
            .normalize()
            .unwrap();
        let dt = 0.01;
        let out = step(&psi, &PotentialSpec::Zero, &PropagatorConfig::new(dt)).unwrap();
        let e = (2.0 * PI * n / l).powi(2) / 2.0;
        let expected = psi.scale(Complex64::from_polar(1.0, -e * dt));
        assert!(out.sup_distance(&expected).unwrap() < 1e-12);
    }

    #[test]
    fn stability_guard_reports_bound() {
        let g = GridSpec::new(&[16], &[1.0]).unwrap();
        let v = PotentialSpec::Tabulated { values: vec![100.0; 16] };
        match Propagator::new(&g, &v, &PropagatorConfig::new(0.01)) {
            Err(Error::StabilityGuard { required_dt, .. }) => assert!((required_dt - 0.005).abs() < 1e-12),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn time_reversal_restores_state() {
        let g = GridSpec::new(&[128], &[20.0]).unwrap();
        let psi = gaussian(&g, 10.0, 1.0, 2.0);
        let v = PotentialSpec::harmonic(&[10.0], &[0.5]);
        let cfg = PropagatorConfig::new(0.01);
        let fwd = Propagator::new(&g, &v, &cfg).unwrap();
        let bwd = Propagator::new(&g, &v, &cfg.reversed()).unwrap();
        let mut state = psi.clone();
        for _ in 0..500 {
            fwd.step_in_place(state.values_mut());
        }
        for _ in 0..500 {
            bwd.step_in_place(state.values_mut());
        }
        assert!(state.sup_distance(&psi).unwrap() < 1e-8);
    }

    #[test]
    fn mask_loses_norm_and_series_reports_it() {
        let g = GridSpec::new(&[128], &[20.0]).unwrap();
        let psi = gaussian(&g, 15.0, 1.0, 4.0);
        let mask = absorbing_mask(&g, &[3.0], 0.1);
        assert_eq!(mask[64], 1.0);
        assert!((mask[0] - 0.9).abs() < 1e-12);
        let cfg = PropagatorConfig::new(0.01).with_mask(mask);
        let (_, series) = evolve(&psi, &PotentialSpec::Zero, &cfg, 400).unwrap();
        assert!(series.last().unwrap().norm < 0.9);
        let csv = norm_energy_table(&series).to_csv();
        assert!(csv.starts_with("t,norm,energy\n0.0,"));
    }

    #[test]
    fn energy_of_gaussian_packet() {
        let g = GridSpec::new(&[256], &[40.0]).unwrap();
        let (sigma, k0) = (1.5, 1.2);
        let psi = gaussian(&g, 20.0, sigma, k0);
        let prop = Propagator::new(&g, &PotentialSpec::Zero, &PropagatorConfig::new(0.01)).unwrap();
        let expected = 0.5 * (k0 * k0 + 1.0 / (4.0 * sigma * sigma));
        assert!((prop.energy(&psi) - expected).abs() < 1e-10);
    }
}
