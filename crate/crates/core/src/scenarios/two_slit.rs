use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::report::{Check, Heatmap, ScenarioReport, Status};
use crate::ensemble::{sample_initial, DensitySpec};
use crate::error::{Error, Result};
use crate::fields::{Aperture, ComplexField, GridSpec, PotentialSpec, Spectral, MAX_DIMS};
use crate::guidance::{advance_trajectory, velocity_from_psi_with, FlowSlab, TrajectoryState, VelocityField};
use crate::propagator::{absorbing_mask, Propagator, PropagatorConfig};
use crate::rng::derive_seed;
use crate::table::{num, Table};
use rayon::prelude::*;
use std::sync::Arc;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlaneGrid {
    pub points: [usize; 2],
    pub lengths: [f64; 2],
}

/// Incoming packet moving along axis 0 with wavenumber `momentum`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlanePacket {
    pub center: [f64; 2],
    pub sigma: [f64; 2],
    pub momentum: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SlitBarrier {
    pub position: f64,
    pub thickness: f64,
    pub height: f64,
    #[serde(default)]
    pub edge: f64,
    pub slits: Vec<Aperture>,
    /// Indices of slits that are closed.
    #[serde(default)]
    pub masked: Vec<usize>,
}

impl SlitBarrier {
    fn potential(&self, open: &[bool]) -> PotentialSpec {
        PotentialSpec::Barrier {
            axis: 0,
            position: self.position,
            thickness: self.thickness,
            height: self.height,
            apertures: self
                .slits
                .iter()
                .zip(open)
                .filter(|(_, &o)| o)
                .map(|(a, _)| a.clone())
                .collect(),
            edge: self.edge,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EdgeMask {
    pub width: f64,
    pub strength: f64,
}

/// Screen bins centered on `center` (defaults to the packet axis).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScreenBins {
    pub count: usize,
    pub half_width: f64,
    #[serde(default)]
    pub center: Option<f64>,
}

/// `p0 = |psi0|^2 exp(-|x - c - offset|^2 / 2 scale^2)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SmoothPrior {
    pub offset: [f64; 2],
    pub scale: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TwoSlitConfig {
    pub grid: PlaneGrid,
    pub packet: PlanePacket,
    pub barrier: SlitBarrier,
    pub screen: f64,
    pub mask: EdgeMask,
    pub dt: f64,
    pub total_time: f64,
    /// Trajectories per ensemble.
    pub samples: usize,
    pub bins: ScreenBins,
    #[serde(default)]
    pub nonequilibrium: Option<SmoothPrior>,
    /// Also evolve the field with only the first open slit, for visibility.
    #[serde(default)]
    pub single_slit_control: bool,
    #[serde(default = "default_window")]
    pub visibility_window: f64,
    #[serde(default = "default_tv")]
    pub tv_tolerance: f64,
    #[serde(default = "default_visibility")]
    pub visibility_tolerance: f64,
    #[serde(default = "default_noise_factor")]
    pub noise_factor: f64,
    #[serde(default = "default_lost")]
    pub lost_fraction_warning: f64,
}

fn default_window() -> f64 {
    20.0
}
fn default_tv() -> f64 {
    0.05
}
fn default_visibility() -> f64 {
    0.1
}
fn default_noise_factor() -> f64 {
    2.0
}
fn default_lost() -> f64 {
    0.05
}

impl TwoSlitConfig {
    pub fn validate(&self) -> Result<()> {
        let g = self.build_grid()?;
        let [lx, ly] = self.grid.lengths;
        let p = &self.packet;
        if p.sigma.iter().any(|s| !(*s > 0.0)) || !p.momentum.is_finite() || p.momentum <= 0.0 {
            return Err(Error::Config("packet needs positive widths and a positive momentum along axis 0".into()));
        }
        let b = &self.barrier;
        if !(b.thickness > 0.0 && b.height > 0.0 && b.edge >= 0.0) || b.slits.is_empty() {
            return Err(Error::Config("barrier needs positive thickness and height and at least one slit".into()));
        }
        if b.masked.iter().any(|&i| i >= b.slits.len()) || b.masked.len() >= b.slits.len() {
            return Err(Error::Config("masked slit index out of range, or every slit masked".into()));
        }
        let m = self.mask.width;
        if !(m > 0.0 && m < 0.25 * lx.min(ly)) || !(self.mask.strength > 0.0 && self.mask.strength <= 1.0) {
            return Err(Error::Config("mask width must lie in (0, L/4) and strength in (0, 1]".into()));
        }
        if !(p.center[0] - 4.0 * p.sigma[0] > m && p.center[0] + 4.0 * p.sigma[0] < b.position - 0.5 * b.thickness) {
            return Err(Error::Config("packet must start between the mask and the barrier".into()));
        }
        if !(self.screen > b.position + 0.5 * b.thickness && self.screen < lx - m) {
            return Err(Error::Config("screen must lie between the barrier and the absorbing edge".into()));
        }
        if !(self.dt > 0.0 && self.total_time > 0.0) || self.total_time / self.dt > 1e5 {
            return Err(Error::Config("dt and total_time must be positive with at most 1e5 steps".into()));
        }
        if self.dt * b.height >= crate::propagator::DEFAULT_STABILITY_LIMIT {
            return Err(Error::Config(format!(
                "dt * barrier height = {} breaks the stability guard",
                self.dt * b.height
            )));
        }
        if self.samples == 0 || self.samples > 5_000_000 {
            return Err(Error::Config("samples must lie in [1, 5e6]".into()));
        }
        let c = self.bins.center.unwrap_or(p.center[1]);
        if self.bins.count < 2 || !(self.bins.half_width > 0.0) || c - self.bins.half_width < 0.0 || c + self.bins.half_width > ly {
            return Err(Error::Config("screen bins must have count >= 2 and fit inside the box".into()));
        }
        if let Some(np) = &self.nonequilibrium {
            let widest = b.slits.iter().map(|a| a.width).fold(0.0, f64::max);
            if !(np.scale >= 10.0 * widest) {
                return Err(Error::Config("non-equilibrium scale must be at least ten slit widths".into()));
            }
        }
        if !(self.visibility_window > 0.0 && self.tv_tolerance > 0.0 && self.visibility_tolerance > 0.0 && self.noise_factor > 0.0) {
            return Err(Error::Config("tolerances and visibility_window must be positive".into()));
        }
        let _ = g;
        Ok(())
    }

    fn build_grid(&self) -> Result<GridSpec> {
        let [nx, ny] = self.grid.points;
        if !(16..=2048).contains(&nx) || !(16..=2048).contains(&ny) {
            return Err(Error::Config("grid points must lie in [16, 2048] per axis".into()));
        }
        GridSpec::new(&self.grid.points, &self.grid.lengths).map_err(|e| Error::Config(e.to_string()))
    }

    fn initial_field(&self, grid: &GridSpec) -> Result<ComplexField> {
        let p = &self.packet;
        ComplexField::from_fn(grid, |x| {
            let dx = grid.min_image(0, p.center[0], x[0]);
            let dy = grid.min_image(1, p.center[1], x[1]);
            let a = -dx * dx / (4.0 * p.sigma[0] * p.sigma[0]) - dy * dy / (4.0 * p.sigma[1] * p.sigma[1]);
            Complex64::from_polar(a.exp(), p.momentum * dx)
        })
        .normalize()
    }

    fn bin_edges(&self) -> Vec<f64> {
        let c = self.bins.center.unwrap_or(self.packet.center[1]);
        let w = 2.0 * self.bins.half_width / self.bins.count as f64;
        (0..=self.bins.count).map(|i| c - self.bins.half_width + i as f64 * w).collect()
    }
}

/// Index into `[below, bins..., above]`.
fn bin_of(edges: &[f64], y: f64) -> usize {
    if y < edges[0] {
        return 0;
    }
    let k = edges.len() - 1;
    if y >= edges[k] {
        return k + 1;
    }
    let w = edges[1] - edges[0];
    (((y - edges[0]) / w).floor() as usize).min(k - 1) + 1
}

/// Node-cell overlap binning of a line density sampled at spacing `h`.
fn bin_line(edges: &[f64], h: f64, values: &[f64]) -> Vec<f64> {
    let k = edges.len() - 1;
    let mut out = vec![0.0; k + 2];
    for (j, &v) in values.iter().enumerate() {
        let (lo, hi) = ((j as f64 - 0.5) * h, (j as f64 + 0.5) * h);
        let mut rest = hi - lo;
        if lo < edges[0] {
            let o = (hi.min(edges[0]) - lo).max(0.0);
            out[0] += v * o;
            rest -= o;
        }
        if hi > edges[k] {
            let o = (hi - lo.max(edges[k])).max(0.0);
            out[k + 1] += v * o;
            rest -= o;
        }
        if rest > 0.0 {
            for b in 0..k {
                let o = hi.min(edges[b + 1]) - lo.max(edges[b]);
                if o > 0.0 {
                    out[b + 1] += v * o;
                }
            }
        }
    }
    out
}

fn normalized(v: &[f64]) -> Vec<f64> {
    let s: f64 = v.iter().sum();
    if s > 0.0 {
        v.iter().map(|x| x / s).collect()
    } else {
        v.to_vec()
    }
}

fn tv(a: &[f64], b: &[f64]) -> f64 {
    0.5 * a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum::<f64>()
}

/// Expected TV between two independent histograms of sizes `n1`, `n2`
/// drawn from the same pooled frequencies `p`.
pub fn tv_noise_floor(p: &[f64], n1: usize, n2: usize) -> f64 {
    let f = (2.0 / std::f64::consts::PI).sqrt();
    0.5 * p
        .iter()
        .map(|&q| f * (q * (1.0 / n1 as f64 + 1.0 / n2 as f64)).sqrt())
        .sum::<f64>()
}

/// Largest `(I_peak - I_min) / (I_peak + I_min)` over interior local minima,
/// where `I_peak` is the smaller of the maxima on either side.
pub fn fringe_visibility(profile: &[f64]) -> f64 {
    let n = profile.len();
    let mut best = 0.0f64;
    for i in 1..n.saturating_sub(1) {
        let v = profile[i];
        if v < profile[i - 1] && v <= profile[i + 1] {
            let left = profile[..i].iter().cloned().fold(f64::MIN, f64::max);
            let right = profile[i + 1..].iter().cloned().fold(f64::MIN, f64::max);
            let peak = left.min(right);
            if peak + v > 0.0 {
                best = best.max((peak - v) / (peak + v));
            }
        }
    }
    best
}

/// Linear interpolation of `x`-flux `rho v_x` along the screen line.
fn screen_flux(grid: &GridSpec, psi: &ComplexField, v: &VelocityField, x_screen: f64) -> Vec<f64> {
    let h = grid.spacing(0);
    let nx = grid.points()[0];
    let ny = grid.points()[1];
    let s = x_screen / h;
    let i0 = s.floor() as usize % nx;
    let i1 = (i0 + 1) % nx;
    let w = s - s.floor();
    let vals = psi.values();
    let vx = v.component(0);
    (0..ny)
        .map(|j| {
            let a = i0 * ny + j;
            let b = i1 * ny + j;
            (1.0 - w) * vals[a].norm_sqr() * vx[a] + w * vals[b].norm_sqr() * vx[b]
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Fate {
    Flying,
    Arrived { t: f64, y: f64 },
    Absorbed,
}

struct Ensemble {
    name: &'static str,
    states: Vec<TrajectoryState>,
    fate: Vec<Fate>,
}

struct FieldRun {
    flux: Vec<f64>,
    final_density: Vec<f64>,
    node_events: u64,
}

fn in_mask(grid: &GridSpec, width: f64, x: &[f64; MAX_DIMS]) -> bool {
    (0..2).any(|d| {
        let l = grid.lengths()[d];
        x[d] < width || x[d] > l - width
    })
}

fn evolve(
    cfg: &TwoSlitConfig,
    grid: &GridSpec,
    open: &[bool],
    ensembles: &mut [Ensemble],
) -> Result<FieldRun> {
    let spectral = Arc::new(Spectral::new(grid));
    let steps = (cfg.total_time / cfg.dt).round().max(1.0) as usize;
    let dt = cfg.total_time / steps as f64;
    let mask = absorbing_mask(grid, &[cfg.mask.width, cfg.mask.width], cfg.mask.strength);
    let pcfg = PropagatorConfig::new(dt).with_mask(mask);
    let prop = Propagator::with_spectral(spectral.clone(), &cfg.barrier.potential(open), &pcfg, &[0.0, 0.0])?;
    let mut psi = cfg.initial_field(grid)?;
    let mut v0 = velocity_from_psi_with(&spectral, &psi);
    let mut j0 = screen_flux(grid, &psi, &v0, cfg.screen);
    let mut flux = vec![0.0; grid.points()[1]];
    let xs = cfg.screen;
    let mw = cfg.mask.width;
    for step in 0..steps {
        psi = prop.step(&psi)?;
        let v1 = velocity_from_psi_with(&spectral, &psi);
        let j1 = screen_flux(grid, &psi, &v1, xs);
        for (f, (a, b)) in flux.iter_mut().zip(j0.iter().zip(&j1)) {
            *f += 0.5 * (a + b) * dt;
        }
        let slab = FlowSlab::between(&v0, &v1);
        let t1 = (step + 1) as f64 * dt;
        for ens in ensembles.iter_mut() {
            ens.states
                .par_iter_mut()
                .zip(ens.fate.par_iter_mut())
                .for_each(|(s, fate)| {
                    if *fate != Fate::Flying {
                        return;
                    }
                    let prev = s.position;
                    let next = advance_trajectory(s, &slab, dt);
                    let dx = next.position[0] - prev[0];
                    if prev[0] < xs && next.position[0] >= xs && dx.abs() < 0.5 * grid.lengths()[0] {
                        let a = (xs - prev[0]) / dx;
                        let dy = grid.min_image(1, prev[1], next.position[1]);
                        *fate = Fate::Arrived {
                            t: t1 - dt + a * dt,
                            y: grid.wrap(1, prev[1] + a * dy),
                        };
                    } else if in_mask(grid, mw, &next.position) {
                        *fate = Fate::Absorbed;
                    }
                    *s = next;
                });
        }
        v0 = v1;
        j0 = j1;
    }
    let node_events = ensembles
        .iter()
        .flat_map(|e| e.states.iter())
        .map(|s| s.node_events as u64)
        .sum();
    Ok(FieldRun {
        flux,
        final_density: psi.density(),
        node_events,
    })
}

struct ArrivalStats {
    counts: Vec<f64>,
    arrived: usize,
    absorbed: usize,
    flying: usize,
}

fn arrival_stats(edges: &[f64], ens: &Ensemble) -> ArrivalStats {
    let mut counts = vec![0.0; edges.len() + 1];
    let (mut arrived, mut absorbed, mut flying) = (0, 0, 0);
    for f in &ens.fate {
        match f {
            Fate::Arrived { y, .. } => {
                counts[bin_of(edges, *y)] += 1.0;
                arrived += 1;
            }
            Fate::Absorbed => absorbed += 1,
            Fate::Flying => flying += 1,
        }
    }
    ArrivalStats {
        counts,
        arrived,
        absorbed,
        flying,
    }
}

fn window_profile(grid: &GridSpec, flux: &[f64], center: f64, half: f64) -> Vec<f64> {
    let h = grid.spacing(1);
    flux.iter()
        .enumerate()
        .filter(|(j, _)| (*j as f64 * h - center).abs() <= half)
        .map(|(_, &f)| f)
        .collect()
}

fn symmetry_chi2(counts: &[f64]) -> Option<f64> {
    // interior bins only, mirrored about the window center
    let inner = &counts[1..counts.len() - 1];
    let k = inner.len();
    let mut chi2 = 0.0;
    let mut dof = 0;
    for j in 0..k / 2 {
        let (a, b) = (inner[j], inner[k - 1 - j]);
        if a + b > 0.0 {
            chi2 += (a - b) * (a - b) / (a + b);
            dof += 1;
        }
    }
    (dof > 0).then(|| chi2 / dof as f64)
}

pub fn run_two_slit(cfg: &TwoSlitConfig, seed: u64) -> Result<ScenarioReport> {
    cfg.validate()?;
    let mut report = ScenarioReport::new("two_slit");
    let grid = cfg.build_grid()?;
    let psi0 = cfg.initial_field(&grid)?;
    let open: Vec<bool> = (0..cfg.barrier.slits.len()).map(|i| !cfg.barrier.masked.contains(&i)).collect();
    let edges = cfg.bin_edges();

    let eq = sample_initial(&DensitySpec::Equilibrium(psi0.clone()), &grid, cfg.samples, derive_seed(seed, 1))?;
    let mut ensembles = vec![Ensemble {
        name: "equilibrium",
        fate: vec![Fate::Flying; eq.len()],
        states: eq.points.into_iter().map(TrajectoryState::new).collect(),
    }];
    if let Some(np) = &cfg.nonequilibrium {
        let c = [cfg.packet.center[0] + np.offset[0], cfg.packet.center[1] + np.offset[1]];
        let rho = psi0.density();
        let p0: Vec<f64> = (0..grid.len())
            .map(|i| {
                let x = grid.node_position(i);
                let dx = grid.min_image(0, c[0], x[0]);
                let dy = grid.min_image(1, c[1], x[1]);
                rho[i] * (-(dx * dx + dy * dy) / (2.0 * np.scale * np.scale)).exp()
            })
            .collect();
        let s = sample_initial(&DensitySpec::Tabulated(p0), &grid, cfg.samples, derive_seed(seed, 2))?;
        ensembles.push(Ensemble {
            name: "nonequilibrium",
            fate: vec![Fate::Flying; s.len()],
            states: s.points.into_iter().map(TrajectoryState::new).collect(),
        });
    }
    let run = evolve(cfg, &grid, &open, &mut ensembles)?;
    let h = grid.spacing(1);
    let flux_bins = bin_line(&edges, h, &run.flux);
    let flux_p = normalized(&flux_bins);
    report.set("flux_through_screen", run.flux.iter().sum::<f64>() * h);
    report.set("node_events", run.node_events);
    report.set("bins", edges.len() - 1);

    let stats: Vec<ArrivalStats> = ensembles.iter().map(|e| arrival_stats(&edges, e)).collect();
    let eq_stats = &stats[0];
    let eq_p = normalized(&eq_stats.counts);
    let arrival_tv = tv(&eq_p, &flux_p);
    let lost = 1.0 - eq_stats.arrived as f64 / cfg.samples as f64;
    report.set("arrivals", eq_stats.arrived);
    report.set("absorbed", eq_stats.absorbed);
    report.set("still_flying", eq_stats.flying);
    report.set("never_reached_fraction", lost);
    if lost > cfg.lost_fraction_warning {
        report.notes.push(format!(
            "{:.1}% of trajectories never reached the screen; statistics use {} arrivals",
            100.0 * lost,
            eq_stats.arrived
        ));
    }
    report.set("arrival_tv", arrival_tv);
    report.set("arrival_tv_noise", tv_noise_floor(&flux_p, eq_stats.arrived.max(1), usize::MAX / 2));
    if eq_stats.arrived == 0 {
        report.status = Status::NoData;
        return Ok(report);
    }
    report.check(Check::below("arrival_tv", arrival_tv, cfg.tv_tolerance));

    let axis = cfg.bins.center.unwrap_or(cfg.packet.center[1]);
    let open_centers: Vec<f64> = cfg
        .barrier
        .slits
        .iter()
        .zip(&open)
        .filter(|(_, &o)| o)
        .map(|(a, _)| a.center)
        .collect();
    let slit_axis = open_centers.iter().sum::<f64>() / open_centers.len() as f64;
    let vis = fringe_visibility(&window_profile(&grid, &run.flux, slit_axis, cfg.visibility_window));
    report.set("visibility", vis);
    if open_centers.len() == 1 {
        report.check(Check::below("visibility_single_slit", vis, cfg.visibility_tolerance));
    }

    let symmetric = {
        let mirrored = |c: f64| 2.0 * axis - c;
        let slits_sym = open_centers
            .iter()
            .all(|&c| open_centers.iter().any(|&d| (mirrored(c) - d).abs() < 1e-9));
        slits_sym && (cfg.packet.center[1] - axis).abs() < 1e-9
    };
    if symmetric {
        if let Some(chi2) = symmetry_chi2(&eq_stats.counts) {
            report.set("symmetry_chi2_per_dof", chi2);
            report.check(Check::below("symmetry_chi2_per_dof", chi2, 2.0));
        }
    }

    let mut screen = Table::new(["bin", "y_lo", "y_hi", "flux", "arrivals_equilibrium", "arrivals_nonequilibrium"]);
    let k = edges.len() - 1;
    for b in 0..k + 2 {
        let (lo, hi) = match b {
            0 => (f64::NEG_INFINITY, edges[0]),
            _ if b == k + 1 => (edges[k], f64::INFINITY),
            _ => (edges[b - 1], edges[b]),
        };
        screen.push(vec![
            b.to_string(),
            num(lo),
            num(hi),
            num(flux_p[b]),
            num(eq_p[b]),
            stats.get(1).map_or(String::new(), |s| num(normalized(&s.counts)[b])),
        ]);
    }
    report.table("screen", screen);
    let mut arrivals = Table::new(["traj_id", "ensemble", "t", "y"]);
    for e in &ensembles {
        for (i, f) in e.fate.iter().enumerate() {
            if let Fate::Arrived { t, y } = f {
                arrivals.push(vec![i.to_string(), e.name.to_string(), num(*t), num(*y)]);
            }
        }
    }
    report.table("arrivals", arrivals);
    let mut marginal = Table::new(["y", "flux"]);
    for (j, f) in run.flux.iter().enumerate() {
        marginal.push(vec![num(j as f64 * h), num(*f)]);
    }
    report.table("flux_marginal", marginal);
    let [nx, ny] = cfg.grid.points;
    report.heatmaps.push(("density_final".into(), Heatmap::new(nx, ny, run.final_density.clone())));

    if let Some(ns) = stats.get(1) {
        let ne_p = normalized(&ns.counts);
        let pooled: Vec<f64> = eq_stats
            .counts
            .iter()
            .zip(&ns.counts)
            .map(|(a, b)| (a + b) / (eq_stats.arrived + ns.arrived) as f64)
            .collect();
        let floor = tv_noise_floor(&pooled, eq_stats.arrived, ns.arrived.max(1));
        let d = tv(&eq_p, &ne_p);
        report.set("nonequilibrium_arrivals", ns.arrived);
        report.set("nonequilibrium_tv_to_equilibrium", d);
        report.set("nonequilibrium_tv_to_flux", tv(&ne_p, &flux_p));
        report.set("noise_floor", floor);
        report.check(Check::below("nonequilibrium_tv_over_floor", d / floor, cfg.noise_factor));
    }

    if cfg.single_slit_control && open_centers.len() > 1 {
        let mut single = open.clone();
        let first = single.iter().position(|&o| o).expect("one slit open");
        for (i, o) in single.iter_mut().enumerate() {
            *o = i == first;
        }
        let control = evolve(cfg, &grid, &single, &mut [])?;
        let c = cfg.barrier.slits[first].center;
        let v1 = fringe_visibility(&window_profile(&grid, &control.flux, c, cfg.visibility_window));
        report.set("single_slit_visibility", v1);
        report.check(Check::below("visibility_single_slit", v1, cfg.visibility_tolerance));
        let mut t = Table::new(["y", "flux"]);
        for (j, f) in control.flux.iter().enumerate() {
            t.push(vec![num(j as f64 * h), num(*f)]);
        }
        report.table("flux_marginal_single_slit", t);
    }
    report.status = Status::Ok;
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn binning_overflow() {
        let e = [0.0, 1.0, 2.0];
        assert_eq!(bin_of(&e, -0.1), 0);
        assert_eq!(bin_of(&e, 0.0), 1);
        assert_eq!(bin_of(&e, 1.5), 2);
        assert_eq!(bin_of(&e, 2.0), 3);
        let b = bin_line(&e, 0.5, &[1.0; 8]);
        assert!((b.iter().sum::<f64>() - 4.0).abs() < 1e-12);
        assert!((b[0] - 0.25).abs() < 1e-12);
    }

    #[test]
    fn visibility_of_profiles() {
        let smooth: Vec<f64> = (0..41).map(|i| (-((i as f64 - 20.0) / 10.0).powi(2)).exp()).collect();
        assert_eq!(fringe_visibility(&smooth), 0.0);
        let fringes: Vec<f64> = (0..81).map(|i| 1.0 + (i as f64 * 0.5).cos()).collect();
        assert!(fringe_visibility(&fringes) > 0.99);
    }

    #[test]
    fn noise_floor_scaling() {
        let p = vec![0.25; 4];
        let a = tv_noise_floor(&p, 100, 100);
        let b = tv_noise_floor(&p, 400, 400);
        assert!((a / b - 2.0).abs() < 1e-12);
    }
}
