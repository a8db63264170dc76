use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::common::{BranchEnsemble, LineGrid, OutcomeRecord, PacketSpec};
use super::measurement::{default_frames, default_overlap, default_sigmas, frequency_checks, frequency_table, sample_line, validate_run};
use super::report::{Check, Heatmap, ScenarioReport, Status};
use crate::ensemble::{sample_initial, DensitySpec};
use crate::error::{Error, Result};
use crate::fields::{GridSpec, PotentialSpec};
use crate::propagator::{Branch, BranchPropagator, BranchSuperposition, PropagatorConfig, SystemFactor};
use crate::rng::derive_seed;
use crate::table::{num, Table};

/// Constant-gradient coupling `s_a * gradient * (q - center)` inside
/// `|q - center| < half_width`, switched on for `duration`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Magnet {
    pub gradient: f64,
    pub duration: f64,
    #[serde(default)]
    pub center: Option<f64>,
    /// Defaults to a quarter of the box.
    #[serde(default)]
    pub half_width: Option<f64>,
}

/// Internal coordinate `X` on a circle in eigenstate `n`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InternalSpec {
    #[serde(default = "one")]
    pub length: f64,
    #[serde(default = "one_i")]
    pub quantum_number: i64,
    #[serde(default = "internal_points")]
    pub points: usize,
}

fn one() -> f64 {
    1.0
}
fn one_i() -> i64 {
    1
}
fn internal_points() -> usize {
    256
}

impl Default for InternalSpec {
    fn default() -> Self {
        Self {
            length: 1.0,
            quantum_number: 1,
            points: 256,
        }
    }
}

/// Initial distribution of `X`, with positions as fractions of its length.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum XPrior {
    Uniform,
    Bump { center: f64, width: f64 },
    TwoBump { centers: [f64; 2], width: f64 },
}

impl XPrior {
    fn name(&self) -> &'static str {
        match self {
            XPrior::Uniform => "uniform",
            XPrior::Bump { .. } => "bump",
            XPrior::TwoBump { .. } => "two_bump",
        }
    }

    fn density(&self, grid: &GridSpec) -> DensitySpec {
        let l = grid.lengths()[0];
        let g = |x: f64, c: f64, w: f64| {
            let mut d = x / l - c;
            d -= d.round();
            (-d * d / (2.0 * w * w)).exp()
        };
        match self {
            XPrior::Uniform => DensitySpec::Uniform,
            XPrior::Bump { center, width } => {
                DensitySpec::Tabulated((0..grid.len()).map(|i| g(grid.coord(0, i), *center, *width)).collect())
            }
            XPrior::TwoBump { centers, width } => DensitySpec::Tabulated(
                (0..grid.len())
                    .map(|i| g(grid.coord(0, i), centers[0], *width) + 0.5 * g(grid.coord(0, i), centers[1], *width))
                    .collect(),
            ),
        }
    }
}

fn default_priors() -> Vec<XPrior> {
    vec![
        XPrior::Uniform,
        XPrior::Bump { center: 0.3, width: 0.05 },
        XPrior::TwoBump {
            centers: [0.2, 0.7],
            width: 0.04,
        },
    ]
}

fn default_probes() -> usize {
    200
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SternGerlachConfig {
    /// `|c_up|^2`; `|c_down|^2 = 1 - weight_up`.
    pub weight_up: f64,
    #[serde(default)]
    pub relative_phase: f64,
    pub grid: LineGrid,
    pub packet: PacketSpec,
    pub magnet: Magnet,
    pub total_time: f64,
    pub dt: f64,
    /// Trajectories per prior.
    pub samples: usize,
    #[serde(default)]
    pub internal: InternalSpec,
    #[serde(default = "default_priors")]
    pub priors: Vec<XPrior>,
    /// Trajectories rerun with swapped `X` starts to confirm `Q` never reads `X`.
    #[serde(default = "default_probes")]
    pub independence_probes: usize,
    #[serde(default = "default_overlap")]
    pub overlap_limit: f64,
    #[serde(default = "default_sigmas")]
    pub ci_sigmas: f64,
    #[serde(default = "default_frames")]
    pub heatmap_frames: usize,
}

impl SternGerlachConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.weight_up) {
            return Err(Error::Config("weight_up must lie in [0, 1]".into()));
        }
        let grid = self.grid.build()?;
        self.packet.validate(self.grid.length)?;
        validate_run(self.dt, self.samples, self.overlap_limit, self.ci_sigmas)?;
        let m = &self.magnet;
        if !(m.gradient.is_finite() && m.duration > 0.0 && m.duration <= self.total_time) {
            return Err(Error::Config("magnet needs a finite gradient and 0 < duration <= total_time".into()));
        }
        let hw = self.half_width();
        if !(hw > 0.0 && hw < 0.5 * self.grid.length) {
            return Err(Error::Config("magnet half_width must lie in (0, L/2)".into()));
        }
        if self.total_time / self.dt > 1e6 {
            return Err(Error::Config("total_time / dt exceeds 1e6 steps".into()));
        }
        let vmax = (m.gradient * hw).abs();
        if self.dt * vmax >= crate::propagator::DEFAULT_STABILITY_LIMIT {
            return Err(Error::Config(format!(
                "dt * max|V| = {:.3} breaks the stability guard; use dt < {:.4}",
                self.dt * vmax,
                crate::propagator::DEFAULT_STABILITY_LIMIT / vmax
            )));
        }
        // each branch must stay inside the linear part while the magnet is on
        let mass = grid.masses()[0];
        let kick = 0.5 * m.gradient.abs() / mass * m.duration * m.duration;
        let offset = (self.packet.center_in(self.grid.length) - self.magnet_center()).abs();
        if offset + kick + 4.0 * self.packet.free_width(m.duration, mass) > hw {
            return Err(Error::Config("packet leaves the linear magnet region while the field is on".into()));
        }
        let travel = kick + m.gradient.abs() / mass * m.duration * (self.total_time - m.duration) + self.packet.momentum.abs() / mass * self.total_time;
        if travel + 6.0 * self.packet.free_width(self.total_time, mass) > 0.5 * self.grid.length {
            return Err(Error::Config("branches reach the box edge before the end time".into()));
        }
        let i = &self.internal;
        if !(i.length > 0.0 && i.length.is_finite()) || !(8..=1 << 14).contains(&i.points) {
            return Err(Error::Config("internal length must be positive and points in [8, 16384]".into()));
        }
        if self.priors.is_empty() {
            return Err(Error::Config("at least one X prior is required".into()));
        }
        for p in &self.priors {
            match p {
                XPrior::Uniform => {}
                XPrior::Bump { width, .. } | XPrior::TwoBump { width, .. } => {
                    if !(*width > 0.0 && *width < 0.5) {
                        return Err(Error::Config("prior width must lie in (0, 0.5)".into()));
                    }
                }
            }
        }
        if self.heatmap_frames == 0 {
            return Err(Error::Config("heatmap_frames must be positive".into()));
        }
        Ok(())
    }

    fn half_width(&self) -> f64 {
        self.magnet.half_width.unwrap_or(0.25 * self.grid.length)
    }

    fn magnet_center(&self) -> f64 {
        self.magnet.center.unwrap_or(0.5 * self.grid.length)
    }
}

struct PriorRun {
    record: OutcomeRecord,
    q0: Vec<f64>,
    x0: Vec<f64>,
}

pub fn run_stern_gerlach(cfg: &SternGerlachConfig, seed: u64) -> Result<(ScenarioReport, Vec<OutcomeRecord>)> {
    cfg.validate()?;
    let mut report = ScenarioReport::new("stern_gerlach");
    let grid = cfg.grid.build()?;
    let phi0 = cfg.packet.field(&grid)?;
    let up = Complex64::new(cfg.weight_up.sqrt(), 0.0);
    let down = Complex64::from_polar((1.0 - cfg.weight_up).sqrt(), cfg.relative_phase);
    let i = &cfg.internal;
    let v_x = 2.0 * PI * i.quantum_number as f64 / i.length;
    let energy = 0.5 * v_x * v_x;
    let mut sup = BranchSuperposition::new(
        vec![
            Branch::new("up", up, phi0.clone()).with_sign(1.0),
            Branch::new("down", down, phi0.clone()).with_sign(-1.0),
        ],
        SystemFactor::Stationary { energy },
    )?;
    let ramp = PotentialSpec::Ramp {
        axis: 0,
        center: cfg.magnet_center(),
        gradient: cfg.magnet.gradient,
        half_width: cfg.half_width(),
    };
    let total_steps = (cfg.total_time / cfg.dt).round().max(1.0) as usize;
    let dt = cfg.total_time / total_steps as f64;
    let on_steps = ((cfg.magnet.duration / dt).round() as usize).clamp(1, total_steps);
    let pcfg = PropagatorConfig::new(dt);
    let on = BranchPropagator::new(&sup, &PotentialSpec::Zero, &ramp, &pcfg)?;
    let off = BranchPropagator::new(&sup, &PotentialSpec::Zero, &PotentialSpec::Zero, &pcfg)?;

    // joint states (Q, X): Q sits on axis 0 of a one-dimensional guidance
    // field, X is carried in the second slot and moved by its own flow
    let x_grid = GridSpec::new(&[i.points], &[i.length])?;
    let mut all_states = Vec::new();
    let mut q0s = Vec::new();
    let mut x0s = Vec::new();
    let mut offsets = Vec::new();
    for (p, prior) in cfg.priors.iter().enumerate() {
        let ps = derive_seed(seed, p as u64 + 1);
        let mut states = sample_line(&phi0, cfg.samples, derive_seed(ps, 0))?;
        let xs = sample_initial(&prior.density(&x_grid), &x_grid, cfg.samples, derive_seed(ps, 1))?;
        for (s, x) in states.iter_mut().zip(&xs.points) {
            s.position[1] = x[0];
        }
        q0s.push(states.iter().map(|s| s.position[0]).collect::<Vec<_>>());
        x0s.push(xs.points.iter().map(|x| x[0]).collect::<Vec<_>>());
        offsets.push(all_states.len());
        all_states.extend(states);
    }
    // probes: the first trajectories of prior 0 restarted with X from the other priors
    let probes = cfg.independence_probes.min(cfg.samples);
    let probe_base = all_states.len();
    for p in 1..cfg.priors.len() {
        for k in 0..probes {
            let mut s = all_states[k];
            s.position[1] = x0s[p][k];
            all_states.push(s);
        }
    }
    let mut ens = BranchEnsemble::new(&grid, all_states);
    let every = (total_steps / cfg.heatmap_frames).max(1);
    let mut frames = vec![sup.density()];
    let mut k = 0;
    let mut observe = |s: &BranchSuperposition| {
        k += 1;
        if k % every == 0 {
            frames.push(s.density());
        }
    };
    ens.run(&mut sup, &on, on_steps, dt, &mut observe)?;
    ens.run(&mut sup, &off, total_steps - on_steps, dt, &mut observe)?;
    let t_end = dt * total_steps as f64;
    for s in ens.states.iter_mut() {
        s.position[1] = crate::fields::wrap_periodic(s.position[1] + v_x * t_end, i.length);
    }

    let overlap = sup.max_overlap();
    let expected = [cfg.weight_up, 1.0 - cfg.weight_up];
    let mut runs = Vec::new();
    for (p, start) in offsets.iter().enumerate() {
        let slice = &ens.states[*start..*start + cfg.samples];
        runs.push(PriorRun {
            record: OutcomeRecord::assign(&sup, slice.iter().map(|s| s.position)),
            q0: q0s[p].clone(),
            x0: x0s[p].clone(),
        });
    }
    let mut independent = true;
    for p in 1..cfg.priors.len() {
        for k in 0..probes {
            let probe = &ens.states[probe_base + (p - 1) * probes + k];
            // bitwise: the Q guidance law must not read X
            if probe.position[0].to_bits() != ens.states[k].position[0].to_bits() {
                independent = false;
            }
        }
    }

    let mut outcomes = Table::new(["traj_id", "prior", "q0", "x0", "q_final", "x_final", "outcome"]);
    for (p, run) in runs.iter().enumerate() {
        let slice = &ens.states[offsets[p]..offsets[p] + cfg.samples];
        for (j, s) in slice.iter().enumerate() {
            outcomes.push(vec![
                j.to_string(),
                cfg.priors[p].name().to_string(),
                num(run.q0[j]),
                num(run.x0[j]),
                num(s.position[0]),
                num(s.position[1]),
                run.record.outcomes[j].map_or("none".to_string(), |a| run.record.labels[a].clone()),
            ]);
        }
    }
    report.table("outcomes", outcomes);
    let mut freq = Table::new(["prior", "label", "count", "frequency", "expected"]);
    for (p, run) in runs.iter().enumerate() {
        let t = frequency_table(&run.record, &expected, &[]);
        for row in &t.rows {
            let mut r = vec![cfg.priors[p].name().to_string()];
            r.extend(row.iter().cloned());
            freq.push(r);
        }
    }
    report.table("frequencies", freq);
    report.heatmaps.push(("density_qt".into(), Heatmap::new(frames.len(), grid.len(), frames.concat())));

    let n = cfg.samples;
    let half = super::report::binomial_halfwidth(cfg.weight_up, n, cfg.ci_sigmas);
    let mut pairwise = 0.0f64;
    for a in 0..runs.len() {
        for b in a + 1..runs.len() {
            pairwise = pairwise.max((runs[a].record.frequencies[0] - runs[b].record.frequencies[0]).abs());
        }
    }
    report.set("priors", cfg.priors.iter().map(XPrior::name).collect::<Vec<_>>());
    report.set("frequencies_up", runs.iter().map(|r| r.record.frequencies[0]).collect::<Vec<_>>());
    report.set("expected_up", cfg.weight_up);
    report.set("ci_halfwidth", half);
    report.set("max_pairwise_difference", pairwise);
    report.set("ambiguous", runs.iter().map(|r| r.record.ambiguous).sum::<usize>());
    report.set("max_overlap", overlap);
    report.set("node_events", ens.node_events());
    report.set("x_independent", independent);
    report.set("samples_per_prior", n);
    for (p, run) in runs.iter().enumerate() {
        frequency_checks(&mut report, &format!("{}_", cfg.priors[p].name()), &run.record, &expected, cfg.ci_sigmas);
    }
    if runs.len() > 1 {
        report.check(Check::below("max_pairwise_difference", pairwise, 2.0 * half.max(1e-12)));
    }
    report.check(Check::flag("q_guidance_ignores_x", independent));
    report.check(Check::below("max_overlap", overlap, cfg.overlap_limit));
    report.status = if overlap < cfg.overlap_limit {
        Status::Ok
    } else {
        report.notes.push(format!("spin branches not separated by the end time (overlap {overlap:.3e})"));
        Status::Invalid
    };
    Ok((report, runs.into_iter().map(|r| r.record).collect()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(weight_up: f64) -> SternGerlachConfig {
        SternGerlachConfig {
            weight_up,
            relative_phase: 0.0,
            grid: LineGrid {
                points: 512,
                length: 128.0,
                mass: 1.0,
            },
            packet: PacketSpec {
                center: None,
                sigma: 2.0,
                momentum: 0.0,
            },
            magnet: Magnet {
                gradient: 1.25,
                duration: 2.0,
                center: None,
                half_width: Some(30.0),
            },
            total_time: 10.0,
            dt: 0.01,
            samples: 300,
            internal: InternalSpec::default(),
            priors: default_priors(),
            independence_probes: 50,
            overlap_limit: 1e-6,
            ci_sigmas: 3.0,
            heatmap_frames: 8,
        }
    }

    #[test]
    fn all_up() {
        let (r, recs) = run_stern_gerlach(&small(1.0), 5).unwrap();
        assert_eq!(r.status, Status::Ok);
        for rec in recs {
            assert_eq!(rec.counts, vec![300, 0]);
        }
        assert!(r.all_passed(), "{}", r.human_table());
    }

    #[test]
    fn balanced_superposition() {
        let (r, _) = run_stern_gerlach(&small(0.5), 5).unwrap();
        assert!(r.all_passed(), "{}", r.human_table());
        assert_eq!(r.summary["x_independent"], true);
    }

    #[test]
    fn weak_magnet_is_invalid() {
        let mut c = small(0.5);
        c.magnet.gradient = 0.05;
        let (r, _) = run_stern_gerlach(&c, 5).unwrap();
        assert_eq!(r.status, Status::Invalid);
    }
}
