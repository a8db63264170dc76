use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::common::{BranchEnsemble, LineGrid, OutcomeRecord, PacketSpec};
use super::report::{binomial_halfwidth, Check, Heatmap, ScenarioReport, Status};
use crate::ensemble::{sample_initial, DensitySpec};
use crate::error::{Error, Result};
use crate::guidance::TrajectoryState;
use crate::propagator::{Branch, BranchPropagator, BranchSuperposition, PropagatorConfig, SystemFactor};
use crate::fields::PotentialSpec;
use crate::table::{num, Table};

/// Ideal measurement of an observable with eigenvalues `Lambda_n` by an
/// impulsive coupling `g Lambda p` to a pointer packet.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeasurementConfig {
    pub eigenvalues: Vec<f64>,
    /// `|c_n|^2`, summing to one.
    pub weights: Vec<f64>,
    #[serde(default)]
    pub phases: Vec<f64>,
    pub coupling: f64,
    pub duration: f64,
    pub pointer: PacketSpec,
    pub grid: LineGrid,
    pub dt: f64,
    pub samples: usize,
    #[serde(default = "default_overlap")]
    pub overlap_limit: f64,
    #[serde(default = "default_sigmas")]
    pub ci_sigmas: f64,
    /// Rows of the `|Psi|^2` space-time heatmap.
    #[serde(default = "default_frames")]
    pub heatmap_frames: usize,
}

pub(crate) fn default_overlap() -> f64 {
    1e-6
}
pub(crate) fn default_sigmas() -> f64 {
    3.0
}
pub(crate) fn default_frames() -> usize {
    64
}

pub(crate) fn validate_weights(weights: &[f64]) -> Result<()> {
    if weights.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
        return Err(Error::Config("branch weights must be non-negative".into()));
    }
    let s: f64 = weights.iter().sum();
    if (s - 1.0).abs() > 1e-9 {
        return Err(Error::Config(format!("branch weights sum to {s}, not 1")));
    }
    Ok(())
}

pub(crate) fn validate_run(dt: f64, samples: usize, overlap: f64, sigmas: f64) -> Result<()> {
    if !(dt.is_finite() && dt > 0.0) {
        return Err(Error::Config("dt must be positive".into()));
    }
    if samples == 0 || samples > 10_000_000 {
        return Err(Error::Config("samples must lie in [1, 1e7]".into()));
    }
    if !(overlap > 0.0 && overlap < 1.0) || !(sigmas > 0.0 && sigmas.is_finite()) {
        return Err(Error::Config("overlap_limit must lie in (0, 1) and ci_sigmas must be positive".into()));
    }
    Ok(())
}

impl MeasurementConfig {
    pub fn validate(&self) -> Result<()> {
        let n = self.eigenvalues.len();
        if n < 1 || self.weights.len() != n || !(self.phases.is_empty() || self.phases.len() == n) {
            return Err(Error::Config("eigenvalues, weights and phases must have equal lengths".into()));
        }
        if self.eigenvalues.iter().any(|l| !l.is_finite()) {
            return Err(Error::Config("eigenvalues must be finite".into()));
        }
        for i in 0..n {
            for j in i + 1..n {
                if self.eigenvalues[i] == self.eigenvalues[j] {
                    return Err(Error::Config("eigenvalues must be distinct".into()));
                }
            }
        }
        validate_weights(&self.weights)?;
        if !(self.coupling.is_finite() && self.duration.is_finite() && self.duration > 0.0) {
            return Err(Error::Config("coupling must be finite and duration positive".into()));
        }
        let grid = self.grid.build()?;
        self.pointer.validate(self.grid.length)?;
        validate_run(self.dt, self.samples, self.overlap_limit, self.ci_sigmas)?;
        if self.duration / self.dt > 1e6 {
            return Err(Error::Config("duration / dt exceeds 1e6 steps".into()));
        }
        // packets must not wrap around the periodic box
        let width = self.pointer.free_width(self.duration, grid.masses()[0]);
        let reach = self.eigenvalues.iter().map(|l| (self.coupling * l * self.duration).abs()).fold(0.0, f64::max);
        if reach + 6.0 * width > 0.5 * self.grid.length {
            return Err(Error::Config(format!(
                "pointer packets travel {reach:.3} with width {width:.3}; the box of length {} is too short",
                self.grid.length
            )));
        }
        if self.heatmap_frames == 0 {
            return Err(Error::Config("heatmap_frames must be positive".into()));
        }
        Ok(())
    }
}

pub(crate) fn frequency_table(record: &OutcomeRecord, expected: &[f64], extra: &[(&str, Vec<String>)]) -> Table {
    let mut header = vec!["label".to_string()];
    header.extend(extra.iter().map(|(h, _)| h.to_string()));
    header.extend(["count", "frequency", "expected"].map(String::from));
    let mut t = Table::new(header);
    for (a, label) in record.labels.iter().enumerate() {
        let mut row = vec![label.clone()];
        row.extend(extra.iter().map(|(_, v)| v[a].clone()));
        row.extend([record.counts[a].to_string(), num(record.frequencies[a]), num(expected[a])]);
        t.push(row);
    }
    t
}

pub(crate) fn frequency_checks(
    report: &mut ScenarioReport,
    prefix: &str,
    record: &OutcomeRecord,
    expected: &[f64],
    sigmas: f64,
) {
    let n = record.outcomes.len();
    for (a, label) in record.labels.iter().enumerate() {
        let p = expected[a];
        // degenerate weights must be reproduced exactly
        let tol = binomial_halfwidth(p, n, sigmas).max(1e-12);
        report.check(Check::within(format!("{prefix}frequency_{label}"), record.frequencies[a], p, tol));
    }
}

pub(crate) fn sample_line(psi: &crate::fields::ComplexField, n: usize, seed: u64) -> Result<Vec<TrajectoryState>> {
    let s = sample_initial(&DensitySpec::Equilibrium(psi.clone()), psi.grid(), n, seed)?;
    Ok(s.points.into_iter().map(TrajectoryState::new).collect())
}

pub fn run_measurement(cfg: &MeasurementConfig, seed: u64) -> Result<(ScenarioReport, OutcomeRecord)> {
    cfg.validate()?;
    let mut report = ScenarioReport::new("measurement");
    let grid = cfg.grid.build()?;
    let phi0 = cfg.pointer.field(&grid)?;
    let branches = cfg
        .eigenvalues
        .iter()
        .enumerate()
        .map(|(n, &lam)| {
            let phase = cfg.phases.get(n).copied().unwrap_or(0.0);
            Branch::new(format!("n{}", n + 1), Complex64::from_polar(cfg.weights[n].sqrt(), phase), phi0.clone())
                .with_drift(vec![cfg.coupling * lam])
        })
        .collect();
    let mut sup = BranchSuperposition::new(
        branches,
        SystemFactor::Eigenlabels {
            eigenvalues: cfg.eigenvalues.clone(),
        },
    )?;
    let steps = (cfg.duration / cfg.dt).round().max(1.0) as usize;
    let dt = cfg.duration / steps as f64;
    let prop = BranchPropagator::new(&sup, &PotentialSpec::Zero, &PotentialSpec::Zero, &PropagatorConfig::new(dt))?;
    let states = sample_line(&phi0, cfg.samples, seed)?;
    let x0: Vec<f64> = states.iter().map(|s| s.position[0]).collect();
    let mut ens = BranchEnsemble::new(&grid, states);
    let every = (steps / cfg.heatmap_frames).max(1);
    let mut frames = vec![sup.density()];
    let mut k = 0;
    ens.run(&mut sup, &prop, steps, dt, |s| {
        k += 1;
        if k % every == 0 {
            frames.push(s.density());
        }
    })?;
    let overlap = sup.max_overlap();
    let record = OutcomeRecord::assign(&sup, ens.states.iter().map(|s| s.position));

    let mut outcomes = Table::new(["traj_id", "x0", "x_final", "outcome"]);
    for (i, s) in ens.states.iter().enumerate() {
        outcomes.push(vec![
            i.to_string(),
            num(x0[i]),
            num(s.position[0]),
            record.outcomes[i].map_or("none".to_string(), |a| record.labels[a].clone()),
        ]);
    }
    report.table("outcomes", outcomes);
    report.table(
        "frequencies",
        frequency_table(
            &record,
            &cfg.weights,
            &[("eigenvalue", cfg.eigenvalues.iter().map(|&l| num(l)).collect())],
        ),
    );
    report.heatmaps.push((
        "density_xt".into(),
        Heatmap::new(frames.len(), grid.len(), frames.concat()),
    ));
    report.set("frequencies", &record.frequencies);
    report.set("counts", &record.counts);
    report.set("expected", &cfg.weights);
    report.set("ambiguous", record.ambiguous);
    report.set("max_overlap", overlap);
    report.set("node_events", ens.node_events());
    report.set("samples", cfg.samples);
    frequency_checks(&mut report, "", &record, &cfg.weights, cfg.ci_sigmas);
    report.check(Check::below("max_overlap", overlap, cfg.overlap_limit));
    report.check(Check::within("ambiguous_outcomes", record.ambiguous as f64, 0.0, 0.5));
    report.status = if overlap < cfg.overlap_limit {
        Status::Ok
    } else {
        report.notes.push(format!("pointer packets still overlap ({overlap:.3e})"));
        Status::Invalid
    };
    Ok((report, record))
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn small(weights: Vec<f64>) -> MeasurementConfig {
        let n = weights.len();
        MeasurementConfig {
            eigenvalues: (0..n).map(|i| i as f64 - (n as f64 - 1.0) / 2.0).collect(),
            weights,
            phases: vec![],
            coupling: 10.0,
            duration: 2.0,
            pointer: PacketSpec {
                center: None,
                sigma: 1.0,
                momentum: 0.0,
            },
            grid: LineGrid {
                points: 512,
                length: 64.0,
                mass: 1.0,
            },
            dt: 0.02,
            samples: 400,
            overlap_limit: 1e-6,
            ci_sigmas: 3.0,
            heatmap_frames: 8,
        }
    }

    #[test]
    fn certain_outcome() {
        let (r, rec) = run_measurement(&small(vec![1.0, 0.0]), 3).unwrap();
        assert_eq!(rec.counts, vec![400, 0]);
        assert_eq!(r.status, Status::Ok);
        assert!(r.all_passed(), "{}", r.human_table());
    }

    #[test]
    fn short_coupling_is_invalid() {
        let mut c = small(vec![0.5, 0.5]);
        c.duration = 0.2;
        let (r, _) = run_measurement(&c, 3).unwrap();
        assert_eq!(r.status, Status::Invalid);
    }

    #[test]
    fn rejects_bad_weights() {
        assert!(matches!(small(vec![0.5, 0.6]).validate(), Err(Error::Config(_))));
    }
}
