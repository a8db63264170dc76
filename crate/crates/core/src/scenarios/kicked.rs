use serde::{Deserialize, Serialize};

use super::report::{Check, ScenarioReport, Status};
use crate::ensemble::{
    sample_initial, subquantum_entropy, total_variation, DensitySpec, Entropy, Histogram, LinearCdf, Partition, SampleSet,
};
use crate::error::{Error, Result};
use crate::ergodic::{apply_map_sequence, audit_measure_preservation, IteratedMap, MapFamily, ProductMeasure};
use crate::fields::{GridSpec, Position, MAX_DIMS};
use crate::rng::derive_seed;
use crate::table::{num, Table};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoxGrid {
    pub points: Vec<usize>,
    pub lengths: Vec<f64>,
}

/// Product-form reference density `|psi|^2`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ReferenceSpec {
    Uniform,
    Gaussian { center: Vec<f64>, sigma: Vec<f64> },
    /// `prod_d (1 + amplitude cos(2 pi m_d x_d / l_d))`.
    Cosine { amplitude: f64, modes: Vec<i64> },
}

impl ReferenceSpec {
    fn marginal(&self, grid: &GridSpec, d: usize) -> Vec<f64> {
        let l = grid.lengths()[d];
        (0..grid.points()[d])
            .map(|j| {
                let x = grid.coord(d, j);
                match self {
                    ReferenceSpec::Uniform => 1.0,
                    ReferenceSpec::Gaussian { center, sigma } => {
                        let dx = grid.min_image(d, center[d], x);
                        (-dx * dx / (2.0 * sigma[d] * sigma[d])).exp()
                    }
                    ReferenceSpec::Cosine { amplitude, modes } => {
                        1.0 + amplitude * (2.0 * std::f64::consts::PI * modes[d] as f64 * x / l).cos()
                    }
                }
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum InitialSpec {
    Equilibrium,
    /// Every member starts at `point`.
    Delta { point: Vec<f64> },
    /// Gaussian bump of absolute width `width` around `center`.
    Bump { center: Vec<f64>, width: f64 },
    Uniform,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Expectation {
    #[default]
    None,
    /// Final `|S|` and TV fall below their tolerances.
    Relaxes,
    /// `S(t) = S(0)` throughout.
    Constant,
    /// `S(t)` stays within estimator noise of zero.
    Equilibrium,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KickedConfig {
    pub grid: BoxGrid,
    pub reference: ReferenceSpec,
    pub family: MapFamily,
    pub kicks: u64,
    pub samples: usize,
    pub initial: InitialSpec,
    #[serde(default)]
    pub cell_points: Option<Vec<usize>>,
    #[serde(default = "one")]
    pub record_every: u64,
    #[serde(default = "probes")]
    pub audit_probes: usize,
    #[serde(default = "audit_tol")]
    pub audit_tolerance: f64,
    #[serde(default)]
    pub expect: Expectation,
    #[serde(default = "relax_tol")]
    pub tv_tolerance: f64,
    #[serde(default = "relax_tol")]
    pub entropy_tolerance: f64,
}

fn one() -> u64 {
    1
}
fn probes() -> usize {
    200
}
fn audit_tol() -> f64 {
    1e-8
}
fn relax_tol() -> f64 {
    0.05
}

impl KickedConfig {
    pub fn validate(&self) -> Result<()> {
        let grid = self.build_grid()?;
        let dims = grid.dims();
        match &self.reference {
            ReferenceSpec::Uniform => {}
            ReferenceSpec::Gaussian { center, sigma } => {
                if center.len() != dims || sigma.len() != dims || sigma.iter().any(|s| !(*s > 0.0)) {
                    return Err(Error::Config("gaussian reference needs a center and positive sigma per axis".into()));
                }
            }
            ReferenceSpec::Cosine { amplitude, modes } => {
                if !(amplitude.abs() < 1.0) || modes.len() != dims {
                    return Err(Error::Config("cosine reference needs |amplitude| < 1 and a mode per axis".into()));
                }
            }
        }
        match &self.family {
            MapFamily::Identity => {}
            MapFamily::Rotation { max_kick, .. } => {
                if !(*max_kick > 0.0 && *max_kick <= 0.5) {
                    return Err(Error::Config("max_kick must lie in (0, 0.5]".into()));
                }
            }
            MapFamily::Shear { strength } => {
                if dims != 2 || !(strength.is_finite() && *strength >= 0.0) {
                    return Err(Error::Config("shear maps need two dimensions and a non-negative strength".into()));
                }
            }
        }
        if self.kicks == 0 || self.kicks > 10_000_000 {
            return Err(Error::Config("kicks must lie in [1, 1e7]".into()));
        }
        if self.samples < 2 || self.samples > 10_000_000 {
            return Err(Error::Config("samples must lie in [2, 1e7]".into()));
        }
        match &self.initial {
            InitialSpec::Delta { point } if point.len() != dims => {
                return Err(Error::Config("delta point must match the grid dimension".into()));
            }
            InitialSpec::Bump { center, width } if center.len() != dims || !(*width > 0.0) => {
                return Err(Error::Config("bump needs a center per axis and a positive width".into()));
            }
            _ => {}
        }
        self.partition(&grid)?;
        if self.record_every == 0 || self.audit_probes == 0 {
            return Err(Error::Config("record_every and audit_probes must be positive".into()));
        }
        if !(self.audit_tolerance > 0.0 && self.tv_tolerance > 0.0 && self.entropy_tolerance > 0.0) {
            return Err(Error::Config("tolerances must be positive".into()));
        }
        Ok(())
    }

    fn build_grid(&self) -> Result<GridSpec> {
        let g = &self.grid;
        if g.points.len() != g.lengths.len() || g.points.is_empty() || g.points.len() > MAX_DIMS {
            return Err(Error::Config("grid points and lengths must have 1 to 3 equal entries".into()));
        }
        if g.points.iter().any(|&p| !(4..=4096).contains(&p)) {
            return Err(Error::Config("grid points must lie in [4, 4096]".into()));
        }
        GridSpec::new(&g.points, &g.lengths).map_err(|e| Error::Config(e.to_string()))
    }

    fn partition(&self, grid: &GridSpec) -> Result<Partition> {
        match &self.cell_points {
            Some(c) => Partition::new(grid, c),
            None => Partition::default_for(grid),
        }
        .map_err(|e| Error::Config(e.to_string()))
    }
}

fn entropy_value(e: Entropy) -> f64 {
    e.value()
}

struct Scale {
    partition: Partition,
    reference: Histogram,
}

impl Scale {
    fn measure(&self, samples: &SampleSet) -> Result<(f64, f64)> {
        let p = Histogram::from_samples(&self.partition, samples);
        Ok((
            entropy_value(subquantum_entropy(&p, &self.reference)?),
            total_variation(&p, &self.reference)?,
        ))
    }
}

pub fn run_kicked_relaxation(cfg: &KickedConfig, seed: u64) -> Result<ScenarioReport> {
    cfg.validate()?;
    let mut report = ScenarioReport::new("kicked_relaxation");
    let grid = cfg.build_grid()?;
    let dims = grid.dims();
    let marginals: Vec<Vec<f64>> = (0..dims).map(|d| cfg.reference.marginal(&grid, d)).collect();
    let measure = ProductMeasure::new(
        marginals
            .iter()
            .enumerate()
            .map(|(d, m)| LinearCdf::new(grid.spacing(d), m))
            .collect::<Result<_>>()?,
    )?;
    let density: Vec<f64> = (0..grid.len())
        .map(|i| {
            let idx = grid.multi_index(i);
            (0..dims).map(|d| marginals[d][idx[d]]).product()
        })
        .collect();
    let map = IteratedMap::new(cfg.family.clone(), measure, derive_seed(seed, 7))?;
    let audit = audit_measure_preservation(&map, 1, cfg.audit_probes, derive_seed(seed, 8));
    report.set("audit", audit);
    report.check(Check::flag("measure_preservation_audit", audit.passes(cfg.audit_tolerance)));
    if !audit.passes(cfg.audit_tolerance) {
        report.notes.push("map family fails the measure-preservation audit".into());
        report.status = Status::Invalid;
        return Ok(report);
    }

    let base = cfg.partition(&grid)?;
    let mut scales = vec![("", base.clone())];
    for (name, num_, den) in [("half", 1, 2), ("double", 2, 1)] {
        match base.rescaled(num_, den) {
            Ok(p) => scales.push((name, p)),
            Err(_) => report.notes.push(format!("{name} cell size does not divide the grid; skipped")),
        }
    }
    let scales: Vec<(&str, Scale)> = scales
        .into_iter()
        .map(|(n, p)| {
            let reference = Histogram::from_density(&p, &density)?;
            Ok((n, Scale { partition: p, reference }))
        })
        .collect::<Result<_>>()?;

    let x0: Vec<Position> = match &cfg.initial {
        InitialSpec::Equilibrium => sample_initial(&DensitySpec::Tabulated(density.clone()), &grid, cfg.samples, seed)?.points,
        InitialSpec::Uniform => sample_initial(&DensitySpec::Uniform, &grid, cfg.samples, seed)?.points,
        InitialSpec::Delta { point } => {
            let mut x = [0.0; MAX_DIMS];
            for d in 0..dims {
                x[d] = grid.wrap(d, point[d]);
            }
            vec![x; cfg.samples]
        }
        InitialSpec::Bump { center, width } => {
            let values = (0..grid.len())
                .map(|i| {
                    let x = grid.node_position(i);
                    let r2: f64 = (0..dims).map(|d| grid.min_image(d, center[d], x[d]).powi(2)).sum();
                    (-r2 / (2.0 * width * width)).exp()
                })
                .collect();
            sample_initial(&DensitySpec::Tabulated(values), &grid, cfg.samples, seed)?.points
        }
    };

    let mut header = vec!["step".to_string(), "S".into(), "TV".into()];
    for (n, _) in scales.iter().skip(1) {
        header.push(format!("S_{n}"));
        header.push(format!("TV_{n}"));
    }
    let mut series = Table::new(header);
    let mut rows: Vec<(u64, Vec<(f64, f64)>)> = Vec::new();
    let mut failure = None;
    let mut record = |step: u64, pts: &[Position]| {
        let set = SampleSet::new(dims, pts.to_vec());
        let mut vals = Vec::new();
        for (_, s) in &scales {
            match s.measure(&set) {
                Ok(v) => vals.push(v),
                Err(e) => {
                    failure.get_or_insert(e);
                    vals.push((f64::NAN, f64::NAN));
                }
            }
        }
        rows.push((step, vals));
    };
    record(0, &x0);
    apply_map_sequence(&x0, &map, cfg.kicks, &[], |step, pts| {
        if step % cfg.record_every == 0 || step == cfg.kicks {
            record(step, pts);
        }
    });
    if let Some(e) = failure {
        return Err(e);
    }
    for (step, vals) in &rows {
        let mut r = vec![step.to_string()];
        for (s, t) in vals {
            r.push(num(*s));
            r.push(num(*t));
        }
        series.push(r);
    }
    report.table("relaxation", series);

    let s: Vec<f64> = rows.iter().map(|(_, v)| v[0].0).collect();
    let t: Vec<f64> = rows.iter().map(|(_, v)| v[0].1).collect();
    let (s0, s_end) = (s[0], *s.last().expect("rows"));
    let (tv0, tv_end) = (t[0], *t.last().expect("rows"));
    let k = scales[0].1.partition.len() as f64;
    let n = cfg.samples as f64;
    let noise = (k - 1.0) / (2.0 * n);
    let noise_sd = (2.0 * (k - 1.0)).sqrt() / (2.0 * n);
    let max_change = s.iter().map(|v| (v - s0).abs()).fold(0.0f64, |m, v| if v.is_nan() { m } else { m.max(v) });
    let early = s.iter().take(6).skip(1).map(|v| v - s0).fold(f64::INFINITY, f64::min);
    report.set("cells", k as usize);
    report.set("entropy_initial", s0);
    report.set("entropy_final", s_end);
    report.set("tv_initial", tv0);
    report.set("tv_final", tv_end);
    report.set("entropy_noise", noise);
    report.set("max_entropy_change", max_change);
    report.set("early_entropy_increase_min", early);
    for (i, (name, _)) in scales.iter().enumerate().skip(1) {
        let last = rows.last().expect("rows").1[i];
        report.set(&format!("entropy_final_{name}"), last.0);
        report.set(&format!("tv_final_{name}"), last.1);
    }
    let all_nonpositive = rows.iter().all(|(_, v)| v.iter().all(|(s, _)| !(*s > 0.0)));
    report.check(Check::flag("entropy_nonpositive", all_nonpositive));
    match cfg.expect {
        Expectation::None => {}
        Expectation::Relaxes => {
            report.check(Check::below("final_abs_entropy", s_end.abs(), cfg.entropy_tolerance));
            report.check(Check::below("final_tv", tv_end, cfg.tv_tolerance));
        }
        Expectation::Constant => {
            report.check(Check::below("max_entropy_change", max_change, noise.max(1e-12)));
        }
        Expectation::Equilibrium => {
            let worst = s.iter().map(|v| v.abs()).fold(0.0f64, f64::max);
            report.check(Check::below("max_abs_entropy", worst, noise + 6.0 * noise_sd));
        }
    }
    report.status = Status::Ok;
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(family: MapFamily, initial: InitialSpec, expect: Expectation) -> KickedConfig {
        KickedConfig {
            grid: BoxGrid {
                points: vec![128],
                lengths: vec![10.0],
            },
            reference: ReferenceSpec::Gaussian {
                center: vec![5.0],
                sigma: vec![1.0],
            },
            family,
            kicks: 200,
            samples: 4000,
            initial,
            cell_points: None,
            record_every: 10,
            audit_probes: 50,
            audit_tolerance: 1e-8,
            expect,
            tv_tolerance: 0.05,
            entropy_tolerance: 0.05,
        }
    }

    #[test]
    fn identity_keeps_delta_entropy() {
        let r = run_kicked_relaxation(
            &cfg(MapFamily::Identity, InitialSpec::Delta { point: vec![5.0] }, Expectation::Constant),
            1,
        )
        .unwrap();
        assert!(r.all_passed(), "{}", r.human_table());
        assert!(r.summary["entropy_initial"].as_f64().unwrap() < -0.5);
    }

    #[test]
    fn rotation_kicks_relax_delta() {
        let r = run_kicked_relaxation(
            &cfg(
                MapFamily::Rotation {
                    max_kick: 0.1,
                    per_member: true,
                },
                InitialSpec::Delta { point: vec![5.0] },
                Expectation::Relaxes,
            ),
            1,
        )
        .unwrap();
        assert!(r.all_passed(), "{}", r.human_table());
    }
}
