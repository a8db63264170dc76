use serde::Serialize;

use super::histogram::{count_cells, Partition};
use crate::error::{Error, Result};
use crate::fields::{ComplexField, GridSpec, Position, Stencil};
use crate::table::{num, Table};

/// How `p(x, t)` is estimated from the ensemble.
#[derive(Debug, Clone, PartialEq)]
pub enum DensityEstimator {
    /// Cell counts on a partition with `cell_points` grid cells per edge.
    Histogram { cell_points: Vec<usize> },
    /// Moving box window of `2 r + 1` nodes per axis centred on the node
    /// nearest to each trajectory.
    Window { radius: usize },
}

impl DensityEstimator {
    fn halved(&self) -> Option<Self> {
        match self {
            DensityEstimator::Histogram { cell_points } => {
                if cell_points.iter().all(|&c| c % 2 == 0) {
                    Some(DensityEstimator::Histogram {
                        cell_points: cell_points.iter().map(|c| c / 2).collect(),
                    })
                } else {
                    None
                }
            }
            DensityEstimator::Window { radius } if *radius >= 2 => {
                Some(DensityEstimator::Window { radius: radius / 2 })
            }
            DensityEstimator::Window { .. } => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FTrackConfig {
    pub estimator: DensityEstimator,
    /// Estimates backed by fewer samples are marked invalid.
    pub min_count: u64,
    /// Multiplier on the counting standard error in the budget.
    pub z: f64,
}

impl FTrackConfig {
    pub fn histogram(cell_points: Vec<usize>) -> Self {
        Self {
            estimator: DensityEstimator::Histogram { cell_points },
            min_count: 30,
            z: 4.5,
        }
    }
}

/// Ensemble positions and the field at one output time. Positions are in
/// trajectory order and must keep that order across snapshots.
#[derive(Debug, Clone, Copy)]
pub struct EnsembleSnapshot<'a> {
    pub time: f64,
    pub positions: &'a [Position],
    pub psi: &'a ComplexField,
}

struct Estimate {
    f: Vec<f64>,
    count: Vec<u64>,
}

fn box_sum(grid: &GridSpec, values: &[f64], radius: usize) -> Vec<f64> {
    let mut cur = values.to_vec();
    for d in 0..grid.dims() {
        let n = grid.points()[d];
        let stride = grid.stride(d);
        let r = radius.min((n - 1) / 2);
        let mut next = vec![0.0; cur.len()];
        for (flat, out) in next.iter_mut().enumerate() {
            let j = (flat / stride) % n;
            let base = flat - j * stride;
            let mut s = 0.0;
            for o in 0..=2 * r {
                let jj = (j + n + o - r) % n;
                s += cur[base + jj * stride];
            }
            *out = s;
        }
        cur = next;
    }
    cur
}

fn nearest_node(grid: &GridSpec, x: &Position) -> usize {
    let mut flat = 0;
    for d in 0..grid.dims() {
        let n = grid.points()[d];
        let j = (grid.wrap(d, x[d]) / grid.spacing(d)).round() as usize % n;
        flat = flat * n + j;
    }
    flat
}

fn estimate(est: &DensityEstimator, snap: &EnsembleSnapshot) -> Result<Estimate> {
    let grid = snap.psi.grid();
    let n = snap.positions.len() as f64;
    let density = snap.psi.density();
    match est {
        DensityEstimator::Histogram { cell_points } => {
            let part = Partition::new(grid, cell_points)?;
            let counts = count_cells(&part, snap.positions);
            let mut q = part.masses_of(&density);
            let total: f64 = q.iter().sum();
            q.iter_mut().for_each(|m| *m /= total);
            let mut f = Vec::with_capacity(snap.positions.len());
            let mut count = Vec::with_capacity(snap.positions.len());
            for x in snap.positions {
                let c = part.cell_of(x);
                count.push(counts[c]);
                f.push(if q[c] > 0.0 { counts[c] as f64 / n / q[c] } else { f64::NAN });
            }
            Ok(Estimate { f, count })
        }
        DensityEstimator::Window { radius } => {
            let mut binned = vec![0.0; grid.len()];
            for x in snap.positions {
                binned[nearest_node(grid, x)] += 1.0;
            }
            let total: f64 = density.iter().sum();
            let weights: Vec<f64> = density.iter().map(|r| r / total).collect();
            let counts = box_sum(grid, &binned, *radius);
            let q = box_sum(grid, &weights, *radius);
            let mut f = Vec::with_capacity(snap.positions.len());
            let mut count = Vec::with_capacity(snap.positions.len());
            for x in snap.positions {
                let k = nearest_node(grid, x);
                count.push(counts[k].round() as u64);
                f.push(if q[k] > 0.0 { counts[k] / n / q[k] } else { f64::NAN });
            }
            Ok(Estimate { f, count })
        }
    }
}

/// Per-trajectory series of `f = p / |psi|^2` with its error budget.
#[derive(Debug, Clone)]
pub struct FRatioTrack {
    pub times: Vec<f64>,
    /// `values[k][t]`; NaN marks an invalid sample.
    pub values: Vec<Vec<f64>>,
    /// Allowed `|f(t) - f(0)| / f(0)` for each sample.
    pub budget: Vec<Vec<f64>>,
    pub summary: FSummary,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FSummary {
    /// `max_k |f_k(t) - f_k(0)| / f_k(0)` over valid samples.
    pub f_drift_max: f64,
    /// Budget at the sample attaining `f_drift_max`.
    pub budget_at_max: f64,
    /// `max_k drift / budget`; at most 1 when the drift is explained by the
    /// estimator error.
    pub budget_ratio_max: f64,
    pub valid_samples: usize,
    pub invalid_samples: usize,
}

impl FRatioTrack {
    pub fn within_budget(&self) -> bool {
        self.summary.budget_ratio_max <= 1.0
    }

    /// CSV `traj_id,t,f,budget`.
    pub fn table(&self) -> Table {
        let mut t = Table::new(["traj_id", "t", "f", "budget"]);
        for (k, (row, b)) in self.values.iter().zip(&self.budget).enumerate() {
            for (i, (&f, &bud)) in row.iter().zip(b).enumerate() {
                t.push(vec![k.to_string(), num(self.times[i]), num(f), num(bud)]);
            }
        }
        t
    }
}

/// Track `f` along an ensemble. The budget for sample `(k, t)` is
/// `z sqrt(1/n_t + 1/n_0)` from counting noise plus the relative change of
/// the estimate when the estimator scale is halved, at both ends.
pub fn track_f_ratio(snapshots: &[EnsembleSnapshot], cfg: &FTrackConfig) -> Result<FRatioTrack> {
    let first = snapshots
        .first()
        .ok_or_else(|| Error::InvalidArgument("at least one snapshot required".into()))?;
    let count = first.positions.len();
    if snapshots.iter().any(|s| s.positions.len() != count) {
        return Err(Error::InvalidArgument("snapshots must share one trajectory set".into()));
    }
    let fine = cfg.estimator.halved();
    let mut coarse_est = Vec::with_capacity(snapshots.len());
    let mut fine_est = Vec::with_capacity(snapshots.len());
    let mut flagged = Vec::with_capacity(snapshots.len());
    for snap in snapshots {
        first.psi.grid().check_same(snap.psi.grid())?;
        coarse_est.push(estimate(&cfg.estimator, snap)?);
        fine_est.push(match &fine {
            Some(e) => Some(estimate(e, snap)?),
            None => None,
        });
        let floor = snap.psi.node_floor();
        let bad: Vec<bool> = snap.psi.values().iter().map(|z| z.norm() <= floor).collect();
        let grid = snap.psi.grid();
        flagged.push(
            snap.positions
                .iter()
                .map(|x| Stencil::new(grid, x).touches(&bad))
                .collect::<Vec<bool>>(),
        );
    }
    let valid = |t: usize, k: usize| {
        let f = coarse_est[t].f[k];
        !flagged[t][k] && f.is_finite() && f > 0.0 && coarse_est[t].count[k] >= cfg.min_count
    };
    let bias = |t: usize, k: usize| match &fine_est[t] {
        Some(e) if e.f[k].is_finite() => (e.f[k] - coarse_est[t].f[k]).abs() / coarse_est[t].f[k],
        _ => 0.0,
    };
    let mut values = vec![vec![f64::NAN; snapshots.len()]; count];
    let mut budget = vec![vec![f64::NAN; snapshots.len()]; count];
    let mut summary = FSummary {
        f_drift_max: 0.0,
        budget_at_max: 0.0,
        budget_ratio_max: 0.0,
        valid_samples: 0,
        invalid_samples: 0,
    };
    for k in 0..count {
        let start_ok = valid(0, k);
        for t in 0..snapshots.len() {
            if !(valid(t, k) && start_ok) {
                summary.invalid_samples += 1;
                continue;
            }
            let f0 = coarse_est[0].f[k];
            let ft = coarse_est[t].f[k];
            values[k][t] = ft;
            let noise = cfg.z
                * (1.0 / coarse_est[t].count[k] as f64 + 1.0 / coarse_est[0].count[k] as f64).sqrt();
            let b = noise + bias(t, k) + bias(0, k);
            budget[k][t] = b;
            summary.valid_samples += 1;
            if t == 0 {
                continue;
            }
            let drift = (ft - f0).abs() / f0;
            if drift > summary.f_drift_max {
                summary.f_drift_max = drift;
                summary.budget_at_max = b;
            }
            summary.budget_ratio_max = summary.budget_ratio_max.max(drift / b);
        }
    }
    Ok(FRatioTrack {
        times: snapshots.iter().map(|s| s.time).collect(),
        values,
        budget,
        summary,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ensemble::{sample_initial, DensitySpec};
    use num_complex::Complex64;

    #[test]
    fn equilibrium_has_unit_f_within_noise() {
        let g = GridSpec::new(&[64], &[8.0]).unwrap();
        let psi = ComplexField::from_fn(&g, |x| Complex64::new(1.0 + 0.5 * (x[0] * 0.785).sin(), 0.0))
            .normalize()
            .unwrap();
        let s = sample_initial(&DensitySpec::Equilibrium(psi.clone()), &g, 20_000, 5).unwrap();
        let snap = EnsembleSnapshot {
            time: 0.0,
            positions: &s.points,
            psi: &psi,
        };
        let track = track_f_ratio(&[snap, EnsembleSnapshot { time: 1.0, ..snap }], &FTrackConfig::histogram(vec![8])).unwrap();
        assert_eq!(track.summary.f_drift_max, 0.0);
        let mean: f64 = track.values.iter().map(|v| v[0]).sum::<f64>() / s.len() as f64;
        assert!((mean - 1.0).abs() < 0.05);
    }

    #[test]
    fn window_box_sum_is_periodic() {
        let g = GridSpec::new(&[8, 8], &[1.0, 1.0]).unwrap();
        let mut v = vec![0.0; 64];
        v[0] = 1.0;
        let s = box_sum(&g, &v, 1);
        assert_eq!(s[g.flat_index(&[7, 7])], 1.0);
        assert_eq!(s[g.flat_index(&[1, 1])], 1.0);
        assert_eq!(s[g.flat_index(&[2, 0])], 0.0);
        assert_eq!(s.iter().sum::<f64>(), 9.0);
    }
}
