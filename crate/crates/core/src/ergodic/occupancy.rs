use serde::Serialize;

use crate::error::{Error, Result};
use crate::fields::{Position, Region, MAX_DIMS};
use crate::table::{num, Table};

/// Sorted disjoint s-intervals; intersect in place with another such list.
fn intersect(a: &[(f64, f64)], b: &[(f64, f64)], out: &mut Vec<(f64, f64)>) {
    out.clear();
    let (mut i, mut j) = (0, 0);
    while i < a.len() && j < b.len() {
        let lo = a[i].0.max(b[j].0);
        let hi = a[i].1.min(b[j].1);
        if hi > lo {
            out.push((lo, hi));
        }
        if a[i].1 < b[j].1 {
            i += 1;
        } else {
            j += 1;
        }
    }
}

fn measure(list: &[(f64, f64)]) -> f64 {
    list.iter().map(|(a, b)| b - a).sum()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Checkpoint {
    pub time: f64,
    pub in_target: f64,
    pub in_condition: f64,
}

/// Time spent by a piecewise-linear trajectory in `target ∩ condition`,
/// relative to the time spent in `condition` (the whole space if absent).
///
/// Each segment between consecutive samples is taken along the shortest
/// periodic displacement and its box crossings are computed exactly.
#[derive(Debug, Clone)]
pub struct OccupancyAccumulator {
    periods: Vec<f64>,
    target: Region,
    condition: Option<Region>,
    last: Option<(f64, Position)>,
    start_time: Option<f64>,
    in_target: f64,
    in_condition: f64,
    checkpoints: Vec<Checkpoint>,
    scratch: [Vec<(f64, f64)>; 4],
}

impl OccupancyAccumulator {
    pub fn new(target: Region, condition: Option<Region>) -> Result<Self> {
        let periods: Vec<f64> = target.intervals().iter().map(|iv| iv.period()).collect();
        if let Some(c) = &condition {
            if c.dims() != target.dims() {
                return Err(Error::InvalidRegion("conditioning region dimension differs".into()));
            }
        }
        Ok(Self {
            periods,
            target,
            condition,
            last: None,
            start_time: None,
            in_target: 0.0,
            in_condition: 0.0,
            checkpoints: Vec::new(),
            scratch: Default::default(),
        })
    }

    pub fn push(&mut self, t: f64, x: &Position) -> Result<()> {
        let Some((t0, x0)) = self.last else {
            self.last = Some((t, *x));
            self.start_time = Some(t);
            return Ok(());
        };
        if !(t > t0) {
            return Err(Error::InvalidArgument(format!(
                "timestamps must increase strictly ({t} after {t0})"
            )));
        }
        let dt = t - t0;
        let dims = self.periods.len();
        let mut disp = [0.0; MAX_DIMS];
        for d in 0..dims {
            let l = self.periods[d];
            let mut dx = (x[d] - x0[d]) % l;
            if dx > 0.5 * l {
                dx -= l;
            } else if dx < -0.5 * l {
                dx += l;
            }
            disp[d] = dx;
        }
        let [acc_t, acc_c, axis_buf, tmp] = &mut self.scratch;
        acc_t.clear();
        acc_t.push((0.0, 1.0));
        acc_c.clear();
        acc_c.push((0.0, 1.0));
        for d in 0..dims {
            if let Some(c) = &self.condition {
                c.intervals()[d].crossing_parameters(x0[d], disp[d], axis_buf);
                intersect(acc_c, axis_buf, tmp);
                std::mem::swap(acc_c, tmp);
            }
            self.target.intervals()[d].crossing_parameters(x0[d], disp[d], axis_buf);
            intersect(acc_t, axis_buf, tmp);
            std::mem::swap(acc_t, tmp);
        }
        if self.condition.is_some() {
            intersect(acc_t, acc_c, tmp);
            std::mem::swap(acc_t, tmp);
        }
        self.in_target += measure(acc_t) * dt;
        self.in_condition += measure(acc_c) * dt;
        self.last = Some((t, *x));
        Ok(())
    }

    pub fn target(&self) -> &Region {
        &self.target
    }

    pub fn total_time(&self) -> f64 {
        match (self.start_time, self.last) {
            (Some(s), Some((t, _))) => t - s,
            _ => 0.0,
        }
    }

    pub fn time_in_target(&self) -> f64 {
        self.in_target
    }

    pub fn conditioning_time(&self) -> f64 {
        self.in_condition
    }

    /// `None` while the conditioning time is zero.
    pub fn ratio(&self) -> Option<f64> {
        if self.in_condition > 0.0 {
            Some((self.in_target / self.in_condition).clamp(0.0, 1.0))
        } else {
            None
        }
    }

    /// Store the running totals for convergence series and batch means.
    pub fn checkpoint(&mut self) {
        let time = self.last.map(|(t, _)| t).unwrap_or(0.0);
        self.checkpoints.push(Checkpoint {
            time,
            in_target: self.in_target,
            in_condition: self.in_condition,
        });
    }

    pub fn checkpoints(&self) -> &[Checkpoint] {
        &self.checkpoints
    }

    /// Standard error of the ratio from the spread of per-batch ratios
    /// between consecutive checkpoints.
    pub fn batch_error(&self) -> Option<f64> {
        let mut ratios = Vec::new();
        let mut prev = Checkpoint {
            time: self.start_time.unwrap_or(0.0),
            in_target: 0.0,
            in_condition: 0.0,
        };
        for c in &self.checkpoints {
            let dc = c.in_condition - prev.in_condition;
            if dc > 0.0 {
                ratios.push((c.in_target - prev.in_target) / dc);
            }
            prev = *c;
        }
        if ratios.len() < 2 {
            return None;
        }
        let n = ratios.len() as f64;
        let mean = ratios.iter().sum::<f64>() / n;
        let var = ratios.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / (n - 1.0);
        Some((var / n).sqrt())
    }

    /// Combine totals of an independent accumulator on the same regions.
    pub fn merge(&mut self, other: &OccupancyAccumulator) {
        self.in_target += other.in_target;
        self.in_condition += other.in_condition;
    }

    /// CSV `T,ratio,target,abs_error` over the checkpoints.
    pub fn convergence_table(&self, target_value: f64) -> Table {
        let mut t = Table::new(["T", "ratio", "target", "abs_error"]);
        let start = self.start_time.unwrap_or(0.0);
        for c in &self.checkpoints {
            if c.in_condition <= 0.0 {
                continue;
            }
            let r = c.in_target / c.in_condition;
            t.push(vec![num(c.time - start), num(r), num(target_value), num((r - target_value).abs())]);
        }
        t
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn never_entering_and_full_domain() {
        let arc = Region::new(&[(0.5, 0.6)], &[1.0]).unwrap();
        let mut acc = OccupancyAccumulator::new(arc, None).unwrap();
        let full = Region::new(&[(0.0, 1.0)], &[1.0]).unwrap();
        let mut all = OccupancyAccumulator::new(full, None).unwrap();
        for k in 0..10 {
            let x = [0.1 + 0.01 * k as f64, 0.0, 0.0];
            acc.push(k as f64, &x).unwrap();
            all.push(k as f64, &x).unwrap();
        }
        assert_eq!(acc.ratio(), Some(0.0));
        assert_eq!(all.ratio(), Some(1.0));
    }

    #[test]
    fn exact_segment_time() {
        let arc = Region::new(&[(0.0, 0.25)], &[1.0]).unwrap();
        let mut acc = OccupancyAccumulator::new(arc, None).unwrap();
        acc.push(0.0, &[0.9, 0.0, 0.0]).unwrap();
        acc.push(1.0, &[0.3, 0.0, 0.0]).unwrap();
        // path 0.9 -> 1.3 spends 0.25 of 0.4 inside
        assert!((acc.ratio().unwrap() - 0.625).abs() < 1e-12);
        assert!(acc.push(1.0, &[0.3, 0.0, 0.0]).is_err());
    }

    #[test]
    fn conditioning_without_time_is_undefined() {
        let t = Region::new(&[(0.0, 1.0), (0.0, 0.5)], &[1.0, 1.0]).unwrap();
        let c = Region::new(&[(0.0, 1.0), (0.6, 0.7)], &[1.0, 1.0]).unwrap();
        let mut acc = OccupancyAccumulator::new(t, Some(c)).unwrap();
        acc.push(0.0, &[0.1, 0.1, 0.0]).unwrap();
        acc.push(1.0, &[0.2, 0.2, 0.0]).unwrap();
        assert_eq!(acc.ratio(), None);
    }
}
