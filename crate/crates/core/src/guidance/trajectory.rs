use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::modified::ModifiedGuidance;
use super::velocity::VelocityField;
use crate::fields::{Position, Stencil, MAX_DIMS};
use crate::table::{num, Table};

/// Maximum number of step refinements before a step is frozen.
pub const MAX_REFINEMENTS: u32 = 8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryState {
    pub position: Position,
    pub time: f64,
    pub node_events: u64,
}

impl TrajectoryState {
    pub fn new(position: Position) -> Self {
        Self {
            position,
            time: 0.0,
            node_events: 0,
        }
    }
}

/// Velocity over one time step: fields at the start and end are blended
/// linearly in time, plus an optional static modification.
#[derive(Debug, Clone, Copy)]
pub struct FlowSlab<'a> {
    pub start: &'a VelocityField,
    pub end: &'a VelocityField,
    pub modification: Option<&'a ModifiedGuidance>,
}

impl<'a> FlowSlab<'a> {
    pub fn stationary(v: &'a VelocityField) -> Self {
        Self {
            start: v,
            end: v,
            modification: None,
        }
    }

    pub fn between(start: &'a VelocityField, end: &'a VelocityField) -> Self {
        Self {
            start,
            end,
            modification: None,
        }
    }

    pub fn with_modification(mut self, m: Option<&'a ModifiedGuidance>) -> Self {
        self.modification = m;
        self
    }

    /// Velocity at `x` and slab fraction `s in [0, 1]`.
    pub fn velocity(&self, x: &Position, s: f64) -> Option<Position> {
        let grid = self.start.grid();
        let stencil = Stencil::new(grid, x);
        let a = self.start.eval_stencil(&stencil)?;
        let mut v = if std::ptr::eq(self.start, self.end) || s == 0.0 {
            a
        } else {
            let b = self.end.eval_stencil(&stencil)?;
            let mut v = [0.0; MAX_DIMS];
            for d in 0..MAX_DIMS {
                v[d] = (1.0 - s) * a[d] + s * b[d];
            }
            v
        };
        if let Some(m) = self.modification {
            let extra = m.field().eval_stencil(&stencil)?;
            for d in 0..MAX_DIMS {
                v[d] += extra[d];
            }
        }
        Some(v)
    }
}

fn axpy(x: &Position, a: f64, v: &Position) -> Position {
    let mut out = *x;
    for d in 0..MAX_DIMS {
        out[d] += a * v[d];
    }
    out
}

/// RK4 over the sub-interval `[s0, s0 + ds]` of a slab of duration `dt`.
fn rk4(slab: &FlowSlab, x: &Position, s0: f64, ds: f64, dt: f64) -> Option<Position> {
    let h = ds * dt;
    let k1 = slab.velocity(x, s0)?;
    let k2 = slab.velocity(&axpy(x, 0.5 * h, &k1), s0 + 0.5 * ds)?;
    let k3 = slab.velocity(&axpy(x, 0.5 * h, &k2), s0 + 0.5 * ds)?;
    let k4 = slab.velocity(&axpy(x, h, &k3), s0 + ds)?;
    let mut out = *x;
    for d in 0..MAX_DIMS {
        out[d] += h / 6.0 * (k1[d] + 2.0 * k2[d] + 2.0 * k3[d] + k4[d]);
    }
    Some(out)
}

fn substepped(slab: &FlowSlab, x: &Position, parts: usize, dt: f64) -> Option<Position> {
    let ds = 1.0 / parts as f64;
    let mut p = *x;
    for k in 0..parts {
        p = rk4(slab, &p, k as f64 * ds, ds, dt)?;
    }
    Some(p)
}

/// One RK4 step of `dX/dt = v(X, t)`. If a stage hits a flagged stencil the
/// step is redone as `4^r` substeps for `r = 1..=8`; if every attempt fails
/// the position is kept and `node_events` increments.
pub fn advance_trajectory(state: &TrajectoryState, slab: &FlowSlab, dt: f64) -> TrajectoryState {
    let grid = slab.start.grid();
    let mut next = *state;
    next.time += dt;
    let moved = if slab.velocity(&state.position, 0.0).is_none() {
        None
    } else {
        rk4(slab, &state.position, 0.0, 1.0, dt).or_else(|| {
            (1..=MAX_REFINEMENTS).find_map(|r| substepped(slab, &state.position, 4usize.pow(r), dt))
        })
    };
    match moved {
        Some(p) if p.iter().all(|c| c.is_finite()) => next.position = grid.wrap_position(&p),
        _ => next.node_events += 1,
    }
    next
}

/// Advance an ensemble in parallel; the result does not depend on the
/// thread count.
pub fn advance_ensemble(states: &mut [TrajectoryState], slab: &FlowSlab, dt: f64) {
    states
        .par_iter_mut()
        .for_each(|s| *s = advance_trajectory(s, slab, dt));
}

/// Accumulates `traj_id,t,x1[,x2[,x3]]` rows and freeze events.
#[derive(Debug, Clone)]
pub struct TrajectoryLog {
    dims: usize,
    positions: Table,
    events: Table,
}

impl TrajectoryLog {
    pub fn new(dims: usize) -> Self {
        let mut header = vec!["traj_id".to_string(), "t".to_string()];
        header.extend((1..=dims).map(|d| format!("x{d}")));
        Self {
            dims,
            positions: Table::new(header),
            events: Table::new(["traj_id", "t", "event"]),
        }
    }

    pub fn record(&mut self, id: usize, state: &TrajectoryState) {
        let mut row = vec![id.to_string(), num(state.time)];
        row.extend(state.position[..self.dims].iter().map(|&x| num(x)));
        self.positions.push(row);
    }

    /// Records one event row per freeze that happened since `previous`.
    pub fn record_events(&mut self, id: usize, previous: &TrajectoryState, current: &TrajectoryState) {
        for _ in previous.node_events..current.node_events {
            self.events
                .push(vec![id.to_string(), num(current.time), "event=node_freeze".to_string()]);
        }
    }

    pub fn positions(&self) -> &Table {
        &self.positions
    }

    pub fn events(&self) -> &Table {
        &self.events
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::GridSpec;

    #[test]
    fn constant_velocity_wraps_exactly() {
        let l = 2.0 * std::f64::consts::PI;
        let g = GridSpec::new(&[16], &[l]).unwrap();
        let v = VelocityField::constant(&g, &[1.0]);
        let slab = FlowSlab::stationary(&v);
        let mut s = TrajectoryState::new([0.3, 0.0, 0.0]);
        let dt = l / 64.0;
        for _ in 0..64 {
            s = advance_trajectory(&s, &slab, dt);
        }
        assert!((g.min_image(0, 0.3, s.position[0])).abs() < 1e-10);
        assert_eq!(s.node_events, 0);
    }

    #[test]
    fn flagged_start_freezes_and_counts() {
        let g = GridSpec::new(&[8], &[8.0]).unwrap();
        let mut flags = vec![false; 8];
        flags[3] = true;
        let v = VelocityField::new(g.clone(), vec![vec![1.0; 8]], flags);
        let slab = FlowSlab::stationary(&v);
        let s = TrajectoryState::new([3.5, 0.0, 0.0]);
        let next = advance_trajectory(&s, &slab, 0.1);
        assert_eq!(next.position, s.position);
        assert_eq!(next.node_events, 1);
        assert!((next.time - 0.1).abs() < 1e-15);
    }

    #[test]
    fn refinement_avoids_overshoot_into_flagged_cell() {
        // velocity pushes right but is exactly zero near x=5; a big step
        // overshoots into the flagged node at 7, substeps do not
        let g = GridSpec::new(&[8], &[8.0]).unwrap();
        let comp: Vec<f64> = (0..8).map(|j| if j >= 5 { 0.0 } else { 1.0 }).collect();
        let mut flags = vec![false; 8];
        flags[7] = true;
        let v = VelocityField::new(g.clone(), vec![comp], flags);
        let slab = FlowSlab::stationary(&v);
        let s = TrajectoryState::new([4.5, 0.0, 0.0]);
        let next = advance_trajectory(&s, &slab, 3.0);
        assert_eq!(next.node_events, 0);
        assert!(next.position[0] > 4.5 && next.position[0] < 6.0);
    }

    #[test]
    fn log_layout() {
        let mut log = TrajectoryLog::new(2);
        let a = TrajectoryState::new([1.0, 2.0, 0.0]);
        let mut b = a;
        b.node_events = 1;
        b.time = 0.5;
        log.record(0, &a);
        log.record_events(0, &a, &b);
        assert_eq!(log.positions().to_csv(), "traj_id,t,x1,x2\n0,0.0,1.0,2.0\n");
        assert_eq!(log.events().to_csv(), "traj_id,t,event\n0,0.5,event=node_freeze\n");
    }
}
