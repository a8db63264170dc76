use std::f64::consts::PI;

use crate::fields::{wrap_periodic, Position, MAX_DIMS};

/// Closed-form eigenstate flow `x_i(t) = x_i(0) + v_i t (mod l_i)` with
/// `v_i = 2 pi hbar n_i / (m_i l_i)`.
#[derive(Debug, Clone, PartialEq)]
pub struct TorusFlow {
    lengths: Vec<f64>,
    velocities: Vec<f64>,
}

impl TorusFlow {
    pub fn new(ns: &[i64], lengths: &[f64], masses: &[f64], hbar: f64) -> Self {
        let velocities = ns
            .iter()
            .zip(lengths)
            .zip(masses)
            .map(|((&n, &l), &m)| 2.0 * PI * hbar * n as f64 / (m * l))
            .collect();
        Self {
            lengths: lengths.to_vec(),
            velocities,
        }
    }

    /// Unit masses and `hbar = 1`.
    pub fn unit(ns: &[i64], lengths: &[f64]) -> Self {
        Self::new(ns, lengths, &vec![1.0; ns.len()], 1.0)
    }

    pub fn velocities(&self) -> &[f64] {
        &self.velocities
    }

    pub fn position(&self, x0: &Position, t: f64) -> Position {
        let mut x = [0.0; MAX_DIMS];
        for (d, (&v, &l)) in self.velocities.iter().zip(&self.lengths).enumerate() {
            x[d] = wrap_periodic(x0[d] + v * t, l);
        }
        x
    }
}

pub fn torus_flow_exact(x0: &Position, ns: &[i64], lengths: &[f64], t: f64) -> Position {
    TorusFlow::unit(ns, lengths).position(x0, t)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn closed_form_examples() {
        let x0 = [0.2, 0.7, 0.0];
        assert_eq!(torus_flow_exact(&x0, &[1, 1], &[1.0, 1.0], 0.0), x0);
        let x = torus_flow_exact(&x0, &[1, 1], &[1.0, 1.0], 1.0);
        assert!((x[0] - wrap_periodic(0.2 + 2.0 * PI, 1.0)).abs() < 1e-14);
        assert!((x[1] - wrap_periodic(0.7 + 2.0 * PI, 1.0)).abs() < 1e-14);
        assert_eq!(torus_flow_exact(&x0, &[0, 0], &[1.0, 1.0], 1e6), x0);
    }
}
