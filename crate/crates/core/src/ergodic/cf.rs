use serde::Serialize;

/// Continued-fraction expansion of a float ratio, used to judge how close a
/// frequency ratio sits to a low-denominator rational.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CfReport {
    pub value: f64,
    pub partial_quotients: Vec<i64>,
    /// Convergents `(p, q)` in order.
    pub convergents: Vec<(i64, i64)>,
    /// Smallest `q^2 |x - p/q|` over convergents with `q > 1`; values far
    /// below 1 signal a suspiciously good rational approximation.
    pub min_scaled_error: f64,
    /// First convergent reproducing `value` to within 1e-12, if any.
    pub exact_within_precision: Option<(i64, i64)>,
}

pub fn continued_fraction(x: f64, max_terms: usize) -> CfReport {
    let mut partial = Vec::new();
    let mut convergents = Vec::new();
    let (mut p0, mut q0, mut p1, mut q1) = (1i64, 0i64, 0i64, 1i64);
    let mut r = x;
    let mut min_scaled = f64::INFINITY;
    let mut exact = None;
    for _ in 0..max_terms {
        if !r.is_finite() || r.abs() > 1e15 {
            break;
        }
        // absorb rounding that leaves r just below an integer
        let a = (r + 1e-9).floor();
        let ai = a as i64;
        partial.push(ai);
        let (Some(p), Some(q)) = (
            ai.checked_mul(p0).and_then(|v| v.checked_add(p1)),
            ai.checked_mul(q0).and_then(|v| v.checked_add(q1)),
        ) else {
            break;
        };
        p1 = p0;
        q1 = q0;
        p0 = p;
        q0 = q;
        convergents.push((p, q));
        let err = (x - p as f64 / q as f64).abs();
        if q > 1 {
            min_scaled = min_scaled.min(err * (q as f64) * (q as f64));
        }
        if err <= 1e-12 * x.abs().max(1.0) {
            exact = Some((p, q));
            break;
        }
        let frac = r - a;
        if frac <= 0.0 {
            break;
        }
        r = 1.0 / frac;
    }
    CfReport {
        value: x,
        partial_quotients: partial,
        convergents,
        min_scaled_error: min_scaled,
        exact_within_precision: exact,
    }
}
