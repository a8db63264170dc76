use serde::Serialize;

use super::histogram::{total_variation, Histogram, Partition};
use super::sampling::SampleSet;
use crate::error::{Error, Result};
use crate::fields::ComplexField;

/// Kolmogorov-Smirnov statistic of 1-D samples against a continuous CDF on
/// `[0, l)`.
pub fn ks_statistic(samples: &[f64], cdf: impl Fn(f64) -> f64) -> f64 {
    if samples.is_empty() {
        return 0.0;
    }
    let mut xs = samples.to_vec();
    xs.sort_by(f64::total_cmp);
    let n = xs.len() as f64;
    xs.iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = cdf(x);
            (f - i as f64 / n).max((i + 1) as f64 / n - f)
        })
        .fold(0.0, f64::max)
}

/// CDF of the piecewise-linear interpolant of 1-D periodic node values.
#[derive(Debug, Clone)]
pub struct LinearCdf {
    h: f64,
    values: Vec<f64>,
    cumulative: Vec<f64>,
}

impl LinearCdf {
    pub fn new(spacing: f64, values: &[f64]) -> Result<Self> {
        let n = values.len();
        let mut cumulative = Vec::with_capacity(n + 1);
        cumulative.push(0.0);
        for j in 0..n {
            let seg = 0.5 * spacing * (values[j] + values[(j + 1) % n]);
            cumulative.push(cumulative[j] + seg);
        }
        let total = cumulative[n];
        if !(total.is_finite() && total > 0.0) {
            return Err(Error::ZeroNorm);
        }
        Ok(Self {
            h: spacing,
            values: values.iter().map(|v| v / total).collect(),
            cumulative: cumulative.iter().map(|c| c / total).collect(),
        })
    }

    pub fn from_field(psi: &ComplexField) -> Result<Self> {
        if psi.grid().dims() != 1 {
            return Err(Error::UnsupportedDimension("KS distance is defined for 1-D fields".into()));
        }
        Self::new(psi.grid().spacing(0), &psi.density())
    }

    pub fn eval(&self, x: f64) -> f64 {
        let n = self.values.len();
        let s = x / self.h;
        if s <= 0.0 {
            return 0.0;
        }
        if s >= n as f64 {
            return 1.0;
        }
        let j = (s.floor() as usize).min(n - 1);
        let t = s - j as f64;
        let a = self.values[j];
        let b = self.values[(j + 1) % n];
        self.cumulative[j] + self.h * (a * t + 0.5 * (b - a) * t * t)
    }

    /// Domain length `n h`.
    pub fn length(&self) -> f64 {
        self.h * self.values.len() as f64
    }

    /// Normalized interpolated density at `x` in `[0, l)`.
    pub fn density(&self, x: f64) -> f64 {
        let n = self.values.len();
        let s = (x / self.h).clamp(0.0, n as f64);
        let j = (s.floor() as usize).min(n - 1);
        let t = s - j as f64;
        let a = self.values[j];
        let b = self.values[(j + 1) % n];
        a + (b - a) * t
    }

    /// Quantile function: the `x` with `eval(x) = u`.
    pub fn inverse(&self, u: f64) -> f64 {
        let n = self.values.len();
        if u <= 0.0 {
            return 0.0;
        }
        if u >= 1.0 {
            return self.length();
        }
        // last node with cumulative <= u, skipping zero-mass segments
        let j = (self.cumulative.partition_point(|&c| c <= u) - 1).min(n - 1);
        let a = self.values[j];
        let b = self.values[(j + 1) % n];
        let c = (u - self.cumulative[j]) / self.h;
        let disc = (a * a + 2.0 * (b - a) * c).max(0.0);
        let denom = a + disc.sqrt();
        let t = if denom > 0.0 { (2.0 * c / denom).clamp(0.0, 1.0) } else { 0.0 };
        (j as f64 + t) * self.h
    }
}

/// Distances between a sample set and `|psi|^2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Distances {
    /// Only for 1-D domains.
    pub ks: Option<f64>,
    pub tv: f64,
}

pub fn distribution_distance(samples: &SampleSet, psi: &ComplexField, partition: &Partition) -> Result<Distances> {
    let p = Histogram::from_samples(partition, samples);
    let q = Histogram::from_field(partition, psi)?;
    let tv = total_variation(&p, &q)?;
    let ks = if psi.grid().dims() == 1 {
        let cdf = LinearCdf::from_field(psi)?;
        let xs: Vec<f64> = samples.points.iter().map(|p| p[0]).collect();
        Some(ks_statistic(&xs, |x| cdf.eval(x)))
    } else {
        None
    };
    Ok(Distances { ks, tv })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::GridSpec;
    use num_complex::Complex64;

    #[test]
    fn ks_of_perfect_grid_is_half_step() {
        let xs: Vec<f64> = (0..100).map(|i| (i as f64 + 0.5) / 100.0).collect();
        assert!((ks_statistic(&xs, |x| x) - 0.005).abs() < 1e-12);
    }

    #[test]
    fn linear_cdf_matches_integral() {
        let g = GridSpec::new(&[8], &[8.0]).unwrap();
        let psi = ComplexField::from_fn(&g, |x| Complex64::new((1.0 + x[0]).sqrt(), 0.0));
        let cdf = LinearCdf::from_field(&psi).unwrap();
        // density 1+x on [0,7], then back down to 1 on [7,8]
        let total = 0.5 * 7.0 * (1.0 + 8.0) + 0.5 * (8.0 + 1.0);
        let at = |x: f64| x + 0.5 * x * x;
        assert!((cdf.eval(2.5) - at(2.5) / total).abs() < 1e-14);
        assert_eq!(cdf.eval(8.0), 1.0);
        for &x in &[0.0, 0.3, 2.5, 6.99, 7.5] {
            assert!((cdf.inverse(cdf.eval(x)) - x).abs() < 1e-12);
        }
        assert!((cdf.density(2.5) - 3.5 / total).abs() < 1e-14);
    }

    #[test]
    fn concentrated_samples_against_step_density() {
        let g = GridSpec::new(&[16], &[1.0]).unwrap();
        let p = Partition::new(&g, &[8]).unwrap();
        let psi = ComplexField::from_fn(&g, |x| Complex64::new(if x[0] < 0.5 { 1.0 } else { 0.0 }, 0.0));
        let inside = SampleSet::new(1, vec![[0.2, 0.0, 0.0]; 10]);
        let outside = SampleSet::new(1, vec![[0.7, 0.0, 0.0]; 10]);
        let a = distribution_distance(&inside, &psi, &p).unwrap();
        let b = distribution_distance(&outside, &psi, &p).unwrap();
        // trapezoid masses put 1/16 of the step into the second cell
        assert!((a.tv - 0.0625).abs() < 1e-12);
        assert!((b.tv - 0.9375).abs() < 1e-12);
    }
}
