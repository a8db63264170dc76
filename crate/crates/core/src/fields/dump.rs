//! `PWFIELD v1` plain-text field dumps.
//!
//! ```text
//! PWFIELD v1 dims=2 points=64,32 lengths=6.283185307179586,3.0
//! 1e0,0e0
//! ...
//! ```
//!
//! One `re,im` pair per line in row-major order. Numbers use the shortest
//! round-trip exponent form, independent of locale.

use std::fmt::Write as _;

use num_complex::Complex64;

use super::field::ComplexField;
use super::grid::GridSpec;
use crate::error::{Error, Result};

pub const HEADER_TAG: &str = "PWFIELD v1";

pub fn write_field(psi: &ComplexField) -> String {
    let g = psi.grid();
    let join = |v: Vec<String>| v.join(",");
    let mut out = format!(
        "{HEADER_TAG} dims={} points={} lengths={}\n",
        g.dims(),
        join(g.points().iter().map(|p| p.to_string()).collect()),
        join(g.lengths().iter().map(|l| format!("{l:?}")).collect()),
    );
    for z in psi.values() {
        let _ = writeln!(out, "{:e},{:e}", z.re, z.im);
    }
    out
}

fn parse_list<T: std::str::FromStr>(raw: &str, key: &str) -> Result<Vec<T>> {
    raw.split(',')
        .map(|s| {
            s.trim()
                .parse::<T>()
                .map_err(|_| Error::Parse(format!("bad {key} entry '{s}'")))
        })
        .collect()
}

/// Parses a dump; masses default to 1 and `hbar` to 1.
pub fn read_field(text: &str) -> Result<ComplexField> {
    let mut lines = text.lines();
    let header = lines.next().ok_or_else(|| Error::Parse("empty dump".into()))?;
    let rest = header
        .strip_prefix(HEADER_TAG)
        .ok_or_else(|| Error::Parse("missing PWFIELD v1 header".into()))?;
    let mut dims = None;
    let mut points = None;
    let mut lengths = None;
    for token in rest.split_whitespace() {
        let (key, value) = token
            .split_once('=')
            .ok_or_else(|| Error::Parse(format!("bad header token '{token}'")))?;
        match key {
            "dims" => {
                dims = Some(
                    value
                        .parse::<usize>()
                        .map_err(|_| Error::Parse("bad dims".into()))?,
                )
            }
            "points" => points = Some(parse_list::<usize>(value, "points")?),
            "lengths" => lengths = Some(parse_list::<f64>(value, "lengths")?),
            other => return Err(Error::Parse(format!("unknown header key '{other}'"))),
        }
    }
    let (dims, points, lengths) = match (dims, points, lengths) {
        (Some(d), Some(p), Some(l)) => (d, p, l),
        _ => return Err(Error::Parse("header needs dims, points and lengths".into())),
    };
    if points.len() != dims {
        return Err(Error::Parse("dims disagrees with points".into()));
    }
    let grid = GridSpec::new(&points, &lengths)?;
    let mut values = Vec::with_capacity(grid.len());
    for (n, line) in lines.enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let (re, im) = line
            .split_once(',')
            .ok_or_else(|| Error::Parse(format!("line {}: expected re,im", n + 2)))?;
        let parse = |s: &str| {
            s.trim()
                .parse::<f64>()
                .map_err(|_| Error::Parse(format!("line {}: bad number '{s}'", n + 2)))
        };
        values.push(Complex64::new(parse(re)?, parse(im)?));
    }
    ComplexField::new(grid, values).map_err(|e| Error::Parse(e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn header_layout() {
        let g = GridSpec::new(&[8, 10], &[1.5, 2.0]).unwrap();
        let psi = ComplexField::from_fn(&g, |x| Complex64::new(x[0], -x[1]));
        let text = write_field(&psi);
        assert!(text.starts_with("PWFIELD v1 dims=2 points=8,10 lengths=1.5,2.0\n"));
        assert_eq!(text.lines().count(), 1 + 80);
        assert_eq!(read_field(&text).unwrap(), psi);
    }

    #[test]
    fn rejects_short_body_and_bad_header() {
        assert!(read_field("PWFIELD v2 dims=1 points=8 lengths=1").is_err());
        assert!(read_field("PWFIELD v1 dims=1 points=8 lengths=1\n1,0\n").is_err());
    }
}
