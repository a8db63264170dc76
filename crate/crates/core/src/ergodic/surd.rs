//! Exact arithmetic in `Q(sqrt2, sqrt3, sqrt5)` and the rational
//! independence test for torus eigenstate frequencies.

use std::fmt;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};
use serde::Serialize;

use super::cf::{continued_fraction, CfReport};
use crate::error::{Error, Result};

const PRIMES: [u32; 3] = [2, 3, 5];

/// Element of `Q(sqrt2, sqrt3, sqrt5)` in the basis `e_b = prod_{p in b} sqrt p`
/// indexed by bitmask `b` over `(2, 3, 5)`.
#[derive(Clone, PartialEq, Eq)]
pub struct Multiquadratic {
    coef: [BigRational; 8],
}

impl fmt::Debug for Multiquadratic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let names = ["1", "√2", "√3", "√6", "√5", "√10", "√15", "√30"];
        let terms: Vec<String> = self
            .coef
            .iter()
            .zip(names)
            .filter(|(c, _)| !c.is_zero())
            .map(|(c, n)| format!("{c}·{n}"))
            .collect();
        if terms.is_empty() {
            write!(f, "0")
        } else {
            write!(f, "{}", terms.join(" + "))
        }
    }
}

fn rational(num: i64, den: i64) -> BigRational {
    BigRational::new(BigInt::from(num), BigInt::from(den))
}

impl Multiquadratic {
    pub fn zero() -> Self {
        Self {
            coef: std::array::from_fn(|_| BigRational::zero()),
        }
    }

    pub fn from_rational(q: BigRational) -> Self {
        let mut z = Self::zero();
        z.coef[0] = q;
        z
    }

    /// `q0 + q1 sqrt2 + q2 sqrt3 + q3 sqrt5`.
    pub fn surd(q: [BigRational; 4]) -> Self {
        let mut z = Self::zero();
        let [a, b, c, d] = q;
        z.coef[0] = a;
        z.coef[1] = b;
        z.coef[2] = c;
        z.coef[4] = d;
        z
    }

    pub fn coefficients(&self) -> &[BigRational; 8] {
        &self.coef
    }

    pub fn is_zero(&self) -> bool {
        self.coef.iter().all(Zero::is_zero)
    }

    pub fn mul(&self, other: &Self) -> Self {
        let mut out = Self::zero();
        for a in 0..8usize {
            if self.coef[a].is_zero() {
                continue;
            }
            for b in 0..8usize {
                if other.coef[b].is_zero() {
                    continue;
                }
                let shared = a & b;
                let factor: u32 = (0..3).filter(|i| shared >> i & 1 == 1).map(|i| PRIMES[i]).product();
                let term = &self.coef[a] * &other.coef[b] * BigRational::from_integer(BigInt::from(factor));
                out.coef[a ^ b] += term;
            }
        }
        out
    }

    pub fn scale(&self, q: &BigRational) -> Self {
        Self {
            coef: std::array::from_fn(|i| &self.coef[i] * q),
        }
    }

    /// Image under `sqrt p -> -sqrt p` for each prime in `mask`.
    fn conjugate(&self, mask: usize) -> Self {
        Self {
            coef: std::array::from_fn(|b| {
                if (b & mask).count_ones() % 2 == 1 {
                    -self.coef[b].clone()
                } else {
                    self.coef[b].clone()
                }
            }),
        }
    }

    /// Multiplicative inverse via the product of the nontrivial conjugates.
    pub fn inverse(&self) -> Option<Self> {
        if self.is_zero() {
            return None;
        }
        let mut others = Self::from_rational(BigRational::one());
        for mask in 1..8 {
            others = others.mul(&self.conjugate(mask));
        }
        let norm = self.mul(&others);
        debug_assert!(norm.coef[1..].iter().all(Zero::is_zero));
        let n = norm.coef[0].clone();
        Some(others.scale(&n.recip()))
    }

    pub fn to_f64(&self) -> f64 {
        let basis = [
            1.0,
            2f64.sqrt(),
            3f64.sqrt(),
            6f64.sqrt(),
            5f64.sqrt(),
            10f64.sqrt(),
            15f64.sqrt(),
            30f64.sqrt(),
        ];
        self.coef
            .iter()
            .zip(basis)
            .map(|(c, b)| c.to_f64().unwrap_or(f64::NAN) * b)
            .sum()
    }
}

/// Squared torus length `q0 + q1 sqrt2 + q2 sqrt3 + q3 sqrt5`.
#[derive(Debug, Clone, PartialEq)]
pub struct SurdLength {
    squared: Multiquadratic,
}

impl SurdLength {
    pub fn new(q: [BigRational; 4]) -> Result<Self> {
        let squared = Multiquadratic::surd(q);
        if !(squared.to_f64() > 0.0) {
            return Err(Error::InvalidArgument(format!("squared length {squared:?} is not positive")));
        }
        Ok(Self { squared })
    }

    /// Integer-ratio convenience: `(num, den)` per coefficient.
    pub fn from_ratios(q: [(i64, i64); 4]) -> Result<Self> {
        Self::new(q.map(|(n, d)| rational(n, d)))
    }

    pub fn rational(num: i64, den: i64) -> Result<Self> {
        Self::from_ratios([(num, den), (0, 1), (0, 1), (0, 1)])
    }

    pub fn squared(&self) -> &Multiquadratic {
        &self.squared
    }

    pub fn length(&self) -> f64 {
        self.squared.to_f64().sqrt()
    }
}

/// Length of one torus axis: exact surd or plain float.
#[derive(Debug, Clone, PartialEq)]
pub enum TorusLength {
    Surd(SurdLength),
    Float(f64),
}

impl TorusLength {
    pub fn value(&self) -> f64 {
        match self {
            TorusLength::Surd(s) => s.length(),
            TorusLength::Float(l) => *l,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum VerdictKind {
    ErgodicGuaranteed,
    ClosedOrbit,
    Undecided,
}

impl VerdictKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            VerdictKind::ErgodicGuaranteed => "ergodic-guaranteed",
            VerdictKind::ClosedOrbit => "closed-orbit",
            VerdictKind::Undecided => "undecided",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Verdict {
    pub kind: VerdictKind,
    /// Rank over Q of the frequency vectors, when decided exactly.
    pub rank: Option<usize>,
    pub detail: String,
    /// Continued-fraction diagnostics of frequency ratios for float lengths.
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub diagnostics: Vec<CfReport>,
}

/// Rank over Q of rows in Q^8, by exact elimination.
fn rational_rank(mut rows: Vec<Vec<BigRational>>) -> usize {
    let cols = rows.first().map_or(0, Vec::len);
    let mut rank = 0;
    for col in 0..cols {
        let Some(pivot) = (rank..rows.len()).find(|&r| !rows[r][col].is_zero()) else {
            continue;
        };
        rows.swap(rank, pivot);
        let p = rows[rank][col].clone();
        for r in 0..rows.len() {
            if r != rank && !rows[r][col].is_zero() {
                let f = &rows[r][col] / &p;
                for c in col..cols {
                    let v = &f * &rows[rank][c];
                    rows[r][c] -= v;
                }
            }
        }
        rank += 1;
    }
    rank
}

/// Decide whether the eigenstate flow with quantum numbers `ns` on a torus
/// with equal masses is ergodic. Frequencies are `n_i / l_i^2`.
pub fn check_rational_independence(lengths: &[TorusLength], ns: &[i64]) -> Verdict {
    if lengths.len() != ns.len() || ns.is_empty() {
        return Verdict {
            kind: VerdictKind::Undecided,
            rank: None,
            detail: "length and quantum-number counts differ".into(),
            diagnostics: Vec::new(),
        };
    }
    if let Some(i) = ns.iter().position(|&n| n == 0) {
        return Verdict {
            kind: VerdictKind::ClosedOrbit,
            rank: None,
            detail: format!("degenerate: n_{} = 0, the flow is confined to a lower-dimensional torus", i + 1),
            diagnostics: Vec::new(),
        };
    }
    if ns.len() == 1 {
        return Verdict {
            kind: VerdictKind::ErgodicGuaranteed,
            rank: Some(1),
            detail: "a single nonzero frequency sweeps the whole circle".into(),
            diagnostics: Vec::new(),
        };
    }
    let surds: Option<Vec<&SurdLength>> = lengths
        .iter()
        .map(|l| match l {
            TorusLength::Surd(s) => Some(s),
            TorusLength::Float(_) => None,
        })
        .collect();
    let Some(surds) = surds else {
        let w: Vec<f64> = lengths
            .iter()
            .zip(ns)
            .map(|(l, &n)| n as f64 / (l.value() * l.value()))
            .collect();
        let diagnostics = w[1..].iter().map(|wi| continued_fraction(wi / w[0], 24)).collect();
        return Verdict {
            kind: VerdictKind::Undecided,
            rank: None,
            detail: "lengths outside the surd representation; claims are empirical only".into(),
            diagnostics,
        };
    };
    let rows: Vec<Vec<BigRational>> = surds
        .iter()
        .zip(ns)
        .map(|(s, &n)| {
            let inv = s.squared().inverse().expect("positive squared length");
            inv.scale(&BigRational::from_integer(BigInt::from(n)))
                .coefficients()
                .to_vec()
        })
        .collect();
    let rank = rational_rank(rows);
    if rank == ns.len() {
        Verdict {
            kind: VerdictKind::ErgodicGuaranteed,
            rank: Some(rank),
            detail: "frequencies n_i/l_i^2 are rationally independent".into(),
            diagnostics: Vec::new(),
        }
    } else {
        Verdict {
            kind: VerdictKind::ClosedOrbit,
            rank: Some(rank),
            detail: "frequencies n_i/l_i^2 satisfy a rational relation".into(),
            diagnostics: Vec::new(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn surd(q: [(i64, i64); 4]) -> TorusLength {
        TorusLength::Surd(SurdLength::from_ratios(q).unwrap())
    }

    #[test]
    fn inverse_round_trips() {
        let a = Multiquadratic::surd([rational(3, 1), rational(-1, 2), rational(2, 3), rational(1, 1)]);
        let one = a.mul(&a.inverse().unwrap());
        assert_eq!(one, Multiquadratic::from_rational(BigRational::one()));
        assert!((a.inverse().unwrap().to_f64() - 1.0 / a.to_f64()).abs() < 1e-12);
    }

    #[test]
    fn verdicts() {
        let one = surd([(1, 1), (0, 1), (0, 1), (0, 1)]);
        let root2 = surd([(0, 1), (1, 1), (0, 1), (0, 1)]);
        let four = surd([(4, 1), (0, 1), (0, 1), (0, 1)]);
        let v = check_rational_independence(&[one.clone(), root2.clone()], &[1, 1]);
        assert_eq!(v.kind, VerdictKind::ErgodicGuaranteed);
        let v = check_rational_independence(&[one.clone(), four], &[1, 1]);
        assert_eq!(v.kind, VerdictKind::ClosedOrbit);
        let v = check_rational_independence(&[one.clone(), root2.clone()], &[1, 0]);
        assert_eq!(v.kind, VerdictKind::ClosedOrbit);
        assert!(v.detail.starts_with("degenerate"));
        let v = check_rational_independence(&[one, TorusLength::Float(1.3)], &[1, 1]);
        assert_eq!(v.kind, VerdictKind::Undecided);
        assert_eq!(v.diagnostics.len(), 1);
    }

    #[test]
    fn hidden_dependence_is_found() {
        // l^2 = 1 + sqrt2 and l^2 = 2 + 2 sqrt2 give frequencies in ratio 2
        let a = surd([(1, 1), (1, 1), (0, 1), (0, 1)]);
        let b = surd([(2, 1), (2, 1), (0, 1), (0, 1)]);
        assert_eq!(check_rational_independence(&[a.clone(), b], &[1, 1]).kind, VerdictKind::ClosedOrbit);
        // three axes where the third frequency is a rational mix of the first two
        let c = surd([(0, 1), (1, 1), (0, 1), (0, 1)]);
        let one = surd([(1, 1), (0, 1), (0, 1), (0, 1)]);
        assert_eq!(check_rational_independence(&[one.clone(), c.clone()], &[1, 3]).kind, VerdictKind::ErgodicGuaranteed);
        let v = check_rational_independence(&[one, c, a], &[1, 1, 1]);
        // 1/(1+sqrt2) = sqrt2 - 1 lies in the span of 1 and 1/sqrt2
        assert_eq!(v.kind, VerdictKind::ClosedOrbit);
        assert_eq!(v.rank, Some(2));
    }

    #[test]
    fn non_positive_length_rejected() {
        assert!(SurdLength::from_ratios([(-1, 1), (0, 1), (0, 1), (0, 1)]).is_err());
    }
}
