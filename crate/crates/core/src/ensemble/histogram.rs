use serde::Serialize;

use super::sampling::SampleSet;
use crate::error::{Error, Result};
use crate::fields::{ComplexField, GridSpec, Position, MAX_DIMS};
use crate::table::{num, Table};

/// Default coarse-graining cell edge, in grid cells.
pub const DEFAULT_CELL_POINTS: usize = 8;

/// Regular partition of the periodic box into cells of `cell_points[d]`
/// grid spacings; cell `c` covers `[c w, (c+1) w)` per axis.
#[derive(Debug, Clone, PartialEq)]
pub struct Partition {
    grid: GridSpec,
    cell_points: Vec<usize>,
    cells: Vec<usize>,
}

impl Partition {
    pub fn new(grid: &GridSpec, cell_points: &[usize]) -> Result<Self> {
        if cell_points.len() != grid.dims() {
            return Err(Error::InvalidCell("one cell size per axis required".into()));
        }
        let mut cells = Vec::with_capacity(grid.dims());
        for (d, &c) in cell_points.iter().enumerate() {
            let n = grid.points()[d];
            if c == 0 {
                return Err(Error::InvalidCell(format!("axis {d}: cell smaller than the grid spacing")));
            }
            if n % c != 0 {
                return Err(Error::InvalidCell(format!(
                    "axis {d}: {c} grid cells per cell does not tile {n} points"
                )));
            }
            cells.push(n / c);
        }
        Ok(Self {
            grid: grid.clone(),
            cell_points: cell_points.to_vec(),
            cells,
        })
    }

    /// Cells of physical edge `sizes[d]`, which must be integer multiples of
    /// the spacing.
    pub fn from_cell_size(grid: &GridSpec, sizes: &[f64]) -> Result<Self> {
        if sizes.len() != grid.dims() {
            return Err(Error::InvalidCell("one cell size per axis required".into()));
        }
        let mut pts = Vec::with_capacity(sizes.len());
        for (d, &s) in sizes.iter().enumerate() {
            let h = grid.spacing(d);
            if !(s.is_finite()) || s < h * (1.0 - 1e-9) {
                return Err(Error::InvalidCell(format!("axis {d}: cell {s} smaller than spacing {h}")));
            }
            let m = (s / h).round();
            if ((s / h) - m).abs() > 1e-9 * m.max(1.0) {
                return Err(Error::InvalidCell(format!("axis {d}: cell {s} is not a multiple of {h}")));
            }
            pts.push(m as usize);
        }
        Self::new(grid, &pts)
    }

    pub fn default_for(grid: &GridSpec) -> Result<Self> {
        Self::new(grid, &vec![DEFAULT_CELL_POINTS; grid.dims()])
    }

    /// Same partition with every cell edge scaled by `factor` grid cells
    /// (for example 2 or 1/2).
    pub fn rescaled(&self, numerator: usize, denominator: usize) -> Result<Self> {
        let pts: Vec<usize> = self
            .cell_points
            .iter()
            .map(|&c| {
                if (c * numerator) % denominator == 0 {
                    Ok(c * numerator / denominator)
                } else {
                    Err(Error::InvalidCell(format!("cannot scale {c} by {numerator}/{denominator}")))
                }
            })
            .collect::<Result<_>>()?;
        Self::new(&self.grid, &pts)
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn cell_points(&self) -> &[usize] {
        &self.cell_points
    }

    pub fn cells_per_axis(&self) -> &[usize] {
        &self.cells
    }

    pub fn len(&self) -> usize {
        self.cells.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn cell_width(&self, axis: usize) -> f64 {
        self.grid.lengths()[axis] / self.cells[axis] as f64
    }

    pub fn cell_volume(&self) -> f64 {
        (0..self.grid.dims()).map(|d| self.cell_width(d)).product()
    }

    pub fn cell_of(&self, x: &Position) -> usize {
        let mut flat = 0;
        for d in 0..self.grid.dims() {
            let w = self.cell_width(d);
            let c = ((self.grid.wrap(d, x[d]) / w).floor() as usize).min(self.cells[d] - 1);
            flat = flat * self.cells[d] + c;
        }
        flat
    }

    pub fn cell_multi(&self, mut flat: usize) -> [usize; MAX_DIMS] {
        let mut idx = [0; MAX_DIMS];
        for d in (0..self.grid.dims()).rev() {
            idx[d] = flat % self.cells[d];
            flat /= self.cells[d];
        }
        idx
    }

    pub fn center(&self, flat: usize) -> Position {
        let idx = self.cell_multi(flat);
        let mut x = [0.0; MAX_DIMS];
        for d in 0..self.grid.dims() {
            x[d] = (idx[d] as f64 + 0.5) * self.cell_width(d);
        }
        x
    }

    /// Cells overlapped by the node cell `[x_j - h/2, x_j + h/2]` with
    /// their overlap fractions, along one axis.
    fn node_shares(&self, axis: usize, j: usize) -> [(usize, f64); 2] {
        let c = self.cell_points[axis];
        let n = self.cells[axis];
        if j % c == 0 {
            let here = j / c;
            [(here, 0.5), ((here + n - 1) % n, 0.5)]
        } else {
            [(j / c, 1.0), (0, 0.0)]
        }
    }

    /// Cell masses of a node density, treating each node as its own cell
    /// (the trapezoid rule, exact for the multilinear interpolant).
    pub fn masses_of(&self, density: &[f64]) -> Vec<f64> {
        let g = &self.grid;
        let dims = g.dims();
        let mut out = vec![0.0; self.len()];
        for (flat, &rho) in density.iter().enumerate() {
            if rho == 0.0 {
                continue;
            }
            let idx = g.multi_index(flat);
            let shares: Vec<[(usize, f64); 2]> = (0..dims).map(|d| self.node_shares(d, idx[d])).collect();
            for corner in 0..(1usize << dims) {
                let mut cell = 0;
                let mut w = rho;
                for (d, sh) in shares.iter().enumerate() {
                    let (c, f) = sh[corner >> d & 1];
                    w *= f;
                    cell = cell * self.cells[d] + c;
                }
                if w != 0.0 {
                    out[cell] += w;
                }
            }
        }
        let cv = g.cell_volume();
        out.iter_mut().for_each(|m| *m *= cv);
        out
    }
}

/// Normalized cell masses on a partition. For sample histograms the raw
/// counts are kept too.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Histogram {
    pub mass: Vec<f64>,
    pub counts: Option<Vec<u64>>,
    #[serde(skip)]
    partition: Partition,
}

impl Histogram {
    pub fn from_samples(partition: &Partition, samples: &SampleSet) -> Self {
        let counts = count_cells(partition, &samples.points);
        let n = samples.len() as f64;
        let mass = counts
            .iter()
            .map(|&c| if n > 0.0 { c as f64 / n } else { 0.0 })
            .collect();
        Self {
            mass,
            counts: Some(counts),
            partition: partition.clone(),
        }
    }

    /// Coarse-grained `|psi|^2` on the partition, normalized to 1.
    pub fn from_field(partition: &Partition, psi: &ComplexField) -> Result<Self> {
        partition.grid().check_same(psi.grid())?;
        Self::from_density(partition, &psi.density())
    }

    pub fn from_density(partition: &Partition, density: &[f64]) -> Result<Self> {
        if density.len() != partition.grid().len() {
            return Err(Error::GridMismatch("density size differs from grid".into()));
        }
        let mut mass = partition.masses_of(density);
        let total: f64 = mass.iter().sum();
        if !(total.is_finite() && total > 0.0) {
            return Err(Error::ZeroNorm);
        }
        mass.iter_mut().for_each(|m| *m /= total);
        Ok(Self {
            mass,
            counts: None,
            partition: partition.clone(),
        })
    }

    /// Histogram from already-normalized cell masses.
    pub fn from_masses(partition: &Partition, mass: Vec<f64>) -> Result<Self> {
        if mass.len() != partition.len() {
            return Err(Error::PartitionMismatch);
        }
        Ok(Self {
            mass,
            counts: None,
            partition: partition.clone(),
        })
    }

    pub fn partition(&self) -> &Partition {
        &self.partition
    }

    pub fn total(&self) -> f64 {
        self.mass.iter().sum()
    }

    pub fn sample_count(&self) -> Option<u64> {
        self.counts.as_ref().map(|c| c.iter().sum())
    }

    /// Coarse-grained density `mass / cell_volume`.
    pub fn density(&self) -> Vec<f64> {
        let v = self.partition.cell_volume();
        self.mass.iter().map(|m| m / v).collect()
    }
}

pub(crate) fn count_cells(partition: &Partition, points: &[Position]) -> Vec<u64> {
    let mut counts = vec![0u64; partition.len()];
    for p in points {
        counts[partition.cell_of(p)] += 1;
    }
    counts
}

/// Sample histogram `p_bar` and field histogram `psi2_bar` on one partition.
pub fn coarse_grain(samples: &SampleSet, psi: &ComplexField, partition: &Partition) -> Result<(Histogram, Histogram)> {
    if samples.dims != psi.grid().dims() {
        return Err(Error::GridMismatch("sample dimension differs from grid".into()));
    }
    Ok((Histogram::from_samples(partition, samples), Histogram::from_field(partition, psi)?))
}

/// Value of the coarse-grained H-function.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", content = "value", rename_all = "snake_case")]
pub enum Entropy {
    Finite(f64),
    /// `p_bar > 0` on a cell where `psi2_bar = 0`.
    NegativeInfinity,
}

impl Entropy {
    pub fn value(&self) -> f64 {
        match self {
            Entropy::Finite(s) => *s,
            Entropy::NegativeInfinity => f64::NEG_INFINITY,
        }
    }

    pub fn is_finite(&self) -> bool {
        matches!(self, Entropy::Finite(_))
    }
}

fn check_pair(a: &Histogram, b: &Histogram) -> Result<()> {
    if a.partition != b.partition || a.mass.len() != b.mass.len() {
        return Err(Error::PartitionMismatch);
    }
    Ok(())
}

/// `S = -sum_cells P log(P / Q)` over cell masses, with `0 log 0 = 0`.
pub fn subquantum_entropy(p_bar: &Histogram, psi_bar: &Histogram) -> Result<Entropy> {
    check_pair(p_bar, psi_bar)?;
    let mut s = 0.0;
    for (&p, &q) in p_bar.mass.iter().zip(&psi_bar.mass) {
        if p <= 0.0 {
            continue;
        }
        if q <= 0.0 {
            return Ok(Entropy::NegativeInfinity);
        }
        s -= p * (p / q).ln();
    }
    Ok(Entropy::Finite(s))
}

/// `1/2 sum |P - Q|`.
pub fn total_variation(a: &Histogram, b: &Histogram) -> Result<f64> {
    check_pair(a, b)?;
    Ok(0.5 * a.mass.iter().zip(&b.mass).map(|(x, y)| (x - y).abs()).sum::<f64>())
}

/// Typical TV between an `n`-sample histogram over `k` cells and its own
/// parent law, `sqrt(k / (2 pi n))` (the half-normal mean per cell).
pub fn tv_noise_estimate(cells: usize, n: usize) -> f64 {
    (cells as f64 / (2.0 * std::f64::consts::PI * n as f64)).sqrt()
}

/// CSV `cell_index,c1[,c2[,c3]],p_bar,psi2_bar` with coarse-grained densities.
pub fn histogram_table(p_bar: &Histogram, psi_bar: &Histogram) -> Result<Table> {
    check_pair(p_bar, psi_bar)?;
    let part = p_bar.partition();
    let dims = part.grid().dims();
    let mut header = vec!["cell_index".to_string()];
    header.extend((1..=dims).map(|d| format!("c{d}")));
    header.push("p_bar".into());
    header.push("psi2_bar".into());
    let mut t = Table::new(header);
    let (pd, qd) = (p_bar.density(), psi_bar.density());
    for c in 0..part.len() {
        let x = part.center(c);
        let mut row = vec![c.to_string()];
        row.extend(x[..dims].iter().map(|&v| num(v)));
        row.push(num(pd[c]));
        row.push(num(qd[c]));
        t.push(row);
    }
    Ok(t)
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_complex::Complex64;

    fn line(points: usize, l: f64) -> GridSpec {
        GridSpec::new(&[points], &[l]).unwrap()
    }

    #[test]
    fn cell_rules() {
        let g = line(64, 8.0);
        assert!(matches!(Partition::from_cell_size(&g, &[0.05]), Err(Error::InvalidCell(_))));
        assert!(matches!(Partition::from_cell_size(&g, &[0.2]), Err(Error::InvalidCell(_))));
        assert_eq!(Partition::from_cell_size(&g, &[0.5]).unwrap().len(), 16);
        let whole = Partition::from_cell_size(&g, &[8.0]).unwrap();
        let s = SampleSet::new(1, vec![[0.1, 0.0, 0.0], [7.9, 0.0, 0.0]]);
        assert_eq!(Histogram::from_samples(&whole, &s).mass, vec![1.0]);
    }

    #[test]
    fn single_cell_mass() {
        let g = line(64, 8.0);
        let p = Partition::default_for(&g).unwrap();
        let s = SampleSet::new(1, vec![[1.1, 0.0, 0.0]; 7]);
        let h = Histogram::from_samples(&p, &s);
        assert_eq!(h.mass[1], 1.0);
        assert_eq!(h.sample_count(), Some(7));
    }

    #[test]
    fn field_masses_are_exact_for_linear_density() {
        let g = GridSpec::new(&[16, 8], &[4.0, 2.0]).unwrap();
        let psi = ComplexField::from_fn(&g, |x| Complex64::new((1.0 + (std::f64::consts::PI * x[0] / 2.0).sin().powi(2)).sqrt(), 0.0));
        let p = Partition::new(&g, &[4, 8]).unwrap();
        let h = Histogram::from_field(&p, &psi).unwrap();
        assert!((h.total() - 1.0).abs() < 1e-14);
        // the density has period 2 in x, so cells 0,1 match cells 2,3
        assert!((h.mass[0] - h.mass[2]).abs() < 1e-14);
    }

    #[test]
    fn entropy_examples() {
        let g = line(16, 1.0);
        let p = Partition::new(&g, &[8]).unwrap();
        let a = Histogram::from_masses(&p, vec![0.5, 0.5]).unwrap();
        let b = Histogram::from_masses(&p, vec![0.25, 0.75]).unwrap();
        let s = subquantum_entropy(&a, &b).unwrap().value();
        let oracle = -(0.5 * 2.0f64.ln() + 0.5 * (2.0f64 / 3.0).ln());
        assert!((s - oracle).abs() < 1e-15);
        assert!((s + 0.14384).abs() < 1e-5);
        assert_eq!(subquantum_entropy(&a, &a).unwrap(), Entropy::Finite(0.0));
        let c = Histogram::from_masses(&p, vec![1.0, 0.0]).unwrap();
        assert_eq!(subquantum_entropy(&a, &c).unwrap(), Entropy::NegativeInfinity);
        assert_eq!(subquantum_entropy(&c, &a).unwrap(), Entropy::Finite(-(2.0f64).ln()));
        let other = Partition::new(&g, &[4]).unwrap();
        let d = Histogram::from_masses(&other, vec![0.25; 4]).unwrap();
        assert_eq!(subquantum_entropy(&a, &d), Err(Error::PartitionMismatch));
        assert_eq!(total_variation(&c, &Histogram::from_masses(&p, vec![0.0, 1.0]).unwrap()).unwrap(), 1.0);
    }

    #[test]
    fn table_layout() {
        let g = line(16, 2.0);
        let p = Partition::new(&g, &[8]).unwrap();
        let a = Histogram::from_masses(&p, vec![0.5, 0.5]).unwrap();
        let csv = histogram_table(&a, &a).unwrap().to_csv();
        assert_eq!(csv, "cell_index,c1,p_bar,psi2_bar\n0,0.5,0.5,0.5\n1,1.5,0.5,0.5\n");
    }
}
