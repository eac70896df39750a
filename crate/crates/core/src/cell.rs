use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Upper bound on the dimension; point buffers are sized with this.
pub const MAX_DIM: usize = 3;

/// A diagonal periodicity cell `Q = Π ]0, q_j[`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PeriodicityCell {
    periods: Vec<f64>,
    volume: f64,
}

/// A point split into its representative in the half-open centred cell and
/// the lattice index that was removed.
#[derive(Debug, Clone, PartialEq)]
pub struct FoldedPoint {
    pub representative: Vec<f64>,
    pub lattice_index: Vec<i64>,
    pub dist_to_lattice: f64,
}

impl PeriodicityCell {
    pub fn new(periods: &[f64]) -> Result<Self> {
        let n = periods.len();
        if !(2..=MAX_DIM).contains(&n) {
            return Err(Error::UnsupportedDimension(n));
        }
        for (axis, &value) in periods.iter().enumerate() {
            if !(value.is_finite() && value > 0.0) {
                return Err(Error::InvalidPeriod { axis, value });
            }
        }
        Ok(Self {
            periods: periods.to_vec(),
            volume: periods.iter().product(),
        })
    }

    pub fn unit(n: usize) -> Result<Self> {
        Self::new(&vec![1.0; n])
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.periods.len()
    }

    #[inline]
    pub fn periods(&self) -> &[f64] {
        &self.periods
    }

    #[inline]
    pub fn period(&self, j: usize) -> f64 {
        self.periods[j]
    }

    /// Lebesgue measure of the cell.
    #[inline]
    pub fn volume(&self) -> f64 {
        self.volume
    }

    pub fn min_period(&self) -> f64 {
        self.periods.iter().cloned().fold(f64::INFINITY, f64::min)
    }

    pub fn max_period(&self) -> f64 {
        self.periods.iter().cloned().fold(0.0, f64::max)
    }

    /// Surface measure of the cell boundary.
    pub fn boundary_measure(&self) -> f64 {
        (0..self.dim())
            .map(|j| 2.0 * self.volume / self.periods[j])
            .sum()
    }

    pub(crate) fn check_dim(&self, got: usize) -> Result<()> {
        if got != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got,
            });
        }
        Ok(())
    }

    /// Folds one coordinate into `[-q/2, q/2)`, returning `(rep, z)`.
    #[inline]
    fn fold_axis(&self, x: f64, j: usize) -> (f64, i64) {
        let q = self.periods[j];
        let mut z = (x / q + 0.5).floor();
        let mut r = x - q * z;
        if r >= 0.5 * q {
            r -= q;
            z += 1.0;
        } else if r < -0.5 * q {
            r += q;
            z -= 1.0;
        }
        (r, z as i64)
    }

    pub fn fold(&self, x: &[f64]) -> FoldedPoint {
        let mut representative = Vec::with_capacity(x.len());
        let mut lattice_index = Vec::with_capacity(x.len());
        for (j, &xj) in x.iter().enumerate() {
            let (r, z) = self.fold_axis(xj, j);
            representative.push(r);
            lattice_index.push(z);
        }
        let dist_to_lattice = norm(&representative);
        FoldedPoint {
            representative,
            lattice_index,
            dist_to_lattice,
        }
    }

    /// Allocation-free folding into the centred cell; unused slots are zero.
    #[inline]
    pub fn fold_centered(&self, x: &[f64]) -> [f64; MAX_DIM] {
        let mut out = [0.0; MAX_DIM];
        for (j, &xj) in x.iter().enumerate() {
            out[j] = self.fold_axis(xj, j).0;
        }
        out
    }

    /// Folds into the half-open cell `[0, q)`.
    pub fn fold_into_cell(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .enumerate()
            .map(|(j, &xj)| {
                let q = self.periods[j];
                let mut r = xj - q * (xj / q).floor();
                if r >= q {
                    r -= q;
                }
                if r < 0.0 {
                    r += q;
                }
                r
            })
            .collect()
    }

    /// Distance from `x` to the nearest lattice point.
    pub fn dist_to_lattice(&self, x: &[f64]) -> f64 {
        let f = self.fold_centered(x);
        norm(&f[..x.len()])
    }

    /// `x + q z`.
    pub fn translate(&self, x: &[f64], z: &[i64]) -> Vec<f64> {
        x.iter()
            .zip(z)
            .zip(&self.periods)
            .map(|((&xi, &zi), &q)| xi + q * zi as f64)
            .collect()
    }

    /// All `z` with `‖z‖_∞ ≤ nmax`, grouped by increasing `‖z‖_∞`.
    pub fn lattice_window(&self, nmax: usize) -> Vec<Vec<i64>> {
        let n = self.dim();
        let m = nmax as i64;
        let side = 2 * nmax + 1;
        let mut all: Vec<Vec<i64>> = Vec::with_capacity(side.pow(n as u32));
        let mut z = vec![-m; n];
        loop {
            all.push(z.clone());
            let mut k = 0;
            loop {
                if k == n {
                    all.sort_by_key(|v| v.iter().map(|c| c.abs()).max().unwrap_or(0));
                    return all;
                }
                z[k] += 1;
                if z[k] > m {
                    z[k] = -m;
                    k += 1;
                } else {
                    break;
                }
            }
        }
    }

    /// The vertex index set `{0, 1}^n`.
    pub fn corner_set(&self) -> Vec<Vec<i64>> {
        let n = self.dim();
        (0..(1usize << n))
            .map(|mask| (0..n).map(|j| ((mask >> j) & 1) as i64).collect())
            .collect()
    }
}

pub fn make_cell(periods: &[f64]) -> Result<PeriodicityCell> {
    PeriodicityCell::new(periods)
}

pub fn fold_to_cell(cell: &PeriodicityCell, x: &[f64]) -> FoldedPoint {
    cell.fold(x)
}

pub fn lattice_window(cell: &PeriodicityCell, nmax: usize) -> Vec<Vec<i64>> {
    cell.lattice_window(nmax)
}

pub fn corner_set(cell: &PeriodicityCell) -> Vec<Vec<i64>> {
    cell.corner_set()
}

#[inline]
pub(crate) fn norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

#[inline]
pub(crate) fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

/// Volume of the unit ball in dimension `n`.
pub fn unit_ball_volume(n: usize) -> f64 {
    match n {
        1 => 2.0,
        2 => std::f64::consts::PI,
        3 => 4.0 * std::f64::consts::PI / 3.0,
        _ => f64::NAN,
    }
}

/// Surface measure of the unit sphere in dimension `n`.
pub fn unit_sphere_area(n: usize) -> f64 {
    n as f64 * unit_ball_volume(n)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn volumes() {
        assert_eq!(make_cell(&[1.0, 1.0]).unwrap().volume(), 1.0);
        assert_eq!(make_cell(&[2.0, 3.0]).unwrap().volume(), 6.0);
        assert!(matches!(
            make_cell(&[0.0, 1.0]),
            Err(Error::InvalidPeriod { axis: 0, .. })
        ));
        assert!(matches!(
            make_cell(&[1.0]),
            Err(Error::UnsupportedDimension(1))
        ));
        assert!(make_cell(&[1.0, f64::INFINITY]).is_err());
    }

    #[test]
    fn folding_examples() {
        let c = make_cell(&[1.0, 1.0]).unwrap();
        let f = c.fold(&[0.6, -0.3]);
        assert!((f.representative[0] + 0.4).abs() < 1e-15);
        assert_eq!(f.representative[1], -0.3);
        assert_eq!(f.lattice_index, vec![1, 0]);

        let f = c.fold(&[0.0, 0.0]);
        assert_eq!(f.representative, vec![0.0, 0.0]);
        assert_eq!(f.lattice_index, vec![0, 0]);

        let f = c.fold(&[1.5, 2.5]);
        assert_eq!(f.representative, vec![-0.5, -0.5]);
        assert_eq!(f.lattice_index, vec![2, 3]);
    }

    #[test]
    fn window_sizes_and_order() {
        let c2 = make_cell(&[1.0, 1.0]).unwrap();
        assert_eq!(c2.lattice_window(0), vec![vec![0, 0]]);
        assert_eq!(c2.lattice_window(1).len(), 9);
        let c3 = make_cell(&[1.0, 1.0, 1.0]).unwrap();
        let w = c3.lattice_window(2);
        assert_eq!(w.len(), 125);
        let norms: Vec<i64> = w
            .iter()
            .map(|z| z.iter().map(|c| c.abs()).max().unwrap())
            .collect();
        assert!(norms.windows(2).all(|p| p[0] <= p[1]));
        let mut dedup = w.clone();
        dedup.sort();
        dedup.dedup();
        assert_eq!(dedup.len(), 125);
    }

    #[test]
    fn corners() {
        let c2 = make_cell(&[1.0, 2.0]).unwrap();
        assert_eq!(c2.corner_set().len(), 4);
        let c3 = make_cell(&[1.0, 1.0, 1.0]).unwrap();
        let k = c3.corner_set();
        assert_eq!(k.len(), 8);
        assert!(k.contains(&vec![0, 0, 0]));
    }

    #[test]
    fn fold_into_cell_range() {
        let c = make_cell(&[1.0, 2.0]).unwrap();
        let y = c.fold_into_cell(&[-0.25, 4.5]);
        assert_eq!(y, vec![0.75, 0.5]);
        let y = c.fold_into_cell(&[-1e-18, 0.0]);
        assert!(y[0] >= 0.0 && y[0] < 1.0);
    }
}
