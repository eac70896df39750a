//! Second-order constant-coefficient operators `P(D) = Σ a_α D^α` with
//! `D = ∂`, evaluated on exponentials `E_ξ(x) = e^{ξ·x}`.

use std::f64::consts::PI;

use crate::cell::PeriodicityCell;
use crate::error::{Error, Result};
use crate::multi_index::MultiIndex;
pub use num_complex::Complex64;

/// Ellipticity threshold on `min |Re Σ_{|α|=2} a_α ξ^α|` over the unit sphere.
pub const ELLIPTICITY_THRESHOLD: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub struct EllipticOperator {
    dim: usize,
    coeffs: Vec<(MultiIndex, Complex64)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FrequencyZeroSet {
    pub members: Vec<Vec<i64>>,
    pub search_bound: usize,
    pub certified_complete: bool,
}

impl EllipticOperator {
    /// Builds an operator from `(α, a_α)` pairs; repeated indices are summed.
    pub fn new(dim: usize, coeffs: &[(MultiIndex, Complex64)]) -> Result<Self> {
        if !(2..=3).contains(&dim) {
            return Err(Error::UnsupportedDimension(dim));
        }
        let mut merged: Vec<(MultiIndex, Complex64)> = Vec::new();
        for &(alpha, a) in coeffs {
            if alpha.dim() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    got: alpha.dim(),
                });
            }
            if alpha.order() > 2 {
                return Err(Error::InvalidParameter {
                    name: "coeffs",
                    reason: format!("multi-index {alpha} has order above 2"),
                });
            }
            if !(a.re.is_finite() && a.im.is_finite()) {
                return Err(Error::InvalidParameter {
                    name: "coeffs",
                    reason: format!("coefficient of {alpha} is not finite"),
                });
            }
            match merged.iter_mut().find(|(b, _)| *b == alpha) {
                Some(entry) => entry.1 += a,
                None => merged.push((alpha, a)),
            }
        }
        merged.sort_by_key(|(alpha, _)| *alpha);
        if !merged
            .iter()
            .any(|(alpha, a)| alpha.order() == 2 && a.norm() > 0.0)
        {
            return Err(Error::InvalidParameter {
                name: "coeffs",
                reason: "no nonzero second-order coefficient".into(),
            });
        }
        Ok(Self {
            dim,
            coeffs: merged,
        })
    }

    pub fn laplace(dim: usize) -> Result<Self> {
        let c: Vec<_> = (0..dim)
            .map(|j| {
                (
                    MultiIndex::unit(dim, j).add(&MultiIndex::unit(dim, j)),
                    Complex64::new(1.0, 0.0),
                )
            })
            .collect();
        Self::new(dim, &c)
    }

    /// `Δ − κ²`.
    pub fn modified_helmholtz(dim: usize, kappa: f64) -> Result<Self> {
        if !(kappa.is_finite() && kappa > 0.0) {
            return Err(Error::InvalidParameter {
                name: "kappa",
                reason: format!("must be positive, got {kappa}"),
            });
        }
        let mut c: Vec<_> = (0..dim)
            .map(|j| {
                (
                    MultiIndex::unit(dim, j).add(&MultiIndex::unit(dim, j)),
                    Complex64::new(1.0, 0.0),
                )
            })
            .collect();
        c.push((MultiIndex::zero(dim), Complex64::new(-kappa * kappa, 0.0)));
        Self::new(dim, &c)
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn coeffs(&self) -> &[(MultiIndex, Complex64)] {
        &self.coeffs
    }

    pub fn coefficient(&self, alpha: &MultiIndex) -> Complex64 {
        self.coeffs
            .iter()
            .find(|(b, _)| b == alpha)
            .map(|(_, a)| *a)
            .unwrap_or_default()
    }

    pub fn has_real_coefficients(&self) -> bool {
        self.coeffs.iter().all(|(_, a)| a.im == 0.0)
    }

    /// `Σ |a_α|`.
    pub fn coeff_norm(&self) -> f64 {
        self.coeffs.iter().map(|(_, a)| a.norm()).sum()
    }

    /// `Σ_α a_α ξ^α` for a complex vector `ξ`.
    pub fn eval(&self, xi: &[Complex64]) -> Complex64 {
        let mut s = Complex64::new(0.0, 0.0);
        for (alpha, a) in &self.coeffs {
            let mut m = Complex64::new(1.0, 0.0);
            for (j, &x) in xi.iter().enumerate() {
                for _ in 0..alpha.get(j) {
                    m *= x;
                }
            }
            s += a * m;
        }
        s
    }

    /// `P(2πi q⁻¹ z)`.
    pub fn symbol(&self, cell: &PeriodicityCell, z: &[i64]) -> Complex64 {
        let xi: Vec<Complex64> = z
            .iter()
            .zip(cell.periods())
            .map(|(&zj, &q)| Complex64::new(0.0, 2.0 * PI * zj as f64 / q))
            .collect();
        self.eval(&xi)
    }

    /// `Re Σ_{|α|=2} a_α ξ^α` for real `ξ`.
    pub fn principal_real(&self, xi: &[f64]) -> f64 {
        self.coeffs
            .iter()
            .filter(|(alpha, _)| alpha.order() == 2)
            .map(|(alpha, a)| a.re * alpha.monomial(xi))
            .sum()
    }

    /// If `P = aΔ + c` with real `a`, `c` and no other terms, returns `(a, c)`.
    pub fn isotropic_form(&self) -> Option<(f64, f64)> {
        if !self.has_real_coefficients() {
            return None;
        }
        let n = self.dim;
        let a = self
            .coefficient(&MultiIndex::unit(n, 0).add(&MultiIndex::unit(n, 0)))
            .re;
        for (alpha, coef) in &self.coeffs {
            let ok = match alpha.order() {
                0 => true,
                2 => alpha.orders().contains(&2) && coef.re == a,
                _ => coef.norm() == 0.0,
            };
            if !ok {
                return None;
            }
        }
        let diag = (0..n)
            .filter(|&j| {
                let alpha = MultiIndex::unit(n, j).add(&MultiIndex::unit(n, j));
                self.coefficient(&alpha).re == a
            })
            .count();
        if diag != n || a == 0.0 {
            return None;
        }
        Some((a, self.coefficient(&MultiIndex::zero(n)).re))
    }

    /// Samples `|Re Σ_{|α|=2} a_α ξ^α|` over the unit sphere.
    ///
    /// Returns `(elliptic, minimum)`. A sign change between samples is
    /// located by bisection along the connecting arc; in that case the
    /// minimum is the residual at the bracketed zero.
    pub fn check_strong_ellipticity(&self, nsamples: usize) -> (bool, f64) {
        let nsamples = nsamples.max(100);
        let dirs = sphere_samples(self.dim, nsamples);
        let vals: Vec<f64> = dirs.iter().map(|d| self.principal_real(d)).collect();

        let pos = vals.iter().position(|&v| v > 0.0);
        let neg = vals.iter().position(|&v| v < 0.0);
        if let (Some(ip), Some(ineg)) = (pos, neg) {
            let (mut a, mut b) = (dirs[ip].clone(), dirs[ineg].clone());
            for _ in 0..200 {
                let m = normalized(&a.iter().zip(&b).map(|(x, y)| x + y).collect::<Vec<_>>());
                if self.principal_real(&m) > 0.0 {
                    a = m;
                } else {
                    b = m;
                }
            }
            let min = self
                .principal_real(&a)
                .abs()
                .min(self.principal_real(&b).abs());
            return (false, min);
        }
        if vals.iter().any(|&v| v == 0.0) {
            return (false, 0.0);
        }

        // Local refinement around the smallest sample.
        let (imin, _) = vals
            .iter()
            .enumerate()
            .min_by(|a, b| a.1.abs().total_cmp(&b.1.abs()))
            .expect("non-empty sample");
        let mut best = dirs[imin].clone();
        let mut best_val = vals[imin].abs();
        let mut step = 2.0 * PI / (nsamples as f64).sqrt();
        for _ in 0..60 {
            let mut improved = false;
            for j in 0..self.dim {
                for sgn in [-1.0, 1.0] {
                    let mut cand = best.clone();
                    cand[j] += sgn * step;
                    let cand = normalized(&cand);
                    let v = self.principal_real(&cand).abs();
                    if v < best_val {
                        best = cand;
                        best_val = v;
                        improved = true;
                    }
                }
            }
            if !improved {
                step *= 0.5;
            }
        }
        (best_val > ELLIPTICITY_THRESHOLD, best_val)
    }

    /// Scans `‖z‖_∞ ≤ nmax` for zeros of `P(2πi q⁻¹ z)` and certifies that
    /// no zero lies outside the scanned window.
    pub fn frequency_zero_set(
        &self,
        cell: &PeriodicityCell,
        nmax: usize,
    ) -> Result<FrequencyZeroSet> {
        cell.check_dim(self.dim)?;
        let (elliptic, c) = self.check_strong_ellipticity(2000);
        if !elliptic {
            return Err(Error::NotElliptic { min_abs: c });
        }
        let tol = 1e-12 * (1.0 + self.coeff_norm());
        let members: Vec<Vec<i64>> = cell
            .lattice_window(nmax)
            .into_iter()
            .filter(|z| self.symbol(cell, z).norm() <= tol)
            .collect();
        Ok(FrequencyZeroSet {
            members,
            search_bound: nmax,
            certified_complete: self.coercive_beyond(cell, nmax, c),
        })
    }

    /// `c r² − C r − |a_0| > 0` for every `r ≥ 2π (nmax+1) / q_max`, with `c`
    /// the ellipticity constant and `C = Σ_{|α|=1} |a_α|`.
    fn coercive_beyond(&self, cell: &PeriodicityCell, nmax: usize, c: f64) -> bool {
        let big_c: f64 = self
            .coeffs
            .iter()
            .filter(|(alpha, _)| alpha.order() == 1)
            .map(|(_, a)| a.norm())
            .sum();
        let a0 = self.coefficient(&MultiIndex::zero(self.dim)).norm();
        let r = 2.0 * PI * (nmax as f64 + 1.0) / cell.max_period();
        r >= big_c / (2.0 * c) && c * r * r - big_c * r - a0 > 0.0
    }
}

fn normalized(v: &[f64]) -> Vec<f64> {
    let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    v.iter().map(|x| x / n).collect()
}

/// Quasi-uniform directions on the unit sphere (half-circle for `n = 2`,
/// Fibonacci lattice for `n = 3`; the principal symbol is even in `ξ`).
pub(crate) fn sphere_samples(n: usize, count: usize) -> Vec<Vec<f64>> {
    match n {
        2 => (0..count)
            .map(|i| {
                let t = PI * i as f64 / count as f64;
                vec![t.cos(), t.sin()]
            })
            .collect(),
        _ => {
            let golden = PI * (3.0 - 5f64.sqrt());
            (0..count)
                .map(|i| {
                    let z = 1.0 - 2.0 * (i as f64 + 0.5) / count as f64;
                    let r = (1.0 - z * z).sqrt();
                    let phi = golden * i as f64;
                    vec![r * phi.cos(), r * phi.sin(), z]
                })
                .collect()
        }
    }
}

pub fn symbol(op: &EllipticOperator, cell: &PeriodicityCell, z: &[i64]) -> Complex64 {
    op.symbol(cell, z)
}

pub fn check_strong_ellipticity(op: &EllipticOperator, nsamples: usize) -> (bool, f64) {
    op.check_strong_ellipticity(nsamples)
}

pub fn frequency_zero_set(
    op: &EllipticOperator,
    cell: &PeriodicityCell,
    nmax: usize,
) -> Result<FrequencyZeroSet> {
    op.frequency_zero_set(cell, nmax)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    #[test]
    fn laplace_symbol_values() {
        let cell = PeriodicityCell::unit(2).unwrap();
        let op = EllipticOperator::laplace(2).unwrap();
        let s = op.symbol(&cell, &[1, 0]);
        assert!((s.re + 4.0 * PI * PI).abs() < 1e-12 && s.im == 0.0);
        assert_eq!(op.symbol(&cell, &[0, 0]), c(0.0));
        let mh = EllipticOperator::modified_helmholtz(2, 1.0).unwrap();
        assert_eq!(mh.symbol(&cell, &[0, 0]), c(-1.0));
    }

    #[test]
    fn ellipticity_examples() {
        let (ok, m) = EllipticOperator::laplace(3)
            .unwrap()
            .check_strong_ellipticity(500);
        assert!(ok);
        assert!((m - 1.0).abs() < 1e-12);
        let (ok, m) = EllipticOperator::modified_helmholtz(2, 3.0)
            .unwrap()
            .check_strong_ellipticity(100);
        assert!(ok && (m - 1.0).abs() < 1e-12);
        let hyper = EllipticOperator::new(
            2,
            &[
                (MultiIndex::new(&[2, 0]), c(1.0)),
                (MultiIndex::new(&[0, 2]), c(-1.0)),
            ],
        )
        .unwrap();
        let (ok, m) = hyper.check_strong_ellipticity(100);
        assert!(!ok);
        assert!(m < 1e-12);
    }

    #[test]
    fn anisotropic_minimum() {
        let op = EllipticOperator::new(
            3,
            &[
                (MultiIndex::new(&[2, 0, 0]), c(1.0)),
                (MultiIndex::new(&[0, 2, 0]), c(2.0)),
                (MultiIndex::new(&[0, 0, 2]), c(0.25)),
            ],
        )
        .unwrap();
        let (ok, m) = op.check_strong_ellipticity(400);
        assert!(ok);
        assert!((m - 0.25).abs() < 1e-8, "{m}");
    }

    #[test]
    fn zero_sets() {
        let cell = PeriodicityCell::unit(2).unwrap();
        let z = EllipticOperator::laplace(2)
            .unwrap()
            .frequency_zero_set(&cell, 8)
            .unwrap();
        assert_eq!(z.members, vec![vec![0, 0]]);
        assert!(z.certified_complete);
        let z = EllipticOperator::modified_helmholtz(2, 1.0)
            .unwrap()
            .frequency_zero_set(&cell, 8)
            .unwrap();
        assert!(z.members.is_empty() && z.certified_complete);
        // Δ + 8π² has zeros at |z|² = 2, i.e. (±1, ±1), beyond the nmax = 0 window.
        let op = EllipticOperator::new(
            2,
            &[
                (MultiIndex::new(&[2, 0]), c(1.0)),
                (MultiIndex::new(&[0, 2]), c(1.0)),
                (MultiIndex::zero(2), c(8.0 * PI * PI)),
            ],
        )
        .unwrap();
        let z0 = op.frequency_zero_set(&cell, 0).unwrap();
        assert!(!z0.certified_complete);
        let z2 = op.frequency_zero_set(&cell, 2).unwrap();
        assert!(z2.certified_complete);
        assert_eq!(z2.members.len(), 4);
    }

    #[test]
    fn rejects_non_elliptic() {
        let cell = PeriodicityCell::unit(2).unwrap();
        let hyper = EllipticOperator::new(
            2,
            &[
                (MultiIndex::new(&[2, 0]), c(1.0)),
                (MultiIndex::new(&[0, 2]), c(-1.0)),
            ],
        )
        .unwrap();
        assert!(matches!(
            hyper.frequency_zero_set(&cell, 4),
            Err(Error::NotElliptic { .. })
        ));
    }

    #[test]
    fn isotropic_detection() {
        assert_eq!(
            EllipticOperator::laplace(3).unwrap().isotropic_form(),
            Some((1.0, 0.0))
        );
        assert_eq!(
            EllipticOperator::modified_helmholtz(2, 2.0)
                .unwrap()
                .isotropic_form(),
            Some((1.0, -4.0))
        );
        let op = EllipticOperator::new(
            2,
            &[
                (MultiIndex::new(&[2, 0]), c(1.0)),
                (MultiIndex::new(&[0, 2]), c(2.0)),
            ],
        )
        .unwrap();
        assert_eq!(op.isotropic_form(), None);
    }
}
