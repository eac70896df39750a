use std::f64::consts::PI;

use super::radial::{yukawa_free_space, yukawa_table};
use super::{image_offsets, image_tail_bound, radial_chain, PeriodicKernel};
use crate::cell::PeriodicityCell;
use crate::error::{Error, Result};
use crate::multi_index::MultiIndex;
use crate::special::bessel_k0;

/// Periodic fundamental solution of `Δ − κ²` by the absolutely convergent
/// image sum `Σ_z S(x + qz)`.
#[derive(Debug, Clone)]
pub struct YukawaPeriodic {
    cell: PeriodicityCell,
    kappa: f64,
    nmax: usize,
    rcut: f64,
    offsets: Vec<[f64; 3]>,
    tail: f64,
}

pub const DEFAULT_YUKAWA_TOLERANCE: f64 = 1e-12;

fn tail_magnitude(n: usize, kappa: f64) -> impl Fn(f64) -> f64 {
    move |r: f64| {
        if n == 3 {
            (-kappa * r).exp() / (4.0 * PI * r)
        } else {
            bessel_k0(kappa * r) / (2.0 * PI)
        }
    }
}

impl YukawaPeriodic {
    pub fn new(cell: &PeriodicityCell, kappa: f64, nmax: usize) -> Result<Self> {
        Self::with_tolerance(cell, kappa, nmax, DEFAULT_YUKAWA_TOLERANCE)
    }

    /// Smallest window radius whose omitted-image bound is below `tolerance`.
    pub fn minimal_nmax(cell: &PeriodicityCell, kappa: f64, tolerance: f64) -> usize {
        let mag = tail_magnitude(cell.dim(), kappa);
        (1..100_000)
            .find(|&m| image_tail_bound(cell, m, f64::INFINITY, &mag) <= tolerance)
            .unwrap_or(100_000)
    }

    pub fn with_tolerance(
        cell: &PeriodicityCell,
        kappa: f64,
        nmax: usize,
        tolerance: f64,
    ) -> Result<Self> {
        let n = cell.dim();
        if !(kappa.is_finite() && kappa > 0.0) {
            return Err(Error::InvalidParameter {
                name: "kappa",
                reason: format!("must be positive, got {kappa}"),
            });
        }
        if nmax < 1 {
            return Err(Error::InvalidParameter {
                name: "nmax",
                reason: "must be at least 1".into(),
            });
        }
        let diag = cell.periods().iter().map(|q| q * q).sum::<f64>().sqrt();
        if n == 2 && !(1e-6..=50.0).contains(&(kappa * diag)) {
            return Err(Error::OutOfRange(format!(
                "kappa * cell diameter = {} outside [1e-6, 50] supported by the K0 evaluator",
                kappa * diag
            )));
        }
        let mag = tail_magnitude(n, kappa);
        let window_tail = image_tail_bound(cell, nmax, f64::INFINITY, &mag);
        if window_tail > tolerance {
            let need = Self::minimal_nmax(cell, kappa, tolerance);
            return Err(Error::TruncationTooLarge {
                tail: window_tail,
                tolerance,
                suggestion: format!("use nmax >= {need}"),
            });
        }
        let window_radius = (nmax as f64 + 0.5) * diag;
        // The radial cut may add 1% of the tolerance, or of the window tail
        // when no tolerance is imposed.
        let slack = if tolerance.is_finite() {
            tolerance
        } else {
            window_tail
        };
        let target = window_tail + 1e-2 * slack;
        let step = 0.05 * cell.min_period();
        let mut rcut = 0.5 * diag;
        while rcut < window_radius && image_tail_bound(cell, nmax, rcut, &mag) > target {
            rcut += step;
        }
        let rcut = rcut.min(window_radius);
        Ok(Self {
            cell: cell.clone(),
            kappa,
            nmax,
            rcut,
            offsets: image_offsets(cell, nmax, rcut),
            tail: image_tail_bound(cell, nmax, rcut, &mag),
        })
    }

    pub fn kappa(&self) -> f64 {
        self.kappa
    }

    pub fn nmax(&self) -> usize {
        self.nmax
    }

    /// Number of images actually summed per evaluation (upper bound).
    pub fn image_count(&self) -> usize {
        self.offsets.len()
    }
}

impl PeriodicKernel for YukawaPeriodic {
    fn name(&self) -> String {
        format!("yukawa(kappa={}, nmax={})", self.kappa, self.nmax)
    }

    fn cell(&self) -> &PeriodicityCell {
        &self.cell
    }

    fn lambda(&self) -> f64 {
        if self.cell.dim() == 3 {
            1.0
        } else {
            0.5
        }
    }

    fn truncation_error(&self) -> f64 {
        self.tail
    }

    fn value_centered(&self, x: &[f64]) -> f64 {
        let n = x.len();
        let r2cut = self.rcut * self.rcut;
        let mut s = 0.0;
        for off in &self.offsets {
            let mut u = 0.0;
            for j in 0..n {
                let y = x[j] + off[j];
                u += y * y;
            }
            if u <= r2cut {
                s += yukawa_free_space(n, self.kappa, u.sqrt());
            }
        }
        s
    }

    fn derivative_centered(&self, x: &[f64], beta: &MultiIndex) -> f64 {
        let n = x.len();
        let axes = beta.axes();
        let r2cut = self.rcut * self.rcut;
        let mut s = 0.0;
        let mut y = [0.0; 3];
        for off in &self.offsets {
            let mut u = 0.0;
            for j in 0..n {
                y[j] = x[j] + off[j];
                u += y[j] * y[j];
            }
            if u <= r2cut {
                let t = yukawa_table(n, self.kappa, u, axes.len());
                s += radial_chain(&axes, &t, &y[..n]);
            }
        }
        s
    }
}
