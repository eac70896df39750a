use std::f64::consts::PI;

use num_complex::Complex64;

use super::PeriodicKernel;
use crate::cell::PeriodicityCell;
use crate::error::{Error, Result};
use crate::multi_index::MultiIndex;
use crate::symbol::EllipticOperator;

/// Damped Fourier series for the periodic fundamental solution,
///
/// `F_σ(x) = Σ_{z ∉ Z(P), ‖z‖_∞ ≤ zmax} e^{−σ|k|²} / (|Q| P(2πik)) · e^{2πik·x}`, `k = q⁻¹z`.
///
/// For operators of the form `aΔ + c` with real `a`, `c` the damping bias is
/// removed with the heat-semigroup identity
/// `S_q ≈ e^{νσ} F_σ + σ/(4π²a|Q|) Σ_{z ∈ Z(P)} e^{2πik·x}`, `ν = c/(4π²a)`,
/// which is exact up to the heat kernel `O(σ^{-n/2} e^{−π² d²/σ})` at
/// distance `d` from the lattice. Other operators get the plain damped sum.
#[derive(Debug, Clone)]
pub struct FourierOracle {
    cell: PeriodicityCell,
    zmax: usize,
    sigma: f64,
    terms: Vec<Term>,
    zero_terms: Vec<Term>,
    scale: f64,
    debiased: bool,
    dropped: f64,
}

#[derive(Debug, Clone)]
struct Term {
    z: [i32; 3],
    k: [f64; 3],
    coef: Complex64,
}

/// Terms whose damping factor is below this are omitted.
const DAMPING_FLOOR: f64 = 1e-18;

impl FourierOracle {
    pub fn new(
        op: &EllipticOperator,
        cell: &PeriodicityCell,
        zmax: usize,
        sigma: f64,
    ) -> Result<Self> {
        cell.check_dim(op.dim())?;
        if !(sigma.is_finite() && sigma > 0.0) {
            return Err(Error::InvalidParameter {
                name: "sigma",
                reason: format!("must be positive, got {sigma}"),
            });
        }
        let zs = op.frequency_zero_set(cell, zmax)?;
        if !zs.certified_complete {
            return Err(Error::UncertifiedZeroSet { radius: zmax });
        }
        let n = cell.dim();
        let vol = cell.volume();
        let mut terms = Vec::new();
        let mut zero_terms = Vec::new();
        let mut dropped = 0.0;
        for z in cell.lattice_window(zmax) {
            let mut k = [0.0; 3];
            let mut zz = [0i32; 3];
            for j in 0..n {
                k[j] = z[j] as f64 / cell.period(j);
                zz[j] = z[j] as i32;
            }
            if zs.members.contains(&z) {
                zero_terms.push(Term {
                    z: zz,
                    k,
                    coef: Complex64::new(1.0, 0.0),
                });
                continue;
            }
            let k2: f64 = k.iter().map(|v| v * v).sum();
            let damp = (-sigma * k2).exp();
            let coef = damp / (vol * op.symbol(cell, &z));
            if damp < DAMPING_FLOOR {
                dropped += coef.norm();
                continue;
            }
            terms.push(Term { z: zz, k, coef });
        }
        let (scale, debiased, zero_coef) = match op.isotropic_form() {
            Some((a, c)) => {
                let nu = c / (4.0 * PI * PI * a);
                ((nu * sigma).exp(), true, sigma / (4.0 * PI * PI * a * vol))
            }
            None => (1.0, false, 0.0),
        };
        for t in &mut zero_terms {
            t.coef = Complex64::new(if debiased { zero_coef } else { 0.0 }, 0.0);
        }
        Ok(Self {
            cell: cell.clone(),
            zmax,
            sigma,
            terms,
            zero_terms,
            scale,
            debiased,
            dropped,
        })
    }

    /// `σ = 36 q_min² / zmax²`, so the damping reaches `e^{−36}` at the window edge.
    pub fn default_sigma(cell: &PeriodicityCell, zmax: usize) -> f64 {
        let q = cell.min_period();
        36.0 * q * q / (zmax as f64 * zmax as f64)
    }

    pub fn with_default_sigma(
        op: &EllipticOperator,
        cell: &PeriodicityCell,
        zmax: usize,
    ) -> Result<Self> {
        Self::new(op, cell, zmax, Self::default_sigma(cell, zmax))
    }

    pub fn zmax(&self) -> usize {
        self.zmax
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn is_debiased(&self) -> bool {
        self.debiased
    }

    pub fn term_count(&self) -> usize {
        self.terms.len()
    }

    /// `∂^β` of the (debiased) series as a complex number.
    pub fn derivative_complex(&self, x: &[f64], beta: &MultiIndex) -> Complex64 {
        let n = x.len();
        let m = self.zmax as i64;
        let mut phases: [Vec<Complex64>; 3] = [Vec::new(), Vec::new(), Vec::new()];
        for j in 0..n {
            let t = 2.0 * PI * x[j] / self.cell.period(j);
            phases[j] = (-m..=m)
                .map(|i| Complex64::from_polar(1.0, i as f64 * t))
                .collect();
        }
        let order = beta.order() as i32;
        let sum = |terms: &[Term]| -> Complex64 {
            let mut s = Complex64::new(0.0, 0.0);
            for t in terms {
                let mut e = t.coef;
                for j in 0..n {
                    e *= phases[j][(t.z[j] as i64 + m) as usize];
                }
                if order > 0 {
                    e *= beta.monomial(&t.k[..n]);
                }
                s += e;
            }
            s
        };
        let i_pow = Complex64::new(0.0, 2.0 * PI).powi(order);
        (sum(&self.terms) * self.scale + sum(&self.zero_terms)) * i_pow
    }

    pub fn value_complex(&self, x: &[f64]) -> Complex64 {
        let f = self.cell.fold_centered(x);
        self.derivative_complex(&f[..x.len()], &MultiIndex::zero(x.len()))
    }
}

impl PeriodicKernel for FourierOracle {
    fn name(&self) -> String {
        format!("fourier_oracle(zmax={}, sigma={})", self.zmax, self.sigma)
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

    /// Magnitude of the terms dropped below the damping floor; the damping
    /// bias itself is not included.
    fn truncation_error(&self) -> f64 {
        self.dropped
    }

    fn value_centered(&self, x: &[f64]) -> f64 {
        self.derivative_complex(x, &MultiIndex::zero(x.len())).re
    }

    fn derivative_centered(&self, x: &[f64], beta: &MultiIndex) -> f64 {
        self.derivative_complex(x, beta).re
    }
}
