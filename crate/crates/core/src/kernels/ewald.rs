use std::f64::consts::PI;

use num_complex::Complex64;

use super::radial::ewald_real_table;
use super::{image_offsets, image_tail_bound, radial_chain, PeriodicKernel};
use crate::cell::PeriodicityCell;
use crate::error::{Error, Result};
use crate::multi_index::MultiIndex;
use crate::special::{erfc, exp_integral_e1};

/// Zero-mean periodic fundamental solution of the Laplacian,
/// `ΔS_q = Σ_z δ_{qz} − 1/|Q|`, by Ewald splitting with parameter `α`:
///
/// `S_q(x) = Σ_z F_α(x + qz) + Σ_{k≠0} ĝ_α(k) cos(2πk·x) + 1/(4α²|Q|)`
///
/// with `F_α(r) = −erfc(αr)/(4πr)` (n = 3) or `−E1(α²r²)/(4π)` (n = 2),
/// `ĝ_α(k) = −e^{−π²|k|²/α²} / (4π²|k|²|Q|)` and `k = q⁻¹z`.
#[derive(Debug, Clone)]
pub struct LaplaceEwald {
    cell: PeriodicityCell,
    alpha: f64,
    nreal: usize,
    nrecip: usize,
    rcut: f64,
    kcut: f64,
    real_offsets: Vec<[f64; 3]>,
    recip: Vec<RecipTerm>,
    max_index: [usize; 3],
    constant: f64,
    tail: f64,
}

#[derive(Debug, Clone)]
struct RecipTerm {
    z: [i32; 3],
    k: [f64; 3],
    coef: f64,
}

/// Required bound on the omitted parts of both sums.
pub const EWALD_WINDOW_TOLERANCE: f64 = 1e-12;

fn real_magnitude(n: usize, alpha: f64) -> impl Fn(f64) -> f64 {
    move |r: f64| {
        if n == 3 {
            erfc(alpha * r) / (4.0 * PI * r)
        } else {
            exp_integral_e1(alpha * alpha * r * r) / (4.0 * PI)
        }
    }
}

/// Bound on omitted reciprocal terms (both `±k`): shells beyond `nrecip`, and
/// window terms with `|k| > kcut`.
fn recip_tail_bound(cell: &PeriodicityCell, alpha: f64, nrecip: usize, kcut: f64) -> f64 {
    let n = cell.dim() as i32;
    let qmax = cell.max_period();
    let kdiag = cell
        .periods()
        .iter()
        .map(|q| 1.0 / (q * q))
        .sum::<f64>()
        .sqrt();
    let g = |k: f64| {
        (-PI * PI * k * k / (alpha * alpha)).exp() / (4.0 * PI * PI * k * k * cell.volume())
    };
    let mut total = 0.0;
    let mut m = 1usize;
    loop {
        let mf = m as f64;
        let count = (2.0 * mf + 1.0).powi(n) - (2.0 * mf - 1.0).powi(n);
        let kmin = mf / qmax;
        let term = if m > nrecip {
            count * g(kmin)
        } else if mf * kdiag > kcut {
            count * g(kmin.max(kcut))
        } else {
            0.0
        };
        total += term;
        if m > nrecip && (term <= 1e-30 * total.max(1e-300) || term == 0.0) {
            break;
        }
        if m > 100_000 {
            return f64::INFINITY;
        }
        m += 1;
    }
    total
}

impl LaplaceEwald {
    pub fn new(cell: &PeriodicityCell, eta: f64, nreal: usize, nrecip: usize) -> Result<Self> {
        let n = cell.dim();
        if !(eta.is_finite() && eta > 0.0) {
            return Err(Error::InvalidParameter {
                name: "eta",
                reason: format!("must be positive, got {eta}"),
            });
        }
        let mag = real_magnitude(n, eta);
        let real_window = image_tail_bound(cell, nreal, f64::INFINITY, &mag);
        let recip_window = recip_tail_bound(cell, eta, nrecip, f64::INFINITY);
        if real_window > EWALD_WINDOW_TOLERANCE || recip_window > EWALD_WINDOW_TOLERANCE {
            let (nr, nk) = Self::minimal_radii(cell, eta, EWALD_WINDOW_TOLERANCE);
            return Err(Error::TruncationTooLarge {
                tail: real_window + recip_window,
                tolerance: EWALD_WINDOW_TOLERANCE,
                suggestion: format!("use nreal >= {nr} and nrecip >= {nk} for eta = {eta}"),
            });
        }

        let diag = cell.periods().iter().map(|q| q * q).sum::<f64>().sqrt();
        let step = 0.02 * cell.min_period();
        let target = real_window + 1e-16;
        let window_radius = (nreal as f64 + 0.5) * diag;
        let mut rcut = 0.5 * diag;
        while rcut < window_radius && image_tail_bound(cell, nreal, rcut, &mag) > target {
            rcut += step;
        }
        let rcut = rcut.min(window_radius);

        let kdiag = cell
            .periods()
            .iter()
            .map(|q| 1.0 / (q * q))
            .sum::<f64>()
            .sqrt();
        let kstep = 0.02 / cell.max_period();
        let ktarget = recip_window + 1e-16;
        let kwindow = nrecip as f64 * kdiag;
        let mut kcut = kstep;
        while kcut < kwindow && recip_tail_bound(cell, eta, nrecip, kcut) > ktarget {
            kcut += kstep;
        }
        let kcut = kcut.min(kwindow);

        let vol = cell.volume();
        let mut recip = Vec::new();
        let mut max_index = [0usize; 3];
        for z in cell.lattice_window(nrecip) {
            // Half space: first nonzero component positive.
            match z.iter().find(|&&c| c != 0) {
                Some(&c) if c > 0 => {}
                _ => continue,
            }
            let mut k = [0.0; 3];
            let mut zz = [0i32; 3];
            for j in 0..n {
                k[j] = z[j] as f64 / cell.period(j);
                zz[j] = z[j] as i32;
            }
            let k2: f64 = k.iter().map(|v| v * v).sum();
            if k2.sqrt() > kcut {
                continue;
            }
            for j in 0..n {
                max_index[j] = max_index[j].max(z[j].unsigned_abs() as usize);
            }
            let coef = -2.0 * (-PI * PI * k2 / (eta * eta)).exp() / (4.0 * PI * PI * k2 * vol);
            recip.push(RecipTerm { z: zz, k, coef });
        }

        let tail =
            image_tail_bound(cell, nreal, rcut, &mag) + recip_tail_bound(cell, eta, nrecip, kcut);
        Ok(Self {
            cell: cell.clone(),
            alpha: eta,
            nreal,
            nrecip,
            rcut,
            kcut,
            real_offsets: image_offsets(cell, nreal, rcut),
            recip,
            max_index,
            constant: 1.0 / (4.0 * eta * eta * vol),
            tail,
        })
    }

    /// A splitting parameter balancing the two sums, and radii meeting the
    /// window tolerance.
    pub fn auto(cell: &PeriodicityCell) -> Result<Self> {
        let eta = Self::default_eta(cell);
        let (nr, nk) = Self::minimal_radii(cell, eta, 1e-16);
        Self::new(cell, eta, nr, nk)
    }

    pub fn default_eta(cell: &PeriodicityCell) -> f64 {
        2.6 / cell.volume().powf(1.0 / cell.dim() as f64)
    }

    /// Smallest `(nreal, nrecip)` whose omitted shells are below `tolerance`.
    pub fn minimal_radii(cell: &PeriodicityCell, eta: f64, tolerance: f64) -> (usize, usize) {
        let mag = real_magnitude(cell.dim(), eta);
        let nr = (1..10_000)
            .find(|&m| image_tail_bound(cell, m, f64::INFINITY, &mag) <= tolerance)
            .unwrap_or(10_000);
        let nk = (1..10_000)
            .find(|&m| recip_tail_bound(cell, eta, m, f64::INFINITY) <= tolerance)
            .unwrap_or(10_000);
        (nr, nk)
    }

    pub fn eta(&self) -> f64 {
        self.alpha
    }

    pub fn radii(&self) -> (usize, usize) {
        (self.nreal, self.nrecip)
    }

    pub fn cutoffs(&self) -> (f64, f64) {
        (self.rcut, self.kcut)
    }

    pub fn term_counts(&self) -> (usize, usize) {
        (self.real_offsets.len(), self.recip.len())
    }

    fn real_part(&self, x: &[f64], axes: &[usize]) -> f64 {
        let n = x.len();
        let r2cut = self.rcut * self.rcut;
        let mut s = 0.0;
        let mut y = [0.0; 3];
        for off in &self.real_offsets {
            let mut u = 0.0;
            for j in 0..n {
                y[j] = x[j] + off[j];
                u += y[j] * y[j];
            }
            if u <= r2cut {
                let t = ewald_real_table(n, self.alpha, u, axes.len());
                s += radial_chain(axes, &t, &y[..n]);
            }
        }
        s
    }

    /// `Σ coef · (2π)^m Π k^β · Re(i^m e^{2πik·x})`, `m = |β|`.
    fn recip_part(&self, x: &[f64], beta: &MultiIndex) -> f64 {
        let n = x.len();
        let mut phases: [Vec<Complex64>; 3] = [Vec::new(), Vec::new(), Vec::new()];
        for j in 0..n {
            let mmax = self.max_index[j] as i64;
            let t = 2.0 * PI * x[j] / self.cell.period(j);
            phases[j] = (-mmax..=mmax)
                .map(|m| Complex64::from_polar(1.0, m as f64 * t))
                .collect();
        }
        let order = beta.order();
        let mut s = 0.0;
        for term in &self.recip {
            let mut e = Complex64::new(1.0, 0.0);
            for j in 0..n {
                e *= phases[j][(term.z[j] + self.max_index[j] as i32) as usize];
            }
            let part = match order % 4 {
                0 => e.re,
                1 => -e.im,
                2 => -e.re,
                _ => e.im,
            };
            let mono = if order == 0 {
                1.0
            } else {
                beta.monomial(&term.k[..n])
            };
            s += term.coef * mono * part;
        }
        s * (2.0 * PI).powi(order as i32)
    }
}

impl PeriodicKernel for LaplaceEwald {
    fn name(&self) -> String {
        format!(
            "laplace_ewald(eta={}, nreal={}, nrecip={})",
            self.alpha, self.nreal, self.nrecip
        )
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
        let zero = MultiIndex::zero(x.len());
        self.real_part(x, &[]) + self.recip_part(x, &zero) + self.constant
    }

    fn derivative_centered(&self, x: &[f64], beta: &MultiIndex) -> f64 {
        if beta.is_zero() {
            return self.value_centered(x);
        }
        self.real_part(x, &beta.axes()) + self.recip_part(x, beta)
    }

    /// All components in one pass over both sums.
    fn gradient_centered(&self, x: &[f64], out: &mut [f64]) {
        let n = x.len();
        out.fill(0.0);
        let r2cut = self.rcut * self.rcut;
        let mut y = [0.0; 3];
        for off in &self.real_offsets {
            let mut u = 0.0;
            for j in 0..n {
                y[j] = x[j] + off[j];
                u += y[j] * y[j];
            }
            if u <= r2cut {
                let d = 2.0 * ewald_real_table(n, self.alpha, u, 1)[1];
                for j in 0..n {
                    out[j] += d * y[j];
                }
            }
        }
        let mut phases: [Vec<Complex64>; 3] = [Vec::new(), Vec::new(), Vec::new()];
        for j in 0..n {
            let mmax = self.max_index[j] as i64;
            let t = 2.0 * PI * x[j] / self.cell.period(j);
            phases[j] = (-mmax..=mmax)
                .map(|m| Complex64::from_polar(1.0, m as f64 * t))
                .collect();
        }
        for term in &self.recip {
            let mut e = Complex64::new(1.0, 0.0);
            for j in 0..n {
                e *= phases[j][(term.z[j] + self.max_index[j] as i32) as usize];
            }
            let c = -2.0 * PI * term.coef * e.im;
            for j in 0..n {
                out[j] += c * term.k[j];
            }
        }
    }
}
