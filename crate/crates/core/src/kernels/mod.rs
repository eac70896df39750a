//! Periodic weakly singular kernels.
//!
//! Every kernel is evaluated through folding: the argument is reduced to the
//! centred cell first, so `h(x + qz)` and `h(x)` go through the same code path.

mod combos;
mod ewald;
mod fourier;
mod norms;
mod radial;
mod synthetic;
mod yukawa;

pub use combos::{ConstantKernel, LinearCombination, ValueOnly};
pub use ewald::LaplaceEwald;
pub use fourier::FourierOracle;
pub(crate) use norms::shell_directions;
pub use norms::{estimate_norms, norm_samples, KernelNormEstimate};
pub use radial::{laplace_free_space, yukawa_free_space};
pub use synthetic::SyntheticPowerKernel;
pub use yukawa::YukawaPeriodic;

use crate::cell::PeriodicityCell;
use crate::error::{Error, Result};
use crate::multi_index::MultiIndex;

/// Highest derivative order supported by the built-in kernels.
pub const MAX_KERNEL_ORDER: usize = 3;

/// A q-periodic function singular only on the lattice `qZⁿ`.
pub trait PeriodicKernel: Send + Sync {
    fn name(&self) -> String;

    fn cell(&self) -> &PeriodicityCell;

    /// Singularity exponent `λ`: `|h(x)| |x|^λ` is bounded near the lattice.
    fn lambda(&self) -> f64;

    /// Whether first derivatives are available (class `A¹`).
    fn is_differentiable(&self) -> bool {
        true
    }

    /// Absolute error bound of the evaluation scheme for values.
    fn truncation_error(&self) -> f64 {
        0.0
    }

    /// Value at a point of the centred cell, `x ≠ 0`.
    fn value_centered(&self, x: &[f64]) -> f64;

    /// Gradient at a point of the centred cell.
    fn gradient_centered(&self, x: &[f64], out: &mut [f64]) {
        for (j, o) in out.iter_mut().enumerate() {
            *o = self.derivative_centered(x, &MultiIndex::unit(x.len(), j));
        }
    }

    /// `∂^β h` at a point of the centred cell, `|β| ≤ 3`.
    fn derivative_centered(&self, x: &[f64], beta: &MultiIndex) -> f64;

    fn value(&self, x: &[f64]) -> f64 {
        let f = self.cell().fold_centered(x);
        self.value_centered(&f[..x.len()])
    }

    fn gradient(&self, x: &[f64], out: &mut [f64]) {
        let f = self.cell().fold_centered(x);
        self.gradient_centered(&f[..x.len()], out)
    }

    fn derivative(&self, x: &[f64], beta: &MultiIndex) -> Result<f64> {
        check_order(self, beta)?;
        let f = self.cell().fold_centered(x);
        Ok(self.derivative_centered(&f[..x.len()], beta))
    }
}

pub(crate) fn check_order<K: PeriodicKernel + ?Sized>(k: &K, beta: &MultiIndex) -> Result<()> {
    if beta.order() > MAX_KERNEL_ORDER {
        return Err(Error::UnsupportedOrder(beta.order()));
    }
    if beta.order() > 0 && !k.is_differentiable() {
        return Err(Error::NotDifferentiable(k.name()));
    }
    Ok(())
}

pub(crate) fn check_lambda(n: usize, lambda: f64) -> Result<()> {
    if !(lambda > 0.0 && lambda < n as f64) {
        return Err(Error::InvalidParameter {
            name: "lambda",
            reason: format!("must lie in ]0, {n}[, got {lambda}"),
        });
    }
    Ok(())
}

/// Derivatives of `f(u(x))` up to third order by Faà di Bruno.
///
/// `fd[k] = f^{(k)}(u)`, `u1[a] = ∂_a u`, `u2(a, b) = ∂_a∂_b u`,
/// `u3(a, b, c) = ∂_a∂_b∂_c u`.
#[inline]
pub(crate) fn chain_rule(
    axes: &[usize],
    fd: &[f64; 4],
    u1: &[f64],
    u2: impl Fn(usize, usize) -> f64,
    u3: impl Fn(usize, usize, usize) -> f64,
) -> f64 {
    match *axes {
        [] => fd[0],
        [a] => fd[1] * u1[a],
        [a, b] => fd[2] * u1[a] * u1[b] + fd[1] * u2(a, b),
        [a, b, c] => {
            fd[3] * u1[a] * u1[b] * u1[c]
                + fd[2] * (u2(a, b) * u1[c] + u2(a, c) * u1[b] + u2(b, c) * u1[a])
                + fd[1] * u3(a, b, c)
        }
        _ => f64::NAN,
    }
}

/// Chain rule specialised to `u = |x|²`.
#[inline]
pub(crate) fn radial_chain(axes: &[usize], fd: &[f64; 4], x: &[f64]) -> f64 {
    let mut u1 = [0.0; 3];
    for (j, v) in x.iter().enumerate() {
        u1[j] = 2.0 * v;
    }
    chain_rule(
        axes,
        fd,
        &u1,
        |a, b| if a == b { 2.0 } else { 0.0 },
        |_, _, _| 0.0,
    )
}

/// Bound on `Σ |F(|x + qz|)|` over omitted images, for `x` in the centred cell.
///
/// Images with `‖z‖_∞ > nmax` are omitted, as are window images farther than
/// `rcut`. A shell `‖z‖_∞ = m ≥ 1` has `(2m+1)ⁿ − (2m−1)ⁿ` members, each at
/// distance at least `(m − ½) q_min`; `mag` must be non-increasing.
pub(crate) fn image_tail_bound(
    cell: &PeriodicityCell,
    nmax: usize,
    rcut: f64,
    mag: impl Fn(f64) -> f64,
) -> f64 {
    let n = cell.dim() as i32;
    let qmin = cell.min_period();
    let qnorm = cell.periods().iter().map(|q| q * q).sum::<f64>().sqrt();
    let mut total = 0.0;
    let mut m = 1usize;
    loop {
        let mf = m as f64;
        let count = (2.0 * mf + 1.0).powi(n) - (2.0 * mf - 1.0).powi(n);
        let near = (mf - 0.5) * qmin;
        let term = if m > nmax {
            count * mag(near)
        } else if (mf + 0.5) * qnorm > rcut {
            count * mag(near.max(rcut))
        } else {
            0.0
        };
        total += term;
        if m > nmax && (term < 1e-30 * total.max(1e-300) || term == 0.0) {
            break;
        }
        if m > 100_000 {
            return f64::INFINITY;
        }
        m += 1;
    }
    total
}

/// Offsets `z` with `‖z‖_∞ ≤ nmax` that can come within `rcut` of a point
/// of the centred cell.
pub(crate) fn image_offsets(cell: &PeriodicityCell, nmax: usize, rcut: f64) -> Vec<[f64; 3]> {
    let half_diag = 0.5 * cell.periods().iter().map(|q| q * q).sum::<f64>().sqrt();
    cell.lattice_window(nmax)
        .into_iter()
        .filter_map(|z| {
            let mut off = [0.0; 3];
            for (j, &zj) in z.iter().enumerate() {
                off[j] = zj as f64 * cell.period(j);
            }
            let len = off.iter().map(|v| v * v).sum::<f64>().sqrt();
            (len <= rcut + half_diag).then_some(off)
        })
        .collect()
}
