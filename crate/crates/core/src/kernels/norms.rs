use std::f64::consts::PI;

use serde::Serialize;

use super::PeriodicKernel;
use crate::cell::{norm, PeriodicityCell};
use crate::error::{Error, Result};

/// Sampled estimates of `‖h‖_{A⁰}` and `‖h‖_{A¹}`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KernelNormEstimate {
    /// `sup |h(x)| |x|^λ`.
    pub a0_norm: f64,
    /// `a0_norm + Σ_j sup |∂_j h(x)| |x|^{λ+1}`, when differentiable.
    pub a1_norm: Option<f64>,
    /// `sup |∂_j h(x)| |x|^{λ+1}` per axis.
    pub gradient_sups: Option<Vec<f64>>,
    pub sample_count: usize,
    /// `a0_norm` divided by the estimate on the half-density sample set.
    pub refinement_ratio: f64,
    /// Same ratio for the weighted gradient sups (largest over axes).
    pub gradient_refinement_ratio: Option<f64>,
}

/// Sample points of the centred cell: the vertex grid with `samples_per_axis`
/// points per axis (origin removed) and dyadic shells of radii
/// `q_min 2^{-k}`, `k = 1..=shell_refinement`, with an angular grid.
///
/// Halving `samples_per_axis` gives a subset of the points.
pub fn norm_samples(
    cell: &PeriodicityCell,
    samples_per_axis: usize,
    shell_refinement: usize,
) -> Vec<Vec<f64>> {
    let n = cell.dim();
    let m = samples_per_axis;
    let mut out = Vec::new();
    let mut idx = vec![0usize; n];
    loop {
        let x: Vec<f64> = (0..n)
            .map(|j| cell.period(j) * (-0.5 + idx[j] as f64 / m as f64))
            .collect();
        if x.iter().any(|&v| v != 0.0) {
            out.push(x);
        }
        let mut k = 0;
        loop {
            if k == n {
                break;
            }
            idx[k] += 1;
            if idx[k] == m {
                idx[k] = 0;
                k += 1;
            } else {
                break;
            }
        }
        if k == n {
            break;
        }
    }
    let angles = 4 * m.div_ceil(4);
    let dirs = shell_directions(n, angles);
    for k in 1..=shell_refinement {
        let r = cell.min_period() * 0.5f64.powi(k as i32);
        for d in &dirs {
            out.push(d.iter().map(|v| r * v).collect());
        }
    }
    out
}

pub(crate) fn shell_directions(n: usize, m: usize) -> Vec<Vec<f64>> {
    if n == 2 {
        (0..m)
            .map(|i| {
                let t = 2.0 * PI * i as f64 / m as f64;
                vec![t.cos(), t.sin()]
            })
            .collect()
    } else {
        let mut out = vec![vec![0.0, 0.0, 1.0], vec![0.0, 0.0, -1.0]];
        let nt = m / 2;
        for i in 1..nt {
            let th = PI * i as f64 / nt as f64;
            for j in 0..m {
                let ph = 2.0 * PI * j as f64 / m as f64;
                out.push(vec![th.sin() * ph.cos(), th.sin() * ph.sin(), th.cos()]);
            }
        }
        out
    }
}

struct Sups {
    a0: f64,
    grad: Option<Vec<f64>>,
}

fn weighted_sups<K: PeriodicKernel + ?Sized>(h: &K, points: &[Vec<f64>]) -> Sups {
    let n = h.cell().dim();
    let lam = h.lambda();
    let diff = h.is_differentiable();
    let mut a0 = 0.0f64;
    let mut grad = vec![0.0f64; n];
    let mut g = vec![0.0; n];
    for x in points {
        let r = norm(x);
        let w = r.powf(lam);
        a0 = a0.max(h.value_centered(x).abs() * w);
        if diff {
            h.gradient_centered(x, &mut g);
            for j in 0..n {
                grad[j] = grad[j].max(g[j].abs() * w * r);
            }
        }
    }
    Sups {
        a0,
        grad: diff.then_some(grad),
    }
}

fn ratio(a: f64, b: f64) -> f64 {
    if a == 0.0 && b == 0.0 {
        1.0
    } else {
        a / b
    }
}

pub fn estimate_norms<K: PeriodicKernel + ?Sized>(
    h: &K,
    samples_per_axis: usize,
    shell_refinement: usize,
) -> Result<KernelNormEstimate> {
    if samples_per_axis < 16 {
        return Err(Error::InvalidParameter {
            name: "samples_per_axis",
            reason: format!("must be at least 16, got {samples_per_axis}"),
        });
    }
    let cell = h.cell();
    let full_pts = norm_samples(cell, samples_per_axis, shell_refinement);
    let half_pts = norm_samples(cell, samples_per_axis / 2, shell_refinement);
    let full = weighted_sups(h, &full_pts);
    let half = weighted_sups(h, &half_pts);
    let gradient_refinement_ratio = match (&full.grad, &half.grad) {
        (Some(a), Some(b)) => Some(
            a.iter()
                .zip(b)
                .map(|(x, y)| ratio(*x, *y))
                .fold(1.0, f64::max),
        ),
        _ => None,
    };
    Ok(KernelNormEstimate {
        a0_norm: full.a0,
        a1_norm: full.grad.as_ref().map(|g| full.a0 + g.iter().sum::<f64>()),
        gradient_sups: full.grad,
        sample_count: full_pts.len(),
        refinement_ratio: ratio(full.a0, half.a0),
        gradient_refinement_ratio,
    })
}
