use std::f64::consts::PI;

use super::{DomainShape, NodeSet, Shape, PANEL_ORDER};
use crate::cell::{PeriodicityCell, MAX_DIM};
use crate::error::{Error, Result};
use crate::special::gauss_legendre_unit;

/// Rule on `∂Ω` or `∂Q` with outward unit normals.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryQuadrature {
    pub nodes: NodeSet,
    normals: Vec<f64>,
}

impl BoundaryQuadrature {
    fn new(dim: usize) -> Self {
        Self {
            nodes: NodeSet::new(dim),
            normals: Vec::new(),
        }
    }

    fn push(&mut self, y: &[f64], w: f64, nu: &[f64]) {
        self.nodes.push(y, w);
        self.normals.extend_from_slice(nu);
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn normal(&self, i: usize) -> &[f64] {
        let n = self.nodes.dim();
        &self.normals[i * n..(i + 1) * n]
    }

    /// `(point, weight, normal)` triples.
    pub fn iter(&self) -> impl Iterator<Item = (&[f64], f64, &[f64])> + '_ {
        let n = self.nodes.dim();
        self.nodes
            .iter()
            .zip(self.normals.chunks_exact(n))
            .map(|((y, w), nu)| (y, w, nu))
    }

    /// `Σ w_i ν_j(y_i)` for each axis.
    pub fn normal_moments(&self) -> Vec<f64> {
        let n = self.nodes.dim();
        let mut m = vec![0.0; n];
        for (_, w, nu) in self.iter() {
            for j in 0..n {
                m[j] += w * nu[j];
            }
        }
        m
    }
}

fn check_resolution(resolution: usize) -> Result<()> {
    if resolution < 16 {
        return Err(Error::ResolutionTooSmall {
            got: resolution,
            min: 16,
        });
    }
    Ok(())
}

/// Trapezoid rules for periodic directions use this many nodes per unit
/// length relative to the panel rules.
const TRAPEZOID_FACTOR: f64 = 2.0;

pub fn build_boundary(shape: &DomainShape, resolution: usize) -> Result<BoundaryQuadrature> {
    check_resolution(resolution)?;
    let n = shape.dim();
    let density = resolution as f64 / shape.cell().max_period();
    let mut out = BoundaryQuadrature::new(n);
    match shape.shape() {
        Shape::Ball { center, radius } => {
            if n == 2 {
                circle(&mut out, center, *radius, density);
            } else {
                sphere(&mut out, center, *radius, density);
            }
        }
        Shape::Box { lo, hi } => box_faces(&mut out, n, lo, hi, density),
    }
    Ok(out)
}

/// Rule on `∂Q`; opposite faces carry identical node layouts.
pub fn build_cell_boundary(
    cell: &PeriodicityCell,
    resolution: usize,
) -> Result<BoundaryQuadrature> {
    check_resolution(resolution)?;
    let n = cell.dim();
    let density = resolution as f64 / cell.max_period();
    let mut out = BoundaryQuadrature::new(n);
    box_faces(&mut out, n, &vec![0.0; n], cell.periods(), density);
    Ok(out)
}

fn circle(out: &mut BoundaryQuadrature, c: &[f64], r: f64, density: f64) {
    let m = ((2.0 * PI * r * density * TRAPEZOID_FACTOR).ceil() as usize).max(32);
    let w = 2.0 * PI * r / m as f64;
    for k in 0..m {
        let t = 2.0 * PI * k as f64 / m as f64;
        let nu = [t.cos(), t.sin()];
        out.push(&[c[0] + r * nu[0], c[1] + r * nu[1]], w, &nu);
    }
}

/// Gauss–Legendre panels in the polar angle, trapezoid in the azimuth.
fn sphere(out: &mut BoundaryQuadrature, c: &[f64], r: f64, density: f64) {
    let rule = gauss_legendre_unit(PANEL_ORDER);
    let panels = ((PI * r * density / PANEL_ORDER as f64).ceil() as usize).max(2);
    let nphi = ((2.0 * PI * r * density * TRAPEZOID_FACTOR).ceil() as usize).max(32);
    let dphi = 2.0 * PI / nphi as f64;
    let h = PI / panels as f64;
    for p in 0..panels {
        for (x, wx) in rule.0.iter().zip(&rule.1) {
            let th = (p as f64 + x) * h;
            let (st, ct) = th.sin_cos();
            let wth = wx * h * st * r * r;
            for k in 0..nphi {
                let ph = k as f64 * dphi;
                let (sp, cp) = ph.sin_cos();
                let nu = [st * cp, st * sp, ct];
                out.push(
                    &[c[0] + r * nu[0], c[1] + r * nu[1], c[2] + r * nu[2]],
                    wth * dphi,
                    &nu,
                );
            }
        }
    }
}

/// Tensor Gauss–Legendre panels on every face of the box `[lo, hi]`.
fn box_faces(out: &mut BoundaryQuadrature, n: usize, lo: &[f64], hi: &[f64], density: f64) {
    let rule = gauss_legendre_unit(PANEL_ORDER);
    let m = rule.0.len();
    for axis in 0..n {
        let tangent: Vec<usize> = (0..n).filter(|&j| j != axis).collect();
        let panels: Vec<usize> = tangent
            .iter()
            .map(|&j| (((hi[j] - lo[j]) * density / PANEL_ORDER as f64).ceil() as usize).max(1))
            .collect();
        // One face layout, reused on both sides.
        let mut layout: Vec<([f64; MAX_DIM], f64)> = Vec::new();
        let counts: Vec<usize> = panels.iter().map(|p| p * m).collect();
        let total: usize = counts.iter().product();
        for idx in 0..total {
            let mut rem = idx;
            let mut y = [0.0; MAX_DIM];
            let mut w = 1.0;
            for (t, &j) in tangent.iter().enumerate() {
                let i = rem % counts[t];
                rem /= counts[t];
                let (panel, node) = (i / m, i % m);
                let len = (hi[j] - lo[j]) / panels[t] as f64;
                y[j] = lo[j] + (panel as f64 + rule.0[node]) * len;
                w *= rule.1[node] * len;
            }
            layout.push((y, w));
        }
        for (side, value) in [(-1.0, lo[axis]), (1.0, hi[axis])] {
            let mut nu = [0.0; MAX_DIM];
            nu[axis] = side;
            for (y, w) in &layout {
                let mut p = *y;
                p[axis] = value;
                out.push(&p[..n], *w, &nu[..n]);
            }
        }
    }
}
