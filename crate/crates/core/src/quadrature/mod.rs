//! Quadrature over a domain `Ω ⊂ Q`, its complement `Q∖clΩ`, and the
//! boundaries `∂Ω` and `∂Q`.
//!
//! Volume rules are built from smooth charts (boxes, and wedges between a
//! cube and a sphere) so that curved boundaries are resolved exactly. When a
//! singular point is given, every lattice image of it that comes close to a
//! chart triggers local refinement ending in Duffy pyramids with dyadically
//! graded radial levels. This integrates `r^{-λ}`-type singularities (and
//! `log r`) without any knowledge of the kernel up to `λ ≈ n − 1/2`; for
//! stronger singularities pass the exponent with
//! [`QuadratureOptions::with_singularity`].

mod boundary;
mod charts;

use serde::Serialize;

use crate::cell::{unit_ball_volume, unit_sphere_area, PeriodicityCell, MAX_DIM};
use crate::error::{Error, Result};

pub use boundary::{build_boundary, build_cell_boundary, BoundaryQuadrature};
use charts::{Chart, Integrator, RuleParams, Surface};

/// Gauss–Legendre order used on every panel.
pub const PANEL_ORDER: usize = 8;

/// Domain geometry.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Shape {
    Ball { center: Vec<f64>, radius: f64 },
    Box { lo: Vec<f64>, hi: Vec<f64> },
}

/// A ball or box whose closure sits strictly inside the periodicity cell.
#[derive(Debug, Clone, PartialEq)]
pub struct DomainShape {
    shape: Shape,
    cell: PeriodicityCell,
    clearance: f64,
}

impl DomainShape {
    pub fn ball(cell: &PeriodicityCell, center: &[f64], radius: f64) -> Result<Self> {
        cell.check_dim(center.len())?;
        if !(radius.is_finite() && radius > 0.0) || center.iter().any(|c| !c.is_finite()) {
            return Err(Error::InvalidParameter {
                name: "radius",
                reason: format!("ball needs a finite centre and positive radius, got {radius}"),
            });
        }
        let clearance = (0..cell.dim())
            .map(|j| (center[j] - radius).min(cell.period(j) - center[j] - radius))
            .fold(f64::INFINITY, f64::min);
        Self::finish(
            cell,
            Shape::Ball {
                center: center.to_vec(),
                radius,
            },
            clearance,
        )
    }

    pub fn cuboid(cell: &PeriodicityCell, lo: &[f64], hi: &[f64]) -> Result<Self> {
        cell.check_dim(lo.len())?;
        cell.check_dim(hi.len())?;
        if lo
            .iter()
            .zip(hi)
            .any(|(a, b)| !(a.is_finite() && b.is_finite() && a < b))
        {
            return Err(Error::InvalidParameter {
                name: "box",
                reason: "need lo < hi componentwise".into(),
            });
        }
        let clearance = (0..cell.dim())
            .map(|j| lo[j].min(cell.period(j) - hi[j]))
            .fold(f64::INFINITY, f64::min);
        Self::finish(
            cell,
            Shape::Box {
                lo: lo.to_vec(),
                hi: hi.to_vec(),
            },
            clearance,
        )
    }

    fn finish(cell: &PeriodicityCell, shape: Shape, clearance: f64) -> Result<Self> {
        if clearance <= 0.0 {
            return Err(Error::DomainOutsideCell(format!(
                "the closure of the domain must lie inside the open cell (clearance {clearance:.3e})"
            )));
        }
        Ok(Self {
            shape,
            cell: cell.clone(),
            clearance,
        })
    }

    pub fn shape(&self) -> &Shape {
        &self.shape
    }

    pub fn cell(&self) -> &PeriodicityCell {
        &self.cell
    }

    pub fn dim(&self) -> usize {
        self.cell.dim()
    }

    /// `dist(clΩ, ∂Q)`.
    pub fn clearance(&self) -> f64 {
        self.clearance
    }

    pub fn volume(&self) -> f64 {
        let n = self.dim();
        match &self.shape {
            Shape::Ball { radius, .. } => unit_ball_volume(n) * radius.powi(n as i32),
            Shape::Box { lo, hi } => lo.iter().zip(hi).map(|(a, b)| b - a).product(),
        }
    }

    /// `m_{n−1}(∂Ω)`.
    pub fn boundary_measure(&self) -> f64 {
        let n = self.dim();
        match &self.shape {
            Shape::Ball { radius, .. } => {
                n as f64 * unit_ball_volume(n) * radius.powi(n as i32 - 1)
            }
            Shape::Box { lo, hi } => {
                let w: Vec<f64> = lo.iter().zip(hi).map(|(a, b)| b - a).collect();
                let vol: f64 = w.iter().product();
                2.0 * w.iter().map(|x| vol / x).sum::<f64>()
            }
        }
    }

    /// Signed distance to `∂Ω` (negative inside) for a point of the cell.
    /// For boxes the outside value is exact and the inside value is the
    /// distance to the nearest face.
    pub fn signed_distance(&self, x: &[f64]) -> f64 {
        match &self.shape {
            Shape::Ball { center, radius } => {
                let d: f64 = x
                    .iter()
                    .zip(center)
                    .map(|(a, b)| (a - b) * (a - b))
                    .sum::<f64>()
                    .sqrt();
                d - radius
            }
            Shape::Box { lo, hi } => {
                let mut out = 0.0;
                let mut inside = f64::NEG_INFINITY;
                for j in 0..x.len() {
                    let d = (lo[j] - x[j]).max(x[j] - hi[j]);
                    if d > 0.0 {
                        out += d * d;
                    }
                    inside = inside.max(d);
                }
                if out > 0.0 {
                    out.sqrt()
                } else {
                    inside
                }
            }
        }
    }

    /// Signed distance of the representative of `x` in `[0, q)`.
    pub fn signed_distance_folded(&self, x: &[f64]) -> f64 {
        self.signed_distance(&self.cell.fold_into_cell(x))
    }

    /// Whether `x` (taken modulo the lattice) lies in the open domain.
    pub fn contains(&self, x: &[f64]) -> bool {
        self.signed_distance_folded(x) < 0.0
    }

    fn interior_charts(&self) -> Vec<Chart> {
        match &self.shape {
            Shape::Ball { center, radius } => ball_charts(self.dim(), center, *radius),
            Shape::Box { lo, hi } => vec![Chart::Block {
                lo: arr(lo),
                hi: arr(hi),
            }],
        }
    }

    fn complement_charts(&self) -> Vec<Chart> {
        let n = self.dim();
        let q = arr(self.cell.periods());
        match &self.shape {
            Shape::Ball { center, radius } => {
                let c = arr(center);
                let b = radius + 0.5 * self.clearance;
                let mut lo = [0.0; MAX_DIM];
                let mut hi = [0.0; MAX_DIM];
                for j in 0..n {
                    lo[j] = c[j] - b;
                    hi[j] = c[j] + b;
                }
                let mut charts = ring_blocks(n, &q, &lo, &hi);
                for axis in 0..n {
                    for sign in [1.0, -1.0] {
                        charts.push(Chart::Wedge {
                            center: c,
                            axis,
                            sign,
                            inner: Surface::Sphere(*radius),
                            outer: Surface::Cube(b),
                        });
                    }
                }
                charts
            }
            Shape::Box { lo, hi } => ring_blocks(n, &q, &arr(lo), &arr(hi)),
        }
    }
}

fn arr(v: &[f64]) -> [f64; MAX_DIM] {
    let mut a = [0.0; MAX_DIM];
    a[..v.len()].copy_from_slice(v);
    a
}

/// Inner cube of half-side `R/2` plus one wedge per face out to the sphere.
fn ball_charts(n: usize, center: &[f64], radius: f64) -> Vec<Chart> {
    let c = arr(center);
    let a = 0.5 * radius;
    let mut lo = [0.0; MAX_DIM];
    let mut hi = [0.0; MAX_DIM];
    for j in 0..n {
        lo[j] = c[j] - a;
        hi[j] = c[j] + a;
    }
    let mut charts = vec![Chart::Block { lo, hi }];
    for axis in 0..n {
        for sign in [1.0, -1.0] {
            charts.push(Chart::Wedge {
                center: c,
                axis,
                sign,
                inner: Surface::Cube(a),
                outer: Surface::Sphere(radius),
            });
        }
    }
    charts
}

/// The `3ⁿ − 1` boxes tiling `[0,q] ∖ [lo,hi]`.
fn ring_blocks(
    n: usize,
    q: &[f64; MAX_DIM],
    lo: &[f64; MAX_DIM],
    hi: &[f64; MAX_DIM],
) -> Vec<Chart> {
    let mut out = Vec::new();
    let total = 3usize.pow(n as u32);
    for idx in 0..total {
        let mut rem = idx;
        let mut blo = [0.0; MAX_DIM];
        let mut bhi = [0.0; MAX_DIM];
        let mut middle = true;
        for j in 0..n {
            let k = rem % 3;
            rem /= 3;
            let (a, b) = match k {
                0 => (0.0, lo[j]),
                1 => (lo[j], hi[j]),
                _ => (hi[j], q[j]),
            };
            middle &= k == 1;
            blo[j] = a;
            bhi[j] = b;
        }
        if !middle {
            out.push(Chart::Block { lo: blo, hi: bhi });
        }
    }
    out
}

/// Resolution controls shared by all builders.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct QuadratureOptions {
    /// Roughly the number of nodes per period along each axis.
    pub resolution: usize,
    /// Dyadic radial levels in each singular pyramid; `None` picks 12 in
    /// two dimensions (logarithmic kernels need the grading) and 3 in three.
    pub patch_depth: Option<usize>,
    /// Exponent `λ` of the expected `|y|^{−λ}` singularity. When set, the
    /// innermost radial level is mapped so that `r^{n−1−λ}` becomes a
    /// polynomial; otherwise the map suits `λ = n − 2`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub singularity: Option<f64>,
}

impl QuadratureOptions {
    pub fn new(resolution: usize) -> Self {
        Self {
            resolution,
            patch_depth: None,
            singularity: None,
        }
    }

    pub fn with_singularity(mut self, lambda: f64) -> Self {
        self.singularity = Some(lambda);
        self
    }

    /// Sets the singularity exponent unless one is already given.
    pub fn or_singularity(self, lambda: f64) -> Self {
        match self.singularity {
            Some(_) => self,
            None => self.with_singularity(lambda),
        }
    }

    pub fn with_patch_depth(mut self, depth: usize) -> Self {
        self.patch_depth = Some(depth);
        self
    }

    pub fn depth_for(&self, n: usize) -> usize {
        self.patch_depth.unwrap_or(if n == 2 { 12 } else { 3 })
    }

    fn check_volume(&self) -> Result<()> {
        if self.resolution < 8 {
            return Err(Error::ResolutionTooSmall {
                got: self.resolution,
                min: 8,
            });
        }
        if let Some(d) = self.patch_depth {
            if d == 0 || d > 40 {
                return Err(Error::InvalidParameter {
                    name: "patch_depth",
                    reason: format!("must be in 1..=40, got {d}"),
                });
            }
        }
        Ok(())
    }

    fn check_singularity(&self, n: usize) -> Result<()> {
        match self.singularity {
            Some(l) if !(l >= 0.0 && l < n as f64) => Err(Error::InvalidParameter {
                name: "singularity",
                reason: format!("need 0 <= lambda < n, got {l}"),
            }),
            _ => Ok(()),
        }
    }

    /// Power `p` of the innermost map `t = ε v^p`. With `a = n − λ` the
    /// radial integrand `t^{a−1} dt` becomes `v^{pa−1} dv`; `pa` is the
    /// integer `⌈4a⌉`, so `p = 4` for `λ = n − 2` and `λ = n − 1/2`.
    /// `p ≤ 8` keeps the smallest node (`v ≈ 0.02`) from rounding onto the
    /// focus, at the price of exactness once `a < 1/8`.
    fn inner_power(&self, n: usize) -> f64 {
        let a = n as f64 - self.singularity.unwrap_or(n as f64 - 2.0);
        ((4.0 * a).ceil() / a).min(8.0)
    }

    /// A stronger innermost map (`p > 4`) moves its first node `v₀` closer to
    /// the focus, so dyadic levels are given up until the smallest radial
    /// node is no closer than with `p = 4`; otherwise nodes far inside the
    /// last ulp of a non-zero focus round onto it.
    fn rule_params(&self, n: usize, length_scale: f64) -> RuleParams {
        let p = self.inner_power(n);
        let v0 = crate::special::gauss_legendre_unit(PANEL_ORDER).0[0];
        let shift = (p - 4.0) * (1.0 / v0).log2();
        RuleParams {
            panel: PANEL_ORDER as f64 * length_scale / self.resolution as f64,
            order: PANEL_ORDER,
            depth: (self.depth_for(n) as f64 - shift).floor().max(0.0) as usize,
            inner_power: p,
        }
    }
}

/// Quadrature nodes and weights in `Rⁿ`, stored flat.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct NodeSet {
    dim: usize,
    points: Vec<f64>,
    weights: Vec<f64>,
}

impl NodeSet {
    pub(crate) fn new(dim: usize) -> Self {
        Self {
            dim,
            points: Vec::new(),
            weights: Vec::new(),
        }
    }

    pub(crate) fn push(&mut self, y: &[f64], w: f64) {
        self.points.extend_from_slice(y);
        self.weights.push(w);
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.points[i * self.dim..(i + 1) * self.dim]
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn iter(&self) -> impl Iterator<Item = (&[f64], f64)> + '_ {
        self.points
            .chunks_exact(self.dim.max(1))
            .zip(self.weights.iter().copied())
    }

    pub fn total_weight(&self) -> f64 {
        self.weights.iter().sum()
    }

    /// `Σ w_i f(y_i)`.
    pub fn integrate(&self, mut f: impl FnMut(&[f64]) -> f64) -> f64 {
        self.iter().map(|(y, w)| w * f(y)).sum()
    }
}

fn integrate_charts(
    n: usize,
    charts: &[Chart],
    params: RuleParams,
    foci: &[[f64; MAX_DIM]],
) -> NodeSet {
    let mut out = NodeSet::new(n);
    for chart in charts {
        Integrator::run(n, chart, params, foci, &mut out);
    }
    out
}

/// Lattice images of the singular centre that can come near the region
/// `[lo, hi]` (a margin of one period is generous).
fn singular_foci(cell: &PeriodicityCell, center: &[f64]) -> Vec<[f64; MAX_DIM]> {
    let n = cell.dim();
    let base = cell.fold_into_cell(center);
    let mut out = Vec::new();
    for idx in 0..3usize.pow(n as u32) {
        let mut rem = idx;
        let mut p = [0.0; MAX_DIM];
        for j in 0..n {
            let z = (rem % 3) as f64 - 1.0;
            rem /= 3;
            p[j] = base[j] + z * cell.period(j);
        }
        out.push(p);
    }
    out
}

fn check_center(cell: &PeriodicityCell, center: &[f64]) -> Result<Vec<f64>> {
    cell.check_dim(center.len())?;
    let n = cell.dim();
    for j in 0..n {
        let q = cell.period(j);
        if !center[j].is_finite() || center[j] < -q || center[j] > 2.0 * q {
            return Err(Error::FarSingularCenter);
        }
    }
    Ok(cell.fold_into_cell(center))
}

/// Rule on `Ω`.
#[derive(Debug, Clone, PartialEq)]
pub struct InteriorQuadrature {
    pub domain: DomainShape,
    pub nodes: NodeSet,
    /// Representative in `[0, q)` of the singular point, if any.
    pub singular_center: Option<Vec<f64>>,
    pub resolution: usize,
}

/// Rule on `Q∖clΩ`, or on `Q` when `Ω = ∅`.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplementQuadrature {
    pub cell: PeriodicityCell,
    /// `None` for `Ω = ∅`, in which case the rule covers all of `Q`.
    pub domain: Option<DomainShape>,
    pub nodes: NodeSet,
    pub singular_center: Option<Vec<f64>>,
    pub resolution: usize,
}

pub fn build_interior(
    shape: &DomainShape,
    opts: &QuadratureOptions,
    singular_center: Option<&[f64]>,
) -> Result<InteriorQuadrature> {
    opts.check_volume()?;
    let cell = shape.cell();
    opts.check_singularity(cell.dim())?;
    let center = singular_center.map(|c| check_center(cell, c)).transpose()?;
    let foci = center
        .as_deref()
        .map(|c| singular_foci(cell, c))
        .unwrap_or_default();
    let params = opts.rule_params(cell.dim(), cell.max_period());
    let nodes = integrate_charts(shape.dim(), &shape.interior_charts(), params, &foci);
    Ok(InteriorQuadrature {
        domain: shape.clone(),
        nodes,
        singular_center: center,
        resolution: opts.resolution,
    })
}

pub fn build_complement(
    cell: &PeriodicityCell,
    shape: Option<&DomainShape>,
    opts: &QuadratureOptions,
    singular_center: Option<&[f64]>,
) -> Result<ComplementQuadrature> {
    opts.check_volume()?;
    opts.check_singularity(cell.dim())?;
    if let Some(s) = shape {
        if s.cell() != cell {
            return Err(Error::InvalidParameter {
                name: "shape",
                reason: "domain was validated against a different cell".into(),
            });
        }
    }
    let center = singular_center.map(|c| check_center(cell, c)).transpose()?;
    let foci = center
        .as_deref()
        .map(|c| singular_foci(cell, c))
        .unwrap_or_default();
    let charts = match shape {
        Some(s) => s.complement_charts(),
        None => vec![Chart::Block {
            lo: [0.0; MAX_DIM],
            hi: arr(cell.periods()),
        }],
    };
    let params = opts.rule_params(cell.dim(), cell.max_period());
    Ok(ComplementQuadrature {
        cell: cell.clone(),
        domain: shape.cloned(),
        nodes: integrate_charts(cell.dim(), &charts, params, &foci),
        singular_center: center,
        resolution: opts.resolution,
    })
}

/// Rule on the centred cell `Q̃` with the singular point at the origin.
pub fn centered_cell_rule(cell: &PeriodicityCell, opts: &QuadratureOptions) -> Result<NodeSet> {
    opts.check_volume()?;
    opts.check_singularity(cell.dim())?;
    let n = cell.dim();
    let mut lo = [0.0; MAX_DIM];
    let mut hi = [0.0; MAX_DIM];
    for j in 0..n {
        lo[j] = -0.5 * cell.period(j);
        hi[j] = 0.5 * cell.period(j);
    }
    let params = opts.rule_params(cell.dim(), cell.max_period());
    Ok(integrate_charts(
        n,
        &[Chart::Block { lo, hi }],
        params,
        &[[0.0; MAX_DIM]],
    ))
}

/// `I_λ = ∫_{Q̃} |y|^{−λ} dy`.
pub fn centered_power_integral(
    cell: &PeriodicityCell,
    lambda: f64,
    opts: &QuadratureOptions,
) -> Result<f64> {
    if !(lambda >= 0.0 && lambda < cell.dim() as f64) {
        return Err(Error::InvalidParameter {
            name: "lambda",
            reason: format!("need 0 <= lambda < n, got {lambda}"),
        });
    }
    let rule = centered_cell_rule(cell, &opts.with_singularity(lambda))?;
    Ok(rule.integrate(|y| crate::cell::norm(y).powf(-lambda)))
}

/// Rule on an arbitrary ball in `Rⁿ`, refined around each of `foci`.
/// `length_scale` plays the role of the period in the panel size.
pub fn ball_rule(
    center: &[f64],
    radius: f64,
    foci: &[Vec<f64>],
    length_scale: f64,
    opts: &QuadratureOptions,
) -> Result<NodeSet> {
    opts.check_volume()?;
    let n = center.len();
    if !(2..=MAX_DIM).contains(&n) {
        return Err(Error::UnsupportedDimension(n));
    }
    opts.check_singularity(n)?;
    if !(radius > 0.0 && radius.is_finite()) {
        return Err(Error::InvalidParameter {
            name: "radius",
            reason: format!("must be positive, got {radius}"),
        });
    }
    if let Some(f) = foci.iter().find(|f| f.len() != n) {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: f.len(),
        });
    }
    let foci: Vec<[f64; MAX_DIM]> = foci.iter().map(|f| arr(f)).collect();
    let params = opts.rule_params(n, length_scale);
    Ok(integrate_charts(
        n,
        &ball_charts(n, center, radius),
        params,
        &foci,
    ))
}

/// `s_n δ^{n−λ}/(n−λ)`, the integral of `|y|^{−λ}` over the ball of radius `δ`.
pub fn ball_power_integral(n: usize, lambda: f64, delta: f64) -> f64 {
    unit_sphere_area(n) * delta.powf(n as f64 - lambda) / (n as f64 - lambda)
}

#[cfg(test)]
mod tests {
    use std::f64::consts::PI;

    use super::*;
    use crate::cell::norm;

    fn unit(n: usize) -> PeriodicityCell {
        PeriodicityCell::unit(n).unwrap()
    }

    #[test]
    fn rejects_domains_touching_the_cell_boundary() {
        let c = unit(2);
        assert!(matches!(
            DomainShape::ball(&c, &[0.5, 0.5], 0.5),
            Err(Error::DomainOutsideCell(_))
        ));
        assert!(DomainShape::cuboid(&c, &[0.0, 0.2], &[0.5, 0.5]).is_err());
        assert!(DomainShape::cuboid(&c, &[0.3, 0.2], &[0.2, 0.5]).is_err());
        let b = DomainShape::ball(&c, &[0.5, 0.4], 0.25).unwrap();
        assert!((b.clearance() - 0.15).abs() < 1e-15);
    }

    #[test]
    fn ball_volume_3d() {
        let s = DomainShape::ball(&unit(3), &[0.5; 3], 0.25).unwrap();
        let q = build_interior(&s, &QuadratureOptions::new(64), None).unwrap();
        let exact = 4.0 / 3.0 * PI * 0.25f64.powi(3);
        assert!((q.nodes.total_weight() - exact).abs() <= 1e-8 * exact);
        assert!(q.nodes.weights().iter().all(|&w| w > 0.0));
    }

    #[test]
    fn box_area_2d() {
        let s = DomainShape::cuboid(&unit(2), &[0.2, 0.2], &[0.8, 0.8]).unwrap();
        let q = build_interior(&s, &QuadratureOptions::new(64), None).unwrap();
        assert!((q.nodes.total_weight() - 0.36).abs() < 1e-14);
    }

    #[test]
    fn newton_integral_over_ball() {
        let r = 0.25;
        let s = DomainShape::ball(&unit(3), &[0.5; 3], r).unwrap();
        let q = build_interior(&s, &QuadratureOptions::new(64), Some(&[0.5; 3])).unwrap();
        let v = q
            .nodes
            .integrate(|y| 1.0 / norm(&[y[0] - 0.5, y[1] - 0.5, y[2] - 0.5]));
        let exact = 2.0 * PI * r * r;
        assert!((v - exact).abs() <= 1e-6 * exact, "{v} vs {exact}");
    }

    #[test]
    fn off_center_singularity_in_ball() {
        // ∫_{B_R(0)} |y − p|^{-1} dy = 2πR² − (2π/3)|p|² for |p| < R.
        let r = 0.3;
        let c = [0.5; 3];
        let p = [0.58, 0.45, 0.61];
        let s = DomainShape::ball(&unit(3), &c, r).unwrap();
        let q = build_interior(&s, &QuadratureOptions::new(32), Some(&p)).unwrap();
        let v = q
            .nodes
            .integrate(|y| 1.0 / norm(&[y[0] - p[0], y[1] - p[1], y[2] - p[2]]));
        let d2: f64 = (0..3).map(|j| (p[j] - c[j]).powi(2)).sum();
        let exact = 2.0 * PI * r * r - 2.0 * PI / 3.0 * d2;
        assert!((v - exact).abs() <= 1e-8 * exact, "{v} vs {exact}");
    }

    #[test]
    fn logarithmic_singularity_in_disk() {
        // ∫_{B_R(c)} ln|y − p| dy = πR² ln R − π(R² − |p − c|²)/2 for p inside.
        let r = 0.3;
        let c = [0.5, 0.5];
        let s = DomainShape::ball(&unit(2), &c, r).unwrap();
        for p in [[0.5, 0.5], [0.61, 0.43], [0.5, 0.7999]] {
            let q = build_interior(&s, &QuadratureOptions::new(64), Some(&p)).unwrap();
            let v = q
                .nodes
                .integrate(|y| norm(&[y[0] - p[0], y[1] - p[1]]).ln());
            let d2 = (p[0] - c[0]).powi(2) + (p[1] - c[1]).powi(2);
            let exact = PI * r * r * r.ln() - PI * (r * r - d2) / 2.0;
            assert!(
                (v - exact).abs() <= 1e-10 * exact.abs(),
                "{p:?}: {v} vs {exact}"
            );
        }
    }

    #[test]
    fn square_inverse_distance_2d() {
        let v = centered_power_integral(&unit(2), 1.0, &QuadratureOptions::new(64)).unwrap();
        let exact = 4.0 * (1.0 + 2f64.sqrt()).ln();
        assert!((v - exact).abs() <= 1e-11 * exact, "{v} vs {exact}");
    }

    #[test]
    fn singular_ball_integrals_match_closed_form() {
        let opts = QuadratureOptions::new(32);
        for (n, lam) in [
            (2, 0.5),
            (2, 1.0),
            (2, 1.5),
            (3, 0.5),
            (3, 1.0),
            (3, 2.0),
            (3, 2.5),
        ] {
            let c = vec![0.1; n];
            let delta = 0.07;
            let rule = ball_rule(&c, delta, &[c.to_vec()], 1.0, &opts).unwrap();
            let v = rule.integrate(|y| {
                let d: Vec<f64> = y.iter().zip(&c).map(|(a, b)| a - b).collect();
                norm(&d).powf(-lam)
            });
            let exact = ball_power_integral(n, lam, delta);
            assert!(
                (v - exact).abs() <= 1e-8 * exact,
                "n={n} λ={lam}: {v} vs {exact}"
            );
        }
    }

    #[test]
    fn strong_singularity_needs_the_exponent_hint() {
        for n in [2usize, 3] {
            let lam = n as f64 - 0.2;
            let origin = vec![0.0; n];
            let exact = ball_power_integral(n, lam, 0.05);
            let integral = |opts: &QuadratureOptions| {
                let rule = ball_rule(&origin, 0.05, &[origin.clone()], 1.0, opts).unwrap();
                rule.integrate(|y| norm(y).powf(-lam))
            };
            let hinted = integral(&QuadratureOptions::new(32).with_singularity(lam));
            assert!(
                (hinted - exact).abs() <= 1e-9 * exact,
                "n={n}: {hinted} vs {exact}"
            );
            let plain = integral(&QuadratureOptions::new(32));
            assert!((plain - exact).abs() > 1e-5 * exact);
        }
        let bad = QuadratureOptions::new(32).with_singularity(2.0);
        assert!(ball_rule(&[0.0, 0.0], 0.1, &[], 1.0, &bad).is_err());
    }

    #[test]
    fn complement_measures() {
        let c2 = unit(2);
        let s = DomainShape::ball(&c2, &[0.5, 0.5], 0.25).unwrap();
        let q = build_complement(&c2, Some(&s), &QuadratureOptions::new(128), None).unwrap();
        let exact = 1.0 - PI * 0.0625;
        assert!((q.nodes.total_weight() - exact).abs() <= 1e-10 * exact);
        for (y, _) in q.nodes.iter() {
            assert!(s.signed_distance(y) > 0.0);
        }

        let c3 = PeriodicityCell::new(&[1.0, 1.5, 1.2]).unwrap();
        let b = DomainShape::cuboid(&c3, &[0.2, 0.3, 0.1], &[0.7, 0.9, 0.5]).unwrap();
        let q = build_complement(
            &c3,
            Some(&b),
            &QuadratureOptions::new(16),
            Some(&[0.1, 0.1, 0.9]),
        )
        .unwrap();
        let exact = c3.volume() - b.volume();
        assert!(
            (q.nodes.total_weight() - exact).abs() <= 1e-11 * exact,
            "{} vs {exact}",
            q.nodes.total_weight()
        );

        let empty = build_complement(&c3, None, &QuadratureOptions::new(16), None).unwrap();
        assert!((empty.nodes.total_weight() - c3.volume()).abs() < 1e-13);
    }

    #[test]
    fn singular_center_is_folded_and_checked() {
        let c = unit(2);
        let s = DomainShape::ball(&c, &[0.5, 0.5], 0.25).unwrap();
        let q = build_interior(&s, &QuadratureOptions::new(64), Some(&[1.5, -0.5])).unwrap();
        assert_eq!(q.singular_center.as_deref(), Some(&[0.5, 0.5][..]));
        assert!(matches!(
            build_interior(&s, &QuadratureOptions::new(64), Some(&[5.0, 0.5])),
            Err(Error::FarSingularCenter)
        ));
        assert!(matches!(
            build_interior(&s, &QuadratureOptions::new(4), None),
            Err(Error::ResolutionTooSmall { .. })
        ));
    }

    #[test]
    fn smooth_integrand_converges() {
        // ∫_{B_R} |y − c|² = s_n R^{n+2}/(n+2).
        let c = unit(3);
        let s = DomainShape::ball(&c, &[0.5; 3], 0.3).unwrap();
        let exact = 4.0 * PI * 0.3f64.powi(5) / 5.0;
        let q = build_interior(&s, &QuadratureOptions::new(16), None).unwrap();
        let v = q
            .nodes
            .integrate(|y| y.iter().map(|v| (v - 0.5).powi(2)).sum());
        assert!((v - exact).abs() <= 1e-10 * exact, "{v} vs {exact}");
    }
}
