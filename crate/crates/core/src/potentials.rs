//! Periodic volume potentials
//!
//! `P⁺[h,φ](x) = ∫_Ω h(x−y)φ(y) dy` and `P⁻[h,φ](x) = ∫_{Q∖clΩ} h(x−y)φ(y) dy`,
//! their first and higher derivatives, and the identity and bound checks
//! built on them.
//!
//! Kernels are always evaluated at `fold(x) − y`, so values at `x` and
//! `x + qz` go through identical arithmetic whenever the folds agree.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::cell::{PeriodicityCell, MAX_DIM};
use crate::density::Density;
use crate::error::{Error, Result};
use crate::kernels::PeriodicKernel;
use crate::multi_index::MultiIndex;
use crate::quadrature::{
    build_boundary, build_cell_boundary, build_complement, build_interior, centered_power_integral,
    BoundaryQuadrature, ComplementQuadrature, DomainShape, InteriorQuadrature, NodeSet,
    QuadratureOptions,
};
use crate::symbol::EllipticOperator;

/// Which side of `∂Ω` the potential integrates over.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Side {
    /// `Ω`.
    Plus,
    /// `Q∖clΩ` (all of `Q` when `Ω = ∅`).
    Minus,
}

impl Side {
    pub fn as_str(self) -> &'static str {
        match self {
            Side::Plus => "plus",
            Side::Minus => "minus",
        }
    }
}

/// Points closer than this (times the shortest period) to `∂Ω` are rejected.
const BOUNDARY_TOL: f64 = 1e-12;

/// Central-difference steps for derivative orders 1, 2 and 3, in units of
/// the shortest period.
pub const FD_STEPS: [f64; 3] = [1e-4, 1e-3, 5e-3];

/// Step used for `P(D)u` in [`PotentialEvaluator::solve_verify`].
pub const OPERATOR_FD_STEP: f64 = 1e-3;

/// A volume rule together with the region it covers.
pub trait VolumeRule {
    fn side(&self) -> Side;
    fn cell(&self) -> &PeriodicityCell;
    fn domain(&self) -> Option<&DomainShape>;
    fn nodes(&self) -> &NodeSet;
    fn singular_center(&self) -> Option<&[f64]>;
}

impl VolumeRule for InteriorQuadrature {
    fn side(&self) -> Side {
        Side::Plus
    }
    fn cell(&self) -> &PeriodicityCell {
        self.domain.cell()
    }
    fn domain(&self) -> Option<&DomainShape> {
        Some(&self.domain)
    }
    fn nodes(&self) -> &NodeSet {
        &self.nodes
    }
    fn singular_center(&self) -> Option<&[f64]> {
        self.singular_center.as_deref()
    }
}

impl VolumeRule for ComplementQuadrature {
    fn side(&self) -> Side {
        Side::Minus
    }
    fn cell(&self) -> &PeriodicityCell {
        &self.cell
    }
    fn domain(&self) -> Option<&DomainShape> {
        self.domain.as_ref()
    }
    fn nodes(&self) -> &NodeSet {
        &self.nodes
    }
    fn singular_center(&self) -> Option<&[f64]> {
        self.singular_center.as_deref()
    }
}

/// Whether the fold of `x` lies in the (open) region of `side`; errors when
/// it lies on `∂Ω`.
fn in_region(
    cell: &PeriodicityCell,
    domain: Option<&DomainShape>,
    side: Side,
    folded: &[f64],
) -> Result<bool> {
    let Some(d) = domain else {
        return Ok(side == Side::Minus);
    };
    let sd = d.signed_distance(folded);
    if sd.abs() <= BOUNDARY_TOL * cell.min_period() {
        return Err(Error::PointOnBoundary);
    }
    Ok(match side {
        Side::Plus => sd < 0.0,
        Side::Minus => sd > 0.0,
    })
}

/// Validates `x` against the rule and returns its fold into `[0, q)`.
fn locate<R: VolumeRule + ?Sized>(rule: &R, x: &[f64]) -> Result<Vec<f64>> {
    let cell = rule.cell();
    cell.check_dim(x.len())?;
    let f = cell.fold_into_cell(x);
    if in_region(cell, rule.domain(), rule.side(), &f)? {
        let matches = rule.singular_center().is_some_and(|c| {
            (0..f.len()).all(|j| {
                let q = cell.period(j);
                let d = (c[j] - f[j]).abs();
                d.min(q - d) <= BOUNDARY_TOL * q
            })
        });
        if !matches {
            return Err(Error::SingularCenterMismatch {
                expected: f,
                got: rule
                    .singular_center()
                    .map(<[f64]>::to_vec)
                    .unwrap_or_default(),
            });
        }
    }
    Ok(f)
}

fn check_kernel<K: PeriodicKernel + ?Sized>(h: &K, cell: &PeriodicityCell) -> Result<()> {
    if h.cell() != cell {
        return Err(Error::InvalidParameter {
            name: "kernel",
            reason: format!("kernel `{}` has a different periodicity cell", h.name()),
        });
    }
    Ok(())
}

fn check_kernel_route<K: PeriodicKernel + ?Sized>(h: &K) -> Result<()> {
    if !h.is_differentiable() {
        return Err(Error::NotDifferentiable(h.name()));
    }
    let n = h.cell().dim() as f64;
    if h.lambda() + 1.0 >= n {
        return Err(Error::InvalidParameter {
            name: "kernel",
            reason: format!(
                "differentiating under the integral needs lambda + 1 < n; `{}` has lambda = {}",
                h.name(),
                h.lambda()
            ),
        });
    }
    Ok(())
}

#[inline]
fn diff(f: &[f64], y: &[f64]) -> [f64; MAX_DIM] {
    let mut z = [0.0; MAX_DIM];
    for j in 0..f.len() {
        z[j] = f[j] - y[j];
    }
    z
}

/// `Σ w h(f − y) g(y)` over the rule nodes.
fn volume_sum<K: PeriodicKernel + ?Sized>(
    h: &K,
    nodes: &NodeSet,
    f: &[f64],
    g: impl Fn(&[f64]) -> f64,
) -> f64 {
    let n = f.len();
    nodes
        .iter()
        .map(|(y, w)| {
            let gy = g(y);
            if gy == 0.0 {
                0.0
            } else {
                w * h.value(&diff(f, y)[..n]) * gy
            }
        })
        .sum()
}

/// `Σ w ∇h(f − y) φ(y)` over the rule nodes.
fn gradient_sum<K: PeriodicKernel + ?Sized>(
    h: &K,
    nodes: &NodeSet,
    f: &[f64],
    phi: &Density,
) -> Vec<f64> {
    let n = f.len();
    let mut out = vec![0.0; n];
    let mut g = [0.0; MAX_DIM];
    for (y, w) in nodes.iter() {
        let p = phi.value(y);
        if p == 0.0 {
            continue;
        }
        h.gradient(&diff(f, y)[..n], &mut g[..n]);
        for j in 0..n {
            out[j] += w * g[j] * p;
        }
    }
    out
}

/// Generic form of [`potential_plus`] / [`potential_minus`].
pub fn potential<K, R>(h: &K, phi: &Density, rule: &R, x: &[f64]) -> Result<f64>
where
    K: PeriodicKernel + ?Sized,
    R: VolumeRule + ?Sized,
{
    check_kernel(h, rule.cell())?;
    let f = locate(rule, x)?;
    if phi.is_zero() {
        return Ok(0.0);
    }
    Ok(volume_sum(h, rule.nodes(), &f, |y| phi.value(y)))
}

/// `P⁺[h,φ](x)`.
pub fn potential_plus<K: PeriodicKernel + ?Sized>(
    h: &K,
    phi: &Density,
    quad: &InteriorQuadrature,
    x: &[f64],
) -> Result<f64> {
    potential(h, phi, quad, x)
}

/// `P⁻[h,φ](x)`.
pub fn potential_minus<K: PeriodicKernel + ?Sized>(
    h: &K,
    phi: &Density,
    quad: &ComplementQuadrature,
    x: &[f64],
) -> Result<f64> {
    potential(h, phi, quad, x)
}

/// `∂_j P±[h,φ](x) = P±[∂_j h, φ](x)`, the kernel route.
pub fn grad_potential<K, R>(h: &K, phi: &Density, rule: &R, x: &[f64], j: usize) -> Result<f64>
where
    K: PeriodicKernel + ?Sized,
    R: VolumeRule + ?Sized,
{
    check_axis(rule.cell(), j)?;
    Ok(gradient_potential(h, phi, rule, x)?[j])
}

/// All components of the kernel-route gradient in one pass.
pub fn gradient_potential<K, R>(h: &K, phi: &Density, rule: &R, x: &[f64]) -> Result<Vec<f64>>
where
    K: PeriodicKernel + ?Sized,
    R: VolumeRule + ?Sized,
{
    check_kernel(h, rule.cell())?;
    check_kernel_route(h)?;
    let f = locate(rule, x)?;
    if phi.is_zero() {
        return Ok(vec![0.0; f.len()]);
    }
    Ok(gradient_sum(h, rule.nodes(), &f, phi))
}

fn check_axis(cell: &PeriodicityCell, j: usize) -> Result<()> {
    if j >= cell.dim() {
        return Err(Error::InvalidParameter {
            name: "axis",
            reason: format!("axis {j} out of range for dimension {}", cell.dim()),
        });
    }
    Ok(())
}

/// `∫ ∂^γ h(x−y) ∂^δ φ(y) ν_j(y) dσ_y` with the window check
/// `dist_to_lattice(x − y) ≥ margin` at every node.
#[allow(clippy::too_many_arguments)]
fn moment<K: PeriodicKernel + ?Sized>(
    h: &K,
    phi: &Density,
    delta: &MultiIndex,
    bquad: &BoundaryQuadrature,
    j: usize,
    x: &[f64],
    gamma: &MultiIndex,
    margin: f64,
) -> Result<f64> {
    let cell = h.cell();
    let n = cell.dim();
    let mut sum = 0.0;
    for (i, (y, w, nu)) in bquad.iter().enumerate() {
        let z = diff(x, y);
        let z = &z[..n];
        let d = cell.dist_to_lattice(z);
        if d < margin {
            return Err(Error::MarginViolation {
                node: i,
                position: y.to_vec(),
                distance: d,
                margin,
            });
        }
        if nu[j] == 0.0 {
            continue;
        }
        let p = phi.derivative(y, delta);
        if p == 0.0 {
            continue;
        }
        let k = if gamma.is_zero() {
            h.value(z)
        } else {
            h.derivative(z, gamma)?
        };
        sum += w * k * p * nu[j];
    }
    Ok(sum)
}

/// `∫ h(x−y) φ(y) ν_j(y) dσ_y` over the boundary rule; the caller applies
/// the sign of the identity it is assembling.
pub fn boundary_moment<K: PeriodicKernel + ?Sized>(
    h: &K,
    phi: &Density,
    bquad: &BoundaryQuadrature,
    j: usize,
    x: &[f64],
    margin: f64,
) -> Result<f64> {
    check_axis(h.cell(), j)?;
    let n = h.cell().dim();
    moment(
        h,
        phi,
        &MultiIndex::zero(n),
        bquad,
        j,
        x,
        &MultiIndex::zero(n),
        margin,
    )
}

/// Comparison record. For bounds `pass ⇔ lhs ≤ rhs(1 + 1e−12)`; for
/// residual checks `pass ⇔ residual ≤ tolerance`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CheckRecord {
    pub lhs: f64,
    pub rhs: f64,
    pub residual: f64,
    pub pass: bool,
}

impl CheckRecord {
    /// `lhs ≤ rhs`; the residual is the slack `rhs − lhs`.
    pub fn bound(lhs: f64, rhs: f64) -> Self {
        Self {
            lhs,
            rhs,
            residual: rhs - lhs,
            pass: lhs <= rhs * (1.0 + 1e-12),
        }
    }

    /// `|lhs − rhs| ≤ tolerance`.
    pub fn residual(lhs: f64, rhs: f64, tolerance: f64) -> Self {
        let residual = (lhs - rhs).abs();
        Self {
            lhs,
            rhs,
            residual,
            pass: residual <= tolerance,
        }
    }

    /// A scalar that must stay below `tolerance`.
    pub fn at_most(value: f64, tolerance: f64) -> Self {
        Self {
            lhs: value,
            rhs: tolerance,
            residual: value,
            pass: value <= tolerance,
        }
    }

    /// A scalar that must reach at least `threshold`.
    pub fn at_least(value: f64, threshold: f64) -> Self {
        Self {
            lhs: value,
            rhs: threshold,
            residual: value - threshold,
            pass: value >= threshold,
        }
    }
}

/// Values, residuals and bound checks of a run.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct PotentialReport {
    pub values: Vec<(Vec<f64>, f64)>,
    pub residuals: BTreeMap<String, f64>,
    pub bound_checks: BTreeMap<String, CheckRecord>,
    pub metadata: BTreeMap<String, f64>,
}

impl PotentialReport {
    pub fn push_residual(&mut self, name: impl Into<String>, value: f64) -> Result<()> {
        let name = name.into();
        if !value.is_finite() {
            return Err(Error::InvalidParameter {
                name: "residual",
                reason: format!("`{name}` is not finite"),
            });
        }
        self.residuals.insert(name, value);
        Ok(())
    }

    pub fn all_pass(&self) -> bool {
        self.bound_checks.values().all(|c| c.pass)
    }
}

/// `|a − b| / max(|a|, |b|, floor)`.
pub fn relative_gap(a: f64, b: f64, floor: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(floor)
}

/// The three routes to `∂_j P±[h,φ](x)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct IdentityCheck {
    /// `P±[∂_j h, φ](x)`.
    pub kernel_route: f64,
    /// `P±[h, ∂_j φ](x)` plus the boundary terms.
    pub density_route: f64,
    /// Central difference of `P±[h,φ]`.
    pub finite_difference: f64,
    /// `∫_{∂Q} h(x−y)φ(y)(ν_Q)_j dσ`, for the complement side.
    pub cell_moment: Option<f64>,
}

impl IdentityCheck {
    /// The density route with the `∂Q` term dropped.
    pub fn ablated_density_route(&self) -> f64 {
        self.density_route + self.cell_moment.unwrap_or(0.0)
    }

    /// Largest pairwise relative gap between the three routes.
    pub fn max_residual(&self, floor: f64) -> f64 {
        let (a, b, c) = (
            self.kernel_route,
            self.density_route,
            self.finite_difference,
        );
        relative_gap(a, b, floor)
            .max(relative_gap(a, c, floor))
            .max(relative_gap(b, c, floor))
    }
}

/// A derivative from the boundary-term formula next to nested differences.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HigherDerivative {
    pub beta: Vec<u32>,
    pub formula: f64,
    pub finite_difference: f64,
}

/// Rule built by the evaluator for one point.
#[derive(Debug, Clone)]
pub enum PointRule {
    Plus(InteriorQuadrature),
    Minus(ComplementQuadrature),
}

impl VolumeRule for PointRule {
    fn side(&self) -> Side {
        match self {
            PointRule::Plus(q) => q.side(),
            PointRule::Minus(q) => q.side(),
        }
    }
    fn cell(&self) -> &PeriodicityCell {
        match self {
            PointRule::Plus(q) => VolumeRule::cell(q),
            PointRule::Minus(q) => VolumeRule::cell(q),
        }
    }
    fn domain(&self) -> Option<&DomainShape> {
        match self {
            PointRule::Plus(q) => VolumeRule::domain(q),
            PointRule::Minus(q) => VolumeRule::domain(q),
        }
    }
    fn nodes(&self) -> &NodeSet {
        match self {
            PointRule::Plus(q) => &q.nodes,
            PointRule::Minus(q) => &q.nodes,
        }
    }
    fn singular_center(&self) -> Option<&[f64]> {
        match self {
            PointRule::Plus(q) => q.singular_center.as_deref(),
            PointRule::Minus(q) => q.singular_center.as_deref(),
        }
    }
}

/// Evaluates `P±` at arbitrary points, building a rule refined at the
/// fold of each point.
///
/// `P⁺` with `Ω = ∅` is identically zero by convention. Kernels with
/// `λ > n − 1/2` need the exponent in the options
/// ([`QuadratureOptions::or_singularity`]).
#[derive(Debug, Clone)]
pub struct PotentialEvaluator {
    side: Side,
    cell: PeriodicityCell,
    domain: Option<DomainShape>,
    options: QuadratureOptions,
    domain_boundary: Option<BoundaryQuadrature>,
    cell_boundary: BoundaryQuadrature,
    window_margin: f64,
}

impl PotentialEvaluator {
    pub fn new(
        side: Side,
        cell: &PeriodicityCell,
        domain: Option<&DomainShape>,
        options: QuadratureOptions,
        boundary_resolution: usize,
    ) -> Result<Self> {
        if let Some(d) = domain {
            if d.cell() != cell {
                return Err(Error::InvalidParameter {
                    name: "domain",
                    reason: "domain was validated against a different cell".into(),
                });
            }
        }
        Ok(Self {
            side,
            cell: cell.clone(),
            domain: domain.cloned(),
            options,
            domain_boundary: domain
                .map(|d| build_boundary(d, boundary_resolution))
                .transpose()?,
            cell_boundary: build_cell_boundary(cell, boundary_resolution)?,
            window_margin: 1e-3 * cell.min_period(),
        })
    }

    /// Minimum lattice distance of kernel arguments in boundary terms.
    pub fn with_window_margin(mut self, margin: f64) -> Result<Self> {
        if !(margin > 0.0 && margin.is_finite()) {
            return Err(Error::InvalidParameter {
                name: "window_margin",
                reason: format!("must be positive, got {margin}"),
            });
        }
        self.window_margin = margin;
        Ok(self)
    }

    pub fn side(&self) -> Side {
        self.side
    }

    pub fn cell(&self) -> &PeriodicityCell {
        &self.cell
    }

    pub fn domain(&self) -> Option<&DomainShape> {
        self.domain.as_ref()
    }

    pub fn options(&self) -> &QuadratureOptions {
        &self.options
    }

    pub fn domain_boundary(&self) -> Option<&BoundaryQuadrature> {
        self.domain_boundary.as_ref()
    }

    pub fn cell_boundary(&self) -> &BoundaryQuadrature {
        &self.cell_boundary
    }

    pub fn window_margin(&self) -> f64 {
        self.window_margin
    }

    /// The rule for `x`, refined at `fold(x)`; `None` for `P⁺` with `Ω = ∅`.
    pub fn rule_at(&self, x: &[f64]) -> Result<Option<PointRule>> {
        self.cell.check_dim(x.len())?;
        let f = self.cell.fold_into_cell(x);
        in_region(&self.cell, self.domain.as_ref(), self.side, &f)?;
        Ok(match (self.side, &self.domain) {
            (Side::Plus, None) => None,
            (Side::Plus, Some(d)) => {
                Some(PointRule::Plus(build_interior(d, &self.options, Some(&f))?))
            }
            (Side::Minus, d) => Some(PointRule::Minus(build_complement(
                &self.cell,
                d.as_ref(),
                &self.options,
                Some(&f),
            )?)),
        })
    }

    pub fn value<K: PeriodicKernel + ?Sized>(
        &self,
        h: &K,
        phi: &Density,
        x: &[f64],
    ) -> Result<f64> {
        check_kernel(h, &self.cell)?;
        match self.rule_at(x)? {
            Some(r) => potential(h, phi, &r, x),
            None => Ok(0.0),
        }
    }

    /// Kernel-route gradient.
    pub fn gradient<K: PeriodicKernel + ?Sized>(
        &self,
        h: &K,
        phi: &Density,
        x: &[f64],
    ) -> Result<Vec<f64>> {
        check_kernel(h, &self.cell)?;
        check_kernel_route(h)?;
        match self.rule_at(x)? {
            Some(r) => gradient_potential(h, phi, &r, x),
            None => Ok(vec![0.0; self.cell.dim()]),
        }
    }

    /// `∫_{∂Ω} h(x−y)φ(y)(ν_Ω)_j dσ`; zero for `Ω = ∅`.
    pub fn domain_moment<K: PeriodicKernel + ?Sized>(
        &self,
        h: &K,
        phi: &Density,
        x: &[f64],
        j: usize,
    ) -> Result<f64> {
        match &self.domain_boundary {
            Some(b) => boundary_moment(
                h,
                phi,
                b,
                j,
                &self.cell.fold_into_cell(x),
                self.window_margin,
            ),
            None => Ok(0.0),
        }
    }

    /// `∫_{∂Q} h(x−y)φ(y)(ν_Q)_j dσ`.
    pub fn cell_moment<K: PeriodicKernel + ?Sized>(
        &self,
        h: &K,
        phi: &Density,
        x: &[f64],
        j: usize,
    ) -> Result<f64> {
        boundary_moment(
            h,
            phi,
            &self.cell_boundary,
            j,
            &self.cell.fold_into_cell(x),
            self.window_margin,
        )
    }

    /// `c` in `∂_j P±[h,ψ] = P±[h,∂_jψ] + c`, with `ψ = ∂^δ φ` and the whole
    /// expression differentiated by `∂^γ` in `x`:
    /// `−∫_{∂Ω}` for `P⁺`, `+∫_{∂Ω} − ∫_{∂Q}` for `P⁻`.
    fn boundary_correction<K: PeriodicKernel + ?Sized>(
        &self,
        h: &K,
        phi: &Density,
        delta: &MultiIndex,
        f: &[f64],
        j: usize,
        gamma: &MultiIndex,
    ) -> Result<f64> {
        let m = self.window_margin;
        let on_domain = match &self.domain_boundary {
            Some(b) => moment(h, phi, delta, b, j, f, gamma, m)?,
            None => 0.0,
        };
        Ok(match self.side {
            Side::Plus => -on_domain,
            Side::Minus => on_domain - moment(h, phi, delta, &self.cell_boundary, j, f, gamma, m)?,
        })
    }

    /// Compares the kernel route, the density route with boundary terms and
    /// a central difference for `∂_j P±[h,φ](x)`.
    pub fn derivative_identity<K: PeriodicKernel + ?Sized>(
        &self,
        h: &K,
        phi: &Density,
        x: &[f64],
        j: usize,
    ) -> Result<IdentityCheck> {
        check_axis(&self.cell, j)?;
        Ok(self.identities_for(h, phi, x, &[j])?.remove(0))
    }

    /// [`Self::derivative_identity`] for every axis, sharing one rule.
    pub fn derivative_identities<K: PeriodicKernel + ?Sized>(
        &self,
        h: &K,
        phi: &Density,
        x: &[f64],
    ) -> Result<Vec<IdentityCheck>> {
        let axes: Vec<usize> = (0..self.cell.dim()).collect();
        self.identities_for(h, phi, x, &axes)
    }

    fn identities_for<K: PeriodicKernel + ?Sized>(
        &self,
        h: &K,
        phi: &Density,
        x: &[f64],
        axes: &[usize],
    ) -> Result<Vec<IdentityCheck>> {
        check_kernel(h, &self.cell)?;
        check_kernel_route(h)?;
        let n = self.cell.dim();
        let f = self.cell.fold_into_cell(x);
        let rule = self.rule_at(x)?;
        let grad = match &rule {
            Some(r) => gradient_potential(h, phi, r, x)?,
            None => vec![0.0; n],
        };
        let zero = MultiIndex::zero(n);
        let mut out = Vec::with_capacity(axes.len());
        for &j in axes {
            let unit = MultiIndex::unit(n, j);
            let volume = match &rule {
                Some(r) => volume_sum(h, r.nodes(), &f, |y| phi.derivative(y, &unit)),
                None => 0.0,
            };
            let cell_moment = match self.side {
                Side::Minus => Some(self.cell_moment(h, phi, x, j)?),
                Side::Plus => None,
            };
            out.push(IdentityCheck {
                kernel_route: grad[j],
                density_route: volume + self.boundary_correction(h, phi, &zero, &f, j, &zero)?,
                finite_difference: self.finite_difference(h, phi, x, &unit)?,
                cell_moment,
            });
        }
        Ok(out)
    }

    /// `∂^β P±[h,φ](x)` from the iterated boundary-term formula:
    /// `P±[h,∂^βφ] + Σ_k Σ_{l<β_k} ∂^{γ} c_k[∂^{δ}φ]` with
    /// `γ = (0,…,0,l,β_{k+1},…,β_n)` and `δ = (β_1,…,β_{k−1},β_k−1−l,0,…,0)`.
    pub fn derivative_formula<K: PeriodicKernel + ?Sized>(
        &self,
        h: &K,
        phi: &Density,
        x: &[f64],
        beta: &MultiIndex,
    ) -> Result<f64> {
        let rule = self.rule_at(x)?;
        self.formula_with(h, phi, x, beta, rule.as_ref())
    }

    fn formula_with<K: PeriodicKernel + ?Sized>(
        &self,
        h: &K,
        phi: &Density,
        x: &[f64],
        beta: &MultiIndex,
        rule: Option<&PointRule>,
    ) -> Result<f64> {
        check_kernel(h, &self.cell)?;
        self.cell.check_dim(beta.dim())?;
        if beta.order() > 3 {
            return Err(Error::UnsupportedOrder(beta.order()));
        }
        if beta.order() > 0 && !h.is_differentiable() {
            return Err(Error::NotDifferentiable(h.name()));
        }
        let n = self.cell.dim();
        let f = self.cell.fold_into_cell(x);
        let mut total = match rule {
            Some(r) => {
                locate(r, x)?;
                volume_sum(h, r.nodes(), &f, |y| phi.derivative(y, beta))
            }
            None => 0.0,
        };
        for k in 0..n {
            for l in 0..beta.get(k) {
                let mut gamma = vec![0u32; n];
                let mut delta = vec![0u32; n];
                gamma[k] = l;
                gamma[k + 1..n].copy_from_slice(&beta.orders()[k + 1..n]);
                delta[..k].copy_from_slice(&beta.orders()[..k]);
                delta[k] = beta.get(k) - 1 - l;
                total += self.boundary_correction(
                    h,
                    phi,
                    &MultiIndex::new(&delta),
                    &f,
                    k,
                    &MultiIndex::new(&gamma),
                )?;
            }
        }
        Ok(total)
    }

    /// Nested central differences of `P±[h,φ]` with the step for `|β|`.
    pub fn finite_difference<K: PeriodicKernel + ?Sized>(
        &self,
        h: &K,
        phi: &Density,
        x: &[f64],
        beta: &MultiIndex,
    ) -> Result<f64> {
        self.cell.check_dim(beta.dim())?;
        let order = beta.order();
        if order == 0 {
            return self.value(h, phi, x);
        }
        if order > 3 {
            return Err(Error::UnsupportedOrder(order));
        }
        let step = FD_STEPS[order - 1] * self.cell.min_period();
        let mut cache = BTreeMap::new();
        self.stencil_sum(h, phi, x, &[(beta.clone(), 1.0)], step, &mut cache)
    }

    /// `Σ c_α D^α u(x)` by tensor central stencils with a shared cache of
    /// potential values keyed by integer offsets.
    fn stencil_sum<K: PeriodicKernel + ?Sized>(
        &self,
        h: &K,
        phi: &Density,
        x: &[f64],
        terms: &[(MultiIndex, f64)],
        step: f64,
        cache: &mut BTreeMap<Vec<i32>, f64>,
    ) -> Result<f64> {
        let n = x.len();
        let mut total = 0.0;
        for (alpha, c) in terms {
            if *c == 0.0 {
                continue;
            }
            let mut combos: Vec<(Vec<i32>, f64)> = vec![(vec![0; n], 1.0)];
            for j in 0..n {
                let s = stencil(alpha.get(j));
                let scale = step.powi(alpha.get(j) as i32);
                combos = combos
                    .into_iter()
                    .flat_map(|(off, w)| {
                        s.iter().map(move |&(o, sw)| {
                            let mut off = off.clone();
                            off[j] = o;
                            (off, w * sw / scale)
                        })
                    })
                    .collect();
            }
            for (off, w) in combos {
                let v = match cache.get(&off) {
                    Some(v) => *v,
                    None => {
                        let p: Vec<f64> = (0..n).map(|j| x[j] + off[j] as f64 * step).collect();
                        let v = self.value(h, phi, &p)?;
                        cache.insert(off, v);
                        v
                    }
                };
                total += c * w * v;
            }
        }
        Ok(total)
    }

    /// Formula (boundary terms) next to nested differences for `∂^β P±`.
    pub fn higher_derivative<K: PeriodicKernel + ?Sized>(
        &self,
        h: &K,
        phi: &Density,
        x: &[f64],
        beta: &MultiIndex,
    ) -> Result<HigherDerivative> {
        Ok(HigherDerivative {
            beta: beta.orders().to_vec(),
            formula: self.derivative_formula(h, phi, x, beta)?,
            finite_difference: self.finite_difference(h, phi, x, beta)?,
        })
    }

    /// `∂^β P±[h,φ](x)` for every `|β| ≤ max_order`, sharing one rule:
    /// the value for `β = 0`, the kernel route for `|β| = 1` when it
    /// applies, and the boundary-term formula otherwise.
    pub fn derivatives<K: PeriodicKernel + ?Sized>(
        &self,
        h: &K,
        phi: &Density,
        x: &[f64],
        max_order: usize,
    ) -> Result<Vec<(MultiIndex, f64)>> {
        if max_order > 3 {
            return Err(Error::UnsupportedOrder(max_order));
        }
        check_kernel(h, &self.cell)?;
        let rule = self.rule_at(x)?;
        let n = self.cell.dim();
        let kernel_route = max_order >= 1 && check_kernel_route(h).is_ok();
        let grad = match (&rule, kernel_route) {
            (Some(r), true) => Some(gradient_potential(h, phi, r, x)?),
            (None, true) => Some(vec![0.0; n]),
            _ => None,
        };
        let mut out = Vec::new();
        for beta in MultiIndex::up_to(n, max_order) {
            let v = match (beta.order(), &grad) {
                (0, _) => match &rule {
                    Some(r) => potential(h, phi, r, x)?,
                    None => 0.0,
                },
                (1, Some(g)) => g[beta.axes()[0]],
                _ => self.formula_with(h, phi, x, &beta, rule.as_ref())?,
            };
            out.push((beta, v));
        }
        Ok(out)
    }

    /// `P(D)P⁺[S,φ](x)` by central differences against
    /// `φ(x) − Σ_{z∈Z(P)} |Q|⁻¹ Re ∫_Ω e^{2πi q⁻¹z·(x−y)} φ(y) dy`,
    /// for a kernel `S` meant to be the periodic fundamental solution of `op`.
    pub fn solve_verify<K: PeriodicKernel + ?Sized>(
        &self,
        op: &EllipticOperator,
        kernel: &K,
        phi: &Density,
        x: &[f64],
        margin: f64,
        tolerance: f64,
    ) -> Result<CheckRecord> {
        check_kernel(kernel, &self.cell)?;
        self.cell.check_dim(op.dim())?;
        if self.side != Side::Plus {
            return Err(Error::InvalidParameter {
                name: "side",
                reason: "the operator check applies to the potential over the domain".into(),
            });
        }
        if !op.has_real_coefficients() {
            return Err(Error::InvalidParameter {
                name: "operator",
                reason: "finite-difference check needs real coefficients".into(),
            });
        }
        let Some(domain) = &self.domain else {
            return Err(Error::InvalidParameter {
                name: "domain",
                reason: "needs a non-empty domain".into(),
            });
        };
        let step = OPERATOR_FD_STEP * self.cell.min_period();
        if margin < 2.0 * step {
            return Err(Error::InvalidParameter {
                name: "margin",
                reason: format!("must be at least twice the difference step {step}"),
            });
        }
        let sd = domain.signed_distance_folded(x);
        if sd > -margin {
            return Err(Error::InvalidParameter {
                name: "x",
                reason: format!(
                    "point must lie in the domain at distance >= {margin} from its boundary"
                ),
            });
        }
        let zeros = op.frequency_zero_set(&self.cell, 8)?;
        if !zeros.certified_complete {
            return Err(Error::UncertifiedZeroSet {
                radius: zeros.search_bound,
            });
        }
        let terms: Vec<(MultiIndex, f64)> =
            op.coeffs().iter().map(|(a, c)| (a.clone(), c.re)).collect();
        let mut cache = BTreeMap::new();
        let lhs = self.stencil_sum(kernel, phi, x, &terms, step, &mut cache)?;

        let f = self.cell.fold_into_cell(x);
        let mut rhs = phi.value(&f);
        if !zeros.members.is_empty() {
            let rule = build_interior(domain, &self.options, None)?;
            let vol = self.cell.volume();
            for z in &zeros.members {
                let k: Vec<f64> = (0..f.len())
                    .map(|j| 2.0 * std::f64::consts::PI * z[j] as f64 / self.cell.period(j))
                    .collect();
                let s = rule.nodes.integrate(|y| {
                    let arg: f64 = (0..f.len()).map(|j| k[j] * (f[j] - y[j])).sum();
                    arg.cos() * phi.value(y)
                });
                rhs -= s / vol;
            }
        }
        Ok(CheckRecord::residual(lhs, rhs, tolerance))
    }

    /// `max_x |P±[h,φ](x)| ≤ 2ⁿ I_λ a0 sup|φ|` with `I_λ = ∫_{Q̃}|y|^{−λ}dy`
    /// and `sup|φ|` over all volume and boundary nodes used.
    pub fn sup_bound_check<K: PeriodicKernel + ?Sized>(
        &self,
        h: &K,
        phi: &Density,
        points: &[Vec<f64>],
        a0_norm: f64,
    ) -> Result<CheckRecord> {
        check_kernel(h, &self.cell)?;
        let n = self.cell.dim();
        let zero = MultiIndex::zero(n);
        let mut lhs = 0.0f64;
        let mut sup_phi = self
            .domain_boundary
            .as_ref()
            .map(|b| phi.sup_over(b.nodes.iter().map(|(y, _)| y), &zero))
            .unwrap_or(0.0);
        for x in points {
            if let Some(r) = self.rule_at(x)? {
                lhs = lhs.max(potential(h, phi, &r, x)?.abs());
                sup_phi = sup_phi.max(phi.sup_over(r.nodes().iter().map(|(y, _)| y), &zero));
            }
        }
        let i_lambda = centered_power_integral(&self.cell, h.lambda(), &self.options)?;
        let rhs = 2f64.powi(n as i32) * i_lambda * a0_norm * sup_phi;
        Ok(CheckRecord::bound(lhs, rhs))
    }
}

/// Nodes and weights of the central stencil for one axis, before dividing
/// by `step^order`.
fn stencil(order: u32) -> &'static [(i32, f64)] {
    match order {
        0 => &[(0, 1.0)],
        1 => &[(-1, -0.5), (1, 0.5)],
        2 => &[(-1, 1.0), (0, -2.0), (1, 1.0)],
        _ => &[(-2, -0.5), (-1, 1.0), (1, -1.0), (2, 0.5)],
    }
}

/// Where evaluation points are drawn from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RegionKind {
    /// Points of `Ω` at distance at least `margin` from `∂Ω`.
    Inner,
    /// Points of `Q∖clΩ` at distance at least `margin` from `∂Ω` and `∂Q`.
    Outer,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvaluationRegion {
    pub kind: RegionKind,
    pub margin: f64,
}

/// Rejection sampling gives up after this many draws per requested point.
const MAX_DRAWS_PER_POINT: usize = 100_000;

impl EvaluationRegion {
    pub fn new(kind: RegionKind, margin: f64) -> Result<Self> {
        if !(margin > 0.0 && margin.is_finite()) {
            return Err(Error::InvalidParameter {
                name: "margin",
                reason: format!("must be positive, got {margin}"),
            });
        }
        Ok(Self { kind, margin })
    }

    /// Membership of the fold of `x`.
    pub fn contains(
        &self,
        cell: &PeriodicityCell,
        domain: Option<&DomainShape>,
        x: &[f64],
    ) -> bool {
        let f = cell.fold_into_cell(x);
        match self.kind {
            RegionKind::Inner => domain.is_some_and(|d| d.signed_distance(&f) <= -self.margin),
            RegionKind::Outer => {
                let off_cell = (0..f.len())
                    .all(|j| f[j] >= self.margin && cell.period(j) - f[j] >= self.margin);
                off_cell && domain.is_none_or(|d| d.signed_distance(&f) >= self.margin)
            }
        }
    }

    /// `count` points of `[0, q)` in the region, drawn with a seeded
    /// ChaCha8 generator.
    pub fn sample(
        &self,
        cell: &PeriodicityCell,
        domain: Option<&DomainShape>,
        count: usize,
        seed: u64,
    ) -> Result<Vec<Vec<f64>>> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut out = Vec::with_capacity(count);
        let mut draws = 0usize;
        while out.len() < count {
            if draws >= MAX_DRAWS_PER_POINT * count.max(1) {
                return Err(Error::InvalidParameter {
                    name: "margin",
                    reason: format!(
                        "evaluation region with margin {} is empty or too thin",
                        self.margin
                    ),
                });
            }
            draws += 1;
            let x: Vec<f64> = cell
                .periods()
                .iter()
                .map(|q| rng.gen_range(0.0..*q))
                .collect();
            if self.contains(cell, domain, &x) {
                out.push(x);
            }
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::{
        yukawa_free_space, ConstantKernel, LaplaceEwald, SyntheticPowerKernel, YukawaPeriodic,
    };
    use std::f64::consts::PI;

    fn unit(n: usize) -> PeriodicityCell {
        PeriodicityCell::unit(n).unwrap()
    }

    fn disk() -> DomainShape {
        DomainShape::ball(&unit(2), &[0.5, 0.5], 0.25).unwrap()
    }

    fn opts() -> QuadratureOptions {
        QuadratureOptions::new(32)
    }

    #[test]
    fn zero_density_gives_zero() {
        let h = SyntheticPowerKernel::new(&unit(2), 0.5, 1.0).unwrap();
        let e = PotentialEvaluator::new(Side::Plus, &unit(2), Some(&disk()), opts(), 32).unwrap();
        assert_eq!(
            e.value(&h, &Density::constant(0.0), &[0.5, 0.6]).unwrap(),
            0.0
        );
        assert_eq!(
            e.gradient(&h, &Density::constant(0.0), &[0.1, 0.6])
                .unwrap(),
            vec![0.0, 0.0]
        );
        let m = PotentialEvaluator::new(Side::Minus, &unit(2), Some(&disk()), opts(), 32).unwrap();
        assert_eq!(
            m.value(&h, &Density::constant(0.0), &[0.1, 0.1]).unwrap(),
            0.0
        );
    }

    #[test]
    fn mismatched_center_and_boundary_points() {
        let h = SyntheticPowerKernel::new(&unit(2), 0.5, 1.0).unwrap();
        let d = disk();
        let q = build_interior(&d, &opts(), Some(&[0.5, 0.5])).unwrap();
        let phi = Density::constant(1.0);
        assert!(potential_plus(&h, &phi, &q, &[0.5, 0.5]).is_ok());
        assert!(potential_plus(&h, &phi, &q, &[1.5, -0.5]).is_ok());
        assert!(matches!(
            potential_plus(&h, &phi, &q, &[0.55, 0.5]),
            Err(Error::SingularCenterMismatch { .. })
        ));
        // Outside the domain any rule will do.
        assert!(potential_plus(&h, &phi, &q, &[0.05, 0.5]).is_ok());
        let e = PotentialEvaluator::new(Side::Plus, &unit(2), Some(&d), opts(), 32).unwrap();
        assert_eq!(e.value(&h, &phi, &[0.75, 0.5]), Err(Error::PointOnBoundary));
    }

    #[test]
    fn periodic_in_lattice_shifts() {
        let h = LaplaceEwald::auto(&unit(2)).unwrap();
        let phi = Density::bump(1.0, &[0.45, 0.5], 0.2).unwrap();
        for side in [Side::Plus, Side::Minus] {
            let e = PotentialEvaluator::new(side, &unit(2), Some(&disk()), opts(), 32).unwrap();
            for x in [[0.375, 0.5625], [0.125, 0.875]] {
                let a = e.value(&h, &phi, &x).unwrap();
                let b = e.value(&h, &phi, &[x[0] + 1.0, x[1] - 2.0]).unwrap();
                assert!(
                    (a - b).abs() <= 1e-12 * a.abs().max(1e-300),
                    "{side:?} {x:?}: {a} {b}"
                );
            }
        }
    }

    #[test]
    fn bilinear_in_kernel_and_density() {
        let c = unit(2);
        let h1 = SyntheticPowerKernel::new(&c, 0.5, 1.0).unwrap();
        let h2 = SyntheticPowerKernel::new(&c, 0.5, 3.0).unwrap();
        let p1 = Density::coordinate(2, 0);
        let p2 = Density::bump(2.0, &[0.4, 0.6], 0.3).unwrap();
        let e = PotentialEvaluator::new(Side::Plus, &c, Some(&disk()), opts(), 32).unwrap();
        let x = [0.45, 0.55];
        let v1 = e.value(&h1, &p1, &x).unwrap();
        let v2 = e.value(&h1, &p2, &x).unwrap();
        let mix = Density::combination(vec![(2.0, p1.clone()), (-0.5, p2.clone())]);
        let v = e.value(&h1, &mix, &x).unwrap();
        assert!((v - (2.0 * v1 - 0.5 * v2)).abs() <= 1e-12 * v.abs());
        // h2 = 3 h1 exactly.
        let w = e.value(&h2, &p1, &x).unwrap();
        assert!((w - 3.0 * v1).abs() <= 1e-12 * w.abs());
    }

    #[test]
    fn yukawa_matches_free_space_in_ball() {
        let c = unit(3);
        let h = YukawaPeriodic::new(&c, 20.0, 1).unwrap();
        let ball = DomainShape::ball(&c, &[0.5; 3], 0.2).unwrap();
        let q = build_interior(&ball, &QuadratureOptions::new(64), Some(&[0.5; 3])).unwrap();
        let v = potential_plus(&h, &Density::constant(1.0), &q, &[0.5; 3]).unwrap();
        let (k, r) = (20.0f64, 0.2f64);
        let exact = -(1.0 - (-k * r).exp() * (1.0 + k * r)) / (k * k);
        assert!((v - exact).abs() <= 1e-3 * exact.abs(), "{v} vs {exact}");
        // Sanity on the free-space kernel used above.
        assert!((yukawa_free_space(3, k, 0.1) + (-2.0f64).exp() / (0.4 * PI)).abs() < 1e-15);
    }

    #[test]
    fn gradient_matches_differences() {
        let c = unit(2);
        let h = LaplaceEwald::auto(&c).unwrap();
        let phi = Density::bump(1.0, &[0.5, 0.45], 0.3).unwrap();
        let e = PotentialEvaluator::new(Side::Plus, &c, Some(&disk()), opts(), 32).unwrap();
        let x = [0.52, 0.41];
        let g = e.gradient(&h, &phi, &x).unwrap();
        for j in 0..2 {
            let fd = e
                .finite_difference(&h, &phi, &x, &MultiIndex::unit(2, j))
                .unwrap();
            assert!(
                relative_gap(g[j], fd, 1e-3) <= 1e-4,
                "{j}: {} vs {fd}",
                g[j]
            );
        }
        let v = [0.6, -0.8];
        let dir = |t: f64| {
            e.value(&h, &phi, &[x[0] + t * v[0], x[1] + t * v[1]])
                .unwrap()
        };
        let fd = (dir(1e-4) - dir(-1e-4)) / 2e-4;
        let dd = v[0] * g[0] + v[1] * g[1];
        assert!(relative_gap(dd, fd, 1e-3) <= 1e-4);
    }

    #[test]
    fn kernel_route_requirements() {
        let c = unit(2);
        let h = SyntheticPowerKernel::new(&c, 1.5, 1.0).unwrap();
        let e = PotentialEvaluator::new(Side::Plus, &c, Some(&disk()), opts(), 32).unwrap();
        assert!(e
            .gradient(&h, &Density::constant(1.0), &[0.5, 0.5])
            .is_err());
        let ok = SyntheticPowerKernel::new(&c, 0.5, 1.0).unwrap();
        assert!(matches!(
            e.derivative_identity(&ok, &Density::constant(1.0), &[0.5, 0.5], 2),
            Err(Error::InvalidParameter { .. })
        ));
    }

    #[test]
    fn constant_kernel_moments_vanish() {
        let c = unit(2);
        let h = ConstantKernel::new(&c, 1.0, 0.5).unwrap();
        let b = build_boundary(&disk(), 32).unwrap();
        for j in 0..2 {
            let m = boundary_moment(&h, &Density::constant(1.0), &b, j, &[0.1, 0.1], 1e-3).unwrap();
            assert!(m.abs() <= 1e-12);
        }
    }

    #[test]
    fn cell_moment_vanishes_for_periodic_density() {
        let c = unit(2);
        let h = LaplaceEwald::auto(&c).unwrap();
        let b = build_cell_boundary(&c, 32).unwrap();
        let phi = Density::trig(&c, 1.0, &[1, 0], 0.0).unwrap();
        for j in 0..2 {
            let m = boundary_moment(&h, &phi, &b, j, &[0.3, 0.6], 1e-3).unwrap();
            assert!(m.abs() <= 1e-10, "{m}");
        }
    }

    #[test]
    fn margin_violation_names_node() {
        let c = unit(2);
        let h = LaplaceEwald::auto(&c).unwrap();
        let b = build_boundary(&disk(), 32).unwrap();
        match boundary_moment(&h, &Density::constant(1.0), &b, 0, &[0.749, 0.5], 0.01) {
            Err(Error::MarginViolation {
                distance, margin, ..
            }) => assert!(distance < margin),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn trapezoid_moment_converges_fast() {
        // Smooth kernel evaluated on the circle: spectral convergence.
        let c = unit(2);
        let h = LaplaceEwald::auto(&c).unwrap();
        let phi = Density::bump(1.0, &[0.6, 0.5], 0.2).unwrap();
        let x = [0.5, 0.95];
        let m = |res| {
            boundary_moment(
                &h,
                &phi,
                &build_boundary(&disk(), res).unwrap(),
                1,
                &x,
                1e-3,
            )
            .unwrap()
        };
        let reference = m(256);
        let e16 = (m(16) - reference).abs();
        let e32 = (m(32) - reference).abs();
        assert!(e32 <= e16 / 4.0 || e32 < 1e-14, "{e16} {e32}");
    }

    #[test]
    fn plus_identity_three_routes() {
        let c = unit(2);
        let h = SyntheticPowerKernel::new(&c, 0.5, 1.0).unwrap();
        let phi = Density::coordinate(2, 0);
        let e = PotentialEvaluator::new(Side::Plus, &c, Some(&disk()), opts(), 64).unwrap();
        for x in [[0.55, 0.45], [0.1, 0.2]] {
            for j in 0..2 {
                let r = e.derivative_identity(&h, &phi, &x, j).unwrap();
                assert!(r.max_residual(1e-3) <= 1e-4, "{x:?} {j}: {r:?}");
            }
        }
        // Constant density: only the boundary term is left.
        let one = Density::constant(1.0);
        let r = e.derivative_identity(&h, &one, &[0.4, 0.5], 0).unwrap();
        let m = e.domain_moment(&h, &one, &[0.4, 0.5], 0).unwrap();
        assert!((r.density_route + m).abs() <= 1e-15);
    }

    #[test]
    fn minus_identity_and_cell_term() {
        let c = unit(2);
        let h = SyntheticPowerKernel::new(&c, 0.5, 1.0).unwrap();
        let e = PotentialEvaluator::new(Side::Minus, &c, Some(&disk()), opts(), 64).unwrap();
        let x = [0.15, 0.3];
        let periodic = Density::trig(&c, 1.0, &[1, 0], 0.0).unwrap();
        let r = e.derivative_identity(&h, &periodic, &x, 0).unwrap();
        assert!(r.cell_moment.unwrap().abs() <= 1e-10);
        assert!(r.max_residual(1e-3) <= 1e-4, "{r:?}");

        let lin = Density::coordinate(2, 0);
        let r = e.derivative_identity(&h, &lin, &x, 0).unwrap();
        assert!(r.max_residual(1e-3) <= 1e-4, "{r:?}");
        assert!(relative_gap(r.kernel_route, r.ablated_density_route(), 1e-3) >= 1e-2);

        // Ω = ∅.
        let all = PotentialEvaluator::new(Side::Minus, &c, None, opts(), 64).unwrap();
        let r = all.derivative_identity(&h, &lin, &x, 0).unwrap();
        assert!(r.max_residual(1e-3) <= 1e-4, "{r:?}");
    }

    #[test]
    fn higher_derivative_formula() {
        let c = unit(2);
        let h = LaplaceEwald::auto(&c).unwrap();
        let phi = Density::poly(
            2,
            &[
                (MultiIndex::new(&[1, 1]), 1.0),
                (MultiIndex::new(&[2, 0]), 0.5),
            ],
        )
        .unwrap();
        let e = PotentialEvaluator::new(Side::Plus, &c, Some(&disk()), opts(), 64).unwrap();
        let x = [0.48, 0.55];
        // Order one reproduces the density route.
        let id = e.derivative_identity(&h, &phi, &x, 1).unwrap();
        let f1 = e
            .derivative_formula(&h, &phi, &x, &MultiIndex::unit(2, 1))
            .unwrap();
        assert!((f1 - id.density_route).abs() <= 1e-14 * f1.abs().max(1.0));
        for beta in [[2, 0], [1, 1], [0, 2]] {
            let d = e
                .higher_derivative(&h, &phi, &x, &MultiIndex::new(&beta))
                .unwrap();
            assert!(
                relative_gap(d.formula, d.finite_difference, 1e-2) <= 5e-3,
                "{d:?}"
            );
        }
        assert_eq!(
            e.derivative_formula(&h, &phi, &x, &MultiIndex::new(&[2, 2])),
            Err(Error::UnsupportedOrder(4))
        );
    }

    #[test]
    fn solve_verify_laplace_2d() {
        let c = unit(2);
        let h = LaplaceEwald::auto(&c).unwrap();
        let d = DomainShape::ball(&c, &[0.5, 0.5], 0.2).unwrap();
        let e = PotentialEvaluator::new(Side::Plus, &c, Some(&d), opts(), 32).unwrap();
        let op = EllipticOperator::laplace(2).unwrap();
        let r = e
            .solve_verify(&op, &h, &Density::constant(1.0), &[0.55, 0.48], 0.05, 1e-3)
            .unwrap();
        assert!((r.rhs - (1.0 - PI * 0.04)).abs() < 1e-10);
        assert!(r.pass, "{r:?}");
        let z = e
            .solve_verify(&op, &h, &Density::constant(0.0), &[0.55, 0.48], 0.05, 1e-3)
            .unwrap();
        assert_eq!((z.lhs, z.rhs), (0.0, 0.0));
    }

    #[test]
    fn sup_bound_scales() {
        let c = unit(2);
        let h1 = SyntheticPowerKernel::new(&c, 1.0, 1.0).unwrap();
        let h2 = SyntheticPowerKernel::new(&c, 1.0, 2.0).unwrap();
        let e = PotentialEvaluator::new(Side::Plus, &c, Some(&disk()), opts(), 32).unwrap();
        let pts = EvaluationRegion::new(RegionKind::Outer, 0.05)
            .unwrap()
            .sample(&c, Some(&disk()), 3, 7)
            .unwrap();
        let one = Density::constant(1.0);
        let a = e.sup_bound_check(&h1, &one, &pts, 3.0 * PI / 2.0).unwrap();
        let b = e.sup_bound_check(&h2, &one, &pts, 3.0 * PI).unwrap();
        assert!(a.pass && b.pass);
        assert!((b.lhs - 2.0 * a.lhs).abs() <= 1e-12 * b.lhs);
        assert!((b.rhs - 2.0 * a.rhs).abs() <= 1e-12 * b.rhs);
        let s = e
            .sup_bound_check(&h1, &one.clone().scaled(-5.0), &pts, 3.0 * PI / 2.0)
            .unwrap();
        assert!((s.lhs - 5.0 * a.lhs).abs() <= 1e-12 * s.lhs);
        assert!((s.rhs - 5.0 * a.rhs).abs() <= 1e-12 * s.rhs);
    }

    #[test]
    fn region_sampling() {
        let c = unit(2);
        let d = disk();
        let inner = EvaluationRegion::new(RegionKind::Inner, 0.05).unwrap();
        let outer = EvaluationRegion::new(RegionKind::Outer, 0.05).unwrap();
        for p in inner.sample(&c, Some(&d), 50, 1).unwrap() {
            assert!(d.signed_distance(&p) <= -0.05);
        }
        for p in outer.sample(&c, Some(&d), 50, 1).unwrap() {
            assert!(d.signed_distance(&p) >= 0.05);
            assert!(p.iter().all(|&v| (0.05..=0.95).contains(&v)));
        }
        assert_eq!(
            inner.sample(&c, Some(&d), 5, 9).unwrap(),
            inner.sample(&c, Some(&d), 5, 9).unwrap()
        );
        assert!(inner.sample(&c, None, 1, 0).is_err());
        assert!(EvaluationRegion::new(RegionKind::Inner, 0.0).is_err());
    }
}
