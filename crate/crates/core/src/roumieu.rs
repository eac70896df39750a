//! Finite-order Roumieu seminorms
//!
//! `sup_{|β| ≤ m} ρ^{|β|}/|β|! sup|∂^β u|` estimated on sample sets, the kernel
//! class norm `‖h‖_{A¹} + ‖h‖_{C⁰_{ω,ρ}(window)}`, empirical probes of the
//! continuity of `(h, φ) ↦ P⁺[h,φ]`, and the absolute-continuity modulus
//! `δ ↦ sup_{m(E) ≤ δ} ∫_E |h(x−y)| dy`.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::cell::{dist, unit_ball_volume, PeriodicityCell};
use crate::density::Density;
use crate::error::{Error, Result};
use crate::kernels::{
    estimate_norms, norm_samples, shell_directions, LaplaceEwald, PeriodicKernel,
    SyntheticPowerKernel,
};
use crate::multi_index::{factorial, MultiIndex};
use crate::potentials::{CheckRecord, EvaluationRegion, PotentialEvaluator, RegionKind, Side};
use crate::quadrature::{
    ball_rule, build_interior, centered_power_integral, DomainShape, QuadratureOptions,
};

/// Highest derivative order used in the truncated seminorms.
pub const MAX_ROUMIEU_ORDER: usize = 3;

/// Dyadic shells used for the `A¹` part of the kernel class norm.
const NORM_SHELLS: usize = 10;

/// Truncated Roumieu seminorm with the per-index sups it was built from.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RoumieuEstimate {
    pub rho: f64,
    pub max_order: usize,
    pub value: f64,
    #[serde(serialize_with = "orders")]
    pub attaining_beta: MultiIndex,
    /// `sup |∂^β u|` over the sample set for every `|β| ≤ max_order`.
    #[serde(skip)]
    pub sups: Vec<(MultiIndex, f64)>,
}

fn orders<S: serde::Serializer>(b: &MultiIndex, s: S) -> std::result::Result<S::Ok, S::Error> {
    s.collect_seq(b.orders())
}

fn check_rho_order(rho: f64, max_order: usize) -> Result<()> {
    if !(rho > 0.0 && rho.is_finite()) {
        return Err(Error::InvalidParameter {
            name: "rho",
            reason: format!("must be positive, got {rho}"),
        });
    }
    if max_order > MAX_ROUMIEU_ORDER {
        return Err(Error::UnsupportedOrder(max_order));
    }
    Ok(())
}

impl RoumieuEstimate {
    /// Builds the estimate from per-index sups; indices above `max_order`
    /// are ignored.
    pub fn from_sups(sups: Vec<(MultiIndex, f64)>, rho: f64, max_order: usize) -> Result<Self> {
        check_rho_order(rho, max_order)?;
        let Some((first, _)) = sups.first() else {
            return Err(Error::InvalidParameter {
                name: "sups",
                reason: "empty".into(),
            });
        };
        let mut best = (*first, f64::NEG_INFINITY);
        for (beta, s) in &sups {
            let k = beta.order();
            if k > max_order {
                continue;
            }
            let v = rho.powi(k as i32) / factorial(k) * s;
            if v > best.1 {
                best = (*beta, v);
            }
        }
        Ok(Self {
            rho,
            max_order,
            value: best.1,
            attaining_beta: best.0,
            sups,
        })
    }

    /// The same sups weighed with another `ρ` or truncated at another order.
    pub fn reweigh(&self, rho: f64, max_order: usize) -> Result<Self> {
        if max_order > self.max_order {
            return Err(Error::InvalidParameter {
                name: "max_order",
                reason: format!("sups only available up to order {}", self.max_order),
            });
        }
        Self::from_sups(self.sups.clone(), rho, max_order)
    }

    /// `sup |∂^β u|` for one index.
    pub fn sup(&self, beta: &MultiIndex) -> Option<f64> {
        self.sups.iter().find(|(b, _)| b == beta).map(|(_, s)| *s)
    }
}

/// Per-index sups of `|∂^β u|` over `points`; `eval(x)` returns the
/// derivatives for `MultiIndex::up_to(dim, max_order)` in that order.
pub fn derivative_sups<F>(
    points: &[Vec<f64>],
    dim: usize,
    max_order: usize,
    mut eval: F,
) -> Result<Vec<(MultiIndex, f64)>>
where
    F: FnMut(&[f64]) -> Result<Vec<f64>>,
{
    let betas = MultiIndex::up_to(dim, max_order);
    let mut sups = vec![0.0f64; betas.len()];
    for x in points {
        let d = eval(x)?;
        for (s, v) in sups.iter_mut().zip(d) {
            *s = s.max(v.abs());
        }
    }
    Ok(betas.into_iter().zip(sups).collect())
}

/// Truncated Roumieu seminorm of `u` over `points`, with `u(x, β) = ∂^β u(x)`.
pub fn roumieu_seminorm<F>(
    u: F,
    points: &[Vec<f64>],
    rho: f64,
    max_order: usize,
) -> Result<RoumieuEstimate>
where
    F: Fn(&[f64], &MultiIndex) -> f64,
{
    check_rho_order(rho, max_order)?;
    let dim = points.first().map_or(0, Vec::len);
    if !(2..=3).contains(&dim) {
        return Err(Error::UnsupportedDimension(dim));
    }
    let betas = MultiIndex::up_to(dim, max_order);
    let sups = derivative_sups(points, dim, max_order, |x| {
        Ok(betas.iter().map(|b| u(x, b)).collect())
    })?;
    RoumieuEstimate::from_sups(sups, rho, max_order)
}

/// Seminorm of a density on the given points.
pub fn density_seminorm(
    phi: &Density,
    points: &[Vec<f64>],
    rho: f64,
    max_order: usize,
) -> Result<RoumieuEstimate> {
    roumieu_seminorm(|x, b| phi.derivative(x, b), points, rho, max_order)
}

/// Sample set of the window `{x : dist(x, qZⁿ) ≥ margin}` in the centred
/// cell: a vertex grid plus spheres of radii `margin·{1, 1.25, 1.5, 2}`
/// where kernel derivatives are largest.
pub fn window_samples(
    cell: &PeriodicityCell,
    margin: f64,
    samples_per_axis: usize,
) -> Result<Vec<Vec<f64>>> {
    if !(margin > 0.0 && margin < 0.5 * cell.min_period()) {
        return Err(Error::InvalidParameter {
            name: "window_margin",
            reason: format!("must lie in ]0, q_min/2[, got {margin}"),
        });
    }
    let mut out: Vec<Vec<f64>> = norm_samples(cell, samples_per_axis, 0)
        .into_iter()
        .filter(|x| cell.dist_to_lattice(x) >= margin)
        .collect();
    let dirs = shell_directions(cell.dim(), 4 * samples_per_axis.div_ceil(4));
    for f in [1.0, 1.25, 1.5, 2.0] {
        let r = f * margin;
        if r < 0.5 * cell.min_period() {
            out.extend(
                dirs.iter()
                    .map(|d| d.iter().map(|v| r * v).collect::<Vec<f64>>()),
            );
        }
    }
    Ok(out)
}

/// Seminorm of a kernel restricted to the window of the given margin.
pub fn kernel_window_seminorm<K: PeriodicKernel + ?Sized>(
    h: &K,
    window_margin: f64,
    samples_per_axis: usize,
    rho: f64,
    max_order: usize,
) -> Result<RoumieuEstimate> {
    check_rho_order(rho, max_order)?;
    if max_order > 0 && !h.is_differentiable() {
        return Err(Error::NotDifferentiable(h.name()));
    }
    let cell = h.cell();
    let points = window_samples(cell, window_margin, samples_per_axis)?;
    let betas = MultiIndex::up_to(cell.dim(), max_order);
    let sups = derivative_sups(&points, cell.dim(), max_order, |x| {
        betas.iter().map(|b| h.derivative(x, b)).collect()
    })?;
    RoumieuEstimate::from_sups(sups, rho, max_order)
}

/// `‖h‖_{A¹} + ‖h‖_{C⁰_{ω,ρ}(window)}` with its parts.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KernelClassNorm {
    pub a0_norm: f64,
    pub a1_norm: f64,
    pub window: RoumieuEstimate,
    pub value: f64,
}

pub fn kernel_class_norm<K: PeriodicKernel + ?Sized>(
    h: &K,
    rho: f64,
    window_margin: f64,
    max_order: usize,
    samples_per_axis: usize,
) -> Result<KernelClassNorm> {
    if !h.is_differentiable() {
        return Err(Error::NotDifferentiable(h.name()));
    }
    let est = estimate_norms(h, samples_per_axis, NORM_SHELLS)?;
    let a1 = est
        .a1_norm
        .ok_or_else(|| Error::NotDifferentiable(h.name()))?;
    let window = kernel_window_seminorm(h, window_margin, samples_per_axis, rho, max_order)?;
    Ok(KernelClassNorm {
        a0_norm: est.a0_norm,
        a1_norm: a1,
        value: a1 + window.value,
        window,
    })
}

/// One `(h, φ, Ω, Ω₁)` of a continuity probe; `Ω₁` is the set of points of
/// `Ω` at distance at least `inner_margin` from `∂Ω`.
#[derive(Clone)]
pub struct ProbeInstance {
    pub kernel: Arc<dyn PeriodicKernel>,
    pub density: Density,
    pub domain: DomainShape,
    pub inner_margin: f64,
}

impl std::fmt::Debug for ProbeInstance {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ProbeInstance")
            .field("kernel", &self.kernel.name())
            .field("density", &self.density)
            .field("domain", self.domain.shape())
            .field("inner_margin", &self.inner_margin)
            .finish()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ProbeSettings {
    pub options: QuadratureOptions,
    pub boundary_resolution: usize,
    /// Evaluation points drawn from `Ω₁` per instance.
    pub points: usize,
    pub seed: u64,
    /// Grid density for kernel norms.
    pub samples_per_axis: usize,
}

impl Default for ProbeSettings {
    fn default() -> Self {
        Self {
            options: QuadratureOptions::new(32),
            boundary_resolution: 64,
            points: 8,
            seed: 0,
            samples_per_axis: 32,
        }
    }
}

/// Per-order comparison `sup|∂^β P⁺| ≤ 2ⁿ I_λ a0 sup|∂^β φ| + n ρ m(∂Ω) ‖h‖ ‖φ‖ |β|!/ρ^{|β|}`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OrderBound {
    #[serde(serialize_with = "orders")]
    pub beta: MultiIndex,
    pub check: CheckRecord,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InstanceReport {
    pub kernel: String,
    pub potential: RoumieuEstimate,
    pub density: RoumieuEstimate,
    pub kernel_norm: KernelClassNorm,
    /// `‖P⁺‖_ρ / (‖h‖ ‖φ‖)`; `None` when the denominator vanishes.
    pub ratio: Option<f64>,
    pub bounds: Vec<OrderBound>,
    pub note: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProbeReport {
    pub rho: f64,
    pub max_order: usize,
    /// Largest ratio over the non-degenerate instances.
    pub constant: f64,
    pub instances: Vec<InstanceReport>,
}

impl ProbeReport {
    pub fn all_bounds_pass(&self) -> bool {
        self.instances
            .iter()
            .flat_map(|i| &i.bounds)
            .all(|b| b.check.pass)
    }

    /// Smallest relative slack `(rhs − lhs)/rhs` over all order bounds.
    pub fn min_slack(&self) -> f64 {
        self.instances
            .iter()
            .flat_map(|i| &i.bounds)
            .map(|b| {
                if b.check.rhs > 0.0 {
                    b.check.residual / b.check.rhs
                } else {
                    0.0
                }
            })
            .fold(f64::INFINITY, f64::min)
    }
}

/// Empirical continuity constant of `(h, φ) ↦ P⁺[h,φ]` in the truncated
/// Roumieu norms, with the explicit per-order bound from the boundary-term
/// formula. Derivatives of the potential come from the kernel route
/// (order 1) and the boundary-term formula (orders 2, 3).
pub fn continuity_probe(
    instances: &[ProbeInstance],
    rho: f64,
    max_order: usize,
    settings: &ProbeSettings,
) -> Result<ProbeReport> {
    check_rho_order(rho, max_order)?;
    let mut reports = Vec::with_capacity(instances.len());
    let mut constant = 0.0f64;
    for (idx, inst) in instances.iter().enumerate() {
        let r = probe_instance(
            inst,
            rho,
            max_order,
            settings,
            settings.seed.wrapping_add(idx as u64),
        )?;
        if let Some(c) = r.ratio {
            constant = constant.max(c);
        }
        reports.push(r);
    }
    Ok(ProbeReport {
        rho,
        max_order,
        constant,
        instances: reports,
    })
}

fn probe_instance(
    inst: &ProbeInstance,
    rho: f64,
    max_order: usize,
    settings: &ProbeSettings,
    seed: u64,
) -> Result<InstanceReport> {
    let h = inst.kernel.as_ref();
    let domain = &inst.domain;
    let cell = domain.cell();
    let n = cell.dim();
    let evaluator = PotentialEvaluator::new(
        Side::Plus,
        cell,
        Some(domain),
        settings.options.or_singularity(h.lambda()),
        settings.boundary_resolution,
    )?
    .with_window_margin(inst.inner_margin)?;

    let region = EvaluationRegion::new(RegionKind::Inner, inst.inner_margin)?;
    let points = region.sample(cell, Some(domain), settings.points, seed)?;
    let pot_sups = derivative_sups(&points, n, max_order, |x| {
        Ok(evaluator
            .derivatives(h, &inst.density, x, max_order)?
            .into_iter()
            .map(|(_, v)| v)
            .collect())
    })?;
    let potential = RoumieuEstimate::from_sups(pot_sups, rho, max_order)?;

    // sup over clΩ: volume nodes and boundary nodes.
    let mut closure: Vec<Vec<f64>> = build_interior(domain, &settings.options, None)?
        .nodes
        .iter()
        .map(|(y, _)| y.to_vec())
        .collect();
    if let Some(b) = evaluator.domain_boundary() {
        closure.extend(b.nodes.iter().map(|(y, _)| y.to_vec()));
    }
    let density = density_seminorm(&inst.density, &closure, rho, max_order)?;
    let kernel_norm = kernel_class_norm(
        h,
        rho,
        inst.inner_margin,
        max_order,
        settings.samples_per_axis,
    )?;

    let denom = kernel_norm.value * density.value;
    if denom == 0.0 {
        return Ok(InstanceReport {
            kernel: h.name(),
            potential,
            density,
            kernel_norm,
            ratio: None,
            bounds: Vec::new(),
            note: Some("zero kernel or density norm; skipped".into()),
        });
    }

    let i_lambda = centered_power_integral(cell, h.lambda(), &settings.options)?;
    let volume_factor = 2f64.powi(n as i32) * i_lambda * kernel_norm.a0_norm;
    let surface = n as f64 * rho * domain.boundary_measure() * denom;
    let bounds = potential
        .sups
        .iter()
        .map(|(beta, lhs)| {
            let k = beta.order();
            let phi_sup = density.sup(beta).unwrap_or(0.0);
            let rhs = volume_factor * phi_sup + surface * factorial(k) / rho.powi(k as i32);
            OrderBound {
                beta: *beta,
                check: CheckRecord::bound(*lhs, rhs),
            }
        })
        .collect();
    Ok(InstanceReport {
        kernel: h.name(),
        ratio: Some(potential.value / denom),
        potential,
        density,
        kernel_norm,
        bounds,
        note: None,
    })
}

/// Random admissible probe instances: synthetic or (for `n = 2`) Ewald
/// Laplace kernels, ball or box domains, and bump, trigonometric or
/// polynomial densities.
pub fn random_instances(
    cell: &PeriodicityCell,
    count: usize,
    seed: u64,
) -> Result<Vec<ProbeInstance>> {
    let n = cell.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(count);
    for _ in 0..count {
        let kernel: Arc<dyn PeriodicKernel> = if n == 2 && rng.gen_bool(0.3) {
            Arc::new(LaplaceEwald::auto(cell)?)
        } else {
            let lambda = rng.gen_range(0.2..(n as f64 - 1.1));
            let scale = rng.gen_range(0.5..2.0) * if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
            Arc::new(SyntheticPowerKernel::new(cell, lambda, scale)?)
        };
        let center: Vec<f64> = cell
            .periods()
            .iter()
            .map(|q| q * rng.gen_range(0.4..0.6))
            .collect();
        let q = cell.min_period();
        let (domain, size) = if rng.gen_bool(0.5) {
            let r = q * rng.gen_range(0.15..0.3);
            (DomainShape::ball(cell, &center, r)?, r)
        } else {
            let half: Vec<f64> = (0..n).map(|_| q * rng.gen_range(0.15..0.3)).collect();
            let lo: Vec<f64> = center.iter().zip(&half).map(|(c, h)| c - h).collect();
            let hi: Vec<f64> = center.iter().zip(&half).map(|(c, h)| c + h).collect();
            let s = half.iter().cloned().fold(f64::INFINITY, f64::min);
            (DomainShape::cuboid(cell, &lo, &hi)?, s)
        };
        let density = match rng.gen_range(0..3) {
            0 => {
                let c: Vec<f64> = cell
                    .periods()
                    .iter()
                    .map(|q| q * rng.gen_range(0.3..0.7))
                    .collect();
                Density::bump(rng.gen_range(0.5..2.0), &c, q * rng.gen_range(0.2..0.5))?
            }
            1 => {
                let mut modes: Vec<i32> = (0..n).map(|_| rng.gen_range(-1..=1)).collect();
                if modes.iter().all(|&m| m == 0) {
                    modes[0] = 1;
                }
                Density::trig(
                    cell,
                    rng.gen_range(0.5..2.0),
                    &modes,
                    rng.gen_range(0.0..6.28),
                )?
            }
            _ => {
                let terms: Vec<(MultiIndex, f64)> = MultiIndex::up_to(n, 2)
                    .into_iter()
                    .map(|b| (b, rng.gen_range(-1.0..1.0)))
                    .collect();
                Density::poly(n, &terms)?
            }
        };
        out.push(ProbeInstance {
            kernel,
            density,
            domain,
            inner_margin: size * rng.gen_range(0.2..0.4),
        });
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AcperSettings {
    /// Random evaluation points `x`.
    pub points: usize,
    /// Random balls per measure, each placed near one of the points.
    pub random_balls: usize,
    pub seed: u64,
    pub options: QuadratureOptions,
}

impl Default for AcperSettings {
    fn default() -> Self {
        Self {
            points: 50,
            random_balls: 20,
            seed: 0,
            options: QuadratureOptions::new(32),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AcperEntry {
    pub delta: f64,
    /// Radius of the balls of measure `delta`.
    pub radius: f64,
    /// `∫_{B(0,r)} |h|`, the ball centred at the singularity.
    pub centered: f64,
    /// Largest value over the centred ball and the random balls.
    pub worst: f64,
}

/// `∫_{B(c,r)} |h(x−y)| dy` with the rule refined at every lattice image of
/// `x` that comes near the ball.
fn ball_integral<K: PeriodicKernel + ?Sized>(
    h: &K,
    x: &[f64],
    c: &[f64],
    r: f64,
    options: &QuadratureOptions,
) -> Result<f64> {
    let cell = h.cell();
    let n = cell.dim();
    let reach = r + cell.max_period();
    let span = (reach / cell.min_period()).ceil() as i64 + 1;
    let mut foci = Vec::new();
    let count = (2 * span + 1).pow(n as u32);
    for idx in 0..count {
        let mut rem = idx;
        let p: Vec<f64> = (0..n)
            .map(|j| {
                let z = (rem % (2 * span + 1)) as i64 - span;
                rem /= 2 * span + 1;
                x[j] + z as f64 * cell.period(j)
            })
            .collect();
        if dist(&p, c) <= r + 0.5 * cell.max_period() {
            foci.push(p);
        }
    }
    let rule = ball_rule(c, r, &foci, 2.0 * r, &options.or_singularity(h.lambda()))?;
    Ok(rule.integrate(|y| {
        let z: Vec<f64> = (0..n).map(|j| x[j] - y[j]).collect();
        h.value(&z).abs()
    }))
}

/// For each measure `δ` (decreasing, at most `m(Q)`), the largest
/// `∫_E |h(x−y)| dy` over balls `E` of measure `δ`: the ball centred at the
/// singularity (the same for every `x`) and random balls near random points.
pub fn acper_modulus<K: PeriodicKernel + ?Sized>(
    h: &K,
    deltas: &[f64],
    settings: &AcperSettings,
) -> Result<Vec<AcperEntry>> {
    let cell = h.cell();
    let n = cell.dim();
    for (i, &d) in deltas.iter().enumerate() {
        if !(d > 0.0 && d <= cell.volume()) {
            return Err(Error::InvalidParameter {
                name: "delta",
                reason: format!("measures must lie in ]0, m(Q)], got {d}"),
            });
        }
        if i > 0 && d > deltas[i - 1] {
            return Err(Error::InvalidParameter {
                name: "delta",
                reason: "measures must be listed in decreasing order".into(),
            });
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(settings.seed);
    let xs: Vec<Vec<f64>> = (0..settings.points.max(1))
        .map(|_| {
            cell.periods()
                .iter()
                .map(|q| rng.gen_range(0.0..*q))
                .collect()
        })
        .collect();
    let zero = vec![0.0; n];
    let mut out = Vec::with_capacity(deltas.len());
    for &delta in deltas {
        let r = (delta / unit_ball_volume(n)).powf(1.0 / n as f64);
        let centered = ball_integral(h, &zero, &zero, r, &settings.options)?;
        let mut worst = centered;
        for _ in 0..settings.random_balls {
            let x = &xs[rng.gen_range(0..xs.len())];
            let dir: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let len = dir.iter().map(|v| v * v).sum::<f64>().sqrt().max(1e-12);
            let s = rng.gen_range(0.0..2.0) * r;
            let c: Vec<f64> = (0..n).map(|j| x[j] + s * dir[j] / len).collect();
            worst = worst.max(ball_integral(h, x, &c, r, &settings.options)?);
        }
        out.push(AcperEntry {
            delta,
            radius: r,
            centered,
            worst,
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::{ConstantKernel, LinearCombination};
    use crate::quadrature::ball_power_integral;
    use std::f64::consts::PI;

    fn grid(n: usize, m: usize) -> Vec<Vec<f64>> {
        norm_samples(&PeriodicityCell::unit(n).unwrap(), m, 0)
            .into_iter()
            .map(|x| x.iter().map(|v| v + 0.5).collect())
            .collect()
    }

    #[test]
    fn constant_function() {
        let e = roumieu_seminorm(
            |_, b| if b.is_zero() { -2.5 } else { 0.0 },
            &grid(2, 8),
            0.7,
            3,
        )
        .unwrap();
        assert_eq!(e.value, 2.5);
        assert!(e.attaining_beta.is_zero());
    }

    #[test]
    fn sine_orders() {
        let u = |x: &[f64], b: &MultiIndex| {
            if (1..x.len()).any(|j| b.get(j) > 0) {
                return 0.0;
            }
            let k = b.get(0) as f64;
            (2.0 * PI).powf(k) * (2.0 * PI * x[0] + k * PI / 2.0).sin()
        };
        let pts = grid(2, 16);
        let small = roumieu_seminorm(u, &pts, 0.1, 3).unwrap();
        assert!((small.value - 1.0).abs() < 1e-12);
        assert!(small.attaining_beta.is_zero());
        let big = roumieu_seminorm(u, &pts, 1.0, 3).unwrap();
        assert_eq!(big.attaining_beta.order(), 3);
        assert!((big.value - (2.0 * PI).powi(3) / 6.0).abs() < 1e-9);
    }

    #[test]
    fn monotone_in_rho_and_order() {
        let phi = Density::bump(1.0, &[0.5, 0.5], 0.3).unwrap();
        let e = density_seminorm(&phi, &grid(2, 16), 0.5, 3).unwrap();
        let mut last = 0.0;
        for rho in [0.05, 0.1, 0.2, 0.5] {
            let mut prev = 0.0;
            for m in 0..=3 {
                let v = e.reweigh(rho, m).unwrap().value;
                assert!(v >= prev);
                prev = v;
            }
            assert!(prev >= last);
            last = prev;
        }
        assert!(e.value >= e.sup(&MultiIndex::zero(2)).unwrap());
    }

    #[test]
    fn kernel_norm_zero_and_scaling() {
        let c = PeriodicityCell::unit(2).unwrap();
        let zero = ConstantKernel::new(&c, 0.0, 0.5).unwrap();
        assert_eq!(
            kernel_class_norm(&zero, 0.1, 0.1, 3, 16).unwrap().value,
            0.0
        );
        let a = kernel_class_norm(
            &SyntheticPowerKernel::new(&c, 0.5, 1.0).unwrap(),
            0.1,
            0.1,
            3,
            16,
        )
        .unwrap();
        let b = kernel_class_norm(
            &SyntheticPowerKernel::new(&c, 0.5, -3.0).unwrap(),
            0.1,
            0.1,
            3,
            16,
        )
        .unwrap();
        assert!((b.value - 3.0 * a.value).abs() <= 1e-12 * b.value);
        assert!(kernel_class_norm(&LaplaceEwald::auto(&c).unwrap(), 0.1, 0.6, 3, 16).is_err());
    }

    #[test]
    fn kernel_norm_triangle_inequality() {
        let c = PeriodicityCell::unit(2).unwrap();
        let h1: Arc<dyn PeriodicKernel> =
            Arc::new(SyntheticPowerKernel::new(&c, 0.5, 1.0).unwrap());
        let h2: Arc<dyn PeriodicKernel> = Arc::new(LaplaceEwald::auto(&c).unwrap());
        let sum = LinearCombination::new(vec![(1.0, h1.clone()), (-2.0, h2.clone())]).unwrap();
        let n = |h: &dyn PeriodicKernel| kernel_class_norm(h, 0.1, 0.1, 3, 16).unwrap().value;
        assert!(n(&sum) <= (n(h1.as_ref()) + 2.0 * n(h2.as_ref())) * (1.0 + 1e-12));
    }

    #[test]
    fn probe_skips_zero_density_and_is_scale_free() {
        let c = PeriodicityCell::unit(2).unwrap();
        let d = DomainShape::ball(&c, &[0.5, 0.5], 0.2).unwrap();
        let settings = ProbeSettings {
            points: 3,
            ..ProbeSettings::default()
        };
        let k1: Arc<dyn PeriodicKernel> =
            Arc::new(SyntheticPowerKernel::new(&c, 0.5, 1.0).unwrap());
        let k2: Arc<dyn PeriodicKernel> =
            Arc::new(SyntheticPowerKernel::new(&c, 0.5, 2.0).unwrap());
        let phi = Density::bump(1.0, &[0.5, 0.55], 0.3).unwrap();
        let inst = |k: &Arc<dyn PeriodicKernel>, p: Density| ProbeInstance {
            kernel: k.clone(),
            density: p,
            domain: d.clone(),
            inner_margin: 0.05,
        };
        let zero =
            continuity_probe(&[inst(&k1, Density::constant(0.0))], 0.1, 2, &settings).unwrap();
        assert!(zero.instances[0].ratio.is_none());
        assert_eq!(zero.constant, 0.0);
        let a = continuity_probe(&[inst(&k1, phi.clone())], 0.1, 3, &settings).unwrap();
        let b = continuity_probe(&[inst(&k2, phi.clone().scaled(3.0))], 0.1, 3, &settings).unwrap();
        assert!((a.constant - b.constant).abs() <= 1e-10 * a.constant);
        assert!(a.all_bounds_pass(), "{a:?}");
    }

    #[test]
    fn acper_matches_envelope_for_small_balls() {
        let c = PeriodicityCell::unit(3).unwrap();
        let h = SyntheticPowerKernel::new(&c, 1.0, 1.0).unwrap();
        let settings = AcperSettings {
            points: 5,
            random_balls: 3,
            ..AcperSettings::default()
        };
        let out = acper_modulus(&h, &[1e-8, 1e-9, 1e-10], &settings).unwrap();
        for e in &out {
            let env = ball_power_integral(3, 1.0, e.radius);
            assert!((e.centered - env).abs() <= 1e-6 * env, "{e:?} vs {env}");
            assert!(e.worst <= e.centered * (1.0 + 1e-9));
        }
        assert!(out.windows(2).all(|w| w[1].worst <= w[0].worst));
    }

    #[test]
    fn acper_rejects_bad_lists() {
        let c = PeriodicityCell::unit(2).unwrap();
        let h = SyntheticPowerKernel::new(&c, 1.0, 1.0).unwrap();
        let s = AcperSettings::default();
        assert!(acper_modulus(&h, &[1e-3, 1e-2], &s).is_err());
        assert!(acper_modulus(&h, &[2.0], &s).is_err());
    }
}
