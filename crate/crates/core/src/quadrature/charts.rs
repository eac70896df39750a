//! Smooth parameterisations of the pieces a domain is cut into, and the
//! adaptive rule that integrates over a piece with a (near-)singular point.
//!
//! A chart maps the parameter box `[0,1]ⁿ` onto a piece of `Rⁿ`:
//!
//! - `Block`: an axis-aligned box.
//! - `Wedge`: the region `{c + ρ d(s)}` between two surfaces around `c`,
//!   with `d(s) = σ e_k + Σ_{j≠k} s_j e_j`, `s ∈ [−1,1]^{n−1}`. The surfaces
//!   are a cube `‖y − c‖_∞ = a` (`ρ = a`) or a sphere `|y − c| = R`
//!   (`ρ = R/|d|`).
//!
//! Refinement works in parameter space: boxes far from every focus (relative
//! to their size) get tensor Gauss–Legendre rules; a box with the focus at a
//! vertex gets a Duffy rule (one pyramid per axis, dyadically graded in the
//! radial variable); everything else is subdivided.

use crate::cell::MAX_DIM;
use crate::special::gauss_legendre_unit;

use super::NodeSet;

type P = [f64; MAX_DIM];

#[derive(Debug, Clone, Copy)]
pub(crate) enum Surface {
    Cube(f64),
    Sphere(f64),
}

impl Surface {
    #[inline]
    fn rho(&self, dnorm: f64) -> f64 {
        match *self {
            Surface::Cube(a) => a,
            Surface::Sphere(r) => r / dnorm,
        }
    }
}

#[derive(Debug, Clone)]
pub(crate) enum Chart {
    Block {
        lo: P,
        hi: P,
    },
    Wedge {
        center: P,
        axis: usize,
        sign: f64,
        inner: Surface,
        outer: Surface,
    },
}

impl Chart {
    /// Transverse axes of a wedge, in increasing order.
    #[inline]
    fn transverse(n: usize, axis: usize) -> [usize; 2] {
        let mut t = [0usize; 2];
        let mut i = 0;
        for j in 0..n {
            if j != axis {
                t[i] = j;
                i += 1;
            }
        }
        t
    }

    /// Physical point and Jacobian determinant at parameter `u`.
    #[inline]
    pub(crate) fn map(&self, n: usize, u: &P) -> (P, f64) {
        match self {
            Chart::Block { lo, hi } => {
                let mut y = [0.0; MAX_DIM];
                let mut jac = 1.0;
                for j in 0..n {
                    let w = hi[j] - lo[j];
                    y[j] = lo[j] + u[j] * w;
                    jac *= w;
                }
                (y, jac)
            }
            Chart::Wedge {
                center,
                axis,
                sign,
                inner,
                outer,
            } => {
                let t = Self::transverse(n, *axis);
                let mut d = [0.0; MAX_DIM];
                d[*axis] = *sign;
                for i in 0..n - 1 {
                    d[t[i]] = 2.0 * u[i] - 1.0;
                }
                let dn = d[..n].iter().map(|v| v * v).sum::<f64>().sqrt();
                let r_in = inner.rho(dn);
                let r_out = outer.rho(dn);
                let rho = r_in + u[n - 1] * (r_out - r_in);
                let mut y = [0.0; MAX_DIM];
                for j in 0..n {
                    y[j] = center[j] + rho * d[j];
                }
                let jac = 2f64.powi(n as i32 - 1) * rho.powi(n as i32 - 1) * (r_out - r_in);
                (y, jac)
            }
        }
    }

    /// `map(p + s∘ξ)`. Blocks add the offset after mapping `p`, so nodes
    /// very close to the focus keep the digits of `ξ`.
    #[inline]
    pub(crate) fn map_near(&self, n: usize, p: &P, s: &P, xi: &P) -> (P, f64) {
        match self {
            Chart::Block { lo, hi } => {
                let mut y = [0.0; MAX_DIM];
                let mut jac = 1.0;
                for j in 0..n {
                    let w = hi[j] - lo[j];
                    y[j] = (lo[j] + p[j] * w) + w * (s[j] * xi[j]);
                    jac *= w;
                }
                (y, jac)
            }
            Chart::Wedge { .. } => {
                let mut u = [0.0; MAX_DIM];
                for j in 0..n {
                    u[j] = p[j] + s[j] * xi[j];
                }
                self.map(n, &u)
            }
        }
    }

    /// Parameter of a physical point (not clamped); `None` when the point is
    /// not in the half-space the wedge opens into.
    pub(crate) fn inverse(&self, n: usize, y: &P) -> Option<P> {
        match self {
            Chart::Block { lo, hi } => {
                let mut u = [0.0; MAX_DIM];
                for j in 0..n {
                    u[j] = (y[j] - lo[j]) / (hi[j] - lo[j]);
                }
                Some(u)
            }
            Chart::Wedge {
                center,
                axis,
                sign,
                inner,
                outer,
            } => {
                let rho = sign * (y[*axis] - center[*axis]);
                if rho <= 1e-14 {
                    return None;
                }
                let t = Self::transverse(n, *axis);
                let mut u = [0.0; MAX_DIM];
                let mut dn2 = 1.0;
                for i in 0..n - 1 {
                    let s = (y[t[i]] - center[t[i]]) / rho;
                    u[i] = 0.5 * (s + 1.0);
                    dn2 += s * s;
                }
                let dn = dn2.sqrt();
                let r_in = inner.rho(dn);
                let r_out = outer.rho(dn);
                u[n - 1] = (rho - r_in) / (r_out - r_in);
                Some(u)
            }
        }
    }

    /// Widest parameter interval one panel may span along axis `j`. The
    /// wedge map has complex singularities where `|d(s)|² = 0`, at distance 1
    /// from real `s`; panels a third wide keep Gauss–Legendre near machine
    /// precision.
    fn max_width(&self, n: usize, j: usize) -> f64 {
        match self {
            Chart::Wedge { .. } if j + 1 < n => 1.0 / 3.0,
            _ => 1.0,
        }
    }

    /// `|∂y/∂u_j|` at `u`.
    fn stretch(&self, n: usize, u: &P) -> P {
        let mut s = [0.0; MAX_DIM];
        match self {
            Chart::Block { lo, hi } => {
                for j in 0..n {
                    s[j] = hi[j] - lo[j];
                }
            }
            Chart::Wedge { .. } => {
                let eps = 1e-6;
                for j in 0..n {
                    let mut up = *u;
                    let mut um = *u;
                    up[j] += eps;
                    um[j] -= eps;
                    let (yp, _) = self.map(n, &up);
                    let (ym, _) = self.map(n, &um);
                    s[j] =
                        (0..n).map(|i| (yp[i] - ym[i]).powi(2)).sum::<f64>().sqrt() / (2.0 * eps);
                }
            }
        }
        s
    }
}

/// Parameters of the adaptive rule.
#[derive(Debug, Clone, Copy)]
pub(crate) struct RuleParams {
    /// Largest physical panel edge.
    pub panel: f64,
    /// Gauss–Legendre order per direction.
    pub order: usize,
    /// Number of dyadic radial levels in a Duffy pyramid.
    pub depth: usize,
    /// Power of the innermost radial map `t = ε v^p`.
    pub inner_power: f64,
}

/// Inside a patch, a box is far from the focus once the gap reaches this
/// multiple of its longest edge; at gap = edge an order-8 tensor rule on
/// `1/r` is good to ~1e-12.
const NEAR_FACTOR: f64 = 1.0;
/// Foci closer than this many panel lengths to a box get a singular patch.
/// Slightly below one so that the pieces around a patch are not caught again.
const PATCH_REACH: f64 = 0.9;
/// Below this gap-to-edge ratio a Duffy rule at the projected focus is
/// cheaper than bisection.
const DUFFY_GAP: f64 = 0.25;
const MAX_LEVEL: usize = 48;

pub(crate) struct Integrator<'a> {
    n: usize,
    chart: &'a Chart,
    params: RuleParams,
    foci: &'a [P],
    out: &'a mut NodeSet,
}

struct FocusInfo {
    p: P,
    gap: f64,
}

impl<'a> Integrator<'a> {
    pub(crate) fn run(
        n: usize,
        chart: &'a Chart,
        params: RuleParams,
        foci: &'a [P],
        out: &'a mut NodeSet,
    ) {
        let mut it = Integrator {
            n,
            chart,
            params,
            foci,
            out,
        };
        let lo = [0.0; MAX_DIM];
        let mut hi = [0.0; MAX_DIM];
        hi[..n].iter_mut().for_each(|v| *v = 1.0);
        it.refine(lo, hi, 0, None);
    }

    fn edges(&self, lo: &P, hi: &P) -> P {
        let mut c = [0.0; MAX_DIM];
        for j in 0..self.n {
            c[j] = 0.5 * (lo[j] + hi[j]);
        }
        let s = self.chart.stretch(self.n, &c);
        let mut e = [0.0; MAX_DIM];
        for j in 0..self.n {
            e[j] = s[j] * (hi[j] - lo[j]);
        }
        e
    }

    fn focus_info(&self, f: &P, lo: &P, hi: &P, diam: f64) -> FocusInfo {
        let n = self.n;
        match self.chart.inverse(n, f) {
            Some(p) => {
                let mut c = [0.0; MAX_DIM];
                for j in 0..n {
                    c[j] = 0.5 * (lo[j] + hi[j]);
                }
                let s = self.chart.stretch(n, &c);
                let mut g2 = 0.0;
                for j in 0..n {
                    let g = (lo[j] - p[j]).max(p[j] - hi[j]).max(0.0) * s[j];
                    g2 += g * g;
                }
                FocusInfo { p, gap: g2.sqrt() }
            }
            None => {
                // Fall back on the physical distance to the box centre.
                let mut c = [0.0; MAX_DIM];
                for j in 0..n {
                    c[j] = 0.5 * (lo[j] + hi[j]);
                }
                let (y, _) = self.chart.map(n, &c);
                let d = (0..n).map(|j| (y[j] - f[j]).powi(2)).sum::<f64>().sqrt();
                FocusInfo {
                    p: [f64::NAN; MAX_DIM],
                    gap: (d - 0.5 * diam).max(0.0) + f64::MIN_POSITIVE,
                }
            }
        }
    }

    fn box_geometry(&self, lo: &P, hi: &P) -> Option<(P, f64, f64, f64)> {
        let n = self.n;
        let e = self.edges(lo, hi);
        if e[..n].iter().any(|&v| v <= 0.0) {
            return None;
        }
        let diam = e[..n].iter().map(|v| v * v).sum::<f64>().sqrt();
        let max_edge = e[..n].iter().cloned().fold(0.0, f64::max);
        let min_edge = e[..n].iter().cloned().fold(f64::INFINITY, f64::min);
        Some((e, diam, max_edge, min_edge))
    }

    /// Top level: uniform panels away from the foci, a singular patch around
    /// a single nearby focus, bisection when several foci are close.
    fn refine(&mut self, lo: P, hi: P, level: usize, skip: Option<usize>) {
        let n = self.n;
        let Some((e, diam, max_edge, _)) = self.box_geometry(&lo, &hi) else {
            return;
        };
        let reach = PATCH_REACH * self.params.panel;
        let near: Vec<(usize, FocusInfo)> = self
            .foci
            .iter()
            .enumerate()
            .filter(|(i, _)| Some(*i) != skip)
            .map(|(i, f)| (i, self.focus_info(f, &lo, &hi, diam)))
            .filter(|(_, info)| info.gap < reach.min(NEAR_FACTOR * max_edge))
            .collect();
        match near.as_slice() {
            [] => self.emit_panels(&lo, &hi, &e),
            [(i, info)] if info.p[0].is_finite() => self.patch(&lo, &hi, *i, info, level),
            _ if level >= MAX_LEVEL => self.emit_gauss(&lo, &hi),
            _ => {
                let axes: Vec<usize> = (0..n).filter(|&j| e[j] >= 0.5 * max_edge).collect();
                let mid = midpoint(&lo, &hi);
                self.split_with(&lo, &hi, &axes, &mid, |it, clo, chi| {
                    it.refine(clo, chi, level + 1, skip)
                });
            }
        }
    }

    /// Cuts the box into the patch `|u_j − p_j| ≤ w_j` (physical half-width
    /// one panel) and up to `3ⁿ − 1` surrounding pieces.
    fn patch(&mut self, lo: &P, hi: &P, focus: usize, info: &FocusInfo, level: usize) {
        let n = self.n;
        let mut a = [0.0; MAX_DIM];
        for j in 0..n {
            a[j] = info.p[j].clamp(lo[j], hi[j]);
        }
        let s = self.chart.stretch(n, &a);
        let mut cuts: Vec<Vec<(f64, f64, bool)>> = Vec::with_capacity(n);
        for j in 0..n {
            let w = self.params.panel / s[j];
            let (c0, c1) = ((a[j] - w).max(lo[j]), (a[j] + w).min(hi[j]));
            let mut v = Vec::with_capacity(3);
            if c0 > lo[j] {
                v.push((lo[j], c0, false));
            }
            v.push((c0, c1, true));
            if c1 < hi[j] {
                v.push((c1, hi[j], false));
            }
            cuts.push(v);
        }
        let total: usize = cuts.iter().map(|c| c.len()).product();
        for idx in 0..total {
            let mut rem = idx;
            let mut plo = [0.0; MAX_DIM];
            let mut phi = [0.0; MAX_DIM];
            let mut central = true;
            for j in 0..n {
                let c = &cuts[j][rem % cuts[j].len()];
                rem /= cuts[j].len();
                plo[j] = c.0;
                phi[j] = c.1;
                central &= c.2;
            }
            if central {
                self.singular(&plo, &phi, focus, level + 1);
            } else {
                // Panels here are no longer than their distance to the focus.
                self.refine(plo, phi, level + 1, Some(focus));
            }
        }
    }

    /// Splits at the projection of the focus so that it becomes a vertex of
    /// every piece.
    fn singular(&mut self, lo: &P, hi: &P, focus: usize, level: usize) {
        let n = self.n;
        let Some((_, diam, _, _)) = self.box_geometry(lo, hi) else {
            return;
        };
        let info = self.focus_info(&self.foci[focus], lo, hi, diam);
        let mut p = [0.0; MAX_DIM];
        for j in 0..n {
            p[j] = info.p[j].clamp(lo[j], hi[j]);
        }
        let tol = 1e-14;
        let interior: Vec<usize> = (0..n)
            .filter(|&j| {
                p[j] - lo[j] > tol * (hi[j] - lo[j]) && hi[j] - p[j] > tol * (hi[j] - lo[j])
            })
            .collect();
        if interior.is_empty() {
            self.corner(*lo, *hi, focus, level);
        } else {
            self.split_with(lo, hi, &interior, &p, |it, clo, chi| {
                it.corner(clo, chi, focus, level + 1)
            });
        }
    }

    /// A box with the projected focus at a vertex: Duffy once it is
    /// cube-like, otherwise halve its long edges.
    fn corner(&mut self, lo: P, hi: P, focus: usize, level: usize) {
        let n = self.n;
        let Some((e, diam, max_edge, min_edge)) = self.box_geometry(&lo, &hi) else {
            return;
        };
        let info = self.focus_info(&self.foci[focus], &lo, &hi, diam);
        let mut p = [0.0; MAX_DIM];
        for j in 0..n {
            p[j] = info.p[j].clamp(lo[j], hi[j]);
        }
        let too_wide = |j: usize| hi[j] - lo[j] > self.chart.max_width(n, j) + 1e-12;
        let long = |j: usize| e[j] > 2.0 * min_edge || too_wide(j);
        if level >= MAX_LEVEL || !(0..n).any(long) {
            let depth = if info.gap <= 1e-13 * (1.0 + diam) {
                self.params.depth
            } else {
                let need = (max_edge / info.gap).log2().ceil().max(0.0) as usize + 2;
                need.clamp(self.params.depth, MAX_LEVEL)
            };
            self.emit_duffy(&lo, &hi, &p, depth);
            return;
        }
        let axes: Vec<usize> = (0..n).filter(|&j| long(j)).collect();
        let mid = midpoint(&lo, &hi);
        self.split_with(&lo, &hi, &axes, &mid, |it, clo, chi| {
            let touches = (0..n).all(|j| p[j] >= clo[j] && p[j] <= chi[j]);
            if touches {
                it.corner(clo, chi, focus, level + 1);
            } else {
                it.near_box(clo, chi, focus, level + 1);
            }
        });
    }

    /// A box inside a patch that does not touch the focus.
    fn near_box(&mut self, lo: P, hi: P, focus: usize, level: usize) {
        let n = self.n;
        let Some((e, diam, max_edge, _)) = self.box_geometry(&lo, &hi) else {
            return;
        };
        let info = self.focus_info(&self.foci[focus], &lo, &hi, diam);
        if info.gap >= NEAR_FACTOR * max_edge || level >= MAX_LEVEL {
            self.emit_gauss(&lo, &hi);
        } else if info.gap <= DUFFY_GAP * max_edge && info.p[0].is_finite() {
            self.singular(&lo, &hi, focus, level + 1);
        } else {
            let axes: Vec<usize> = (0..n).filter(|&j| e[j] >= 0.5 * max_edge).collect();
            let mid = midpoint(&lo, &hi);
            self.split_with(&lo, &hi, &axes, &mid, |it, clo, chi| {
                it.near_box(clo, chi, focus, level + 1)
            });
        }
    }

    fn split_with(
        &mut self,
        lo: &P,
        hi: &P,
        axes: &[usize],
        at: &P,
        mut next: impl FnMut(&mut Self, P, P),
    ) {
        let k = axes.len();
        for mask in 0..(1usize << k) {
            let mut clo = *lo;
            let mut chi = *hi;
            for (bit, &j) in axes.iter().enumerate() {
                if (mask >> bit) & 1 == 0 {
                    chi[j] = at[j];
                } else {
                    clo[j] = at[j];
                }
            }
            if (0..self.n).all(|j| chi[j] > clo[j]) {
                next(self, clo, chi);
            }
        }
    }

    /// Uniform panels of edge at most `panel`, each with a tensor rule.
    fn emit_panels(&mut self, lo: &P, hi: &P, e: &P) {
        let n = self.n;
        let mut counts = [1usize; MAX_DIM];
        for j in 0..n {
            let by_length = (e[j] / self.params.panel).ceil() as usize;
            let by_width = ((hi[j] - lo[j]) / self.chart.max_width(n, j) - 1e-12).ceil() as usize;
            counts[j] = by_length.max(by_width).max(1);
        }
        let total: usize = counts[..n].iter().product();
        for idx in 0..total {
            let mut rem = idx;
            let mut plo = [0.0; MAX_DIM];
            let mut phi = [0.0; MAX_DIM];
            for j in 0..n {
                let i = rem % counts[j];
                rem /= counts[j];
                let w = (hi[j] - lo[j]) / counts[j] as f64;
                plo[j] = lo[j] + i as f64 * w;
                phi[j] = if i + 1 == counts[j] {
                    hi[j]
                } else {
                    lo[j] + (i + 1) as f64 * w
                };
            }
            self.emit_gauss(&plo, &phi);
        }
    }

    fn emit_gauss(&mut self, lo: &P, hi: &P) {
        let n = self.n;
        let rule = gauss_legendre_unit(self.params.order);
        let (gx, gw) = (&rule.0, &rule.1);
        let m = gx.len();
        let total = m.pow(n as u32);
        let mut vol = 1.0;
        for j in 0..n {
            vol *= hi[j] - lo[j];
        }
        for idx in 0..total {
            let mut rem = idx;
            let mut u = [0.0; MAX_DIM];
            let mut w = vol;
            for j in 0..n {
                let i = rem % m;
                rem /= m;
                u[j] = lo[j] + (hi[j] - lo[j]) * gx[i];
                w *= gw[i];
            }
            let (y, jac) = self.chart.map(n, &u);
            self.out.push(&y[..n], w * jac);
        }
    }

    /// Duffy rule on a box with `p` at a vertex, `depth` dyadic radial levels.
    fn emit_duffy(&mut self, lo: &P, hi: &P, p: &P, depth: usize) {
        let n = self.n;
        let rule = gauss_legendre_unit(self.params.order);
        let (gx, gw) = (&rule.0, &rule.1);
        let m = gx.len();

        let mut sigma_len = [0.0; MAX_DIM];
        let mut vol = 1.0;
        for j in 0..n {
            let len = hi[j] - lo[j];
            vol *= len;
            sigma_len[j] = if (p[j] - lo[j]).abs() <= (p[j] - hi[j]).abs() {
                len
            } else {
                -len
            };
        }

        // Radial nodes on [0, 1], graded towards 0.
        let mut tn = Vec::with_capacity(m * (depth + 1));
        let mut tw = Vec::with_capacity(m * (depth + 1));
        for l in 0..depth {
            let (a, b) = (0.5f64.powi(l as i32 + 1), 0.5f64.powi(l as i32));
            for i in 0..m {
                tn.push(a + (b - a) * gx[i]);
                tw.push((b - a) * gw[i]);
            }
        }
        // Innermost level with t = ε v^p, which removes the leading singularity.
        let eps = 0.5f64.powi(depth as i32);
        let pw = self.params.inner_power;
        for i in 0..m {
            let v = gx[i];
            tn.push(eps * v.powf(pw));
            tw.push(pw * eps * v.powf(pw - 1.0) * gw[i]);
        }

        let ns = m.pow(n as u32 - 1);
        for k in 0..n {
            for (t, wt) in tn.iter().zip(&tw) {
                let tpow = t.powi(n as i32 - 1);
                for sidx in 0..ns {
                    let mut rem = sidx;
                    let mut xi = [0.0; MAX_DIM];
                    let mut w = wt * tpow * vol;
                    for j in 0..n {
                        if j == k {
                            xi[j] = *t;
                        } else {
                            let i = rem % m;
                            rem /= m;
                            xi[j] = t * gx[i];
                            w *= gw[i];
                        }
                    }
                    let (y, jac) = self.chart.map_near(n, p, &sigma_len, &xi);
                    self.out.push(&y[..n], w * jac);
                }
            }
        }
    }
}

fn midpoint(lo: &P, hi: &P) -> P {
    let mut m = [0.0; MAX_DIM];
    for j in 0..MAX_DIM {
        m[j] = 0.5 * (lo[j] + hi[j]);
    }
    m
}
