//! Special functions: modified Bessel functions of the second kind, the
//! exponential integral `E1`, `erfc`, and Gauss–Legendre rules.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::{Mutex, OnceLock};

const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;
const EPS: f64 = 1e-16;

/// `erfc(x)`.
#[inline]
pub fn erfc(x: f64) -> f64 {
    libm::erfc(x)
}

/// Power series for `K0` and `K1`, accurate for `0 < x ≤ 2`.
fn bessel_k01_series(x: f64) -> (f64, f64) {
    let t = 0.25 * x * x;
    let lg = (0.5 * x).ln();

    // I0, I1 and the ψ-weighted sums share the factor t^k / (k!)^2.
    let mut term = 1.0; // t^k / (k!)^2
    let mut psi = -EULER_GAMMA; // ψ(k+1)
    let mut i0 = 0.0;
    let mut s0 = 0.0;
    // For K1: t^k / (k! (k+1)!) and ψ(k+1) + ψ(k+2).
    let mut term1 = 1.0;
    let mut i1 = 0.0;
    let mut s1 = 0.0;
    for k in 0..60 {
        let kf = k as f64;
        i0 += term;
        s0 += term * psi;
        let psi_next = psi + 1.0 / (kf + 1.0);
        i1 += term1;
        s1 += term1 * (psi + psi_next);
        if term < EPS * i0.abs() && term1 < EPS * i1.abs() {
            break;
        }
        term *= t / ((kf + 1.0) * (kf + 1.0));
        term1 *= t / ((kf + 1.0) * (kf + 2.0));
        psi = psi_next;
    }
    let k0 = -lg * i0 + s0;
    let i1 = 0.5 * x * i1;
    let k1 = 1.0 / x + lg * i1 - 0.25 * x * s1;
    (k0, k1)
}

/// Steed's continued fraction (Temme's form) for `K0`, `K1` at `x > 2`.
fn bessel_k01_cf(x: f64) -> (f64, f64) {
    let mut b = 2.0 * (1.0 + x);
    let mut d = 1.0 / b;
    let mut h = d;
    let mut delh = d;
    let mut q1 = 0.0;
    let mut q2 = 1.0;
    let a1 = 0.25;
    let mut q = a1;
    let mut c = a1;
    let mut a = -a1;
    let mut s = 1.0 + q * delh;
    for i in 1..10_000 {
        let fi = i as f64;
        a -= 2.0 * fi;
        c = -a * c / (fi + 1.0);
        let qnew = (q1 - b * q2) / a;
        q1 = q2;
        q2 = qnew;
        q += c * qnew;
        b += 2.0;
        d = 1.0 / (b + a * d);
        delh = (b * d - 1.0) * delh;
        h += delh;
        let dels = q * delh;
        s += dels;
        if (dels / s).abs() < EPS {
            break;
        }
    }
    let k0 = (PI / (2.0 * x)).sqrt() * (-x).exp() / s;
    let k1 = k0 * (x + 0.5 - a1 * h) / x;
    (k0, k1)
}

/// `(K0(x), K1(x))` for `x > 0`.
pub fn bessel_k01(x: f64) -> (f64, f64) {
    assert!(x > 0.0, "bessel_k01 requires x > 0, got {x}");
    if x > 705.0 {
        return (0.0, 0.0);
    }
    if x <= 2.0 {
        bessel_k01_series(x)
    } else {
        bessel_k01_cf(x)
    }
}

pub fn bessel_k0(x: f64) -> f64 {
    bessel_k01(x).0
}

pub fn bessel_k1(x: f64) -> f64 {
    bessel_k01(x).1
}

/// `[K0, K1, K2, K3](x)` by upward recurrence `K_{ν+1} = K_{ν-1} + (2ν/x) K_ν`.
pub fn bessel_k0123(x: f64) -> [f64; 4] {
    let (k0, k1) = bessel_k01(x);
    let k2 = k0 + 2.0 / x * k1;
    let k3 = k1 + 4.0 / x * k2;
    [k0, k1, k2, k3]
}

/// Exponential integral `E1(x) = ∫_x^∞ e^{-t}/t dt` for `x > 0`.
pub fn exp_integral_e1(x: f64) -> f64 {
    assert!(x > 0.0, "E1 requires x > 0, got {x}");
    if x > 740.0 {
        return 0.0;
    }
    if x <= 1.0 {
        let mut sum = 0.0;
        let mut term = 1.0;
        for k in 1..100 {
            term *= -x / k as f64;
            let add = term / k as f64;
            sum += add;
            if add.abs() < EPS * sum.abs().max(1e-300) {
                break;
            }
        }
        -EULER_GAMMA - x.ln() - sum
    } else {
        // Modified Lentz evaluation of the continued fraction.
        let tiny = 1e-300;
        let mut b = x + 1.0;
        let mut c = 1.0 / tiny;
        let mut d = 1.0 / b;
        let mut h = d;
        for i in 1..10_000 {
            let an = -((i * i) as f64);
            b += 2.0;
            d = 1.0 / (an * d + b);
            c = b + an / c;
            let del = c * d;
            h *= del;
            if (del - 1.0).abs() < EPS {
                break;
            }
        }
        h * (-x).exp()
    }
}

/// Gauss–Legendre nodes and weights on `[-1, 1]`, ascending.
pub fn gauss_legendre(m: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(m >= 1);
    let mut x = vec![0.0; m];
    let mut w = vec![0.0; m];
    let half = m.div_ceil(2);
    for i in 0..half {
        let mut z = (PI * (i as f64 + 0.75) / (m as f64 + 0.5)).cos();
        let mut dp = 1.0;
        for _ in 0..100 {
            let mut p1 = 1.0;
            let mut p2 = 0.0;
            for j in 0..m {
                let p3 = p2;
                p2 = p1;
                p1 = ((2 * j + 1) as f64 * z * p2 - j as f64 * p3) / (j + 1) as f64;
            }
            dp = m as f64 * (z * p1 - p2) / (z * z - 1.0);
            let z1 = z;
            z = z1 - p1 / dp;
            if (z - z1).abs() < 1e-15 {
                break;
            }
        }
        x[i] = -z;
        x[m - 1 - i] = z;
        let wi = 2.0 / ((1.0 - z * z) * dp * dp);
        w[i] = wi;
        w[m - 1 - i] = wi;
    }
    if m % 2 == 1 {
        x[m / 2] = 0.0;
    }
    (x, w)
}

type Rule = (Vec<f64>, Vec<f64>);

/// Gauss–Legendre rule mapped to `[0, 1]`, cached per order.
pub fn gauss_legendre_unit(m: usize) -> std::sync::Arc<Rule> {
    static CACHE: OnceLock<Mutex<HashMap<usize, std::sync::Arc<Rule>>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    let mut guard = cache.lock().expect("gauss-legendre cache poisoned");
    guard
        .entry(m)
        .or_insert_with(|| {
            let (x, w) = gauss_legendre(m);
            let x = x.iter().map(|v| 0.5 * (v + 1.0)).collect();
            let w = w.iter().map(|v| 0.5 * v).collect();
            std::sync::Arc::new((x, w))
        })
        .clone()
}

#[cfg(test)]
mod tests {
    use super::*;

    /// `K_ν(x) = ∫_0^∞ e^{-x cosh t} cosh(νt) dt`, trapezoid on a long range;
    /// the integrand is analytic and decays doubly exponentially.
    fn k_integral(nu: f64, x: f64) -> f64 {
        let tmax = (2.0 * (40.0 / x).ln().max(1.0) + 8.0).min(60.0);
        let steps = 20_000;
        let h = tmax / steps as f64;
        let mut s = 0.5 * (-x).exp();
        for i in 1..=steps {
            let t = i as f64 * h;
            s += (-x * t.cosh()).exp() * (nu * t).cosh();
        }
        s * h
    }

    /// `E1(x) = ∫_0^∞ exp(-x e^s) ds` (substituting `t = e^s` in `∫_1^∞ e^{-xt}/t dt`).
    fn e1_integral(x: f64) -> f64 {
        let smax = (60.0 / x).ln().max(1.0) + 2.0;
        let (gx, gw) = gauss_legendre(32);
        let panels = 400;
        let mut s = 0.0;
        for p in 0..panels {
            let a = smax * p as f64 / panels as f64;
            let b = smax * (p + 1) as f64 / panels as f64;
            for (xi, wi) in gx.iter().zip(&gw) {
                let u = 0.5 * (a + b) + 0.5 * (b - a) * xi;
                s += 0.5 * (b - a) * wi * (-x * u.exp()).exp();
            }
        }
        s
    }

    #[test]
    fn k0_k1_against_integral() {
        for &x in &[
            1e-6, 1e-3, 0.1, 0.5, 1.0, 1.9, 2.0, 2.1, 3.0, 7.5, 15.0, 30.0, 50.0,
        ] {
            let (k0, k1) = bessel_k01(x);
            let r0 = k_integral(0.0, x);
            let r1 = k_integral(1.0, x);
            assert!(
                (k0 - r0).abs() <= 1e-12 * r0.max(1.0),
                "K0({x}): {k0} vs {r0}"
            );
            assert!(
                (k1 - r1).abs() <= 1e-12 * r1.max(1.0),
                "K1({x}): {k1} vs {r1}"
            );
        }
    }

    #[test]
    fn k_reference_values() {
        // Tabulated values.
        assert!((bessel_k0(1.0) - 0.421_024_438_240_708_3).abs() < 1e-15);
        assert!((bessel_k1(1.0) - 0.601_907_230_197_234_6).abs() < 1e-15);
        assert!((bessel_k0(5.0) - 0.003_691_098_334_042_594).abs() < 1e-17);
    }

    #[test]
    fn k_series_and_cf_agree_at_switch() {
        for &x in &[1.8, 2.0, 2.2, 2.5] {
            let (a0, a1) = bessel_k01_series(x);
            let (b0, b1) = bessel_k01_cf(x);
            assert!((a0 - b0).abs() < 1e-14 * a0, "{x}");
            assert!((a1 - b1).abs() < 1e-14 * a1, "{x}");
        }
    }

    #[test]
    fn k2_k3_against_integral() {
        for &x in &[0.3, 1.0, 4.0, 12.0] {
            let k = bessel_k0123(x);
            for nu in 2..4 {
                let r = k_integral(nu as f64, x);
                assert!((k[nu] - r).abs() <= 1e-11 * r, "K{nu}({x})");
            }
        }
    }

    #[test]
    fn e1_against_integral() {
        for &x in &[1e-4, 0.01, 0.3, 0.99, 1.0, 1.01, 2.0, 5.0, 20.0, 60.0] {
            let e = exp_integral_e1(x);
            let r = e1_integral(x);
            assert!((e - r).abs() <= 1e-12 * r, "E1({x}) = {e} vs {r}");
        }
        assert!((exp_integral_e1(1.0) - 0.219_383_934_395_520_3).abs() < 1e-15);
    }

    #[test]
    fn gauss_legendre_exact_on_polynomials() {
        for m in [1, 2, 5, 8, 16] {
            let (x, w) = gauss_legendre(m);
            assert!((w.iter().sum::<f64>() - 2.0).abs() < 1e-14);
            for deg in 0..(2 * m) {
                let q: f64 = x
                    .iter()
                    .zip(&w)
                    .map(|(xi, wi)| wi * xi.powi(deg as i32))
                    .sum();
                let exact = if deg % 2 == 1 {
                    0.0
                } else {
                    2.0 / (deg + 1) as f64
                };
                assert!((q - exact).abs() < 1e-13, "m={m} deg={deg}");
            }
        }
        let r = gauss_legendre_unit(8);
        assert!((r.1.iter().sum::<f64>() - 1.0).abs() < 1e-15);
        assert!(r.0.iter().all(|&v| v > 0.0 && v < 1.0));
    }
}
