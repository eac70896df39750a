//! Free-space fundamental solutions and their radial derivative tables.
//!
//! For a radial `F(r)` written as `f(u)` with `u = r²`, the derivatives are
//! `f^{(k)}(u) = G_k / 2^k` with `G_k = ((1/r) d/dr)^k F`.

use std::f64::consts::PI;

use crate::special::{bessel_k0123, erfc, exp_integral_e1};

/// Fundamental solution of `Δ`: `-1/(4πr)` for `n = 3`, `ln(r)/(2π)` for `n = 2`.
pub fn laplace_free_space(n: usize, r: f64) -> f64 {
    match n {
        2 => r.ln() / (2.0 * PI),
        _ => -1.0 / (4.0 * PI * r),
    }
}

/// Fundamental solution of `Δ − κ²`: `-e^{-κr}/(4πr)` or `-K0(κr)/(2π)`.
pub fn yukawa_free_space(n: usize, kappa: f64, r: f64) -> f64 {
    match n {
        2 => -bessel_k0123(kappa * r)[0] / (2.0 * PI),
        _ => -(-kappa * r).exp() / (4.0 * PI * r),
    }
}

/// `f^{(k)}(u)`, `k ≤ order`, for the Yukawa kernel at squared radius `u`.
#[inline]
pub(crate) fn yukawa_table(n: usize, kappa: f64, u: f64, order: usize) -> [f64; 4] {
    let r = u.sqrt();
    let mut out = [0.0; 4];
    if n == 3 {
        let x = kappa * r;
        let e = (-x).exp();
        let theta = [
            1.0,
            1.0 + x,
            3.0 + x * (3.0 + x),
            15.0 + x * (15.0 + x * (6.0 + x)),
        ];
        let mut rp = r; // r^{2k+1}
        let mut sign = 1.0;
        let mut half = 1.0;
        for k in 0..=order {
            out[k] = -sign * e * theta[k] / (4.0 * PI * rp) * half;
            rp *= u;
            sign = -sign;
            half *= 0.5;
        }
    } else {
        let z = kappa * r;
        let kk = bessel_k0123(z);
        let mut fac = 1.0; // κ^{2k} z^{-k} (-1)^k / 2^k
        for k in 0..=order {
            out[k] = -fac * kk[k] / (2.0 * PI);
            fac *= -kappa * kappa / z * 0.5;
        }
    }
    out
}

/// Ewald real-space table for `-erfc(αr)/(4πr)` (n = 3) or
/// `-E1(α²r²)/(4π)` (n = 2).
#[inline]
pub(crate) fn ewald_real_table(n: usize, alpha: f64, u: f64, order: usize) -> [f64; 4] {
    let mut out = [0.0; 4];
    let a = alpha * alpha;
    let e = (-a * u).exp();
    if n == 3 {
        let r = u.sqrt();
        // B_0 = erfc(αr)/r, B_l = [(2l−1) B_{l−1} + (2α²)^l e^{−α²r²}/(α√π)] / r².
        let mut b = erfc(alpha * r) / r;
        let gauss = e / (alpha * PI.sqrt());
        let mut pow = 1.0;
        let mut sign = 1.0;
        let mut half = 1.0;
        for l in 0..=order {
            if l > 0 {
                pow *= 2.0 * a;
                b = ((2 * l - 1) as f64 * b + pow * gauss) / u;
            }
            out[l] = -sign * b / (4.0 * PI) * half;
            sign = -sign;
            half *= 0.5;
        }
    } else {
        let c = 1.0 / (4.0 * PI);
        out[0] = -c * exp_integral_e1(a * u);
        if order >= 1 {
            out[1] = c * e / u;
        }
        if order >= 2 {
            out[2] = c * e * (-a / u - 1.0 / (u * u));
        }
        if order >= 3 {
            out[3] = c * e * (a * a / u + 2.0 * a / (u * u) + 2.0 / (u * u * u));
        }
    }
    out
}
