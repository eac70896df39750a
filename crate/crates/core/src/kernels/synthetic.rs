use std::f64::consts::PI;

use super::{chain_rule, check_lambda, PeriodicKernel};
use crate::cell::PeriodicityCell;
use crate::error::Result;
use crate::multi_index::MultiIndex;

/// `h(x) = s · r_p(x)^{-λ}` with the periodic distance
/// `r_p(x)² = Σ_j (q_j/π)² sin²(π x_j / q_j)`.
#[derive(Debug, Clone)]
pub struct SyntheticPowerKernel {
    cell: PeriodicityCell,
    lambda: f64,
    scale: f64,
}

impl SyntheticPowerKernel {
    pub fn new(cell: &PeriodicityCell, lambda: f64, scale: f64) -> Result<Self> {
        check_lambda(cell.dim(), lambda)?;
        Ok(Self {
            cell: cell.clone(),
            lambda,
            scale,
        })
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    /// `r_p(x)²`.
    pub fn periodic_distance_sq(&self, x: &[f64]) -> f64 {
        x.iter()
            .enumerate()
            .map(|(j, &v)| {
                let q = self.cell.period(j);
                let s = (PI * v / q).sin() * q / PI;
                s * s
            })
            .sum()
    }
}

impl PeriodicKernel for SyntheticPowerKernel {
    fn name(&self) -> String {
        format!(
            "synthetic_power(lambda={}, scale={})",
            self.lambda, self.scale
        )
    }

    fn cell(&self) -> &PeriodicityCell {
        &self.cell
    }

    fn lambda(&self) -> f64 {
        self.lambda
    }

    fn value_centered(&self, x: &[f64]) -> f64 {
        self.scale * self.periodic_distance_sq(x).powf(-0.5 * self.lambda)
    }

    fn derivative_centered(&self, x: &[f64], beta: &MultiIndex) -> f64 {
        let n = x.len();
        let u = self.periodic_distance_sq(x);
        let mut fd = [0.0; 4];
        let mut c = self.scale;
        let mut p = -0.5 * self.lambda;
        for f in fd.iter_mut().take(beta.order() + 1) {
            *f = c * u.powf(p);
            c *= p;
            p -= 1.0;
        }
        let mut u1 = [0.0; 3];
        let mut u2 = [0.0; 3];
        let mut u3 = [0.0; 3];
        for j in 0..n {
            let q = self.cell.period(j);
            let t = 2.0 * PI * x[j] / q;
            u1[j] = q / PI * t.sin();
            u2[j] = 2.0 * t.cos();
            u3[j] = -4.0 * PI / q * t.sin();
        }
        chain_rule(
            &beta.axes(),
            &fd,
            &u1,
            |a, b| if a == b { u2[a] } else { 0.0 },
            |a, b, c| if a == b && b == c { u3[a] } else { 0.0 },
        )
    }
}
