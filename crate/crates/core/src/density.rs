//! Densities `φ` for the volume potentials, with analytic derivatives.

use std::f64::consts::PI;

use crate::cell::PeriodicityCell;
use crate::error::{Error, Result};
use crate::multi_index::MultiIndex;

/// Where a density is meant to live.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SupportKind {
    /// Defined on `clΩ` (or on `Q∖Ω` as given, without periodisation).
    Interior,
    /// `q`-periodic; evaluation goes through folding.
    Periodic,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Density {
    Constant(f64),
    /// `a cos(2π Σ m_j x_j / q_j + θ)`, evaluated on the folded point.
    Trig {
        amplitude: f64,
        modes: Vec<i32>,
        phase: f64,
        cell: PeriodicityCell,
    },
    /// `a exp(−|x − c|²/w²)`.
    Bump {
        amplitude: f64,
        center: Vec<f64>,
        width: f64,
    },
    /// `Σ c_α x^α`.
    Poly {
        dim: usize,
        terms: Vec<(MultiIndex, f64)>,
    },
    /// `Σ c_i φ_i`.
    Combination(Vec<(f64, Density)>),
}

impl Density {
    pub fn constant(c: f64) -> Self {
        Density::Constant(c)
    }

    pub fn trig(cell: &PeriodicityCell, amplitude: f64, modes: &[i32], phase: f64) -> Result<Self> {
        cell.check_dim(modes.len())?;
        Ok(Density::Trig {
            amplitude,
            modes: modes.to_vec(),
            phase,
            cell: cell.clone(),
        })
    }

    pub fn bump(amplitude: f64, center: &[f64], width: f64) -> Result<Self> {
        if !(width.is_finite() && width > 0.0) {
            return Err(Error::InvalidParameter {
                name: "width",
                reason: format!("must be positive, got {width}"),
            });
        }
        Ok(Density::Bump {
            amplitude,
            center: center.to_vec(),
            width,
        })
    }

    pub fn poly(dim: usize, terms: &[(MultiIndex, f64)]) -> Result<Self> {
        if let Some((m, _)) = terms.iter().find(|(m, _)| m.dim() != dim) {
            return Err(Error::DimensionMismatch {
                expected: dim,
                got: m.dim(),
            });
        }
        Ok(Density::Poly {
            dim,
            terms: terms.to_vec(),
        })
    }

    /// The coordinate function `x_j`.
    pub fn coordinate(dim: usize, j: usize) -> Self {
        Density::Poly {
            dim,
            terms: vec![(MultiIndex::unit(dim, j), 1.0)],
        }
    }

    pub fn combination(terms: Vec<(f64, Density)>) -> Self {
        Density::Combination(terms)
    }

    pub fn scaled(self, c: f64) -> Self {
        Density::Combination(vec![(c, self)])
    }

    pub fn support_kind(&self) -> SupportKind {
        match self {
            Density::Constant(_) | Density::Trig { .. } => SupportKind::Periodic,
            Density::Combination(t)
                if t.iter()
                    .all(|(_, d)| d.support_kind() == SupportKind::Periodic) =>
            {
                SupportKind::Periodic
            }
            _ => SupportKind::Interior,
        }
    }

    /// Declared smoothness: `None` means real-analytic (all orders).
    pub fn smoothness(&self) -> Option<usize> {
        None
    }

    pub fn is_zero(&self) -> bool {
        match self {
            Density::Constant(c) => *c == 0.0,
            Density::Trig { amplitude, .. } | Density::Bump { amplitude, .. } => *amplitude == 0.0,
            Density::Poly { terms, .. } => terms.iter().all(|(_, c)| *c == 0.0),
            Density::Combination(t) => t.iter().all(|(c, d)| *c == 0.0 || d.is_zero()),
        }
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        self.derivative(x, &MultiIndex::zero(x.len()))
    }

    /// `∂^β φ(x)` for any order.
    pub fn derivative(&self, x: &[f64], beta: &MultiIndex) -> f64 {
        match self {
            Density::Constant(c) => {
                if beta.is_zero() {
                    *c
                } else {
                    0.0
                }
            }
            Density::Trig {
                amplitude,
                modes,
                phase,
                cell,
            } => {
                let y = cell.fold_into_cell(x);
                let mut arg = *phase;
                let mut factor = *amplitude;
                for j in 0..y.len() {
                    let k = 2.0 * PI * modes[j] as f64 / cell.period(j);
                    arg += k * y[j];
                    factor *= k.powi(beta.get(j) as i32);
                }
                factor * (arg + beta.order() as f64 * PI / 2.0).cos()
            }
            Density::Bump {
                amplitude,
                center,
                width,
            } => {
                let mut v = *amplitude;
                for j in 0..x.len() {
                    v *= gaussian_derivative((x[j] - center[j]) / width, beta.get(j) as usize)
                        / width.powi(beta.get(j) as i32);
                }
                v
            }
            Density::Poly { terms, .. } => terms
                .iter()
                .map(|(alpha, c)| {
                    let mut v = *c;
                    for j in 0..x.len() {
                        let (a, b) = (alpha.get(j), beta.get(j));
                        if b > a {
                            return 0.0;
                        }
                        let falling: u32 = ((a - b + 1)..=a).product();
                        v *= falling as f64 * x[j].powi((a - b) as i32);
                    }
                    v
                })
                .sum(),
            Density::Combination(t) => t.iter().map(|(c, d)| c * d.derivative(x, beta)).sum(),
        }
    }

    /// `max_i |∂^β φ(x_i)|` over the given points.
    pub fn sup_over<'a>(
        &self,
        points: impl IntoIterator<Item = &'a [f64]>,
        beta: &MultiIndex,
    ) -> f64 {
        points
            .into_iter()
            .map(|x| self.derivative(x, beta).abs())
            .fold(0.0, f64::max)
    }
}

/// `d^k/ds^k e^{−s²} = (−1)^k H_k(s) e^{−s²}` with physicists' Hermite `H_k`.
fn gaussian_derivative(s: f64, k: usize) -> f64 {
    let (mut h0, mut h1) = (1.0, 2.0 * s);
    let hk = match k {
        0 => h0,
        _ => {
            for i in 1..k {
                let h2 = 2.0 * s * h1 - 2.0 * i as f64 * h0;
                h0 = h1;
                h1 = h2;
            }
            h1
        }
    };
    let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
    sign * hk * (-s * s).exp()
}
