//! JSON run configuration. Every field has a default, so `{}` is the
//! Laplace problem in the unit cube with a ball of radius 0.2.

use std::sync::Arc;

use periodica::density::Density;
use periodica::kernels::{
    FourierOracle, LaplaceEwald, PeriodicKernel, SyntheticPowerKernel, YukawaPeriodic,
};
use periodica::potentials::{RegionKind, Side};
use periodica::quadrature::{DomainShape, QuadratureOptions};
use periodica::symbol::{Complex64, EllipticOperator};
use periodica::{MultiIndex, PeriodicityCell};
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub cell: CellConfig,
    pub operator: OperatorConfig,
    pub kernel: KernelConfig,
    /// `null` for `Ω = ∅`.
    pub domain: Option<DomainConfig>,
    pub density: DensityConfig,
    pub quadrature: QuadratureConfig,
    pub evaluation: EvaluationConfig,
    pub potential: PotentialConfig,
    pub verify: VerifyConfig,
    pub norms: NormsConfig,
    pub convergence: ConvergenceConfig,
    /// Output directory; `--out` takes precedence.
    pub out: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CellConfig {
    pub periods: Vec<f64>,
}

impl Default for CellConfig {
    fn default() -> Self {
        Self {
            periods: vec![1.0; 3],
        }
    }
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            cell: CellConfig::default(),
            operator: OperatorConfig::Laplace,
            kernel: KernelConfig::LaplaceEwald {
                eta: None,
                nreal: None,
                nrecip: None,
            },
            domain: Some(DomainConfig::Ball {
                center: vec![0.5; 3],
                radius: 0.2,
            }),
            density: DensityConfig::Constant { value: 1.0 },
            quadrature: QuadratureConfig::default(),
            evaluation: EvaluationConfig::default(),
            potential: PotentialConfig::default(),
            verify: VerifyConfig::default(),
            norms: NormsConfig::default(),
            convergence: ConvergenceConfig::default(),
            out: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum OperatorConfig {
    Laplace,
    /// `Δ − κ²`.
    ModifiedHelmholtz {
        kappa: f64,
    },
    /// `Σ a_α D^α` from explicit coefficients.
    General {
        coeffs: Vec<Coefficient>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Coefficient {
    pub alpha: Vec<u32>,
    pub re: f64,
    #[serde(default)]
    pub im: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum KernelConfig {
    SyntheticPower {
        lambda: f64,
        #[serde(default = "one")]
        scale: f64,
    },
    Yukawa {
        kappa: f64,
        /// Image window; the smallest sufficient one when omitted.
        #[serde(default)]
        nmax: Option<usize>,
    },
    LaplaceEwald {
        #[serde(default)]
        eta: Option<f64>,
        #[serde(default)]
        nreal: Option<usize>,
        #[serde(default)]
        nrecip: Option<usize>,
    },
    /// Damped Fourier series of the fundamental solution of `operator`.
    FourierOracle {
        zmax: usize,
        #[serde(default)]
        sigma: Option<f64>,
    },
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DomainConfig {
    Ball { center: Vec<f64>, radius: f64 },
    Box { lo: Vec<f64>, hi: Vec<f64> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DensityConfig {
    Constant {
        value: f64,
    },
    Trig {
        #[serde(default = "one")]
        amplitude: f64,
        modes: Vec<i32>,
        #[serde(default)]
        phase: f64,
    },
    Bump {
        #[serde(default = "one")]
        amplitude: f64,
        center: Vec<f64>,
        width: f64,
    },
    Poly {
        terms: Vec<PolyTerm>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PolyTerm {
    pub alpha: Vec<u32>,
    pub coeff: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct QuadratureConfig {
    pub resolution: usize,
    pub patch_depth: Option<usize>,
    pub boundary_resolution: usize,
}

impl Default for QuadratureConfig {
    fn default() -> Self {
        Self {
            resolution: 16,
            patch_depth: None,
            boundary_resolution: 32,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvaluationConfig {
    /// CSV with one point per row.
    pub points_file: Option<String>,
    /// Cell-centred grid with this many points per axis.
    pub grid_per_axis: Option<usize>,
    pub region: RegionKind,
    pub margin: f64,
    pub count: usize,
    pub seed: u64,
}

impl Default for EvaluationConfig {
    fn default() -> Self {
        Self {
            points_file: None,
            grid_per_axis: None,
            region: RegionKind::Inner,
            margin: 0.05,
            count: 4,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PotentialConfig {
    pub side: Side,
    /// Axis `j` or a multi-index `β`.
    pub deriv: Option<Vec<u32>>,
}

impl Default for PotentialConfig {
    fn default() -> Self {
        Self {
            side: Side::Plus,
            deriv: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VerifyConfig {
    pub suites: Vec<String>,
    /// Points per identity, operator and bound check.
    pub points: usize,
    /// Points for kernel-level checks.
    pub kernel_points: usize,
    /// Random extra instances in the bound and Roumieu suites.
    pub random_instances: usize,
    pub margin: f64,
    pub seed: u64,
    /// Doubling sequence of Fourier windows compared with the kernel.
    pub fourier_zmax: Vec<usize>,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        Self {
            suites: vec![
                "kernel".into(),
                "identities".into(),
                "bounds".into(),
                "solve".into(),
            ],
            points: 2,
            kernel_points: 50,
            random_instances: 0,
            margin: 0.05,
            seed: 0,
            fourier_zmax: vec![10, 20, 40],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NormsConfig {
    pub samples_per_axis: usize,
    pub shells: usize,
    pub rho: f64,
    pub order: usize,
    pub window_margin: f64,
}

impl Default for NormsConfig {
    fn default() -> Self {
        Self {
            samples_per_axis: 32,
            shells: 10,
            rho: 0.05,
            order: 3,
            window_margin: 0.25,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepKind {
    Resolution,
    Nmax,
    Zmax,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ConvergenceConfig {
    pub sweep: SweepKind,
    pub values: Vec<usize>,
    /// Reference parameter; twice the largest value when omitted.
    pub reference: Option<usize>,
}

impl Default for ConvergenceConfig {
    fn default() -> Self {
        Self {
            sweep: SweepKind::Resolution,
            values: vec![16, 32, 64],
            reference: None,
        }
    }
}

/// Validated library objects built from a [`RunConfig`].
#[derive(Clone)]
pub struct Setup {
    pub cell: PeriodicityCell,
    pub operator: EllipticOperator,
    pub kernel: Arc<dyn PeriodicKernel>,
    pub domain: Option<DomainShape>,
    pub density: Density,
    pub options: QuadratureOptions,
    pub boundary_resolution: usize,
}

fn invalid(msg: impl Into<String>) -> CliError {
    CliError::Config(msg.into())
}

fn lib(context: &str) -> impl Fn(periodica::Error) -> CliError + '_ {
    move |e| CliError::Config(format!("{context}: {e}"))
}

impl RunConfig {
    /// Parses a configuration. Without a `domain` key the domain is the
    /// ball of radius `0.2 q_min` at the centre of the configured cell.
    pub fn from_json(text: &str) -> Result<Self, CliError> {
        let value: serde_json::Value =
            serde_json::from_str(text).map_err(|e| invalid(format!("config is not valid: {e}")))?;
        let has_domain = value.get("domain").is_some();
        let mut cfg: Self = serde_json::from_value(value)
            .map_err(|e| invalid(format!("config is not valid: {e}")))?;
        if !has_domain {
            let q = &cfg.cell.periods;
            cfg.domain = Some(DomainConfig::Ball {
                center: q.iter().map(|p| 0.5 * p).collect(),
                radius: 0.2 * q.iter().cloned().fold(f64::INFINITY, f64::min),
            });
        }
        Ok(cfg)
    }

    pub fn dim(&self) -> usize {
        self.cell.periods.len()
    }

    pub fn build(&self) -> Result<Setup, CliError> {
        let cell = PeriodicityCell::new(&self.cell.periods).map_err(lib("cell"))?;
        let n = cell.dim();
        let operator = self.operator.build(n)?;
        let kernel = self.kernel.build(&cell, &operator)?;
        let domain = self
            .domain
            .as_ref()
            .map(|d| match d {
                DomainConfig::Ball { center, radius } => DomainShape::ball(&cell, center, *radius),
                DomainConfig::Box { lo, hi } => DomainShape::cuboid(&cell, lo, hi),
            })
            .transpose()
            .map_err(lib("domain"))?;
        let density = self.density.build(&cell)?;
        let q = &self.quadrature;
        // Rules are shaped for the kernel's singularity exponent.
        let mut options = QuadratureOptions::new(q.resolution).with_singularity(kernel.lambda());
        if let Some(d) = q.patch_depth {
            options = options.with_patch_depth(d);
        }
        if q.resolution < 8 || q.boundary_resolution < 16 {
            return Err(invalid(format!(
                "quadrature: resolution must be >= 8 and boundary_resolution >= 16, got {} and {}",
                q.resolution, q.boundary_resolution
            )));
        }
        for (name, m) in [
            ("evaluation.margin", self.evaluation.margin),
            ("verify.margin", self.verify.margin),
        ] {
            if !(m > 0.0 && m.is_finite()) {
                return Err(invalid(format!("{name} must be positive, got {m}")));
            }
        }
        let nm = &self.norms;
        if !(nm.rho > 0.0) || nm.order > 3 || nm.samples_per_axis < 16 {
            return Err(invalid(
                "norms: need rho > 0, order <= 3 and samples_per_axis >= 16",
            ));
        }
        if let Some(beta) = &self.potential.deriv {
            parse_deriv(beta, n)?;
        }
        Ok(Setup {
            cell,
            operator,
            kernel,
            domain,
            density,
            options,
            boundary_resolution: q.boundary_resolution,
        })
    }
}

/// A single entry `[j]` means the axis `j`; `n` entries form a multi-index.
pub fn parse_deriv(v: &[u32], n: usize) -> Result<Deriv, CliError> {
    match v.len() {
        1 if (v[0] as usize) < n => Ok(Deriv::Axis(v[0] as usize)),
        len if len == n && (1..=3).contains(&v.iter().sum::<u32>()) => Ok(Deriv::Beta(MultiIndex::new(v))),
        _ => Err(invalid(format!(
            "deriv must be an axis below {n} or a multi-index of length {n} and order 1..=3, got {v:?}"
        ))),
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Deriv {
    Axis(usize),
    Beta(MultiIndex),
}

impl OperatorConfig {
    pub fn build(&self, n: usize) -> Result<EllipticOperator, CliError> {
        match self {
            OperatorConfig::Laplace => EllipticOperator::laplace(n),
            OperatorConfig::ModifiedHelmholtz { kappa } => {
                EllipticOperator::modified_helmholtz(n, *kappa)
            }
            OperatorConfig::General { coeffs } => {
                if let Some(c) = coeffs.iter().find(|c| c.alpha.len() != n) {
                    return Err(invalid(format!(
                        "operator: multi-index {:?} has wrong length",
                        c.alpha
                    )));
                }
                let c: Vec<(MultiIndex, Complex64)> = coeffs
                    .iter()
                    .map(|c| (MultiIndex::new(&c.alpha), Complex64::new(c.re, c.im)))
                    .collect();
                EllipticOperator::new(n, &c)
            }
        }
        .map_err(lib("operator"))
    }
}

impl KernelConfig {
    pub fn build(
        &self,
        cell: &PeriodicityCell,
        op: &EllipticOperator,
    ) -> Result<Arc<dyn PeriodicKernel>, CliError> {
        let k: Arc<dyn PeriodicKernel> = match *self {
            KernelConfig::SyntheticPower { lambda, scale } => {
                Arc::new(SyntheticPowerKernel::new(cell, lambda, scale).map_err(lib("kernel"))?)
            }
            KernelConfig::Yukawa { kappa, nmax } => {
                let nmax = nmax.unwrap_or_else(|| YukawaPeriodic::minimal_nmax(cell, kappa, 1e-14));
                Arc::new(YukawaPeriodic::new(cell, kappa, nmax).map_err(lib("kernel"))?)
            }
            KernelConfig::LaplaceEwald { eta, nreal, nrecip } => {
                let k = match (eta, nreal, nrecip) {
                    (None, None, None) => LaplaceEwald::auto(cell),
                    _ => {
                        let eta = eta.unwrap_or_else(|| LaplaceEwald::default_eta(cell));
                        let (r, k) = LaplaceEwald::minimal_radii(cell, eta, 1e-15);
                        LaplaceEwald::new(cell, eta, nreal.unwrap_or(r), nrecip.unwrap_or(k))
                    }
                };
                Arc::new(k.map_err(lib("kernel"))?)
            }
            KernelConfig::FourierOracle { zmax, sigma } => {
                let k = match sigma {
                    Some(s) => FourierOracle::new(op, cell, zmax, s),
                    None => FourierOracle::with_default_sigma(op, cell, zmax),
                };
                Arc::new(k.map_err(lib("kernel"))?)
            }
        };
        Ok(k)
    }

    /// Whether the kernel is the periodic fundamental solution of `op`.
    pub fn solves(&self, op: &OperatorConfig) -> bool {
        match (self, op) {
            (KernelConfig::LaplaceEwald { .. }, OperatorConfig::Laplace) => true,
            (
                KernelConfig::Yukawa { kappa: a, .. },
                OperatorConfig::ModifiedHelmholtz { kappa: b },
            ) => a == b,
            (KernelConfig::FourierOracle { .. }, _) => true,
            _ => false,
        }
    }
}

impl DensityConfig {
    pub fn build(&self, cell: &PeriodicityCell) -> Result<Density, CliError> {
        let n = cell.dim();
        match self {
            DensityConfig::Constant { value } => Ok(Density::constant(*value)),
            DensityConfig::Trig {
                amplitude,
                modes,
                phase,
            } => Density::trig(cell, *amplitude, modes, *phase).map_err(lib("density")),
            DensityConfig::Bump {
                amplitude,
                center,
                width,
            } => {
                if center.len() != n {
                    return Err(invalid(format!("density: center must have {n} entries")));
                }
                Density::bump(*amplitude, center, *width).map_err(lib("density"))
            }
            DensityConfig::Poly { terms } => {
                if let Some(t) = terms.iter().find(|t| t.alpha.len() != n) {
                    return Err(invalid(format!(
                        "density: multi-index {:?} has wrong length",
                        t.alpha
                    )));
                }
                let t: Vec<(MultiIndex, f64)> = terms
                    .iter()
                    .map(|t| (MultiIndex::new(&t.alpha), t.coeff))
                    .collect();
                Density::poly(n, &t).map_err(lib("density"))
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_object_is_default() {
        let c = RunConfig::from_json("{}").unwrap();
        assert_eq!(c, RunConfig::default());
        let s = c.build().unwrap();
        assert_eq!(s.cell.dim(), 3);
        assert!(s.domain.is_some());
    }

    #[test]
    fn default_domain_follows_the_cell() {
        let c = RunConfig::from_json(r#"{"cell": {"periods": [1, 2]}}"#).unwrap();
        assert_eq!(
            c.domain,
            Some(DomainConfig::Ball {
                center: vec![0.5, 1.0],
                radius: 0.2
            })
        );
        assert!(c.build().is_ok());
        let none =
            RunConfig::from_json(r#"{"cell": {"periods": [1, 1]}, "domain": null}"#).unwrap();
        assert_eq!(none.domain, None);
    }

    #[test]
    fn rejects_domain_touching_cell_boundary() {
        let c = RunConfig::from_json(
            r#"{"domain": {"kind": "ball", "center": [0.5, 0.5, 0.5], "radius": 0.5}}"#,
        )
        .unwrap();
        match c.build() {
            Err(CliError::Config(msg)) => assert!(msg.contains("inside the open cell"), "{msg}"),
            _ => panic!("accepted"),
        }
    }

    #[test]
    fn rejects_unknown_fields_and_bad_lambda() {
        assert!(RunConfig::from_json(r#"{"cel": [1, 1]}"#).is_err());
        let c = RunConfig::from_json(
            r#"{"cell": {"periods": [1, 1]}, "domain": null, "kernel": {"kind": "synthetic_power", "lambda": 2.5}}"#,
        )
        .unwrap();
        assert!(c.build().is_err());
    }

    #[test]
    fn deriv_forms() {
        assert_eq!(parse_deriv(&[1], 2).unwrap(), Deriv::Axis(1));
        assert_eq!(
            parse_deriv(&[2, 0], 2).unwrap(),
            Deriv::Beta(MultiIndex::new(&[2, 0]))
        );
        assert!(parse_deriv(&[2], 2).is_err());
        assert!(parse_deriv(&[2, 2], 2).is_err());
    }
}
