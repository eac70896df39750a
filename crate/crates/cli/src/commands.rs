//! Command implementations. Each command returns its artifact; writing it
//! out is left to the caller.

use std::collections::BTreeMap;

use periodica::kernels::{estimate_norms, FourierOracle, PeriodicKernel, YukawaPeriodic};
use periodica::potentials::{
    relative_gap, CheckRecord, EvaluationRegion, PotentialEvaluator, Side,
};
use periodica::quadrature::QuadratureOptions;
use periodica::roumieu::kernel_window_seminorm;
use periodica::MultiIndex;
use serde::Serialize;
use serde_json::json;

use crate::checks::{self, CheckSet, GAP_FLOOR};
use crate::config::{parse_deriv, Deriv, KernelConfig, RunConfig, Setup, SweepKind};
use crate::output::{axis_header, csv_table, read_points};
use crate::CliError;

#[derive(Debug, Clone, PartialEq)]
pub enum Command {
    Greens,
    Potential {
        side: Option<Side>,
        points: Option<String>,
        deriv: Option<Vec<u32>>,
    },
    Verify {
        suite: Option<String>,
    },
    Norms,
    Convergence {
        sweep: Option<(SweepKind, Vec<usize>)>,
    },
}

/// Output of a command: file name, contents and the names of failed checks.
#[derive(Debug, Clone, PartialEq)]
pub struct Artifact {
    pub file_name: String,
    pub contents: String,
    pub failing: Vec<String>,
}

impl Artifact {
    fn new(file_name: &str, contents: String) -> Self {
        Self {
            file_name: file_name.into(),
            contents,
            failing: Vec::new(),
        }
    }
}

pub fn run(cfg: &RunConfig, cmd: &Command) -> Result<Artifact, CliError> {
    let setup = cfg.build()?;
    match cmd {
        Command::Greens => greens(cfg, &setup),
        Command::Potential {
            side,
            points,
            deriv,
        } => {
            let side = side.unwrap_or(cfg.potential.side);
            let deriv = match deriv.as_ref().or(cfg.potential.deriv.as_ref()) {
                Some(d) => Some(parse_deriv(d, setup.cell.dim())?),
                None => None,
            };
            potential(cfg, &setup, side, points.as_deref(), deriv)
        }
        Command::Verify { suite } => verify(cfg, &setup, suite.as_deref()),
        Command::Norms => norms(cfg, &setup),
        Command::Convergence { sweep } => {
            let (kind, values) = match sweep {
                Some((k, v)) => (*k, v.clone()),
                None => (cfg.convergence.sweep, cfg.convergence.values.clone()),
            };
            convergence(cfg, &setup, kind, &values)
        }
    }
}

/// `a..b` doubles from `a` up to `b`; otherwise a comma-separated list.
pub fn parse_range(s: &str) -> Result<Vec<usize>, CliError> {
    let bad = || {
        CliError::Input(format!(
            "range `{s}` must be `a..b` or a comma-separated list of positive integers"
        ))
    };
    let values: Vec<usize> = if let Some((a, b)) = s.split_once("..") {
        let a: usize = a.trim().parse().map_err(|_| bad())?;
        let b: usize = b.trim().parse().map_err(|_| bad())?;
        if a == 0 || b < a {
            return Err(bad());
        }
        std::iter::successors(Some(a), |&v| Some(2 * v))
            .take_while(|&v| v <= b)
            .collect()
    } else {
        s.split(',')
            .map(|v| v.trim().parse().map_err(|_| bad()))
            .collect::<Result<_, _>>()?
    };
    if values.is_empty() || values.contains(&0) {
        return Err(bad());
    }
    Ok(values)
}

fn cell_grid(setup: &Setup, m: usize) -> Vec<Vec<f64>> {
    let n = setup.cell.dim();
    let total = m.pow(n as u32);
    (0..total)
        .map(|mut idx| {
            (0..n)
                .map(|j| {
                    let i = idx % m;
                    idx /= m;
                    setup.cell.period(j) * (i as f64 + 0.5) / m as f64
                })
                .collect()
        })
        .collect()
}

/// Points file, then grid, then `fallback`.
fn resolve_points(
    cfg: &RunConfig,
    setup: &Setup,
    file: Option<&str>,
    fallback: impl FnOnce() -> Result<Vec<Vec<f64>>, CliError>,
) -> Result<Vec<Vec<f64>>, CliError> {
    let n = setup.cell.dim();
    if let Some(path) = file.or(cfg.evaluation.points_file.as_deref()) {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Input(format!("cannot read points file `{path}`: {e}")))?;
        return read_points(&text, n);
    }
    if let Some(m) = cfg.evaluation.grid_per_axis {
        if m == 0 {
            return Err(CliError::Config(
                "evaluation.grid_per_axis must be positive".into(),
            ));
        }
        return Ok(cell_grid(setup, m));
    }
    fallback()
}

fn region_points(cfg: &RunConfig, setup: &Setup) -> Result<Vec<Vec<f64>>, CliError> {
    let e = &cfg.evaluation;
    Ok(EvaluationRegion::new(e.region, e.margin)?.sample(
        &setup.cell,
        setup.domain.as_ref(),
        e.count,
        e.seed,
    )?)
}

fn greens(cfg: &RunConfig, setup: &Setup) -> Result<Artifact, CliError> {
    let n = setup.cell.dim();
    let h = setup.kernel.as_ref();
    let points = resolve_points(cfg, setup, None, || Ok(cell_grid(setup, 4)))?;
    let mut header = axis_header("x", n);
    header.push("value".into());
    header.extend(axis_header("grad", n));
    header.push("trunc_err".into());
    let mut rows = Vec::with_capacity(points.len());
    for x in &points {
        if setup.cell.dist_to_lattice(x) == 0.0 {
            return Err(CliError::Input(format!(
                "kernel point {x:?} lies on the lattice"
            )));
        }
        let mut row = x.clone();
        row.push(h.value(x));
        let mut g = vec![f64::NAN; n];
        if h.is_differentiable() {
            h.gradient(x, &mut g);
        }
        row.extend(g);
        row.push(h.truncation_error());
        rows.push(row);
    }
    Ok(Artifact::new("greens.csv", csv_table(&header, &rows)?))
}

fn potential(
    cfg: &RunConfig,
    setup: &Setup,
    side: Side,
    file: Option<&str>,
    deriv: Option<Deriv>,
) -> Result<Artifact, CliError> {
    let n = setup.cell.dim();
    let h = setup.kernel.as_ref();
    let phi = &setup.density;
    let points = resolve_points(cfg, setup, file, || region_points(cfg, setup))?;
    let ev = PotentialEvaluator::new(
        side,
        &setup.cell,
        setup.domain.as_ref(),
        setup.options,
        setup.boundary_resolution,
    )?;
    let mut header = axis_header("x", n);
    header.push("value".into());
    let kernel_route = h.is_differentiable() && h.lambda() + 1.0 < n as f64;
    match deriv {
        None => {}
        Some(Deriv::Axis(_)) if kernel_route => {
            header.extend(["density_route", "finite_difference", "residual"].map(String::from))
        }
        Some(_) => header.extend(["finite_difference", "residual"].map(String::from)),
    }
    let mut rows = Vec::with_capacity(points.len());
    for x in &points {
        let mut row = x.clone();
        match deriv {
            None => row.push(ev.value(h, phi, x)?),
            Some(Deriv::Axis(j)) if kernel_route => {
                let c = ev.derivative_identity(h, phi, x, j)?;
                row.extend([
                    c.kernel_route,
                    c.density_route,
                    c.finite_difference,
                    c.max_residual(GAP_FLOOR),
                ]);
            }
            Some(d) => {
                let beta = match d {
                    Deriv::Axis(j) => MultiIndex::unit(n, j),
                    Deriv::Beta(b) => b,
                };
                let r = ev.higher_derivative(h, phi, x, &beta)?;
                row.extend([
                    r.formula,
                    r.finite_difference,
                    relative_gap(r.formula, r.finite_difference, GAP_FLOOR),
                ]);
            }
        }
        rows.push(row);
    }
    let name = format!("potential_{}.csv", side.as_str());
    Ok(Artifact::new(&name, csv_table(&header, &rows)?))
}

#[derive(Serialize)]
struct VerifyReport<'a> {
    config_echo: &'a RunConfig,
    traceability: &'a BTreeMap<String, String>,
    checks: &'a BTreeMap<String, CheckRecord>,
    timing: Option<f64>,
    skipped: &'a BTreeMap<String, String>,
    notes: &'a BTreeMap<String, String>,
}

pub fn verify_checks(
    cfg: &RunConfig,
    setup: &Setup,
    suite: Option<&str>,
) -> Result<CheckSet, CliError> {
    match suite {
        Some("all") => {
            let mut out = CheckSet::default();
            for s in checks::SUITES {
                checks::run_suite(cfg, setup, s, &mut out)?;
            }
            Ok(out)
        }
        Some(s) => {
            let mut out = CheckSet::default();
            checks::run_suite(cfg, setup, s, &mut out)?;
            Ok(out)
        }
        None => checks::run_configured(cfg, setup),
    }
}

fn verify(cfg: &RunConfig, setup: &Setup, suite: Option<&str>) -> Result<Artifact, CliError> {
    let set = verify_checks(cfg, setup, suite)?;
    let report = VerifyReport {
        config_echo: cfg,
        traceability: &set.traceability,
        checks: &set.checks,
        timing: None,
        skipped: &set.skipped,
        notes: &set.notes,
    };
    let mut a = Artifact::new("verify.json", to_json(&report)?);
    a.failing = set.failing().into_iter().map(String::from).collect();
    Ok(a)
}

fn to_json<T: Serialize>(v: &T) -> Result<String, CliError> {
    let mut s = serde_json::to_string_pretty(v).map_err(|e| CliError::Input(e.to_string()))?;
    s.push('\n');
    Ok(s)
}

fn norms(cfg: &RunConfig, setup: &Setup) -> Result<Artifact, CliError> {
    let h = setup.kernel.as_ref();
    let nm = &cfg.norms;
    let est = estimate_norms(h, nm.samples_per_axis, nm.shells)?;
    let roumieu = if h.is_differentiable() {
        let r = kernel_window_seminorm(
            h,
            nm.window_margin * setup.cell.min_period(),
            nm.samples_per_axis,
            nm.rho,
            nm.order,
        )?;
        json!({"rho": r.rho, "order": r.max_order, "value": r.value, "beta": r.attaining_beta.orders()})
    } else {
        serde_json::Value::Null
    };
    let report = json!({
        "a0": est.a0_norm,
        "a1": est.a1_norm,
        "roumieu": roumieu,
        "refinement_ratio": est.refinement_ratio,
        "gradient_refinement_ratio": est.gradient_refinement_ratio,
        "sample_count": est.sample_count,
    });
    Ok(Artifact::new("norms.json", to_json(&report)?))
}

fn convergence(
    cfg: &RunConfig,
    setup: &Setup,
    kind: SweepKind,
    values: &[usize],
) -> Result<Artifact, CliError> {
    if values.is_empty() {
        return Err(CliError::Config(
            "convergence needs at least one parameter value".into(),
        ));
    }
    let max = *values.iter().max().expect("non-empty");
    let reference = cfg.convergence.reference.unwrap_or(2 * max);
    if reference <= max {
        return Err(CliError::Config(format!(
            "convergence.reference {reference} must exceed every swept value"
        )));
    }
    let header: Vec<String> = ["parameter", "value", "error"].map(String::from).to_vec();
    let rows = match kind {
        SweepKind::Resolution => {
            let side = cfg.potential.side;
            let points = resolve_points(cfg, setup, None, || region_points(cfg, setup))?;
            let at = |res: usize| -> Result<Vec<f64>, CliError> {
                let mut opts = QuadratureOptions::new(res);
                if let Some(d) = cfg.quadrature.patch_depth {
                    opts = opts.with_patch_depth(d);
                }
                let ev = PotentialEvaluator::new(
                    side,
                    &setup.cell,
                    setup.domain.as_ref(),
                    opts,
                    setup.boundary_resolution,
                )?;
                points
                    .iter()
                    .map(|x| Ok(ev.value(setup.kernel.as_ref(), &setup.density, x)?))
                    .collect()
            };
            sweep_rows(values, &at(reference)?, at)?
        }
        SweepKind::Nmax => {
            let KernelConfig::Yukawa { kappa, .. } = cfg.kernel else {
                return Err(CliError::Config(
                    "the nmax sweep needs a yukawa kernel".into(),
                ));
            };
            let points = resolve_points(cfg, setup, None, || Ok(cell_grid(setup, 4)))?;
            let at = |m: usize| -> Result<Vec<f64>, CliError> {
                let k = YukawaPeriodic::with_tolerance(&setup.cell, kappa, m, f64::INFINITY)?;
                Ok(points.iter().map(|x| k.value(x)).collect())
            };
            sweep_rows(values, &at(reference)?, at)?
        }
        SweepKind::Zmax => {
            let points = resolve_points(cfg, setup, None, || Ok(cell_grid(setup, 4)))?;
            let exact = matches!(
                cfg.kernel,
                KernelConfig::Yukawa { .. } | KernelConfig::LaplaceEwald { .. }
            ) && cfg.kernel.solves(&cfg.operator);
            let at = |z: usize| -> Result<Vec<f64>, CliError> {
                let k = FourierOracle::with_default_sigma(&setup.operator, &setup.cell, z)?;
                Ok(points.iter().map(|x| k.value(x)).collect())
            };
            let reference = if exact {
                points.iter().map(|x| setup.kernel.value(x)).collect()
            } else {
                at(reference)?
            };
            sweep_rows(values, &reference, at)?
        }
    };
    Ok(Artifact::new("convergence.csv", csv_table(&header, &rows)?))
}

/// Rows `(parameter, value at the first point, max error over points)`.
fn sweep_rows(
    values: &[usize],
    reference: &[f64],
    at: impl Fn(usize) -> Result<Vec<f64>, CliError>,
) -> Result<Vec<Vec<f64>>, CliError> {
    values
        .iter()
        .map(|&p| {
            let v = at(p)?;
            let err = v
                .iter()
                .zip(reference)
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max);
            Ok(vec![p as f64, v[0], err])
        })
        .collect()
}
