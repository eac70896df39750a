//! Acceptance criteria 1 to 9. Prints one PASS/FAIL line per criterion and
//! exits non-zero when any criterion fails.

use std::process::ExitCode;
use std::time::Instant;

use periodica::kernels::{estimate_norms, LaplaceEwald, PeriodicKernel, SyntheticPowerKernel};
use periodica::quadrature::{
    ball_power_integral, ball_rule, build_boundary, build_cell_boundary, build_complement,
    build_interior, DomainShape, QuadratureOptions,
};
use periodica::PeriodicityCell;
use periodica_cli::checks::{acper_checks, invariant, run_suite, CheckSet};
use periodica_cli::commands::verify_checks;
use periodica_cli::RunConfig;
use serde_json::json;

/// Outcome of one criterion: pass flag and a one-line summary.
type Outcome = Result<(bool, String), String>;

fn config(v: serde_json::Value) -> RunConfig {
    serde_json::from_value(v).expect("acceptance config is valid")
}

fn suite(cfg: &RunConfig, name: &str) -> Result<CheckSet, String> {
    let setup = cfg.build().map_err(|e| e.to_string())?;
    let mut out = CheckSet::default();
    run_suite(cfg, &setup, name, &mut out).map_err(|e| e.to_string())?;
    Ok(out)
}

/// Pass flag and summary for the named checks, all of which must be present.
fn expect(set: &CheckSet, names: &[&str]) -> (bool, Vec<String>) {
    let mut ok = true;
    let mut parts = Vec::new();
    for &n in names {
        match set.get(n) {
            Some(c) => {
                ok &= c.pass;
                parts.push(format!(
                    "{n}={:.3e}{}",
                    c.residual,
                    if c.pass { "" } else { "(fail)" }
                ));
            }
            None => {
                ok = false;
                parts.push(format!(
                    "{n}=missing({})",
                    set.skipped.get(n).map(String::as_str).unwrap_or("")
                ));
            }
        }
    }
    (ok, parts)
}

fn laplace_3d(suites: &[&str]) -> serde_json::Value {
    json!({"verify": {"suites": suites, "kernel_points": 50, "seed": 11}})
}

fn criterion_1() -> Outcome {
    let set = suite(&config(laplace_3d(&["kernel"])), "kernel")?;
    let (ok, parts) = expect(
        &set,
        &["zero_mean", "laplacian_identity", "ewald_eta_invariance"],
    );
    Ok((ok, parts.join(" ")))
}

fn criterion_2() -> Outcome {
    let cfg = config(json!({
        "operator": {"kind": "modified_helmholtz", "kappa": 2.0},
        "kernel": {"kind": "yukawa", "kappa": 2.0},
        "verify": {"kernel_points": 50, "seed": 12, "fourier_zmax": [10, 20, 40]}
    }));
    let set = suite(&cfg, "kernel")?;
    let (ok, parts) = expect(
        &set,
        &[
            "fourier_agreement",
            "fourier_agreement_monotone",
            "operator_identity",
        ],
    );
    Ok((ok, parts.join(" ")))
}

fn criterion_3() -> Outcome {
    let mut ok = true;
    let mut parts = Vec::new();
    for n in [3, 2] {
        let cell = PeriodicityCell::unit(n).map_err(|e| e.to_string())?;
        let h = LaplaceEwald::auto(&cell).map_err(|e| e.to_string())?;
        let est = estimate_norms(&h, 32, 10).map_err(|e| e.to_string())?;
        let g = est.gradient_refinement_ratio.unwrap_or(f64::INFINITY);
        let finite = est.a0_norm.is_finite() && est.a1_norm.is_some_and(f64::is_finite);
        ok &= finite && est.refinement_ratio <= 1.05 && g <= 1.05;
        parts.push(format!(
            "n={n}: lambda={} a0={:.4e} ratio={:.4} grad_ratio={:.4}",
            h.lambda(),
            est.a0_norm,
            est.refinement_ratio,
            g
        ));
    }
    Ok((ok, parts.join("; ")))
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

fn criterion_4() -> Outcome {
    let e = |e: periodica::Error| e.to_string();
    let mut worst: Vec<(String, f64, f64)> = Vec::new();
    let pi = std::f64::consts::PI;

    let cell3 = PeriodicityCell::unit(3).map_err(e)?;
    let c = [0.5; 3];
    let ball = DomainShape::ball(&cell3, &c, 0.25).map_err(e)?;
    let q = build_interior(&ball, &QuadratureOptions::new(64), Some(&c)).map_err(e)?;
    let newton = q.nodes.integrate(|y| {
        1.0 / y
            .iter()
            .zip(&c)
            .map(|(a, b)| (a - b).powi(2))
            .sum::<f64>()
            .sqrt()
    });
    worst.push(("newton_ball".into(), rel(newton, 2.0 * pi * 0.0625), 1e-6));
    let plain = build_interior(&ball, &QuadratureOptions::new(64), None).map_err(e)?;
    worst.push((
        "ball_volume".into(),
        rel(plain.nodes.total_weight(), 4.0 / 3.0 * pi * 0.25f64.powi(3)),
        1e-8,
    ));

    let cell2 = PeriodicityCell::unit(2).map_err(e)?;
    let square = DomainShape::cuboid(&cell2, &[0.2, 0.2], &[0.8, 0.8]).map_err(e)?;
    let sq = build_interior(&square, &QuadratureOptions::new(32), None).map_err(e)?;
    worst.push(("box_area".into(), rel(sq.nodes.total_weight(), 0.36), 1e-8));

    let disk = DomainShape::ball(&cell2, &[0.5, 0.5], 0.25).map_err(e)?;
    let circle = build_boundary(&disk, 64).map_err(e)?;
    worst.push((
        "circle_length".into(),
        rel(circle.nodes.total_weight(), pi / 2.0),
        1e-10,
    ));
    let sphere = build_boundary(&ball, 64).map_err(e)?;
    worst.push((
        "sphere_area".into(),
        rel(sphere.nodes.total_weight(), pi / 4.0),
        1e-8,
    ));
    let perimeter = build_cell_boundary(&cell2, 32).map_err(e)?;
    worst.push((
        "cell_perimeter".into(),
        rel(perimeter.nodes.total_weight(), 4.0),
        1e-12,
    ));
    let normals = [&circle, &sphere, &perimeter]
        .iter()
        .flat_map(|b| b.normal_moments())
        .fold(0.0f64, |m, v| m.max(v.abs()));
    worst.push(("normal_moments".into(), normals, 1e-12));

    let comp =
        build_complement(&cell2, Some(&disk), &QuadratureOptions::new(128), None).map_err(e)?;
    worst.push((
        "complement_area".into(),
        rel(comp.nodes.total_weight(), 1.0 - pi * 0.0625),
        1e-5,
    ));
    let whole = build_complement(&cell2, None, &QuadratureOptions::new(32), None).map_err(e)?;
    worst.push((
        "empty_domain_complement".into(),
        rel(whole.nodes.total_weight(), 1.0),
        1e-12,
    ));

    let mut patch = 0.0f64;
    for n in [2usize, 3] {
        let origin = vec![0.0; n];
        for lambda in [0.3, 0.5, 1.0, 1.5, n as f64 - 0.2] {
            for delta in [1e-3, 0.05, 0.3] {
                let rule = ball_rule(
                    &origin,
                    delta,
                    &[origin.clone()],
                    1.0,
                    &QuadratureOptions::new(32).with_singularity(lambda),
                )
                .map_err(e)?;
                let v =
                    rule.integrate(|y| y.iter().map(|t| t * t).sum::<f64>().powf(-0.5 * lambda));
                patch = patch.max(rel(v, ball_power_integral(n, lambda, delta)));
            }
        }
    }
    worst.push(("singular_patch".into(), patch, 1e-8));

    let ok = worst.iter().all(|(_, v, tol)| *v <= *tol);
    let parts: Vec<String> = worst
        .iter()
        .map(|(n, v, t)| format!("{n}={v:.2e}/{t:.0e}"))
        .collect();
    Ok((ok, parts.join(" ")))
}

fn laplace_2d(extra: serde_json::Value) -> RunConfig {
    let mut base = json!({
        "cell": {"periods": [1.0, 1.0]},
        "domain": {"kind": "ball", "center": [0.5, 0.5], "radius": 0.25},
        "density": {"kind": "bump", "center": [0.45, 0.55], "width": 0.3},
        "quadrature": {"resolution": 32, "boundary_resolution": 64},
        "norms": {"rho": 0.1}
    });
    if let (Some(b), Some(e)) = (base.as_object_mut(), extra.as_object()) {
        for (k, v) in e {
            b.insert(k.clone(), v.clone());
        }
    }
    config(base)
}

fn criterion_5() -> Outcome {
    let cfg = laplace_2d(json!({"verify": {"points": 4, "random_instances": 20, "seed": 5}}));
    let set = suite(&cfg, "bounds")?;
    let (ok, parts) = expect(
        &set,
        &["sup_bound_random", "sup_bound_plus", "sup_bound_minus"],
    );
    Ok((
        ok,
        format!("20 instances; slack as rhs - lhs: {}", parts.join(" ")),
    ))
}

fn criterion_6() -> Outcome {
    let names = [
        "gradient_kernel_route",
        "derivative_identity_plus",
        "derivative_identity_minus",
        "derivative_identity_empty_domain",
        "cell_moment_periodic",
        "cell_moment_ablation",
        "higher_derivative_order2",
    ];
    let cfg = laplace_2d(json!({"verify": {"points": 20, "seed": 6}}));
    let set = suite(&cfg, "identities")?;
    let (ok, parts) = expect(&set, &names);
    Ok((ok, format!("20 points per check: {}", parts.join(" "))))
}

fn criterion_7() -> Outcome {
    let laplace = config(json!({"verify": {"points": 10, "seed": 7, "margin": 0.02}}));
    let set = suite(&laplace, "solve")?;
    let (ok_l, parts_l) = expect(&set, &["solve_verify"]);
    let yukawa = config(json!({
        "cell": {"periods": [1.0, 1.0]},
        "operator": {"kind": "modified_helmholtz", "kappa": 10.0},
        "kernel": {"kind": "yukawa", "kappa": 10.0},
        "domain": {"kind": "ball", "center": [0.5, 0.5], "radius": 0.25},
        "density": {"kind": "trig", "modes": [1, 2], "phase": 0.4},
        "quadrature": {"resolution": 32, "boundary_resolution": 64},
        "verify": {"points": 10, "seed": 7, "margin": 0.02}
    }));
    let set = suite(&yukawa, "solve")?;
    let (ok_y, parts_y) = expect(&set, &["solve_verify"]);
    Ok((
        ok_l && ok_y,
        format!(
            "laplace n=3 R=0.2: {}; yukawa n=2 kappa=10: {}",
            parts_l[0], parts_y[0]
        ),
    ))
}

fn criterion_8() -> Outcome {
    let cfg = laplace_2d(json!({
        "kernel": {"kind": "synthetic_power", "lambda": 0.6},
        "verify": {"points": 8, "random_instances": 10, "seed": 8}
    }));
    let set = suite(&cfg, "roumieu")?;
    let (mut ok, mut parts) = expect(
        &set,
        &[
            "continuity_order_bounds",
            "roumieu_monotonicity",
            "acper_envelope",
            "acper_bracket",
            "acper_decay",
        ],
    );
    let cell = PeriodicityCell::unit(3).map_err(|e| e.to_string())?;
    let three = config(json!({"kernel": {"kind": "synthetic_power", "lambda": 1.0}}));
    let setup = three.build().map_err(|e| e.to_string())?;
    let h = SyntheticPowerKernel::new(&cell, 1.0, 1.0).map_err(|e| e.to_string())?;
    let mut acper = CheckSet::default();
    acper_checks(&h, &setup, 8, &mut acper).map_err(|e| e.to_string())?;
    let (ok3, parts3) = expect(&acper, &["acper_envelope", "acper_bracket", "acper_decay"]);
    ok &= ok3;
    parts.extend(parts3.into_iter().map(|p| format!("n=3 {p}")));
    Ok((ok, parts.join(" ")))
}

fn criterion_9() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let path = dir.path().join("verify.json");
    let cfg = laplace_2d(
        json!({"verify": {"suites": ["kernel", "identities", "bounds", "solve", "roumieu"], "points": 2, "kernel_points": 20, "random_instances": 2}}),
    );
    std::fs::write(
        &path,
        serde_json::to_string(&cfg).map_err(|e| e.to_string())?,
    )
    .map_err(|e| e.to_string())?;
    let run = || {
        std::process::Command::new(env!("CARGO_BIN_EXE_periodica"))
            .args(["verify", "--config"])
            .arg(&path)
            .output()
            .map_err(|e| e.to_string())
    };
    let (a, b) = (run()?, run()?);
    let identical = a.stdout == b.stdout && !a.stdout.is_empty();
    let report: serde_json::Value = serde_json::from_slice(&a.stdout).map_err(|e| e.to_string())?;
    let checks = report["checks"].as_object().ok_or("report has no checks")?;
    let trace = report["traceability"]
        .as_object()
        .ok_or("report has no traceability")?;
    let traced = checks
        .keys()
        .all(|k| trace.get(k).and_then(|v| v.as_str()) == invariant(k) && invariant(k).is_some());
    let setup = cfg.build().map_err(|e| e.to_string())?;
    let lib = verify_checks(&cfg, &setup, None).map_err(|e| e.to_string())?;
    let same_names = lib.checks.keys().eq(checks.keys());
    Ok((
        identical && traced && same_names && a.status.success(),
        format!(
            "{} checks; byte-identical={identical} traced={traced} exit={:?}",
            checks.len(),
            a.status.code()
        ),
    ))
}

fn main() -> ExitCode {
    let criteria: [(&str, fn() -> Outcome); 9] = [
        ("periodic fundamental solution", criterion_1),
        ("cross-scheme kernel equivalence", criterion_2),
        ("decay exponents", criterion_3),
        ("quadrature oracles", criterion_4),
        ("sup bound on random instances", criterion_5),
        ("derivative identities", criterion_6),
        ("operator check of the potential", criterion_7),
        ("roumieu suite", criterion_8),
        ("determinism and traceability", criterion_9),
    ];
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let t = Instant::now();
        let (pass, detail) = match f() {
            Ok(r) => r,
            Err(e) => (false, format!("error: {e}")),
        };
        failed += usize::from(!pass);
        println!(
            "criterion {} ({name}): {} [{:.1}s] {detail}",
            i + 1,
            if pass { "PASS" } else { "FAIL" },
            t.elapsed().as_secs_f64()
        );
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{failed} criteria failed");
        ExitCode::FAILURE
    }
}
