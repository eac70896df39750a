use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_owned()
}

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_periodica"))
        .args(args)
        .output()
        .unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8(o.stderr.clone()).unwrap()
}

const LAPLACE_2D: &str = r#"{
    "cell": {"periods": [1, 1]},
    "quadrature": {"resolution": 16, "boundary_resolution": 32},
    "verify": {"points": 2, "kernel_points": 5}
}"#;

fn csv_rows(text: &str) -> (Vec<String>, Vec<Vec<f64>>) {
    let mut lines = text.lines();
    let header = lines
        .next()
        .unwrap()
        .split(',')
        .map(str::to_owned)
        .collect();
    let rows = lines
        .map(|l| l.split(',').map(|v| v.parse().unwrap()).collect())
        .collect();
    (header, rows)
}

#[test]
fn verify_passes_and_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "cfg.json", LAPLACE_2D);
    let a = run(&["verify", "--config", &cfg, "--suite", "kernel"]);
    let b = run(&["verify", "--config", &cfg, "--suite", "kernel"]);
    assert_eq!(a.status.code(), Some(0), "{}", stderr(&a));
    assert_eq!(a.stdout, b.stdout);
    let report: Value = serde_json::from_slice(&a.stdout).unwrap();
    let checks = report["checks"].as_object().unwrap();
    assert!(checks.contains_key("zero_mean") && checks.contains_key("laplacian_identity"));
    for name in checks.keys() {
        assert!(report["traceability"][name].is_string(), "{name} untraced");
    }
    assert!(report["timing"].is_null());
    assert_eq!(
        report["config_echo"]["cell"]["periods"],
        serde_json::json!([1.0, 1.0])
    );
}

#[test]
fn verify_writes_into_the_output_directory() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "cfg.json", LAPLACE_2D);
    let out = dir.path().join("out");
    let o = run(&[
        "verify",
        "--config",
        &cfg,
        "--suite",
        "kernel",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0));
    assert!(o.stdout.is_empty());
    let text = std::fs::read_to_string(out.join("verify.json")).unwrap();
    assert!(text.ends_with("}\n"));
}

#[test]
fn failing_checks_exit_with_one() {
    let dir = tempfile::tempdir().unwrap();
    // Two Fourier modes per axis are nowhere near the Laplace kernel.
    let cfg = write(
        dir.path(),
        "cfg.json",
        r#"{"cell": {"periods": [1, 1]}, "kernel": {"kind": "fourier_oracle", "zmax": 2}, "verify": {"kernel_points": 5}}"#,
    );
    let o = run(&["verify", "--config", &cfg, "--suite", "kernel"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(
        stderr(&o).contains("check failed: laplacian_identity"),
        "{}",
        stderr(&o)
    );
    assert!(!o.stdout.is_empty());
}

#[test]
fn configuration_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let touching = write(
        dir.path(),
        "touching.json",
        r#"{"cell": {"periods": [1, 1]}, "domain": {"kind": "ball", "center": [0.5, 0.5], "radius": 0.5}}"#,
    );
    let o = run(&["greens", "--config", &touching]);
    assert_eq!(o.status.code(), Some(2));
    assert!(
        stderr(&o).contains("inside the open cell"),
        "{}",
        stderr(&o)
    );

    let unknown = write(
        dir.path(),
        "unknown.json",
        r#"{"cel": {"periods": [1, 1]}}"#,
    );
    assert_eq!(
        run(&["greens", "--config", &unknown]).status.code(),
        Some(2)
    );
    let missing = dir.path().join("missing.json");
    assert_eq!(
        run(&["greens", "--config", missing.to_str().unwrap()])
            .status
            .code(),
        Some(2)
    );

    let cfg = write(dir.path(), "cfg.json", LAPLACE_2D);
    for args in [
        vec!["verify", "--config", &cfg, "--suite", "nosuch"],
        vec!["convergence", "--config", &cfg, "--sweep", "bogus", "8..16"],
        vec!["convergence", "--config", &cfg, "--sweep", "nmax", "1..4"],
        vec!["potential", "--config", &cfg, "--deriv", "5"],
    ] {
        let o = run(&args);
        assert_eq!(o.status.code(), Some(2), "{args:?}: {}", stderr(&o));
        assert!(stderr(&o).starts_with("error: "));
    }
}

#[test]
fn greens_reports_values_gradients_and_bounds() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "cfg.json", LAPLACE_2D);
    let pts = write(
        dir.path(),
        "pts.csv",
        "x1,x2\n0.3,0.2\n# skipped\n-0.25,0.4\n",
    );
    let o = run(&["greens", "--config", &cfg, "--points", &pts]);
    // `--points` belongs to `potential`; greens reads points from the config.
    assert_eq!(o.status.code(), Some(2));

    let cfg = write(
        dir.path(),
        "pts_cfg.json",
        &format!(r#"{{"cell": {{"periods": [1, 1]}}, "evaluation": {{"points_file": "{pts}"}}}}"#),
    );
    let o = run(&["greens", "--config", &cfg]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let (header, rows) = csv_rows(&stdout(&o));
    assert_eq!(header, ["x1", "x2", "value", "grad1", "grad2", "trunc_err"]);
    assert_eq!(rows.len(), 2);
    assert_eq!(rows[1][..2], [-0.25, 0.4]);
    assert!(rows.iter().all(|r| r[5] >= 0.0 && r[5] < 1e-10));
}

#[test]
fn potential_derivative_routes_agree() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "cfg.json", LAPLACE_2D);
    let pts = write(dir.path(), "pts.csv", "0.45,0.6\n0.55,0.48\n");
    let o = run(&[
        "potential",
        "--config",
        &cfg,
        "--points",
        &pts,
        "--deriv",
        "0",
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let (header, rows) = csv_rows(&stdout(&o));
    assert_eq!(
        header,
        [
            "x1",
            "x2",
            "value",
            "density_route",
            "finite_difference",
            "residual"
        ]
    );
    for r in &rows {
        assert!((r[2] - r[3]).abs() <= 1e-4 * (1.0 + r[2].abs()), "{r:?}");
        assert!(r[5] <= 1e-4, "{r:?}");
    }

    let o = run(&[
        "potential",
        "--config",
        &cfg,
        "--points",
        &pts,
        "--side",
        "minus",
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let (header, rows) = csv_rows(&stdout(&o));
    assert_eq!(header, ["x1", "x2", "value"]);
    assert_eq!(rows.len(), 2);
}

#[test]
fn norms_report_the_decay_constants() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "cfg.json", LAPLACE_2D);
    let o = run(&["norms", "--config", &cfg]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let v: Value = serde_json::from_slice(&o.stdout).unwrap();
    let a0 = v["a0"].as_f64().unwrap();
    assert!(a0 > 0.0 && v["a1"].as_f64().unwrap() > a0);
    assert!(v["refinement_ratio"].as_f64().unwrap() <= 1.05);
    assert_eq!(v["roumieu"]["order"], 3);
}

#[test]
fn convergence_sweeps_reduce_the_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "cfg.json",
        r#"{"cell": {"periods": [1, 1]}, "operator": {"kind": "modified_helmholtz", "kappa": 3},
            "kernel": {"kind": "yukawa", "kappa": 3}, "evaluation": {"count": 2}}"#,
    );
    let o = run(&["convergence", "--config", &cfg, "--sweep", "nmax", "1..4"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let (header, rows) = csv_rows(&stdout(&o));
    assert_eq!(header, ["parameter", "value", "error"]);
    assert_eq!(
        rows.iter().map(|r| r[0]).collect::<Vec<_>>(),
        [1.0, 2.0, 4.0]
    );
    assert!(rows.windows(2).all(|w| w[1][2] < w[0][2]), "{rows:?}");

    let o = run(&[
        "convergence",
        "--config",
        &cfg,
        "--sweep",
        "zmax",
        "8,16,32",
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let (_, rows) = csv_rows(&stdout(&o));
    assert!(rows.windows(2).all(|w| w[1][2] < w[0][2]), "{rows:?}");
}
