use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_finsler"));
    c.env_remove("FINSLER_SEED");
    c
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("configs")
}

fn config(name: &str) -> String {
    configs().join(name).to_string_lossy().into_owned()
}

fn json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).unwrap_or_else(|e| {
        panic!(
            "stdout is not JSON ({e}): {}\nstderr: {}",
            String::from_utf8_lossy(&out.stdout),
            String::from_utf8_lossy(&out.stderr)
        )
    })
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn f(v: &Value) -> f64 {
    v.as_f64().unwrap_or_else(|| panic!("not a number: {v}"))
}

fn csv_rows(path: &Path) -> (Vec<String>, Vec<Vec<f64>>) {
    let mut r = csv::Reader::from_path(path).unwrap();
    let header = r.headers().unwrap().iter().map(String::from).collect();
    let rows = r
        .records()
        .map(|rec| rec.unwrap().iter().map(|s| s.parse::<f64>().unwrap()).collect())
        .collect();
    (header, rows)
}

#[test]
fn check_euclidean_passes() {
    let out = run(&["check", "--metric", "euclidean", "--n", "2"]);
    assert_eq!(code(&out), 0);
    let v = json(&out);
    assert_eq!(v["passed"], true);
    assert_eq!(v["seed"], 42);
}

#[test]
fn check_pond_reports_lambda_range() {
    let out = run(&["check", "--metric", &config("pond.json")]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let v = json(&out);
    // λ = 1 − |x|²/9 over the disk of radius² 8.9.
    let lo = f(&v["lambda_range"]["min"]);
    let hi = f(&v["lambda_range"]["max"]);
    assert!(lo > 1.0 - 8.9 / 9.0 - 1e-9 && lo < 0.05, "{lo}");
    assert!(hi <= 1.0 && hi > 0.99, "{hi}");
}

#[test]
fn check_pond_bad_domain_fails_with_witness() {
    let out = run(&["check", "--metric", &config("pond_bad_domain.json")]);
    assert_eq!(code(&out), 1);
    let v = json(&out);
    assert_eq!(v["passed"], false);
    assert!(v["construction_error"].as_str().unwrap().contains("wind"));
    let pd = v["checks"]
        .as_array()
        .unwrap()
        .iter()
        .find(|c| c["name"] == "positive_definiteness")
        .unwrap();
    assert_eq!(pd["passed"], false);
    let x: Vec<f64> = pd["witness"]["x"].as_array().unwrap().iter().map(f).collect();
    // The witness lies where the wind is at least as fast as the boat.
    assert!(x[0] * x[0] + x[1] * x[1] >= 9.0, "{x:?}");
}

#[test]
fn usage_errors_exit_two() {
    assert_eq!(code(&run(&["check", "--metric", "no-such-preset"])), 2);
    assert_eq!(code(&run(&["check", "--metric", "missing/file.json"])), 2);
    assert_eq!(code(&run(&["check"])), 2);
    assert_eq!(code(&run(&["frobnicate"])), 2);
    assert_eq!(code(&run(&["curvature", "--metric", "pond", "--n", "3"])), 2);
    assert_eq!(
        code(&run(&[
            "geodesic",
            "--metric",
            "euclidean",
            "--x0",
            "0,0",
            "--y0",
            "1,0",
            "--t-max",
            "1",
            "--step",
            "0"
        ])),
        2
    );
    assert_eq!(code(&run(&["classify", "--b", "2*s+", "--range", "0,1"])), 2);

    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, "{\"metric\": \"euclidean\", \"sede\": 3}").unwrap();
    assert_eq!(code(&run(&["check", "--config", bad.to_str().unwrap()])), 2);
    std::fs::write(&bad, "{\"kind\": \"warped\", \"n\": 2, \"params\": {\"warp\": \"x2\"}}").unwrap();
    assert_eq!(code(&run(&["check", "--metric", bad.to_str().unwrap()])), 2);
}

#[test]
fn curvature_scans() {
    let v = json(&run(&[
        "curvature",
        "--metric",
        "sphere",
        "--C",
        "1",
        "--samples",
        "200",
    ]));
    assert!((f(&v["mean_K"]) - 1.0).abs() < 1e-4);
    let v = json(&run(&["curvature", "--metric", "euclidean"]));
    assert!(f(&v["mean_K"]).abs() < 1e-12);
    let out = run(&["curvature", "--metric", "cosh-warp", "--expect", "-1"]);
    assert_eq!(code(&out), 0);
    assert!((f(&json(&out)["mean_K"]) + 1.0).abs() < 1e-4);
    let out = run(&["curvature", "--metric", "cosh-warp", "--expect", "1"]);
    assert_eq!(code(&out), 1);
}

#[test]
fn curvature_csv_has_one_row_per_flag() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("k.csv");
    let out = run(&[
        "curvature",
        "--metric",
        "sphere",
        "--n",
        "3",
        "--C",
        "2",
        "--samples",
        "25",
        "--format",
        "csv",
        "--out",
        path.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0);
    let (header, rows) = csv_rows(&path);
    assert_eq!(header.len(), 10);
    assert_eq!(header.last().unwrap(), "K");
    assert_eq!(rows.len(), 25);
    for r in rows {
        assert!((r[9] - 4.0).abs() < 1e-6, "{r:?}");
    }
}

#[test]
fn geodesic_straight_line_csv() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("line.csv");
    let out = run(&[
        "geodesic",
        "--metric",
        "euclidean",
        "--x0",
        "0,0",
        "--y0",
        "1,0",
        "--t-max",
        "2",
        "--out",
        path.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0);
    let v = json(&out);
    assert!(f(&v["speed_drift"]) < 1e-12);
    let (header, rows) = csv_rows(&path);
    assert_eq!(header, ["t", "x1", "x2", "y1", "y2", "F"]);
    let last = rows.last().unwrap();
    assert_eq!(last[0], 2.0);
    assert!((last[1] - 2.0).abs() < 1e-12 && last[2].abs() < 1e-12);
    // Twelve significant digits at most.
    let text = std::fs::read_to_string(&path).unwrap();
    for cell in text
        .split(|c| c == ',' || c == '\n' || c == '\r')
        .filter(|c| !c.is_empty())
        .skip(6)
    {
        let digits = cell
            .split('e')
            .next()
            .unwrap()
            .chars()
            .filter(|c| c.is_ascii_digit())
            .count();
        assert!(digits <= 13, "{cell}");
    }
}

#[test]
fn geodesic_on_sphere_equator_returns() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("eq.csv");
    let x0 = format!("{},0", std::f64::consts::FRAC_PI_2);
    let t = format!("{}", 2.0 * std::f64::consts::PI);
    let out = run(&[
        "geodesic",
        "--metric",
        "sphere",
        "--x0",
        &x0,
        "--y0",
        "0,1",
        "--t-max",
        &t,
        "--out",
        path.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0);
    let end: Vec<f64> = json(&out)["end"].as_array().unwrap().iter().map(f).collect();
    assert!((end[0] - std::f64::consts::FRAC_PI_2).abs() < 1e-4);
    assert!((end[1] - 2.0 * std::f64::consts::PI).abs() < 1e-4);
}

#[test]
fn wavefront_planes() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&[
        "wavefront",
        "--metric",
        "euclidean",
        "--rho",
        "x1",
        "--b",
        "1",
        "--range",
        "0,5",
        "--levels",
        "1,2,3",
        "--samples",
        "5",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0);
    let v = json(&out);
    for (l, want) in v["levels"].as_array().unwrap().iter().zip([1.0, 2.0, 3.0]) {
        assert!((f(&l["measured_radius"]) - want).abs() < 1e-3);
        assert!((f(&l["expected_radius"]) - want).abs() < 1e-12);
    }
    let (header, rows) = csv_rows(&dir.path().join("levels.csv"));
    assert_eq!(header, ["level", "index", "x1", "x2"]);
    for r in rows {
        assert!((r[2] - r[0]).abs() < 1e-9, "{r:?}");
    }
    assert!(dir.path().join("summary.json").is_file());
}

#[test]
fn wavefront_pond_radii_follow_profile() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&[
        "wavefront",
        "--metric",
        "pond",
        "--levels",
        "1,2,4",
        "--samples",
        "5",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let v = json(&out);
    // F*(dρ) = |dρ| since dρ(W) = 0, so 𝔟(s) = 4s and the radius is √c.
    for l in v["levels"].as_array().unwrap() {
        let c = f(&l["level"]);
        assert!((f(&l["measured_radius"]) - c.sqrt()).abs() < 1e-3);
        assert!((f(&l["b_mean"]) - 4.0 * c).abs() < 1e-6 * 4.0 * c);
    }
    let (_, rows) = csv_rows(&dir.path().join("levels.csv"));
    assert_eq!(rows.len(), 3 * 64);
    for r in rows {
        assert!((r[2] * r[2] + r[3] * r[3] - r[0]).abs() < 1e-9);
    }
}

#[test]
fn wavefront_flags_non_transnormal_field() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&[
        "wavefront",
        "--metric",
        "euclidean",
        "--rho",
        "x1*x2",
        "--b",
        "1",
        "--range",
        "0.5,3",
        "--levels",
        "1",
        "--samples",
        "20",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 1);
    assert!(f(&json(&out)["levels"][0]["b_spread"]) > 0.1);
}

#[test]
fn rigidity_verdicts() {
    let out = run(&["rigidity", "--metric", "sphere", "--C", "2"]);
    assert_eq!(code(&out), 0);
    let v = json(&out);
    assert_eq!(v["verdict"], "finslerian-sphere: K=4");
    assert_eq!(v["classification"], "sphere");
    assert!(f(&v["obata_residual_max"]) < 2e-5);

    let out = run(&["rigidity", "--metric", "euclidean", "--C", "1"]);
    assert_eq!(code(&out), 1);
    assert!(json(&out)["verdict"].as_str().unwrap().starts_with("fail"));

    let out = run(&["rigidity", "--metric", "cosh-warp", "--C", "1"]);
    assert_eq!(code(&out), 1);
    assert!((f(&json(&out)["scan"]["mean"]) + 1.0).abs() < 1e-4);
}

#[test]
fn classify_profiles() {
    let label = |args: &[&str]| {
        let mut a = vec!["classify"];
        a.extend_from_slice(args);
        json(&run(&a))["label"].as_str().unwrap().to_string()
    };
    assert_eq!(label(&["--b", "1", "--range", "0,5"]), "product");
    assert_eq!(label(&["--b", "2*s", "--range", "0,3"]), "euclidean");
    assert_eq!(
        label(&["--b", "2-9*s^2", "--range", "-0.4714045207910317,0.4714045207910317"]),
        "sphere"
    );
    assert_eq!(label(&["--metric", "sphere", "--C", "2"]), "sphere");
    assert_eq!(code(&run(&["classify", "--b", "s", "--range", "-1,1"])), 1);
}

#[test]
fn seed_precedence_and_determinism() {
    let a = run(&["curvature", "--metric", "sphere", "--samples", "20"]);
    let b = run(&["curvature", "--metric", "sphere", "--samples", "20"]);
    assert_eq!(a.stdout, b.stdout);
    assert_eq!(json(&a)["seed"], 42);

    let env = bin()
        .args(["curvature", "--metric", "sphere", "--samples", "20"])
        .env("FINSLER_SEED", "43")
        .output()
        .unwrap();
    assert_eq!(json(&env)["seed"], 43);
    assert_ne!(env.stdout, a.stdout);

    let flag = bin()
        .args(["curvature", "--metric", "sphere", "--samples", "20", "--seed", "44"])
        .env("FINSLER_SEED", "43")
        .output()
        .unwrap();
    assert_eq!(json(&flag)["seed"], 44);

    let bad = bin()
        .args(["check", "--metric", "euclidean"])
        .env("FINSLER_SEED", "forty-two")
        .output()
        .unwrap();
    assert_eq!(code(&bad), 2);
}

#[test]
fn run_config_file() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::copy(configs().join("pond.json"), dir.path().join("pond.json")).unwrap();
    let report = dir.path().join("out").join("check.json");
    let cfg = dir.path().join("run.json");
    std::fs::write(
        &cfg,
        format!(
            "{{\"metric\": \"pond.json\", \"seed\": 44, \"tolerances\": {{\"euler\": 1e-9}}, \"output\": {{\"path\": {:?}}}}}",
            report.to_str().unwrap()
        ),
    )
    .unwrap();
    let out = run(&["check", "--config", cfg.to_str().unwrap(), "--samples", "20"]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let written = std::fs::read(&report).unwrap();
    assert_eq!(written, out.stdout);
    assert_eq!(json(&out)["seed"], 44);

    // The environment overrides the config seed.
    let env = bin()
        .args(["check", "--config", cfg.to_str().unwrap(), "--samples", "20"])
        .env("FINSLER_SEED", "42")
        .output()
        .unwrap();
    assert_eq!(json(&env)["seed"], 42);
}

#[test]
fn pond_demo_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&["pond-demo", "--out", dir.path().to_str().unwrap(), "--samples", "10"]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let v = json(&out);
    for name in v["artifacts"].as_array().unwrap() {
        assert!(dir.path().join(name.as_str().unwrap()).is_file(), "{name}");
    }

    // The closed-form spiral is tabulated exactly.
    let (header, rows) = csv_rows(&dir.path().join("gamma_closed_form.csv"));
    assert_eq!(header, ["t", "x1", "x2"]);
    assert_eq!(rows.len(), 3901);
    for r in rows.iter().step_by(97) {
        let (t, a) = (r[0], r[0] / 3.0);
        let k = std::f64::consts::SQRT_2 * t / 2.0;
        assert!((r[1] - k * (a.cos() - a.sin())).abs() < 1e-10);
        assert!((r[2] - k * (a.sin() + a.cos())).abs() < 1e-10);
    }

    // The integrated trace moves one unit of radius per unit of length.
    let (_, trace) = csv_rows(&dir.path().join("spiral_trace.csv"));
    for r in trace.iter().step_by(50) {
        assert!((r[1].hypot(r[2]) - r[0]).abs() < 1e-6, "{r:?}");
    }

    // g(grad ρ, grad ρ) = |dρ|² = 4·level on the pond.
    let (header, table) = csv_rows(&dir.path().join("b_table.csv"));
    assert_eq!(header[2], "b_hat_mean");
    for r in table {
        assert!((r[2] - 4.0 * r[0]).abs() < 1e-6 * 4.0 * r[0], "{r:?}");
    }
}
