use std::path::Path;
use std::process::{Command, Output};

fn gsqg(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gsqg"))
        .current_dir(dir)
        .env("GSQG_THREADS", "1")
        .args(args)
        .output()
        .expect("binary runs")
}

fn column(csv: &str, name: &str) -> Vec<f64> {
    let mut lines = csv.lines();
    let idx = lines.next().unwrap().split(',').position(|h| h == name).unwrap();
    lines.map(|l| l.split(',').nth(idx).unwrap().parse().unwrap()).collect()
}

#[test]
fn pi_scan_signs_for_slope_five() {
    let d = tempfile::tempdir().unwrap();
    let out = gsqg(d.path(), &["pi-scan", "--set", "k=5", "--out", "o"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = std::fs::read_to_string(d.path().join("o/pi_scan.csv")).unwrap();
    assert!(csv.starts_with("beta,Pi1,Pi2,margin\n"));
    assert!(column(&csv, "Pi1").iter().all(|&p| p < 0.0));
    assert!(column(&csv, "Pi2").iter().all(|&p| p > 0.0));
    assert!(d.path().join("o/manifest.json").exists());
}

#[test]
fn pi_scan_slope_one_is_negative() {
    let d = tempfile::tempdir().unwrap();
    let out = gsqg(d.path(), &["pi-scan", "--set", "k=1", "--out", "o"]);
    assert_eq!(out.status.code(), Some(4));
}

#[test]
fn euler_kernel_table_is_constant() {
    let d = tempfile::tempdir().unwrap();
    let out = gsqg(d.path(), &["kernel-table", "--set", "multiplier.kind=euler", "--out", "o"]);
    assert_eq!(out.status.code(), Some(0));
    let csv = std::fs::read_to_string(d.path().join("o/kernel_table.csv")).unwrap();
    assert!(csv.starts_with("rho,G,Gprime,R\n"));
    let g = column(&csv, "G");
    let g0 = 1.0 / (2.0 * std::f64::consts::PI);
    assert!(g.iter().all(|&v| (v - g0).abs() < 1e-14));
    assert!(column(&csv, "Gprime").iter().all(|&v| v == 0.0));
}

#[test]
fn euler_blowup_has_no_finite_collision() {
    let d = tempfile::tempdir().unwrap();
    let out = gsqg(d.path(), &["blowup", "--set", "multiplier.kind=euler", "--set", "k=5", "--out", "o"]);
    assert_eq!(out.status.code(), Some(4));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("no finite collision time"), "{err}");
    let v = std::fs::read_to_string(d.path().join("o/verdict.json")).unwrap();
    assert!(v.contains("no_finite_collision"));
}

#[test]
fn bad_config_fails_fast_without_artifacts() {
    let d = tempfile::tempdir().unwrap();
    for args in [
        &["simulate", "--set", "bogus=1", "--out", "o"][..],
        &["kernel-table", "--set", "multiplier.kind=alpha_sqg", "--set", "multiplier.alpha=3.0", "--out", "o"],
        &["kernel-table", "--set", "multiplier.kind=log_power", "--set", "multiplier.beta=0.2", "--set", "kernel.source=closed_form", "--out", "o"],
        &["simulate", "--set", "multiplier.kind=euler", "--out", "o"],
        &["velocity-probe", "--config", "missing.toml", "--out", "o"],
    ] {
        let t = std::time::Instant::now();
        let out = gsqg(d.path(), args);
        assert_eq!(out.status.code(), Some(2), "{args:?}");
        assert!(t.elapsed().as_secs_f64() < 1.0);
        let err = String::from_utf8_lossy(&out.stderr);
        assert!(err.lines().next().unwrap().starts_with("error command="), "{err}");
        assert!(!d.path().join("o").exists(), "{args:?} left artifacts");
    }
}

#[test]
fn simulate_is_deterministic_and_conserves_area() {
    let d = tempfile::tempdir().unwrap();
    std::fs::write(
        d.path().join("s.toml"),
        r#"
[multiplier]
kind = "alpha_sqg"
alpha = 0.5
[geometry]
m = 64
[[geometry.patches]]
shape = { kind = "ellipse", center = [0.0, 0.0], a = 1.0, b = 0.5 }
[integrator]
dt = 0.01
t_end = 0.1
output_every = 5
"#,
    )
    .unwrap();
    let a = gsqg(d.path(), &["simulate", "--config", "s.toml", "--out", "a"]);
    let b = gsqg(d.path(), &["simulate", "--config", "s.toml", "--out", "b"]);
    assert_eq!(a.status.code(), Some(0), "{}", String::from_utf8_lossy(&a.stderr));
    assert_eq!(b.status.code(), Some(0));
    let da = std::fs::read_to_string(d.path().join("a/diagnostics.csv")).unwrap();
    let db = std::fs::read_to_string(d.path().join("b/diagnostics.csv")).unwrap();
    assert_eq!(da, db);
    let sa = std::fs::read(d.path().join("a/snapshots/step_0000010.csv")).unwrap();
    let sb = std::fs::read(d.path().join("b/snapshots/step_0000010.csv")).unwrap();
    assert_eq!(sa, sb);
    let area = column(&da, "area_0");
    assert!(area.iter().all(|&x| (x - area[0]).abs() < 1e-10 * area[0]));
    let m = std::fs::read_to_string(d.path().join("a/manifest.json")).unwrap();
    assert!(m.contains("\"config_sha256\""));
    assert!(m.contains("\"status\": \"ok\""));
}

#[test]
fn velocity_probe_splits_sum_to_total() {
    let d = tempfile::tempdir().unwrap();
    std::fs::write(
        d.path().join("p.toml"),
        r#"
[multiplier]
kind = "alpha_sqg"
alpha = 0.5
[probe]
points = [[0.1, 0.1], [0.3, 0.05]]
[probe.region]
odd_in_x1 = true
pieces = [{ kind = "rectangle", x0 = 0.0, x1 = 1.0, y0 = 0.0, y1 = 1.0 }]
"#,
    )
    .unwrap();
    let out = gsqg(d.path(), &["velocity-probe", "--config", "p.toml", "--out", "o"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = std::fs::read_to_string(d.path().join("o/velocity_probe.csv")).unwrap();
    let (u1, b1, g1) = (column(&csv, "u1"), column(&csv, "u1_bad"), column(&csv, "u1_good"));
    for i in 0..u1.len() {
        assert!((u1[i] - b1[i] - g1[i]).abs() < 1e-8);
    }
}

#[test]
fn check_multiplier_reports() {
    let d = tempfile::tempdir().unwrap();
    let out = gsqg(
        d.path(),
        &["check-multiplier", "--set", "multiplier.kind=alpha_sqg", "--set", "multiplier.alpha=0.5", "--out", "o"],
    );
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let j: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(d.path().join("o/check.json")).unwrap()).unwrap();
    assert_eq!(j["hypotheses"]["pass_h1"], true);
}
