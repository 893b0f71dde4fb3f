#![allow(clippy::excessive_precision)]

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

const REF1: &str = r#"
[market]
r = 0.02
mu = 0.07
sigma = 0.2
rho = 0.03
epsilon = 1.0

[preferences]
kind = "crra"
gamma = 2.0
l = 0.5
k = 1.0
b = 0.0
"#;

fn write_config(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p
}

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_duallife")).args(args).output().unwrap()
}

fn read_value(csv: &str, key: &str) -> f64 {
    csv.lines()
        .find_map(|l| l.strip_prefix(&format!("{key},")))
        .unwrap_or_else(|| panic!("{key} missing"))
        .parse()
        .unwrap()
}

#[test]
fn solve_reference_scenario() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "ref1.toml", REF1);
    let out = dir.path().join("out");
    let o = run(&["solve", cfg.to_str().unwrap(), "-o", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let sol = std::fs::read_to_string(out.join("solution.csv")).unwrap();
    assert!((read_value(&sol, "z_R") - 0.136_921_159_897_326_14).abs() < 1e-10);
    assert!((read_value(&sol, "x_R") - 82.361_717_509_978_475).abs() < 1e-7);
    let summary = std::fs::read_to_string(out.join("summary.txt")).unwrap();
    assert!(summary.contains("z_R"));
    let table = std::fs::read_to_string(out.join("policy_table.csv")).unwrap();
    let mut lines = table.lines();
    assert_eq!(lines.next().unwrap(), "y,X,c,pi,P,human_wealth,J");
    assert_eq!(lines.count(), 400);

    // Same config, byte-identical tables.
    let again = dir.path().join("again");
    run(&["solve", cfg.to_str().unwrap(), "-o", again.to_str().unwrap()]);
    for f in ["solution.csv", "policy_table.csv"] {
        assert_eq!(std::fs::read(out.join(f)).unwrap(), std::fs::read(again.join(f)).unwrap());
    }
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");

    let cfg = write_config(dir.path(), "free_work.toml", &REF1.replace("l = 0.5", "l = 0.0"));
    let o = run(&["solve", cfg.to_str().unwrap(), "-o", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("(k-1)^2 + l^2 != 0"));
    assert!(!out.join("summary.txt").exists());

    let cfg = write_config(dir.path(), "flat.toml", &REF1.replace("sigma = 0.2", "sigma = 0.0"));
    assert_eq!(run(&["solve", cfg.to_str().unwrap()]).status.code(), Some(1));

    let cfg = write_config(dir.path(), "typo.toml", &REF1.replace("rho = 0.03", "rho = 0.03\nrhoo = 1"));
    let o = run(&["solve", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("rhoo"));

    let cfg = write_config(dir.path(), "broken.toml", "[market\nr = 1");
    assert_eq!(run(&["solve", cfg.to_str().unwrap()]).status.code(), Some(1));
    assert_eq!(run(&["solve", "/nonexistent/config.toml"]).status.code(), Some(1));

    let cfg = write_config(dir.path(), "merton.toml", &REF1.replace("gamma = 2.0", "gamma = 0.5"));
    assert_eq!(run(&["solve", cfg.to_str().unwrap()]).status.code(), Some(2));
}

#[test]
fn verify_with_oracle() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "ref1.toml", REF1);
    let out = dir.path().join("out");
    let o = run(&["verify", cfg.to_str().unwrap(), "--oracle", "crra", "-o", out.to_str().unwrap()]);
    let report = std::fs::read_to_string(out.join("verify_report.txt")).unwrap();
    assert!(o.status.success(), "{report}");
    assert!(report.contains("z_R vs closed form"));
    assert!(!report.contains("FAIL"));
}

#[test]
fn short_simulation_horizon_is_inconclusive() {
    let dir = tempfile::tempdir().unwrap();
    let text = format!(
        "{REF1}\n[simulation]\nn_paths = 2000\ndt = 0.02\nhorizon = 1.0\nseed = 3\nantithetic = true\nprobe_y = 1.0\n"
    );
    let cfg = write_config(dir.path(), "short.toml", &text);
    let out = dir.path().join("out");
    let o = run(&["verify", cfg.to_str().unwrap(), "--simulate", "-o", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(4));
    let report = std::fs::read_to_string(out.join("verify_report.txt")).unwrap();
    let line = report.lines().find(|l| l.starts_with("P(1) by simulation")).unwrap();
    assert!(line.contains("INCONCLUSIVE") && line.contains("truncates"), "{line}");
}

#[test]
fn epsilon_sweep() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "ref1.toml", REF1);
    let out = dir.path().join("out");
    let o = run(&[
        "sweep", cfg.to_str().unwrap(), "--param", "epsilon", "--values", "0.5,1,2", "-o", out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = std::fs::read_to_string(out.join("sweep.csv")).unwrap();
    let rows: Vec<Vec<&str>> = csv.lines().skip(1).map(|l| l.split(',').collect()).collect();
    let z: Vec<f64> = rows.iter().map(|r| r[7].parse().unwrap()).collect();
    let x: Vec<f64> = rows.iter().map(|r| r[9].parse().unwrap()).collect();
    let expected = [0.273_842_319_794_652_29, 0.136_921_159_897_326_14, 0.068_460_579_948_663_072];
    for (a, b) in z.iter().zip(expected) {
        assert!((a - b).abs() < 1e-10 * b);
    }
    assert!(x.windows(2).all(|w| w[1] > w[0]));
    let summary = std::fs::read_to_string(out.join("sweep_summary.txt")).unwrap();
    assert!(summary.contains("x_R strictly increasing: true"));
    assert!(summary.contains("z_R strictly decreasing: true"));
}

#[test]
fn k_sweep_flags_consumption_jump() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "l0.toml", &REF1.replace("l = 0.5", "l = 0.0"));
    let out = dir.path().join("out");
    let o = run(&["sweep", cfg.to_str().unwrap(), "--param", "k", "--values", "1,1.5", "-o", out.to_str().unwrap()]);
    assert!(o.status.success());
    let csv = std::fs::read_to_string(out.join("sweep.csv")).unwrap();
    let rows: Vec<&str> = csv.lines().skip(1).collect();
    // k = 1 with l = 0 is rejected row-wise; the sweep carries on.
    assert!(rows[0].contains(",error,"));
    let cells: Vec<&str> = rows[1].split(',').collect();
    assert_eq!(cells[2], "ok");
    assert_eq!(cells[11], "1");
}
