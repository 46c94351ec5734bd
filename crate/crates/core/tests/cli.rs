use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

fn nonlocal(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_nonlocal")).args(args).output().expect("spawn nonlocal")
}

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

const LINE_1D: &str = "[kernel]\nrho = 1\ntail = power_decay\nalpha2 = 0.5\n[domain]\nh = 0.0625\n";

#[test]
fn kernel_table_matches_log_mass() {
    let dir = TempDir::new().unwrap();
    let cfg = write(dir.path(), "k.cfg", "[kernel]\ndimension = 1\nrho = 1\n");
    let o = nonlocal(&["--config", cfg.to_str().unwrap(), "kernel", "table"]);
    assert!(o.status.success());
    let text = stdout(&o);
    let mut rows = csv::Reader::from_reader(text.as_bytes());
    let headers = rows.headers().unwrap().clone();
    let (ri, mi) = (
        headers.iter().position(|h| h == "r").unwrap(),
        headers.iter().position(|h| h == "M").unwrap(),
    );
    // l = 1 in 1D: M(r) = ln(rho / r).
    let mut seen = 0;
    for rec in rows.records() {
        let rec = rec.unwrap();
        let r: f64 = rec[ri].parse().unwrap();
        let m: f64 = rec[mi].parse().unwrap();
        assert!((m - (1.0 / r).ln()).abs() < 1e-9, "M({r}) = {m}");
        seen += 1;
    }
    assert!(seen > 3);
}

#[test]
fn verify_passes_for_every_seed() {
    let dir = TempDir::new().unwrap();
    let cfg = write(dir.path(), "v.cfg", LINE_1D);
    let out = dir.path().join("verify.csv");
    let o = nonlocal(&[
        "--config",
        cfg.to_str().unwrap(),
        "--seeds",
        "5",
        "--out",
        out.to_str().unwrap(),
        "verify",
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = std::fs::read_to_string(out).unwrap();
    let mut rows = csv::Reader::from_reader(text.as_bytes());
    let pass = rows.headers().unwrap().iter().position(|h| h == "pass").unwrap();
    let verdicts: Vec<String> = rows.records().map(|r| r.unwrap()[pass].to_string()).collect();
    assert_eq!(verdicts.len(), 5 * 8);
    assert!(verdicts.iter().all(|v| v == "true"));
}

#[test]
fn malformed_config_exits_nonzero_without_artifacts() {
    let dir = TempDir::new().unwrap();
    let cfg = write(dir.path(), "bad.cfg", "[kernel]\nrho = 1\nfoo = 1\n");
    let out = dir.path().join("u.csv");
    let o = nonlocal(&["--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap(), "solve", "dirichlet"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("line 3"));
    assert!(!out.exists());
    assert!(!dir.path().join("u.json").exists());
}

#[test]
fn unknown_check_lists_the_menu() {
    let dir = TempDir::new().unwrap();
    let cfg = write(dir.path(), "v.cfg", LINE_1D);
    let o = nonlocal(&["--config", cfg.to_str().unwrap(), "--check", "bogus", "verify"]);
    assert_eq!(o.status.code(), Some(2));
    let err = String::from_utf8_lossy(&o.stderr);
    for name in ["poincare", "hardy_origin", "stroock_varopoulos", "lorentz_embedding"] {
        assert!(err.contains(name), "{err}");
    }
}

#[test]
fn dirichlet_writes_csv_and_json() {
    let dir = TempDir::new().unwrap();
    let cfg = write(dir.path(), "s.cfg", LINE_1D);
    let out = dir.path().join("run").join("u.csv");
    let o = nonlocal(&["--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap(), "solve", "dirichlet"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let csv_text = std::fs::read_to_string(&out).unwrap();
    assert!(csv_text.starts_with("region,x,u\n"));
    assert_eq!(csv_text.lines().count(), 1 + 32);
    let json: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(out.with_extension("json")).unwrap()).unwrap();
    assert!(json["residual"].as_f64().unwrap() <= 1e-10);
    assert!(json["u_norm"].as_f64().unwrap() > 0.0);
}

#[test]
fn repeated_runs_are_byte_identical() {
    let dir = TempDir::new().unwrap();
    let cfg = write(dir.path(), "v.cfg", LINE_1D);
    let run = || stdout(&nonlocal(&["--config", cfg.to_str().unwrap(), "--seeds", "3", "verify"]));
    assert_eq!(run(), run());
}
