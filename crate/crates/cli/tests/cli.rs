use std::path::Path;
use std::process::{Command, Output};

fn cvshadow(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cvshadow")).args(args).output().unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn simulate_then_reconstruct() {
    let dir = tempfile::tempdir().unwrap();
    let rec = dir.path().join("vac.csv");
    let out = cvshadow(&["simulate", "--state", "vacuum", "--samples", "100000", "--seed", "3", "-o", s(&rec)]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let report = dir.path().join("report.json");
    let rho = dir.path().join("rho.json");
    let wig = dir.path().join("w.csv");
    let out = cvshadow(&[
        "reconstruct", "--records", s(&rec), "--cutoff", "4", "--reference", "vacuum",
        "--density-out", s(&rho), "--wigner-out", s(&wig), "--report-out", s(&report),
        "--wigner-half", "3", "--wigner-points", "11",
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let r: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&report).unwrap()).unwrap();
    assert!(r["error_inf"].as_f64().unwrap() < 0.05, "{r}");
    assert_eq!(r["summary"]["count"], 100000);
    assert!(rho.exists() && wig.exists());
}

#[test]
fn bad_records_fail_with_line_number() {
    let dir = tempfile::tempdir().unwrap();
    let rec = dir.path().join("bad.csv");
    std::fs::write(&rec, "theta,x\n4.0,0.1\n").unwrap();
    let out = cvshadow(&["reconstruct", "--records", s(&rec), "--cutoff", "2"]);
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("bad.csv:2:"), "{err}");
}

#[test]
fn bounds_table() {
    let out = cvshadow(&["bounds", "--protocol", "parity", "--n-list", "2,3", "--alpha-max", "2"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("protocol,N,epsilon,delta,T_bound"));
    let row: Vec<&str> = lines.next().unwrap().split(',').collect();
    assert_eq!(&row[..4], ["parity", "2", "0.1", "0.1"]);
    // N²A²/ε² (ln 4 + ln 10), A = 4π
    let want = 4.0 * (4.0 * std::f64::consts::PI).powi(2) / 0.01 * (40f64).ln();
    let got: f64 = row[4].parse().unwrap();
    assert!((got - want).abs() <= 1e-9 * want);
}

#[test]
fn scaling_requires_seed_and_flags_censoring() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.toml");
    std::fs::write(
        &cfg,
        "n_list = [2]\ntrials_per_t = 20\n[state]\nkind = \"vacuum\"\ncutoff = 2\n[protocol]\nkind = \"homodyne\"\n[t_search]\nt_min = 4\nt_max = 8\ngrowth = 2.0\n",
    )
    .unwrap();
    let out = cvshadow(&["scaling", "--config", s(&cfg)]);
    assert_eq!(out.status.code(), Some(2), "clap usage error expected without --seed");
    let report = dir.path().join("r.json");
    let out = cvshadow(&["scaling", "--config", s(&cfg), "--seed", "1", "-o", s(&report)]);
    assert_eq!(out.status.code(), Some(3), "{}", String::from_utf8_lossy(&out.stderr));
    let r: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&report).unwrap()).unwrap();
    assert_eq!(r["results"][0]["status"], "censored");
    assert!(r["results"][0]["min_t"].is_null());
}

#[test]
fn validate_quick() {
    let out = cvshadow(&["validate", "--completeness-max-n", "2", "--duality-max-n", "2"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stdout));
    let text = String::from_utf8(out.stdout).unwrap();
    assert_eq!(text.lines().filter(|l| l.starts_with("PASS")).count(), 2 + 6 + 3);
}
