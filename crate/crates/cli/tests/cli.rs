use std::path::Path;
use std::process::{Command, Output};

fn visco2d(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_visco2d"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn write_config(dir: &Path, body: &str) -> String {
    let path = dir.join("run.cfg");
    std::fs::write(&path, body).unwrap();
    path.to_str().unwrap().to_string()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn nothing_to_run_is_a_usage_error() {
    let o = visco2d(&[]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("--preset"));
}

#[test]
fn unknown_preset_is_a_usage_error() {
    let o = visco2d(&["--preset", "bogus"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("unknown preset"));
}

#[test]
fn unknown_key_reports_its_line() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "formulation = strain\n# comment\nfoo = 1\n");
    let o = visco2d(&["--config", &cfg]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("line 3"), "{}", stderr(&o));
}

#[test]
fn odd_grid_override_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "formulation = strain\n");
    let o = visco2d(&["--config", &cfg, "--n", "63"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn configured_run_writes_series_and_snapshots() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let cfg = write_config(
        dir.path(),
        "formulation = both\nn = 16\ndt = 0.01\nt_final = 0.1\nrecord_every = 5\nsnapshot_every = 10\n",
    );
    let o = visco2d(&["--config", &cfg, "--out-dir", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let stdout = String::from_utf8_lossy(&o.stdout);
    assert!(stdout.contains("oldroyd: t = 0.1") && stdout.contains("rotstrain: t = 0.1"), "{stdout}");
    for name in ["series_oldroyd.csv", "series_rotstrain.csv", "oldroyd_000010.bin", "rotstrain_000010.bin"] {
        assert!(out.join(name).exists(), "{name}");
    }
    let csv = std::fs::read_to_string(out.join("series_rotstrain.csv")).unwrap();
    assert!(csv.starts_with("t,E_basic,E_alt,"));
    assert_eq!(csv.lines().count(), 4);
}

#[test]
fn overrides_change_the_run() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "formulation = strain\nn = 16\ndt = 0.01\nt_final = 0.1\n");
    let a = visco2d(&["--config", &cfg]);
    let b = visco2d(&["--config", &cfg, "--t-final", "0.2", "--dt", "0.02"]);
    assert_eq!(a.status.code(), Some(0));
    assert_eq!(b.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&b.stdout).contains("strain: t = 0.2"));
    let c = visco2d(&["--config", &cfg]);
    assert_eq!(a.stdout, c.stdout);
}

#[test]
fn blow_up_exits_with_instability() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "formulation = strain\nn = 16\ndt = 0.05\nt_final = 1\ninit = taylor_green\namplitude = 1000\n",
    );
    let o = visco2d(&["--config", &cfg]);
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
    assert!(stderr(&o).contains("last healthy record"), "{}", stderr(&o));
}

#[test]
fn identities_on_equilibrium_pass() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "formulation = both\nn = 16\ndt = 0.01\nt_final = 0.5\ninit = trivial\n");
    let out = dir.path().join("report");
    let o = visco2d(&["--config", &cfg, "--preset", "identities", "--out-dir", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let report = std::fs::read_to_string(out.join("report_identities.txt")).unwrap();
    assert_eq!(report.lines().filter(|l| l.starts_with("PASS")).count(), 3);
    assert!(report.ends_with("result: pass\n"));
}

#[test]
fn failed_criterion_is_named() {
    // With no motion the energy cannot strictly decrease.
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "formulation = both\nn = 16\ndt = 0.01\ninit = trivial\npreset = theorem\n");
    let o = visco2d(&["--config", &cfg]);
    assert_eq!(o.status.code(), Some(1), "{}", stderr(&o));
    assert!(stderr(&o).contains("[6] weak dissipation"));
    assert!(String::from_utf8_lossy(&o.stdout).contains("FAIL [6]"));
}

#[test]
fn hyperviscosity_disqualifies_presets() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "formulation = both\nn = 16\ndt = 0.01\nhyperviscosity = 1e-6\n");
    let o = visco2d(&["--config", &cfg, "--preset", "energy_law"]);
    assert_eq!(o.status.code(), Some(2));
}
