use std::path::Path;
use std::process::{Command, Output};

fn lab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_lie-lab"))
        .args(args)
        .env("RUST_LOG", "warn")
        .output()
        .expect("binary runs")
}

fn write_config(dir: &Path, body: &str) -> String {
    let path = dir.join("run.toml");
    std::fs::write(&path, body).unwrap();
    path.to_str().unwrap().to_string()
}

#[test]
fn simulate_writes_all_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("sim");
    let o = lab(&[
        "simulate",
        "--out",
        out.to_str().unwrap(),
        "--nodes",
        "64",
        "--tfinal",
        "0.01",
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    for f in [
        "timeseries.csv",
        "summary.json",
        "plots/channels.dat",
        "snapshots/snapshot_0000.csv",
    ] {
        assert!(out.join(f).is_file(), "{f} missing");
    }
    let summary: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["config"]["n_nodes"], 64);
    assert_eq!(summary["config"]["solver"]["t_final"], 0.01);
}

#[test]
fn optimality_passes_and_cites_sources() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "n_nodes = 128\n[solver]\nt_final = 0.3\n[experiment]\nloops = [1]\n",
    );
    let out = dir.path().join("opt");
    let o = lab(&["optimality", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stdout));
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("report.json")).unwrap()).unwrap();
    let checks = report["checks"].as_array().unwrap();
    assert!(!checks.is_empty());
    assert!(checks.iter().all(|c| !c["source"].as_str().unwrap().is_empty()));
}

#[test]
fn failed_sweep_point_gives_nonzero_exit() {
    // Sixteen nodes cannot resolve a looped arc, so that point is inadmissible.
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "[solver]\nt_final = 0.3\n[experiment]\nloops = [1]\n");
    let out = dir.path().join("o");
    let o = lab(&[
        "sweep",
        "--config",
        &cfg,
        "--out",
        out.to_str().unwrap(),
        "--axis",
        "N",
        "--values",
        "16,128",
        "--experiment",
        "optimality",
    ]);
    assert_eq!(o.status.code(), Some(1), "{}", String::from_utf8_lossy(&o.stdout));
    let csv = std::fs::read_to_string(out.join("sweep.csv")).unwrap();
    let rows: Vec<&str> = csv.lines().skip(1).collect();
    assert!(rows[0].contains("inadmissible"), "{csv}");
    assert!(rows[1].contains(",true,"), "{csv}");
}

#[test]
fn sweep_accepts_multiples_of_pi_and_empty_lists() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "n_nodes = 128\n[solver]\nt_final = 0.01\n[experiment]\ncorpus_size = 1\n[perturbation]\nfamily = \"smooth_random\"\nseed = 1\namplitude = 0.001\nmargin = 0.1\n",
    );
    let out = dir.path().join("sweep");
    let o = lab(&[
        "sweep",
        "--config",
        &cfg,
        "--out",
        out.to_str().unwrap(),
        "--axis",
        "theta",
        "--values",
        "pi/4,pi/2",
    ]);
    let csv = std::fs::read_to_string(out.join("sweep.csv")).unwrap();
    assert_eq!(csv.lines().count(), 3, "{csv}");
    assert!(csv.starts_with("theta,passed"));
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stdout));
    let o = lab(&[
        "sweep",
        "--out",
        out.to_str().unwrap(),
        "--axis",
        "theta",
        "--values",
        "",
    ]);
    assert!(o.status.success());
}

#[test]
fn bad_config_is_an_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "no_such_field = 1\n");
    let o = lab(&["simulate", "--config", &cfg]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("error"));
}

#[test]
fn verify_runs_selected_criteria() {
    let dir = tempfile::tempdir().unwrap();
    let o = lab(&["verify", "7", "--out", dir.path().to_str().unwrap()]);
    let stdout = String::from_utf8_lossy(&o.stdout);
    assert!(o.status.success(), "{stdout}");
    assert!(stdout.contains("PASS criterion  7"));
    assert!(dir.path().join("verify.json").is_file());
}

#[test]
fn shipped_configs_run() {
    let configs = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    let dir = tempfile::tempdir().unwrap();
    for (cmd, file) in [("stability", "stability.toml"), ("ring", "ring_looped.toml")] {
        let cfg = configs.join(file);
        let out = dir.path().join(cmd);
        let o = lab(&[
            cmd,
            "--config",
            cfg.to_str().unwrap(),
            "--out",
            out.to_str().unwrap(),
            "--tfinal",
            "0.05",
        ]);
        assert!(o.status.success(), "{file}: {}", String::from_utf8_lossy(&o.stdout));
        assert!(out.join("report.json").is_file());
    }
}
