use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn bcavity(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_bcavity"))
        .args(args)
        .current_dir(cwd)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn presets_lists_every_bundled_scenario() {
    let dir = tempfile::tempdir().unwrap();
    let o = bcavity(&["presets"], dir.path());
    assert!(o.status.success());
    let names: Vec<String> = stdout(&o).lines().map(str::to_string).collect();
    assert_eq!(names.len(), 9);
    for n in ["experiment", "fig2c", "fig3", "fig4a_20MHz", "fig4b_0MHz"] {
        assert!(names.iter().any(|x| x == n), "{n}");
    }
    let o = bcavity(&["presets", "fig4a_20MHz"], dir.path());
    assert!(o.status.success());
    let toml = stdout(&o);
    assert!(toml.contains("delta_p_mhz = 20.0") && toml.contains("peak_rabi_mhz = 2.0"), "{toml}");
}

#[test]
fn simulate_writes_csvs_and_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let o = bcavity(
        &["simulate", "--preset", "fig4a_20MHz", "--out", "run", "--plots"],
        dir.path(),
    );
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let out = dir.path().join("run");
    for f in ["config.toml", "summary.csv", "manifest.json", "basis_circular.csv", "basis_circular.svg"] {
        assert!(out.join(f).exists(), "{f}");
    }
    assert!(stdout(&o).contains("efficiency = 0.6755"), "{}", stdout(&o));
    let manifest: serde_json::Value = serde_json::from_slice(&fs::read(out.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["scenario"], "fig4a_20MHz");
    assert_eq!(manifest["config_hash"].as_str().unwrap().len(), 64);
}

#[test]
fn config_file_and_overrides_are_merged() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(
        dir.path().join("s.toml"),
        "preset = \"fig4b_4MHz\"\n[system]\ndelta_p_mhz = 0.0\n",
    )
    .unwrap();
    let o = bcavity(
        &["simulate", "--config", "s.toml", "--set", "system.pulse.peak_rabi_mhz=7", "--out", "run"],
        dir.path(),
    );
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let written = fs::read_to_string(dir.path().join("run/config.toml")).unwrap();
    assert!(written.contains("delta_p_mhz = 0.0"));
    assert!(written.contains("cavity_tuning = \"x_on_resonance\""));
}

#[test]
fn config_errors_exit_with_code_two() {
    let dir = tempfile::tempdir().unwrap();
    let o = bcavity(&["simulate", "--set", "system.kappa_mhz=-1", "--out", "run"], dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("system.kappa_mhz"));

    fs::write(dir.path().join("bad.toml"), "[system]\nkappa = 2.0\n").unwrap();
    let o = bcavity(&["simulate", "--config", "bad.toml"], dir.path());
    assert_eq!(o.status.code(), Some(2));

    let o = bcavity(&["presets", "nonexistent"], dir.path());
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn sweep_writes_an_aggregate_summary() {
    let dir = tempfile::tempdir().unwrap();
    let o = bcavity(
        &[
            "sweep",
            "--preset",
            "fig4a_0MHz",
            "--parameter",
            "system.delta_p_mhz",
            "--values",
            "0,20",
            "--workers",
            "2",
            "--out",
            "sw",
        ],
        dir.path(),
    );
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let table = fs::read_to_string(dir.path().join("sw/sweep_summary.csv")).unwrap();
    let rows: Vec<&str> = table.lines().skip(1).collect();
    assert_eq!(rows.len(), 2);
    assert!(rows[0].contains(",ok,") && rows[0].contains(",minus,"));
    assert!(rows[1].contains(",ok,") && rows[1].contains(",plus,"));
}

#[test]
fn failed_sweep_runs_exit_nonzero_but_keep_the_others() {
    let dir = tempfile::tempdir().unwrap();
    let o = bcavity(
        &[
            "sweep",
            "--preset",
            "fig4a_20MHz",
            "--parameter",
            "system.kappa_mhz",
            "--values",
            "2,-1",
            "--out",
            "sw",
        ],
        dir.path(),
    );
    assert_eq!(o.status.code(), Some(3));
    let table = fs::read_to_string(dir.path().join("sw/sweep_summary.csv")).unwrap();
    assert!(table.contains(",ok,") && table.contains(",failed,"));
}

#[test]
fn route_writes_both_curves() {
    let dir = tempfile::tempdir().unwrap();
    let o = bcavity(
        &["route", "--start", "-90", "--stop", "90", "--step", "15", "--out", "rt"],
        dir.path(),
    );
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    for f in ["routing_birefringence_on.csv", "routing_birefringence_off.csv"] {
        let body = fs::read_to_string(dir.path().join("rt").join(f)).unwrap();
        assert_eq!(body.lines().count(), 14, "{f}");
    }
}

#[test]
fn fit_recovers_a_synthetic_scan() {
    let dir = tempfile::tempdir().unwrap();
    let mut scan = String::from("detuning_mhz,transmission\n");
    let (c, w) = (3.471 / 2.0, 3.543 / 2.0);
    for i in 0..301 {
        let x = -15.0 + 0.1 * i as f64;
        let y = 0.01 + w * w / ((x + c).powi(2) + w * w) + 0.7 * w * w / ((x - c).powi(2) + w * w);
        scan.push_str(&format!("{x},{y}\n"));
    }
    fs::write(dir.path().join("scan.csv"), scan).unwrap();
    let o = bcavity(&["fit", "--scan", "scan.csv", "--out", "fit"], dir.path());
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = fs::read_to_string(dir.path().join("fit/fit.csv")).unwrap();
    let mut lines = csv.lines();
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    let row: Vec<&str> = lines.next().unwrap().split(',').collect();
    let col = header.iter().position(|h| *h == "splitting_mhz").expect("splitting column");
    let splitting: f64 = row[col].parse().unwrap();
    assert!((splitting - 3.471).abs() < 1e-4, "{splitting}");
    let curve = fs::read_to_string(dir.path().join("fit/fit_curve.csv")).unwrap();
    assert_eq!(curve.lines().count(), 302);

    let o = bcavity(&["fit", "--scan", "missing.csv"], dir.path());
    assert_eq!(o.status.code(), Some(2));
}
