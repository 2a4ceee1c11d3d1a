//! Configuration files, sweeps, export and the command-line interface.

use std::path::Path;
use std::process::Command;

use lattice_brillouin::harness::export::{self, SWEEP_CSV_HEADER};
use lattice_brillouin::harness::{self, load_config, ExperimentConfig, ExperimentKind, Outcome};
use lattice_brillouin::Error;

const BIN: &str = env!("CARGO_BIN_EXE_lattice-brillouin");

/// A sweep small enough for a unit test.
fn small(kind: ExperimentKind) -> ExperimentConfig {
    ExperimentConfig {
        experiment: kind,
        n_atoms: 40,
        duration_periods: 20.0,
        thermalize_pump_times: 5.0,
        delta_count: 3,
        delta_start: -1.6,
        delta_stop: 1.6,
        snapshot_stride: 20,
        ..ExperimentConfig::default()
    }
}

fn write(dir: &Path, name: &str, text: &str) -> std::path::PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p
}

#[test]
fn config_file_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let path = write(
        dir.path(),
        "a.toml",
        "experiment = \"angle-sweep\"\nangles_deg = [12.0, 20.0, 28.0, 36.0]\nepsilon = 0.2\nn_atoms = 64\n",
    );
    let cfg = load_config(&path).unwrap();
    assert_eq!(cfg.angles_deg.len(), 4);
    let dumped = write(dir.path(), "b.toml", &cfg.to_toml_string());
    assert_eq!(load_config(&dumped).unwrap(), cfg);

    assert!(matches!(load_config(dir.path().join("missing.toml")), Err(Error::Io { .. })));
}

#[test]
fn minimal_config_is_fully_defaulted() {
    let dir = tempfile::tempdir().unwrap();
    let path = write(dir.path(), "p.toml", "experiment = \"predict\"\n");
    assert_eq!(load_config(&path).unwrap(), ExperimentConfig::default());
}

#[test]
fn single_point_null_sweep() {
    let cfg = ExperimentConfig {
        epsilon: 0.0,
        delta_count: 1,
        delta_start: 1.0,
        configurations: vec![lattice_brillouin::model::Configuration::Parallel],
        n_atoms: 200,
        ..small(ExperimentKind::DeltaSweep)
    };
    let sweeps = harness::run_delta_sweep(&cfg, None).unwrap();
    let p = &sweeps[0].points[0];
    assert!(p.is_ok());
    let (v, e) = (p.v_cm.unwrap()[0], p.stderr.unwrap()[0]);
    assert!(v.abs() < 3.0 * e, "{v} ± {e}");
}

#[test]
fn sweep_output_is_deterministic_and_reloadable() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run");
    let cfg = ExperimentConfig {
        output_dir: out.clone(),
        ..small(ExperimentKind::TransmissionScan)
    };
    let first = harness::run_experiment(&cfg, Some(&out)).unwrap();
    let read = |name: &str| std::fs::read(out.join(name)).unwrap();
    let files = ["summary.json", "sweep_parallel.csv", "sweep_perp.csv", "config.toml"];
    let bytes: Vec<Vec<u8>> = files.iter().map(|f| read(f)).collect();
    let second = harness::run_experiment(&cfg, Some(&out)).unwrap();
    for (f, b) in files.iter().zip(&bytes) {
        assert_eq!(&read(f), b, "{f} differs between identical runs");
    }
    assert_eq!(first.outcome, second.outcome);

    let Outcome::TransmissionScan { sweeps } = &first.outcome else {
        panic!("wrong outcome")
    };
    let csv = std::fs::read_to_string(out.join("sweep_parallel.csv")).unwrap();
    assert_eq!(csv.lines().next(), Some(SWEEP_CSV_HEADER));
    let back = export::read_sweep_csv(export::sweep_path(&out, sweeps[0].kind)).unwrap();
    assert_eq!(back, sweeps[0].points);
    for p in &sweeps[0].points {
        assert!(p.proxy.unwrap() >= 0.0 && p.proxy_floor.unwrap() > 0.0);
    }

    // every swept point carries the theory alongside the simulation
    let summary: serde_json::Value = serde_json::from_slice(&read("summary.json")).unwrap();
    assert_eq!(summary["schema_version"], 1);
    for s in summary["outcome"]["sweeps"].as_array().unwrap() {
        assert!(s["theory"]["delta_res"].is_number());
        assert!(s["peaks"].is_object() || s["analysis_error"].is_string());
        for p in s["points"].as_array().unwrap() {
            assert!(p["theory_delta_res"].is_number() && p["v_cm"].is_array());
        }
    }
    let timing: serde_json::Value = serde_json::from_slice(&read("timing.json")).unwrap();
    assert!(timing["wall_clock_seconds"].as_f64().unwrap() > 0.0);
}

#[test]
fn per_point_seeds_differ() {
    let cfg = ExperimentConfig {
        epsilon: 0.0,
        delta_count: 2,
        configurations: vec![lattice_brillouin::model::Configuration::Parallel],
        ..small(ExperimentKind::DeltaSweep)
    };
    let sweeps = harness::run_delta_sweep(&cfg, None).unwrap();
    let p = &sweeps[0].points;
    // with no modulation the detuning is irrelevant; only the seed differs
    assert_ne!(p[0].v_cm, p[1].v_cm);
}

#[test]
fn angle_sweep_needs_three_angles() {
    let cfg = ExperimentConfig {
        angles_deg: vec![24.0],
        ..small(ExperimentKind::AngleSweep)
    };
    assert!(matches!(
        harness::run_angle_sweep(&cfg, None),
        Err(Error::InvalidParameter { field: "angles_deg", .. })
    ));
}

#[test]
fn angle_sweep_tabulates_every_angle() {
    let cfg = ExperimentConfig {
        configurations: vec![lattice_brillouin::model::Configuration::Parallel],
        ..small(ExperimentKind::AngleSweep)
    };
    let (sweeps, rows, fits) = harness::run_angle_sweep(&cfg, None).unwrap();
    assert_eq!(sweeps.len(), 3);
    assert_eq!(rows.len(), 3);
    assert_eq!(fits.len(), 1);
    for (r, phi) in rows.iter().zip(&cfg.angles_deg) {
        assert_eq!(r.phi_deg, *phi);
        assert!((r.sin_phi - phi.to_radians().sin()).abs() < 1e-15);
        assert_eq!(r.delta_res.is_some(), r.status == "ok");
    }
}

#[test]
fn unmodulated_profiles_show_no_grating() {
    let cfg = ExperimentConfig {
        epsilon: 0.0,
        n_atoms: 200,
        ..small(ExperimentKind::DensityProfile)
    };
    let profiles = harness::run_density_profile(&cfg, None).unwrap();
    assert_eq!(profiles.len(), 2);
    for p in &profiles {
        assert_eq!(p.grating, None, "{:?}", p.kind);
        assert_eq!(p.grating_status, Error::NoGrating.to_string());
        assert_eq!(p.profile.total_counts() as usize, p.profile.n_atoms * p.profile.n_snapshots);
    }
}

#[test]
fn cli_predict_prints_theory() {
    let dir = tempfile::tempdir().unwrap();
    let out = Command::new(BIN)
        .args(["predict", "--out"])
        .arg(dir.path())
        .output()
        .unwrap();
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("delta_res = ±1.6269"), "{text}");
    assert!(text.contains("delta_res = ±2.6269"), "{text}");
    let summary: serde_json::Value =
        serde_json::from_slice(&std::fs::read(dir.path().join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["outcome"]["experiment"], "predict");
}

#[test]
fn cli_errors_are_machine_readable() {
    let dir = tempfile::tempdir().unwrap();
    let bad = write(dir.path(), "bad.toml", "experiment = \"predict\"\nfoo = 1\nbar = 2\n");
    let out = Command::new(BIN).args(["scan-delta", "--config"]).arg(&bad).output().unwrap();
    assert!(!out.status.success());
    let err: serde_json::Value = serde_json::from_slice(&out.stderr).unwrap();
    assert_eq!(err["error"], "unknown_keys");
    assert_eq!(err["keys"], serde_json::json!(["bar", "foo"]));

    let angle = write(dir.path(), "theta.toml", "experiment = \"predict\"\ntheta_deg = 95\n");
    let out = Command::new(BIN).args(["predict", "--config"]).arg(&angle).output().unwrap();
    assert!(!out.status.success());
    let err: serde_json::Value = serde_json::from_slice(&out.stderr).unwrap();
    assert_eq!(err["field"], "theta_deg");

    let out = Command::new(BIN).args(["scan-sideways"]).output().unwrap();
    assert!(!out.status.success());
    let err: serde_json::Value = serde_json::from_slice(&out.stderr).unwrap();
    assert_eq!(err["error"], "usage");
}

#[test]
fn cli_flags_override_the_file() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "c.toml",
        "experiment = \"predict\"\nn_atoms = 30\nduration_periods = 10.0\nthermalize_pump_times = 2.0\ndelta_count = 2\nconfigurations = [\"perp\"]\n",
    );
    let out_dir = dir.path().join("o");
    let out = Command::new(BIN)
        .args(["scan-delta", "--seed", "7", "--atoms", "12", "--workers", "2", "--dump-snapshots", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(&out_dir)
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let echo = load_config(out_dir.join("config.toml")).unwrap();
    assert_eq!(echo.experiment, ExperimentKind::DeltaSweep);
    assert_eq!((echo.seed, echo.n_atoms, echo.workers), (7, 12, 2));
    assert!(echo.dump_snapshots);
    let dumps = std::fs::read_dir(&out_dir)
        .unwrap()
        .filter(|e| e.as_ref().unwrap().file_name().to_string_lossy().starts_with("snapshots_"))
        .count();
    assert_eq!(dumps, 2);
}
