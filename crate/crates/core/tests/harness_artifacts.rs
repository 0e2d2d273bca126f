use std::fs;

use steklov_core::harness::{self, Config, RunOptions, CSV_HEADER};

fn quiet(out: &std::path::Path) -> RunOptions {
    RunOptions {
        out: Some(out.to_path_buf()),
        dump_mesh: true,
        timing: false,
    }
}

#[test]
fn reruns_without_timing_are_byte_identical() {
    let cfg = Config::default();
    let dirs = [tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap()];
    for d in &dirs {
        let o = quiet(d.path());
        let sweep = harness::run_wrinkle_sweep(&[0.1, 0.2], &o).unwrap();
        harness::write_artifacts(&sweep, d.path()).unwrap();
        let ex = harness::run_example1(&[2, 4], 0.08, &cfg, &o).unwrap();
        harness::write_artifacts(&ex, d.path()).unwrap();
    }
    for name in [
        "sweep.csv",
        "sweep.json",
        "example1.csv",
        "example1.json",
        "meshes/example1_n4.off",
    ] {
        let a = fs::read(dirs[0].path().join(name)).unwrap();
        let b = fs::read(dirs[1].path().join(name)).unwrap();
        assert_eq!(a, b, "{name} differs between reruns");
    }
}

#[test]
fn csv_and_json_layout() {
    let d = tempfile::tempdir().unwrap();
    let r = harness::run_wrinkle_sweep(&[0.2], &quiet(d.path())).unwrap();
    harness::write_artifacts(&r, d.path()).unwrap();
    let csv = fs::read_to_string(d.path().join("sweep.csv")).unwrap();
    let header: Vec<&str> = csv.lines().next().unwrap().split(',').collect();
    assert_eq!(header, CSV_HEADER);
    let row: Vec<&str> = csv.lines().nth(1).unwrap().split(',').collect();
    assert_eq!(row.len(), CSV_HEADER.len());
    assert_eq!(row[21], "", "wall_ms is empty without timing");

    let json: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(d.path().join("sweep.json")).unwrap()).unwrap();
    let energy = json["records"][0]["energy"].as_object().unwrap();
    let mut keys: Vec<&str> = energy.keys().map(|k| k.as_str()).collect();
    keys.sort();
    assert_eq!(
        keys,
        ["E_A", "E_B", "E_C", "E_D", "boundary_norm", "rayleigh"]
    );
    assert_eq!(energy["E_D"], 0.0);
}

#[test]
fn report_summarizes_written_experiments() {
    let d = tempfile::tempdir().unwrap();
    let r = harness::run_wrinkle_sweep(&[0.1, 0.2], &quiet(d.path())).unwrap();
    harness::write_artifacts(&r, d.path()).unwrap();
    let (text, ok) = harness::report(d.path()).unwrap();
    assert!(ok);
    assert!(text.contains("sweep (2 records)"));
    assert!(text.contains("[PASS] slope"));
    assert!(harness::report(tempfile::tempdir().unwrap().path()).is_err());
}

#[test]
fn config_file_loading() {
    let d = tempfile::tempdir().unwrap();
    let p = d.path().join("run.toml");
    fs::write(&p, "schema = 1\nsweep_eps = [0.1]\nmass = \"Consistent\"\n").unwrap();
    let c = Config::load(&p).unwrap();
    assert_eq!(c.sweep_eps, vec![0.1]);
    assert_eq!(c.mass, steklov_core::solver::MassKind::Consistent);
    fs::write(&p, "sweep_eps = [0.1]\nschema = 3\n").unwrap();
    assert!(Config::load(&p).is_err());
}

#[test]
fn infeasible_packing_reports_the_largest_fit() {
    let cfg = Config::default();
    let err =
        harness::run_multibump(3, 0.25, 40.0, 0.05, &cfg, &RunOptions::default()).unwrap_err();
    match err {
        harness::HarnessError::InfeasiblePacking {
            max_bumps,
            requested,
            ..
        } => {
            assert_eq!(requested, 4);
            assert_eq!(max_bumps, 1);
        }
        other => panic!("unexpected error {other}"),
    }
}
