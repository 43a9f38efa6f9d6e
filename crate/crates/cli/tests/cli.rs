use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use ldgmin::Mesh;
use ldgmin_cli::RunManifest;

fn ldgmin(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ldgmin")).args(args).output().expect("binary runs")
}

fn run_in(dir: &Path, args: &[&str]) -> Output {
    let mut all = vec!["run", "--out", dir.to_str().unwrap()];
    all.extend_from_slice(args);
    ldgmin(&all)
}

fn rows(dir: &Path) -> Vec<String> {
    fs::read_to_string(dir.join("history.csv")).unwrap().lines().skip(1).map(String::from).collect()
}

fn manifest(dir: &Path) -> RunManifest {
    RunManifest::from_json(&fs::read_to_string(dir.join("manifest.json")).unwrap()).unwrap()
}

#[test]
fn odp_adaptive_run() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_in(dir.path(), &["--benchmark", "odp", "--k", "1", "--mode", "adaptive", "--levels", "10"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let rows = rows(dir.path());
    assert!(!rows.is_empty() && rows.len() <= 10);
    let m = manifest(dir.path());
    assert_eq!((m.r, m.s, m.lambda), (2.0, 1.0, Some(0.0145)));
    match m.density {
        ldgmin::EnergyDensity::OptimalDesign(d) => {
            assert_eq!((d.mu1, d.mu2), (1.0, 2.0));
            assert!((d.t2 - 2.0 * d.t1).abs() < 1e-15);
        }
        other => panic!("unexpected density {other:?}"),
    }
    assert!(!dir.path().join(".ldgmin.lock").exists());
}

#[test]
fn bingham_manifest_records_epsilon() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_in(dir.path(), &["--benchmark", "bingham", "--epsilon", "1e-5", "--k", "2", "--levels", "2"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let m = manifest(dir.path());
    assert_eq!(m.epsilon, Some(1e-5));
    assert_eq!(m.k, 2);
    assert!(m.deterministic);
}

#[test]
fn zero_levels_is_one_record() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_in(dir.path(), &["--benchmark", "plaplace4", "--mode", "uniform", "--levels", "0"]);
    assert!(out.status.success());
    let rows = rows(dir.path());
    assert_eq!(rows.len(), 1);
    assert!(rows[0].starts_with("0,18,"));
}

#[test]
fn history_is_byte_identical() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let args = ["--benchmark", "bingham", "--k", "1", "--mode", "uniform", "--levels", "3"];
    assert!(run_in(a.path(), &args).status.success());
    assert!(run_in(b.path(), &args).status.success());
    let ha = fs::read(a.path().join("history.csv")).unwrap();
    let hb = fs::read(b.path().join("history.csv")).unwrap();
    assert_eq!(ha, hb);
    let header = String::from_utf8(ha).unwrap();
    assert!(header.starts_with("level,ndof,hmax,eta,Eh,Ehdual,gap,EvC,EstarRT,iters,seconds,cells\n"));
}

#[test]
fn usage_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    for args in [
        vec!["--benchmark", "heat"],
        vec!["--k", "1"],
        vec!["--benchmark", "odp", "--mode", "uniform", "--theta", "0.3"],
        vec!["--benchmark", "odp", "--epsilon", "1e-3"],
        vec!["--benchmark", "odp", "--mode", "sideways"],
        vec!["--benchmark", "odp", "--k", "0"],
        vec!["--benchmark", "odp", "--levels", "many"],
    ] {
        let out = run_in(dir.path(), &args);
        assert_eq!(out.status.code(), Some(2), "{args:?}");
    }
    assert_eq!(ldgmin(&["run", "--bogus"]).status.code(), Some(2));
}

#[test]
fn busy_directory_is_refused() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join(".ldgmin.lock"), "1").unwrap();
    let out = run_in(dir.path(), &["--benchmark", "odp", "--levels", "0"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(!dir.path().join("history.csv").exists());
}

#[test]
fn solver_failure_keeps_partial_output() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_in(dir.path(), &["--benchmark", "plaplace4", "--levels", "3", "--max-iterations", "1"]);
    assert_eq!(out.status.code(), Some(1));
    let rows = rows(dir.path());
    assert_eq!(rows.len(), 1);
    assert!(dir.path().join("manifest.json").exists());
}

#[test]
fn config_file_with_flag_override() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.cfg");
    fs::write(&cfg, "# uniform odp\nbenchmark = odp\nmode = uniform\nlevels = 3\nk = 2\n").unwrap();
    let out = run_in(dir.path(), &["--config", cfg.to_str().unwrap(), "--levels", "1"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let m = manifest(dir.path());
    assert_eq!((m.k, m.levels), (2, 1));
    assert_eq!(rows(dir.path()).len(), 1);
    fs::write(&cfg, "benchmark = odp\ncolour = red\n").unwrap();
    assert_eq!(run_in(dir.path(), &["--config", cfg.to_str().unwrap()]).status.code(), Some(2));
}

#[test]
fn plot_and_mesh_dumps() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_in(dir.path(), &["--benchmark", "odp", "--mode", "uniform", "--levels", "2", "--plot", "--dump-mesh", "--timings"]);
    assert!(out.status.success());
    let svg = fs::read_to_string(dir.path().join("convergence.svg")).unwrap();
    assert!(svg.starts_with("<svg") && svg.contains("<polyline"));
    let mesh = Mesh::from_text(&fs::read_to_string(dir.path().join("mesh_level01.txt")).unwrap()).unwrap();
    assert_eq!(mesh.num_cells(), 24);
    assert!(!manifest(dir.path()).deterministic);
    let timings = fs::read_to_string(dir.path().join("timings.csv")).unwrap();
    assert_eq!(timings.lines().count(), 3);

    let combined = dir.path().join("both.svg");
    let history = dir.path().join("history.csv");
    let out = ldgmin(&["plot", "--out", combined.to_str().unwrap(), "--k", "1,2", history.to_str().unwrap(), history.to_str().unwrap()]);
    assert!(out.status.success());
    assert_eq!(fs::read_to_string(combined).unwrap().matches("<polyline").count(), 2);
}

#[test]
fn manifest_round_trips_through_flags() {
    let dir = tempfile::tempdir().unwrap();
    assert!(run_in(dir.path(), &["--benchmark", "bingham", "--epsilon", "1e-4", "--theta", "0.3", "--levels", "0"]).status.success());
    let m = manifest(dir.path());
    let again = RunManifest::new(&m.to_args().resolve().unwrap(), m.timestamp).unwrap();
    assert_eq!(again.to_json(), m.to_json());
}
