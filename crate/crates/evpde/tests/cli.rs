use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use evpde::config::parse_config_str;
use evpde_core::suite::{checks, SuiteOptions};

fn evpde(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_evpde")).args(args).current_dir(dir).env_remove("EVPDE_OUT").output().unwrap()
}

fn write_config(dir: &Path, name: &str, json: &str) -> String {
    fs::write(dir.join(name), json).unwrap();
    name.to_string()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn default_surface_run_writes_one_row_per_level() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "run.json", r#"{"problem": "surface_heat", "geometry": "expanding_circle", "output_dir": "out"}"#);
    let o = evpde(tmp.path(), &["run", &cfg]);
    assert!(o.status.success(), "{}", stderr(&o));
    let csv = fs::read_to_string(tmp.path().join("out/functionals.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "time,mass,energy,error_l2");
    assert_eq!(lines.len() - 1, 101);
    let last: Vec<f64> = lines[101].split(',').map(|s| s.parse().unwrap()).collect();
    assert!((last[0] - 1.0).abs() < 1e-12);
    assert!(last[3] < 1e-2);
}

#[test]
fn repeated_runs_are_bit_identical() {
    let tmp = tempfile::tempdir().unwrap();
    let json = r#"{"problem": "bulk", "geometry": "oscillating_ellipse_disk", "h": 0.25, "dt": 0.05, "output_dir": "a"}"#;
    let cfg = write_config(tmp.path(), "a.json", json);
    let cfg2 = write_config(tmp.path(), "b.json", &json.replace("\"a\"", "\"b\""));
    assert!(evpde(tmp.path(), &["run", &cfg]).status.success());
    assert!(evpde(tmp.path(), &["run", &cfg2]).status.success());
    let a = fs::read(tmp.path().join("a/functionals.csv")).unwrap();
    let b = fs::read(tmp.path().join("b/functionals.csv")).unwrap();
    assert_eq!(a, b);
    // Smooth data has no exact solution, hence no error column.
    assert!(String::from_utf8(a).unwrap().starts_with("time,mass,energy\n"));
}

#[test]
fn vtk_file_per_step() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(
        tmp.path(),
        "v.json",
        r#"{"problem": "coupled_bulk_surface", "geometry": "expanding_disk", "h": 0.3, "alpha": 1, "beta": 2,
            "dt": 0.1, "emit_vtk": true, "output_dir": "v"}"#,
    );
    let o = evpde(tmp.path(), &["run", &cfg]);
    assert!(o.status.success(), "{}", stderr(&o));
    for k in 0..=10 {
        let text = fs::read_to_string(tmp.path().join(format!("v/step_{k:05}.vtk"))).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some("# vtk DataFile Version 3.0"));
        assert!(text.contains("DATASET UNSTRUCTURED_GRID"));
        let n: usize = text.lines().find_map(|l| l.strip_prefix("POINTS ")).unwrap().split(' ').next().unwrap().parse().unwrap();
        let data = text.split("LOOKUP_TABLE default\n").nth(1).unwrap();
        assert_eq!(data.lines().count(), n);
    }
    assert!(!tmp.path().join("v/step_00011.vtk").exists());
}

#[test]
fn output_directory_env_override() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "e.json", r#"{"problem": "surface_heat", "geometry": "translating_circle", "n": 16, "dt": 0.25}"#);
    let target = tmp.path().join("elsewhere");
    let o = Command::new(env!("CARGO_BIN_EXE_evpde"))
        .args(["run", &cfg])
        .current_dir(tmp.path())
        .env("EVPDE_OUT", &target)
        .output()
        .unwrap();
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(fs::read_to_string(target.join("functionals.csv")).unwrap().lines().count(), 1 + 5);
    assert!(!tmp.path().join("evpde_out").exists());
}

#[test]
fn matrices_and_eoc_export() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(
        tmp.path(),
        "m.json",
        r#"{"problem": "surface_heat", "geometry": "expanding_circle", "n": 16, "dt": 0.1, "export_matrices": true,
            "eoc_levels": 3, "output_dir": "m"}"#,
    );
    let o = evpde(tmp.path(), &["run", &cfg]);
    assert!(o.status.success(), "{}", stderr(&o));
    let mtx = fs::read_to_string(tmp.path().join("m/mass.mtx")).unwrap();
    let mut lines = mtx.lines();
    assert_eq!(lines.next(), Some("%%MatrixMarket matrix coordinate real general"));
    assert_eq!(lines.next(), Some("16 16 48"));
    let eoc = fs::read_to_string(tmp.path().join("m/eoc.csv")).unwrap();
    assert_eq!(eoc.lines().next(), Some("h,dt,error_l2,error_h1,eoc_h,eoc_dt"));
    assert_eq!(eoc.lines().count(), 4);
    let first: Vec<&str> = eoc.lines().nth(1).unwrap().split(',').collect();
    assert_eq!((first[4], first[5]), ("", ""));
}

#[test]
fn invalid_geometry_exits_2_listing_ids() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "g.json", r#"{"problem": "bulk", "geometry": "torus"}"#);
    let o = evpde(tmp.path(), &["run", &cfg]);
    assert_eq!(o.status.code(), Some(2));
    let msg = stderr(&o);
    for id in evpde_core::flowmap::GEOMETRY_IDS {
        assert!(msg.contains(id), "{msg}");
    }
}

#[test]
fn config_errors_name_the_key() {
    let e = parse_config_str(r#"{"problem": "surface_heat", "geometry": "expanding_circle", "foo": 1}"#).unwrap_err();
    assert!(e.to_string().contains("foo"));
    let e = parse_config_str(r#"{"problem": "coupled_bulk_surface", "geometry": "expanding_disk", "alpha": 1}"#).unwrap_err();
    assert!(e.to_string().contains("\"beta\""), "{e}");

    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "f.json", r#"{"problem": "surface_heat", "geometry": "expanding_circle", "foo": 1}"#);
    let o = evpde(tmp.path(), &["run", &cfg]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("foo"));
    let o = evpde(tmp.path(), &["run", "missing.json"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn verify_only_transport() {
    let tmp = tempfile::tempdir().unwrap();
    let o = evpde(tmp.path(), &["verify", "--only", "transport"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let out = String::from_utf8(o.stdout).unwrap();
    let rows: Vec<&str> = out.lines().filter(|l| l.starts_with("PASS") || l.starts_with("FAIL")).collect();
    assert_eq!(rows.len(), 2);
    assert!(rows.iter().all(|r| r.contains("transport/")));
    assert_eq!(evpde(tmp.path(), &["verify", "--only", "nonsense"]).status.code(), Some(2));
}

#[test]
fn verify_exit_status_names_first_failure() {
    let tmp = tempfile::tempdir().unwrap();
    let o = evpde(tmp.path(), &["verify", "--only", "energy"]);
    let out = String::from_utf8(o.stdout.clone()).unwrap();
    match out.lines().find(|l| l.starts_with("FAIL")) {
        None => assert!(o.status.success()),
        Some(row) => {
            assert_eq!(o.status.code(), Some(1));
            let id = row.split_whitespace().nth(1).unwrap();
            assert!(stderr(&o).contains(&format!("check {id} failed")), "{}", stderr(&o));
        }
    }
}

#[test]
fn corrupted_stiffness_passes_conservation_fails_eoc() {
    let opts = SuiteOptions { corrupt_stiffness: true };
    let all = checks();
    let find = |g: &str, n: &str| all.iter().find(|c| c.group == g && c.name == n).unwrap();
    assert!(find("conservation", "surface_heat").run(&opts).passed);
    assert!(!find("eoc", "surface_heat").run(&opts).passed);
    assert!(!find("eoc", "bulk").run(&opts).passed);
}

#[test]
fn list_geometries_prints_every_id() {
    let tmp = tempfile::tempdir().unwrap();
    let o = evpde(tmp.path(), &["list-geometries"]);
    assert!(o.status.success());
    let out = String::from_utf8(o.stdout).unwrap();
    assert_eq!(out.lines().count(), evpde_core::flowmap::GEOMETRY_IDS.len());
}
