use std::fs;
use std::path::Path;
use std::process::{Command, Output};

const CONFIG: &str = "\
material.mu = 100
material.lambda = 150
material.sigma_ts = 1
material.sigma_hs = 1.2
material.g_c = 0.002
material.eps_fraction = 0.5

mesh.width = 1
mesh.height = 0.25
mesh.nx = 8
mesh.ny = 2

loading.dirichlet = left x 0
loading.dirichlet = right x 0.001
loading.dirichlet = corner_bl y 0
loading.ramp = 1 3 3
loading.reactions = right
";

fn pfrac(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_pfrac")).args(args).output().expect("binary runs")
}

fn write_config(dir: &Path) -> String {
    let path = dir.join("bar.cfg");
    fs::write(&path, CONFIG).unwrap();
    path.to_str().unwrap().to_string()
}

#[test]
fn usage_errors_exit_with_two() {
    assert_eq!(pfrac(&[]).status.code(), Some(2));
    assert_eq!(pfrac(&["frobnicate"]).status.code(), Some(2));
    assert_eq!(pfrac(&["run"]).status.code(), Some(2));
}

#[test]
fn bad_config_exits_with_one_and_names_the_problem() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.cfg");
    fs::write(&path, CONFIG.replace("material.g_c = 0.002", "material.g_c = -1")).unwrap();
    let out = pfrac(&["material-info", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("g_c"));
}

#[test]
fn material_info_prints_derived_quantities() {
    let dir = tempfile::tempdir().unwrap();
    let out = pfrac(&["material-info", &write_config(dir.path())]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    for key in ["E ", "W_ts", "alpha1", "eps_recommended", "sigma_ss", "sigma_cs", "eps check"] {
        assert!(text.contains(key), "missing {key} in\n{text}");
    }
    assert!(text.contains("sigma_cs           2.25"), "{text}");
}

#[test]
fn check_gradients_passes_for_a_valid_material() {
    let dir = tempfile::tempdir().unwrap();
    let out = pfrac(&["check-gradients", &write_config(dir.path()), "--samples", "5"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stdout));
}

#[test]
fn run_writes_logs_fields_and_reproducible_metadata() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path());
    let outputs = [dir.path().join("a"), dir.path().join("b")];
    for o in &outputs {
        let out = pfrac(&["run", &cfg, "--output", o.to_str().unwrap()]);
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    }
    let a = &outputs[0];
    for f in ["metadata.cfg", "iterations.csv", "steps.csv"] {
        assert!(a.join(f).is_file(), "{f}");
    }
    let vtk = fs::read_dir(a).unwrap().filter(|e| e.as_ref().unwrap().path().extension().is_some_and(|x| x == "vtk")).count();
    assert_eq!(vtk, 3);

    let steps = fs::read_to_string(a.join("steps.csv")).unwrap();
    assert_eq!(steps.lines().count(), 4);
    assert!(steps.lines().next().unwrap().contains("reaction_right_x"));

    let meta = fs::read_to_string(a.join("metadata.cfg")).unwrap();
    assert!(meta.lines().any(|l| l.starts_with("# config sha256 ")));
    assert!(pfrac::config::RunConfig::parse(&meta).is_ok());

    for f in ["iterations.csv", "steps.csv"] {
        assert_eq!(fs::read(a.join(f)).unwrap(), fs::read(outputs[1].join(f)).unwrap(), "{f} differs between runs");
    }
}

#[test]
fn scenario_list_names_every_preset() {
    let out = pfrac(&["scenario", "--list"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    for name in ["uniaxial-tension", "shear", "biaxial", "compression", "mode-contrast", "sent", "notch-sweep"] {
        assert!(text.contains(name), "{name}");
    }
}

#[test]
fn compression_scenario_reports_no_nucleation() {
    let out = pfrac(&["scenario", "compression"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("critical stress     none"), "{text}");
    assert!(text.contains("oracle comparison: pass"));
}
