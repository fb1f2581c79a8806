use std::fs;

use pfrac::config::{ConfigError, RunConfig};
use pfrac::mesh;
use pfrac::scenarios::{self, PRESETS};

const MATERIAL: &str = "material.mu = 100\nmaterial.lambda = 150\nmaterial.sigma_ts = 1\n\
                        material.sigma_hs = 1.2\nmaterial.g_c = 0.002\nmaterial.eps_fraction = 0.5\n";

#[test]
fn every_preset_round_trips_through_the_canonical_form() {
    for (name, _) in PRESETS {
        let c = scenarios::preset(name).unwrap();
        let again = RunConfig::parse(&c.to_canonical_string()).unwrap();
        assert_eq!(again, c, "{name}");
        assert_eq!(again.to_canonical_string(), c.to_canonical_string());
    }
}

#[test]
fn mesh_file_is_resolved_against_the_config_directory() {
    let dir = tempfile::tempdir().unwrap();
    let m = mesh::generate_rect(2.0, 1.0, 4, 2).unwrap();
    mesh::export_mesh(&m, &dir.path().join("bar.mesh")).unwrap();
    let text = format!(
        "{MATERIAL}mesh.kind = file\nmesh.file = bar.mesh\n\
         loading.dirichlet = left x 0\nloading.dirichlet = right x 0.001\nloading.dirichlet = corner_bl y 0\n\
         loading.ramp = 0.5 1 2\nloading.reactions = right\n"
    );
    let path = dir.path().join("run.cfg");
    fs::write(&path, text).unwrap();
    let c = RunConfig::from_file(&path).unwrap();
    let (problem, program) = c.build(dir.path()).unwrap();
    assert_eq!(problem.space.num_nodes(), 15);
    let out = problem.run_program(&program);
    assert!(out.failure.is_none());
    assert_eq!(out.states.len(), 2);
    assert!(out.states[1].reactions["right"][0] > out.states[0].reactions["right"][0]);
}

#[test]
fn missing_file_names_the_path() {
    let err = RunConfig::from_file(std::path::Path::new("/nonexistent/run.cfg")).unwrap_err();
    assert!(matches!(err, ConfigError::Read { .. }));
    assert!(err.to_string().contains("/nonexistent/run.cfg"), "{err}");
}

#[test]
fn unknown_boundary_tag_fails_at_build() {
    let text = format!("{MATERIAL}loading.dirichlet = nowhere x 0\n");
    let c = RunConfig::parse(&text).unwrap();
    assert!(c.build(std::path::Path::new(".")).is_err());
}

#[test]
fn griffith_mode_and_policy_reach_the_driver() {
    let text = format!("{MATERIAL}solver.mode = griffith\nsolver.policy = continue\nsolver.stagger_tol = 1e-5\n");
    let c = RunConfig::parse(&text).unwrap();
    let o = c.solver.stagger_options();
    assert_eq!(o.functional, pfrac::fem::FunctionalKind::Griffith);
    assert_eq!(o.policy, pfrac::driver::NonConvergencePolicy::Continue);
    assert_eq!(o.stagger_tol, 1e-5);
}
