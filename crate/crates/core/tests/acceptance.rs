//! Acceptance criteria, one line per criterion. Runs with `harness = false`
//! so the lines are printed whatever the outcome.

use std::collections::BTreeMap;
use std::sync::Arc;
use std::time::{Duration, Instant};

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

use pfrac::driver::{irreversibility_margin, StepState};
use pfrac::fem::{self, BodyForce, FeSpace};
use pfrac::material::{derived_strengths, Material, MaterialParams};
use pfrac::mesh;
use pfrac::scenarios::{self, ScenarioReport, PRESETS};
use pfrac::solver::{self, LinearOptions, LinearSolver};
use pfrac::tensor::SymTensor2;
use pfrac::verify::{check_gradients, GradientCheckOptions};

struct Outcome {
    passed: bool,
    detail: String,
}

fn outcome(passed: bool, detail: impl Into<String>) -> Outcome {
    Outcome { passed, detail: detail.into() }
}

fn show(x: Option<f64>) -> String {
    x.map_or("none".into(), |v| format!("{v:.6}"))
}

fn within(elapsed: Duration, limit_s: f64) -> bool {
    elapsed.as_secs_f64() < limit_s
}

struct Scenarios {
    reports: BTreeMap<&'static str, (ScenarioReport, Duration)>,
}

impl Scenarios {
    fn run() -> Scenarios {
        let mut reports = BTreeMap::new();
        for (name, _) in PRESETS {
            let cfg = scenarios::preset(name).expect("preset parses");
            let start = Instant::now();
            let report = scenarios::run_scenario(&cfg).unwrap_or_else(|e| panic!("scenario {name}: {e}"));
            reports.insert(*name, (report, start.elapsed()));
        }
        Scenarios { reports }
    }

    fn get(&self, name: &str) -> &(ScenarioReport, Duration) {
        &self.reports[name]
    }

    fn all_runs(&self) -> Vec<(&'static str, &[f64], &[StepState])> {
        self.reports.iter().flat_map(|(name, (r, _))| r.runs().into_iter().map(move |(v0, s)| (*name, v0, s))).collect()
    }
}

fn preset_params() -> MaterialParams {
    scenarios::preset("uniaxial-tension").unwrap().material_params().unwrap()
}

fn gradient_exactness() -> Outcome {
    let start = Instant::now();
    let r = check_gradients(&preset_params(), &GradientCheckOptions::default());
    let t = start.elapsed();
    let detail = format!(
        "{} samples, residual errors {:.1e}/{:.1e}/{:.1e}, tangent errors {:.1e}/{:.1e}/{:.1e}, {:.1} s",
        r.samples, r.residual_d, r.residual_f, r.residual_g, r.tangent_d, r.tangent_f, r.tangent_g, t.as_secs_f64()
    );
    outcome(r.samples >= 50 && r.passed() && within(t, 30.0), detail)
}

fn euler_lagrange(s: &Scenarios) -> Outcome {
    let (mut checked, mut failed) = (0, Vec::new());
    for (name, _, states) in s.all_runs() {
        for st in states.iter().filter(|st| st.converged) {
            match st.stationarity {
                Some(c) if c.passed => checked += 1,
                Some(c) => failed.push(format!("{name} step {}: {c}", st.step)),
                None => failed.push(format!("{name} step {}: not checked", st.step)),
            }
        }
    }
    outcome(checked > 0 && failed.is_empty(), format!("{checked} converged steps checked, failures {failed:?}"))
}

fn strength_roots() -> Outcome {
    let start = Instant::now();
    let mut rng = StdRng::seed_from_u64(7);
    let mut worst: f64 = 0.0;
    let mut open_cones = 0;
    for _ in 0..20 {
        let sigma_ts = rng.gen_range(0.1..10.0);
        let ratio = rng.gen_range(0.34..4.0);
        let m = MaterialParams { sigma_ts, sigma_hs: ratio * sigma_ts, ..preset_params() };
        let mat = Material::new(m).unwrap();
        let d = derived_strengths(&m).unwrap();
        let f = |s: SymTensor2| mat.strength_function(&s).abs() / sigma_ts;
        worst = worst.max(f(SymTensor2::diag(d.shear, -d.shear, 0.0)));
        worst = worst.max(f(SymTensor2::diag(d.biaxial, d.biaxial, 0.0)));
        if ratio > 2.0 / 3.0 {
            worst = worst.max(f(SymTensor2::diag(-d.compressive, 0.0, 0.0)));
        } else {
            open_cones += 1;
            let closed = (1..=100).any(|k| mat.strength_function(&SymTensor2::diag(-(k as f64) * sigma_ts, 0.0, 0.0)) >= 0.0);
            worst = worst.max(if closed { 1.0 } else { 0.0 });
        }
    }
    let t = start.elapsed();
    outcome(
        worst < 1e-10 && within(t, 1.0),
        format!("max |F|/sigma_ts {worst:.1e} over 20 pairs ({open_cones} without a compressive root), {:.3} s", t.as_secs_f64()),
    )
}

fn uniform_nucleation(s: &Scenarios) -> Outcome {
    let (ScenarioReport::Homogeneous { report: r, .. }, t) = s.get("uniaxial-tension") else {
        return outcome(false, "unexpected report kind");
    };
    let eps_ok = (r.params.eps / pfrac::material::derive_constants(&r.params).eps_recommended_max - 0.5).abs() < 1e-12;
    let brackets = r.bracket.is_some_and(|(a, b)| {
        r.points[a].strength < 0.0 && r.points[b].strength >= 0.0 && r.nucleation_step.is_some_and(|n| b <= n)
    });
    let err = r.path_root.and_then(|root| r.relative_error(root));
    outcome(
        eps_ok && brackets && err.is_some_and(|e| e <= 0.1) && within(*t, 300.0),
        format!(
            "critical {}, path root {}, relative error {}, bracket steps {:?}, {:.1} s",
            show(r.critical_stress),
            show(r.path_root),
            show(err),
            r.bracket,
            t.as_secs_f64()
        ),
    )
}

fn compression_safety(s: &Scenarios) -> Outcome {
    let (ScenarioReport::Homogeneous { report: r, .. }, t) = s.get("compression") else {
        return outcome(false, "unexpected report kind");
    };
    let cs = derived_strengths(&r.params).map(|d| d.compressive).unwrap_or(f64::NAN);
    let reached = r.points.iter().map(|p| p.measure).fold(0.0, f64::max);
    let v_min = r.states.iter().map(|s| s.v_min).fold(f64::INFINITY, f64::min);
    outcome(
        reached >= 0.9 * cs * (1.0 - 1e-9) && v_min > 0.99 && within(*t, 300.0),
        format!("loaded to {:.4} of sigma_cs, min v {v_min:.6}, {:.1} s", reached / cs, t.as_secs_f64()),
    )
}

fn irreversibility(s: &Scenarios) -> Outcome {
    let (mut worst, mut outside, mut reopened, mut steps) = (f64::INFINITY, 0, 0, 0);
    for (_, v0, states) in s.all_runs() {
        let mut prev = v0;
        for st in states {
            steps += 1;
            worst = worst.min(irreversibility_margin(prev, &st.v));
            outside += st.v.iter().filter(|&&x| !(0.0..=1.0).contains(&x)).count();
            reopened += prev.iter().zip(&st.v).filter(|(a, b)| **a == 0.0 && **b != 0.0).count();
            prev = &st.v;
        }
    }
    outcome(
        steps > 0 && worst >= -1e-14 && outside == 0 && reopened == 0,
        format!("{steps} steps over {} scenarios, min(v_prev - v) {worst:e}, out of bounds {outside}, reopened {reopened}", PRESETS.len()),
    )
}

fn monotonicity(s: &Scenarios) -> Outcome {
    let (mut records, mut worst_d, mut worst_f): (usize, f64, f64) = (0, f64::NEG_INFINITY, f64::NEG_INFINITY);
    for (_, _, states) in s.all_runs() {
        for r in states.iter().flat_map(|st| &st.records) {
            records += 1;
            worst_d = worst_d.max((r.ed - r.ed_before) / r.ed_before.abs().max(f64::MIN_POSITIVE));
            let scale = r.phase_before.abs() + r.ef.elastic.abs() + r.ef.strength.abs() + r.ef.surface.abs();
            worst_f = worst_f.max((r.phase_after - r.phase_before) / scale.max(f64::MIN_POSITIVE));
        }
    }
    outcome(
        records > 0 && worst_d <= 1e-10 && worst_f <= 1e-10,
        format!("{records} staggered iterations, max relative rise: deformation {worst_d:.1e}, phase field {worst_f:.1e}"),
    )
}

fn boundary_dirichlet(space: &FeSpace, exact: &dyn Fn([f64; 2]) -> [f64; 2]) -> Vec<(usize, f64)> {
    let mut nodes: Vec<usize> = space.mesh().boundary_nodes().into_iter().collect();
    nodes.sort_unstable();
    nodes
        .into_iter()
        .flat_map(|i| {
            let u = exact(space.mesh().nodes()[i]);
            [(2 * i, u[0]), (2 * i + 1, u[1])]
        })
        .collect()
}

fn elastic_solve(space: &FeSpace, mat: &Material, f: &[f64], exact: &dyn Fn([f64; 2]) -> [f64; 2]) -> Vec<f64> {
    let k = fem::tangent_d(space, &vec![1.0; space.num_nodes()], mat);
    let opts = LinearOptions { method: LinearSolver::Direct, tol: 1e-13, ..Default::default() };
    solver::solve_u(&k, f, &boundary_dirichlet(space, exact), None, &opts).expect("elastic solve").0
}

fn patch_and_convergence() -> Outcome {
    let start = Instant::now();
    let mat = Material::new(preset_params()).unwrap();
    let lines: Vec<f64> = [0.0, 0.13, 0.3, 0.42, 0.61, 0.8, 1.0].to_vec();
    let space = FeSpace::new(Arc::new(mesh::generate_tensor_grid(&lines, &lines).unwrap()));
    let linear = |x: [f64; 2]| [1e-3 + 2e-3 * x[0] - 5e-4 * x[1], -1e-3 + 7e-4 * x[0] + 1.5e-3 * x[1]];
    let u = elastic_solve(&space, &mat, &vec![0.0; space.num_u_dofs()], &linear);
    let patch = space
        .mesh()
        .nodes()
        .iter()
        .enumerate()
        .map(|(i, x)| {
            let e = linear(*x);
            (u[2 * i] - e[0]).abs().max((u[2 * i + 1] - e[1]).abs())
        })
        .fold(0.0, f64::max)
        / 3e-3;

    let p = mat.params;
    let (mu, lambda, scale) = (p.mu, p.lambda, 1.0 + p.eta_eps);
    let exact = |x: [f64; 2]| [1e-3 * x[0] * x[0] * x[1], 1e-3 * x[0] * x[1] * x[1]];
    let body = BodyForce::Field(Arc::new(move |x: [f64; 2]| {
        [-1e-3 * scale * (2.0 * mu + 4.0 * (lambda + mu)) * x[1], -1e-3 * scale * (2.0 * mu + 4.0 * (lambda + mu)) * x[0]]
    }));
    let errors: Vec<f64> = [4, 8, 16]
        .iter()
        .map(|&n| {
            let space = FeSpace::new(Arc::new(mesh::generate_rect(1.0, 1.0, n, n).unwrap()));
            let f = fem::external_force(&space, &body, 1.0, &[], 0.0);
            fem::l2_error(&space, &elastic_solve(&space, &mat, &f, &exact), exact)
        })
        .collect();
    let orders: Vec<f64> = errors.windows(2).map(|w| (w[0] / w[1]).log2()).collect();
    let t = start.elapsed();
    outcome(
        patch <= 1e-10 && orders.iter().all(|o| (o - 2.0).abs() <= 0.2) && within(t, 60.0),
        format!("patch relative error {patch:.1e}, L2 orders {orders:.3?}, {:.2} s", t.as_secs_f64()),
    )
}

fn griffith_propagation(s: &Scenarios) -> Outcome {
    let (ScenarioReport::Sent(suite), t) = s.get("sent") else {
        return outcome(false, "unexpected report kind");
    };
    let b = &suite.baseline;
    let ell = b.params.g_c / pfrac::material::derive_constants(&b.params).w_ts;
    let large = b.notch >= 20.0 * ell * (1.0 - 1e-12);
    let lower = suite.longer_notch_lowers_load();
    let longer_is_double = suite.longer.as_ref().is_some_and(|l| (l.notch - 2.0 * b.notch).abs() < 1e-9 * b.notch);
    outcome(
        large && suite.baseline_within_tolerance() && suite.tolerance <= 0.2 && lower == Some(true) && longer_is_double && within(*t, 1800.0),
        format!(
            "notch {:.1} G_c/W_ts, load/oracle {}, doubled notch load {} vs {}, {:.0} s",
            b.notch / ell,
            show(b.ratio()),
            show(suite.longer.as_ref().and_then(|l| l.critical_load)),
            show(b.critical_load),
            t.as_secs_f64()
        ),
    )
}

fn mode_contrast(s: &Scenarios) -> Outcome {
    let (ScenarioReport::ModeContrast(c), t) = s.get("mode-contrast") else {
        return outcome(false, "unexpected report kind");
    };
    let halved = (c.eps_factor - 0.5).abs() < 1e-12;
    let increase = c.griffith_increase();
    let band: Vec<Option<f64>> =
        c.strength.iter().map(|r| r.path_root.or(r.ray_root).and_then(|root| r.relative_error(root))).collect();
    outcome(
        halved && increase.is_some_and(|i| i > 0.2) && band.iter().all(|e| e.is_some_and(|e| e <= 0.1)),
        format!(
            "Griffith-mode increase {}, strength-mode errors against the path root {} and {}, {:.1} s",
            show(increase),
            show(band[0]),
            show(band[1]),
            t.as_secs_f64()
        ),
    )
}

fn main() {
    let run_start = Instant::now();
    let scen = Scenarios::run();
    let results = [
        ("1 gradient exactness", gradient_exactness()),
        ("2 Euler-Lagrange consistency", euler_lagrange(&scen)),
        ("3 strength-surface roots", strength_roots()),
        ("4 uniform-field nucleation", uniform_nucleation(&scen)),
        ("5 compression safety", compression_safety(&scen)),
        ("6 irreversibility and bounds", irreversibility(&scen)),
        ("7 alternating-minimization monotonicity", monotonicity(&scen)),
        ("8 elasticity patch test and convergence", patch_and_convergence()),
        ("9 Griffith propagation", griffith_propagation(&scen)),
        ("10 mode contrast", mode_contrast(&scen)),
    ];
    println!();
    for (name, o) in &results {
        println!("criterion {name}: {} ({})", if o.passed { "PASS" } else { "FAIL" }, o.detail);
    }
    let failed = results.iter().filter(|(_, o)| !o.passed).count();
    println!("acceptance: {} of {} criteria passed in {:.0} s", results.len() - failed, results.len(), run_start.elapsed().as_secs_f64());
    if failed > 0 {
        std::process::exit(1);
    }
}
