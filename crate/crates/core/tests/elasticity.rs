mod common;

use std::sync::Arc;

use nalgebra::{Matrix3, Rotation3, Vector3};
use proptest::prelude::*;
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

use pfrac::fem::{self, BodyForce, FeSpace};
use pfrac::material::Material;
use pfrac::solver::{self, LinearOptions, LinearSolver, SkylineCholesky};
use pfrac::tensor::SymTensor2;

fn boundary_dirichlet(space: &FeSpace, exact: impl Fn([f64; 2]) -> [f64; 2]) -> Vec<(usize, f64)> {
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

fn solve_with(space: &FeSpace, mat: &Material, f: &[f64], bcs: &[(usize, f64)], method: LinearSolver) -> Vec<f64> {
    let v = vec![1.0; space.num_nodes()];
    let k = fem::tangent_d(space, &v, mat);
    let opts = LinearOptions { method, tol: 1e-13, ..Default::default() };
    solver::solve_u(&k, f, bcs, None, &opts).unwrap().0
}

#[test]
fn patch_test_reproduces_uniform_strain() {
    let mat = common::material();
    let space = common::irregular_square(5);
    let exact = |x: [f64; 2]| [1e-3 + 2e-3 * x[0] - 0.5e-3 * x[1], -1e-3 + 0.7e-3 * x[0] + 1.5e-3 * x[1]];
    let bcs = boundary_dirichlet(&space, exact);
    let f = vec![0.0; space.num_u_dofs()];
    for method in [LinearSolver::Direct, LinearSolver::ConjugateGradient] {
        let u = solve_with(&space, &mat, &f, &bcs, method);
        for (i, x) in space.mesh().nodes().iter().enumerate() {
            let e = exact(*x);
            assert!((u[2 * i] - e[0]).abs() < 1e-10 * 3e-3, "{method:?} node {i}");
            assert!((u[2 * i + 1] - e[1]).abs() < 1e-10 * 3e-3, "{method:?} node {i}");
        }
        for e in 0..space.mesh().num_elements() {
            for g in 0..4 {
                let s = fem::strain_at(&space, &u, e, g);
                assert!((s.xx - 2e-3).abs() < 1e-12 && (s.yy - 1.5e-3).abs() < 1e-12 && (s.xy - 0.1e-3).abs() < 1e-12);
            }
        }
    }
}

#[test]
fn manufactured_solution_converges_at_second_order() {
    let mat = common::material();
    let p = mat.params;
    let (mu, lambda, scale) = (p.mu, p.lambda, 1.0 + p.eta_eps);
    // u = (x²y, xy²): div σ = μΔu + (λ+μ)∇(div u)
    let exact = |x: [f64; 2]| [x[0] * x[0] * x[1] * 1e-3, x[0] * x[1] * x[1] * 1e-3];
    let body = BodyForce::Field(Arc::new(move |x: [f64; 2]| {
        let div = [mu * 2.0 * x[1] + (lambda + mu) * 4.0 * x[1], mu * 2.0 * x[0] + (lambda + mu) * 4.0 * x[0]];
        [-scale * div[0] * 1e-3, -scale * div[1] * 1e-3]
    }));
    let errors: Vec<f64> = [4, 8, 16]
        .iter()
        .map(|&n| {
            let space = common::rect_space(1.0, 1.0, n, n);
            let f = fem::external_force(&space, &body, 1.0, &[], 0.0);
            let bcs = boundary_dirichlet(&space, exact);
            let u = solve_with(&space, &mat, &f, &bcs, LinearSolver::Direct);
            fem::l2_error(&space, &u, exact)
        })
        .collect();
    for w in errors.windows(2) {
        let order = (w[0] / w[1]).log2();
        assert!((order - 2.0).abs() <= 0.2, "order {order}, errors {errors:?}");
    }
}

#[test]
fn tangent_is_positive_definite_for_any_admissible_phase_field() {
    let mat = common::material();
    let space = common::irregular_square(4);
    let bcs = boundary_dirichlet(&space, |_| [0.0, 0.0]);
    let fixed: std::collections::HashSet<usize> = bcs.iter().map(|b| b.0).collect();
    let free: Vec<usize> = (0..space.num_u_dofs()).filter(|d| !fixed.contains(d)).collect();
    for v in [vec![1.0; space.num_nodes()], vec![0.0; space.num_nodes()], (0..space.num_nodes()).map(|i| (i % 3) as f64 / 2.0).collect()] {
        assert!(SkylineCholesky::factor(&fem::tangent_d(&space, &v, &mat), &free, 0.0).is_ok());
    }
}

fn to_sym(m: &Matrix3<f64>) -> SymTensor2 {
    SymTensor2::new(m[(0, 0)], m[(1, 1)], m[(2, 2)], m[(0, 1)], m[(1, 2)], m[(0, 2)])
}

fn to_matrix(t: &SymTensor2) -> Matrix3<f64> {
    Matrix3::from_fn(|i, j| t.to_matrix()[i][j])
}

proptest! {
    #[test]
    fn energy_and_strength_are_rotation_invariant(
        c in prop::array::uniform6(-1e-2..1e-2f64),
        axis in prop::array::uniform3(-1.0..1.0f64),
        angle in -3.0..3.0f64,
    ) {
        prop_assume!(axis.iter().map(|a| a * a).sum::<f64>() > 1e-4);
        let mat = common::material();
        let strain = SymTensor2::new(c[0], c[1], c[2], c[3], c[4], c[5]);
        let r = Rotation3::from_axis_angle(&nalgebra::Unit::new_normalize(Vector3::from(axis)), angle);
        let q = r.matrix();
        let rotated = to_sym(&(q * to_matrix(&strain) * q.transpose()));
        let w = mat.stored_energy(&strain);
        prop_assert!((mat.stored_energy(&rotated) - w).abs() <= 1e-12 * w.abs().max(1e-12));
        let s = mat.stress(&strain);
        let s_rot = to_sym(&(q * to_matrix(&s) * q.transpose()));
        let f = mat.strength_function(&s);
        prop_assert!((mat.strength_function(&s_rot) - f).abs() <= 1e-10 * (1.0 + f.abs()));
        prop_assert!((mat.che(&rotated) - mat.che(&strain)).abs() <= 1e-10 * (1.0 + mat.che(&strain).abs()));
    }

    #[test]
    fn deformation_energy_is_quadratic(seed in any::<u64>(), alpha in -3.0..3.0f64) {
        let mat = common::material();
        let space = common::irregular_square(3);
        let mut rng = StdRng::seed_from_u64(seed);
        let u: Vec<f64> = (0..space.num_u_dofs()).map(|_| rng.gen_range(-5e-3..5e-3)).collect();
        let v: Vec<f64> = (0..space.num_nodes()).map(|_| rng.gen_range(0.0..1.0)).collect();
        let f = vec![0.0; u.len()];
        let scaled: Vec<f64> = u.iter().map(|x| alpha * x).collect();
        let e1 = fem::energy_d(&space, &u, &v, &f, &mat);
        let e2 = fem::energy_d(&space, &scaled, &v, &f, &mat);
        prop_assert!((e2 - alpha * alpha * e1).abs() <= 1e-12 * (alpha * alpha * e1).abs().max(e1 * 1e-3));
    }

    #[test]
    fn energies_are_sums_over_elements(seed in any::<u64>()) {
        let mat = common::material();
        let space = common::irregular_square(3);
        let mut rng = StdRng::seed_from_u64(seed);
        let u: Vec<f64> = (0..space.num_u_dofs()).map(|_| rng.gen_range(-1e-2..1e-2)).collect();
        let v: Vec<f64> = (0..space.num_nodes()).map(|_| rng.gen_range(0.0..1.0)).collect();
        let f = vec![0.0; u.len()];
        let total = fem::energy_d(&space, &u, &v, &f, &mat);
        let sum: f64 = (0..space.mesh().num_elements()).map(|e| fem::element_elastic_energy(&space, &u, &v, e, &mat)).sum();
        prop_assert!((total - sum).abs() <= 1e-12 * total.abs());

        let dens = fem::strain_densities(&space, &u, &mat);
        let c = fem::FunctionalCoefficients::new(fem::FunctionalKind::Strength, &mat);
        let total = fem::energy_v(&space, &v, &dens, &c).total();
        let sum: f64 = (0..space.mesh().num_elements()).map(|e| fem::element_energy_v(&space, &v, &dens, &c, e).total()).sum();
        prop_assert!((total - sum).abs() <= 1e-12 * total.abs());
    }
}
