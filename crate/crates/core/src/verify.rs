//! Finite-difference verification of the assembled residuals and tangents
//! on random fields over a small, irregular tensor-product mesh.

use std::fmt;
use std::sync::Arc;

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

use crate::fem::{self, FeSpace, FunctionalCoefficients, FunctionalKind};
use crate::material::{derive_constants, Material, MaterialParams};
use crate::mesh;
use crate::solver;
use crate::sparse::SparseMatrix;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradientCheckOptions {
    pub samples: usize,
    pub nx: usize,
    pub ny: usize,
    pub seed: u64,
    pub residual_tol: f64,
    pub tangent_tol: f64,
}

impl Default for GradientCheckOptions {
    fn default() -> Self {
        GradientCheckOptions { samples: 50, nx: 4, ny: 4, seed: 2024, residual_tol: 1e-6, tangent_tol: 1e-5 }
    }
}

/// Largest relative errors over all samples, `‖a − b‖₂ / ‖b‖₂` with `b`
/// the finite-difference value.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradientCheck {
    pub samples: usize,
    pub residual_d: f64,
    pub tangent_d: f64,
    pub residual_f: f64,
    pub tangent_f: f64,
    pub residual_g: f64,
    pub tangent_g: f64,
    pub residual_tol: f64,
    pub tangent_tol: f64,
}

impl GradientCheck {
    pub fn passed(&self) -> bool {
        [self.residual_d, self.residual_f, self.residual_g].iter().all(|&e| e < self.residual_tol)
            && [self.tangent_d, self.tangent_f, self.tangent_g].iter().all(|&e| e < self.tangent_tol)
    }
}

impl fmt::Display for GradientCheck {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{} random samples, relative error against central differences", self.samples)?;
        writeln!(f, "  deformation energy   residual {:.3e}  tangent {:.3e}", self.residual_d, self.tangent_d)?;
        writeln!(f, "  fracture functional  residual {:.3e}  tangent {:.3e}", self.residual_f, self.tangent_f)?;
        writeln!(f, "  Griffith functional  residual {:.3e}  tangent {:.3e}", self.residual_g, self.tangent_g)?;
        write!(f, "  tolerances           residual {:.0e}  tangent {:.0e}", self.residual_tol, self.tangent_tol)
    }
}

fn rel(a: &[f64], b: &[f64]) -> f64 {
    let diff: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    solver::norm2(&diff) / solver::norm2(b).max(f64::MIN_POSITIVE)
}

fn central_gradient(x: &[f64], h: f64, f: impl Fn(&[f64]) -> f64) -> Vec<f64> {
    let mut y = x.to_vec();
    (0..x.len())
        .map(|i| {
            y[i] = x[i] + h;
            let fp = f(&y);
            y[i] = x[i] - h;
            let fm = f(&y);
            y[i] = x[i];
            (fp - fm) / (2.0 * h)
        })
        .collect()
}

/// Column-wise central differences of `g`, compared entry by entry with `k`.
fn tangent_error(k: &SparseMatrix, x: &[f64], h: f64, g: impl Fn(&[f64]) -> Vec<f64>) -> f64 {
    let n = x.len();
    let mut y = x.to_vec();
    let mut exact = Vec::with_capacity(n * n);
    let mut approx = Vec::with_capacity(n * n);
    for j in 0..n {
        y[j] = x[j] + h;
        let gp = g(&y);
        y[j] = x[j] - h;
        let gm = g(&y);
        y[j] = x[j];
        for i in 0..n {
            approx.push((gp[i] - gm[i]) / (2.0 * h));
            exact.push(k.get(i, j));
        }
    }
    rel(&exact, &approx)
}

/// Checks the residuals and tangents of the deformation energy and of both
/// phase-field functionals for `params`.
pub fn check_gradients(params: &MaterialParams, opts: &GradientCheckOptions) -> GradientCheck {
    let mat = Material::new(*params).expect("valid material");
    let mut rng = StdRng::seed_from_u64(opts.seed);
    let lines = |n: usize, rng: &mut StdRng| -> Vec<f64> {
        let mut acc = 0.0;
        let mut out = vec![0.0];
        for _ in 0..n {
            acc += rng.gen_range(0.5..1.5);
            out.push(acc);
        }
        out.iter().map(|x| x / acc).collect()
    };
    let xs = lines(opts.nx, &mut rng);
    let ys = lines(opts.ny, &mut rng);
    let space = FeSpace::new(Arc::new(mesh::generate_tensor_grid(&xs, &ys).expect("valid grid")));
    let n = space.num_nodes();
    let nu = space.num_u_dofs();
    let strain = 2.0 * params.sigma_ts / derive_constants(params).young_e;

    let strength = FunctionalCoefficients::new(FunctionalKind::Strength, &mat);
    let griffith = FunctionalCoefficients::new(FunctionalKind::Griffith, &mat);
    let mut out = GradientCheck {
        samples: opts.samples,
        residual_d: 0.0,
        tangent_d: 0.0,
        residual_f: 0.0,
        tangent_f: 0.0,
        residual_g: 0.0,
        tangent_g: 0.0,
        residual_tol: opts.residual_tol,
        tangent_tol: opts.tangent_tol,
    };
    for _ in 0..opts.samples {
        let u: Vec<f64> = (0..nu).map(|_| rng.gen_range(-strain..strain)).collect();
        let v: Vec<f64> = (0..n).map(|_| rng.gen_range(0.0..1.0)).collect();
        let f_ext: Vec<f64> = (0..nu).map(|_| rng.gen_range(-1.0..1.0) * params.sigma_ts * 1e-2).collect();

        let hu = 1e-6 * strain;
        let r = fem::residual_d(&space, &u, &v, &f_ext, &mat);
        let fd = central_gradient(&u, hu, |x| fem::energy_d(&space, x, &v, &f_ext, &mat));
        out.residual_d = out.residual_d.max(rel(&r, &fd));
        let k = fem::tangent_d(&space, &v, &mat);
        out.tangent_d = out.tangent_d.max(tangent_error(&k, &u, hu, |x| fem::residual_d(&space, x, &v, &f_ext, &mat)));

        let dens = fem::strain_densities(&space, &u, &mat);
        let hv = 1e-5;
        for (c, res, tan) in [(strength, &mut out.residual_f, &mut out.tangent_f), (griffith, &mut out.residual_g, &mut out.tangent_g)] {
            let r = fem::residual_v(&space, &v, &dens, &c);
            let fd = central_gradient(&v, hv, |x| fem::energy_v(&space, x, &dens, &c).total());
            *res = res.max(rel(&r, &fd));
            let k = fem::tangent_v(&space, &v, &dens, &c);
            *tan = tan.max(tangent_error(&k, &v, hv, |x| fem::residual_v(&space, x, &dens, &c)));
        }
    }
    out
}
