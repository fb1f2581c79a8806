//! Bilinear-quadrilateral discretization of the deformation energy
//! functional (in `u`) and of the fracture / Griffith functionals (in `v`).
//!
//! Displacements are stored node-major, `[u_x0, u_y0, u_x1, ...]`; the phase
//! field has one value per node. `v`, `v²`, `v³` and `∇v` are evaluated at the
//! Gauss points from the interpolated field, so every residual below is the
//! exact gradient of the matching discrete energy and every tangent its exact
//! Hessian.
//!
//! Element loops run in element order and reduce into the global arrays in
//! that same order, so results are bitwise reproducible.

use std::sync::Arc;

use crate::material::Material;
use crate::mesh::Mesh;
use crate::sparse::{Pattern, SparseMatrix};
use crate::tensor::SymTensor2;

const GAUSS_2: [f64; 2] = [-0.577_350_269_189_625_8, 0.577_350_269_189_625_8];

/// Reference coordinates of the corners, counter-clockwise.
const CORNERS: [[f64; 2]; 4] = [[-1.0, -1.0], [1.0, -1.0], [1.0, 1.0], [-1.0, 1.0]];

/// 2×2 Gauss rule on the reference square.
#[derive(Debug, Clone, Copy)]
pub struct QuadratureRule {
    pub points: [[f64; 2]; 4],
    pub weights: [f64; 4],
}

impl QuadratureRule {
    pub fn gauss_2x2() -> Self {
        let g = GAUSS_2;
        QuadratureRule {
            points: [[g[0], g[0]], [g[1], g[0]], [g[1], g[1]], [g[0], g[1]]],
            weights: [1.0; 4],
        }
    }
}

pub fn shape_functions(xi: [f64; 2]) -> [f64; 4] {
    CORNERS.map(|c| 0.25 * (1.0 + c[0] * xi[0]) * (1.0 + c[1] * xi[1]))
}

pub fn shape_derivatives(xi: [f64; 2]) -> [[f64; 2]; 4] {
    CORNERS.map(|c| {
        [
            0.25 * c[0] * (1.0 + c[1] * xi[1]),
            0.25 * c[1] * (1.0 + c[0] * xi[0]),
        ]
    })
}

/// Shape data at one integration point in physical coordinates.
#[derive(Debug, Clone, Copy)]
pub struct PointData {
    pub n: [f64; 4],
    /// `∂N_a/∂x`, `∂N_a/∂y`
    pub dn: [[f64; 2]; 4],
    /// Quadrature weight times Jacobian determinant.
    pub w: f64,
    pub x: [f64; 2],
}

fn map_point(coords: &[[f64; 2]; 4], xi: [f64; 2], weight: f64) -> PointData {
    let n = shape_functions(xi);
    let dref = shape_derivatives(xi);
    let mut jac = [[0.0; 2]; 2];
    let mut x = [0.0; 2];
    for a in 0..4 {
        for i in 0..2 {
            x[i] += n[a] * coords[a][i];
            for j in 0..2 {
                jac[i][j] += coords[a][i] * dref[a][j];
            }
        }
    }
    let det = jac[0][0] * jac[1][1] - jac[0][1] * jac[1][0];
    let inv = [[jac[1][1] / det, -jac[0][1] / det], [-jac[1][0] / det, jac[0][0] / det]];
    let dn = dref.map(|d| [d[0] * inv[0][0] + d[1] * inv[1][0], d[0] * inv[0][1] + d[1] * inv[1][1]]);
    PointData { n, dn, w: weight * det, x }
}

/// Body force per unit volume.
#[derive(Clone, Default)]
pub enum BodyForce {
    #[default]
    None,
    Uniform([f64; 2]),
    Field(Arc<dyn Fn([f64; 2]) -> [f64; 2] + Send + Sync>),
}

impl std::fmt::Debug for BodyForce {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            BodyForce::None => write!(f, "None"),
            BodyForce::Uniform(b) => write!(f, "Uniform({b:?})"),
            BodyForce::Field(_) => write!(f, "Field(..)"),
        }
    }
}

impl BodyForce {
    fn at(&self, x: [f64; 2]) -> [f64; 2] {
        match self {
            BodyForce::None => [0.0; 2],
            BodyForce::Uniform(b) => *b,
            BodyForce::Field(f) => f(x),
        }
    }
}

/// Precomputed geometry of a mesh: integration data per element and the
/// sparsity patterns of the displacement and phase-field systems.
#[derive(Debug, Clone)]
pub struct FeSpace {
    mesh: Arc<Mesh>,
    points: Vec<[PointData; 4]>,
    pattern_u: Pattern,
    pattern_v: Pattern,
    lumped: Vec<f64>,
}

impl FeSpace {
    pub fn new(mesh: Arc<Mesh>) -> FeSpace {
        let rule = QuadratureRule::gauss_2x2();
        let points: Vec<[PointData; 4]> = (0..mesh.num_elements())
            .map(|e| {
                let c = mesh.element_coords(e);
                [0, 1, 2, 3].map(|g| map_point(&c, rule.points[g], rule.weights[g]))
            })
            .collect();
        let mut lumped = vec![0.0; mesh.num_nodes()];
        for (conn, pts) in mesh.elements().iter().zip(&points) {
            for p in pts {
                for a in 0..4 {
                    lumped[conn[a]] += p.w * p.n[a];
                }
            }
        }
        FeSpace {
            pattern_u: Pattern::new(&mesh, 2),
            pattern_v: Pattern::new(&mesh, 1),
            points,
            lumped,
            mesh,
        }
    }

    pub fn mesh(&self) -> &Mesh {
        &self.mesh
    }

    pub fn mesh_arc(&self) -> Arc<Mesh> {
        self.mesh.clone()
    }

    pub fn num_nodes(&self) -> usize {
        self.mesh.num_nodes()
    }

    pub fn num_u_dofs(&self) -> usize {
        2 * self.mesh.num_nodes()
    }

    pub fn points(&self, e: usize) -> &[PointData; 4] {
        &self.points[e]
    }

    /// `∫ N_a dX` for every node.
    pub fn lumped_weights(&self) -> &[f64] {
        &self.lumped
    }

    pub fn area(&self) -> f64 {
        self.lumped.iter().sum()
    }

    /// Phase field and its gradient at point `g` of element `e`.
    pub fn interpolate_v(&self, v: &[f64], e: usize, g: usize) -> (f64, [f64; 2]) {
        let conn = &self.mesh.elements()[e];
        let p = &self.points[e][g];
        let mut val = 0.0;
        let mut grad = [0.0; 2];
        for a in 0..4 {
            let va = v[conn[a]];
            val += p.n[a] * va;
            grad[0] += p.dn[a][0] * va;
            grad[1] += p.dn[a][1] * va;
        }
        (val, grad)
    }
}

/// Plane-strain `E(u)` at Gauss point `g` of element `e`.
pub fn strain_at(space: &FeSpace, u: &[f64], e: usize, g: usize) -> SymTensor2 {
    let conn = &space.mesh.elements()[e];
    let p = &space.points[e][g];
    let mut grad = [[0.0; 2]; 2];
    for a in 0..4 {
        let (ux, uy) = (u[2 * conn[a]], u[2 * conn[a] + 1]);
        for j in 0..2 {
            grad[0][j] += ux * p.dn[a][j];
            grad[1][j] += uy * p.dn[a][j];
        }
    }
    SymTensor2::from_gradient_2d(grad)
}

/// Consistent nodal forces of the body force and of uniform tractions on
/// tagged facets (2-point Gauss rule per edge).
pub fn external_force(
    space: &FeSpace,
    body: &BodyForce,
    body_scale: f64,
    tractions: &[(String, [f64; 2])],
    traction_scale: f64,
) -> Vec<f64> {
    let mut f = vec![0.0; space.num_u_dofs()];
    if !matches!(body, BodyForce::None) && body_scale != 0.0 {
        for (conn, pts) in space.mesh.elements().iter().zip(&space.points) {
            for p in pts {
                let b = body.at(p.x);
                for a in 0..4 {
                    for c in 0..2 {
                        f[2 * conn[a] + c] += body_scale * p.w * p.n[a] * b[c];
                    }
                }
            }
        }
    }
    for (tag, s) in tractions {
        for facet in space.mesh.facets_with_tag(tag) {
            let [i, j] = facet.nodes;
            let (xi, xj) = (space.mesh.nodes()[i], space.mesh.nodes()[j]);
            let len = ((xj[0] - xi[0]).powi(2) + (xj[1] - xi[1]).powi(2)).sqrt();
            for t in GAUSS_2 {
                let (ni, nj) = (0.5 * (1.0 - t), 0.5 * (1.0 + t));
                let w = 0.5 * len;
                for c in 0..2 {
                    f[2 * i + c] += traction_scale * w * ni * s[c];
                    f[2 * j + c] += traction_scale * w * nj * s[c];
                }
            }
        }
    }
    f
}

fn degradation(v: f64, eta: f64) -> f64 {
    v * v + eta
}

/// `∫_e (v² + η) W(E(u)) dX`
pub fn element_elastic_energy(space: &FeSpace, u: &[f64], v: &[f64], e: usize, mat: &Material) -> f64 {
    (0..4)
        .map(|g| {
            let (vg, _) = space.interpolate_v(v, e, g);
            let strain = strain_at(space, u, e, g);
            space.points[e][g].w * degradation(vg, mat.params.eta_eps) * mat.stored_energy(&strain)
        })
        .sum()
}

/// Deformation energy `∫ (v²+η) W dX − f_ext · u`, where `f_ext` comes from
/// [`external_force`].
pub fn energy_d(space: &FeSpace, u: &[f64], v: &[f64], f_ext: &[f64], mat: &Material) -> f64 {
    let elastic: f64 = (0..space.mesh.num_elements())
        .map(|e| element_elastic_energy(space, u, v, e, mat))
        .sum();
    let work: f64 = f_ext.iter().zip(u).map(|(f, x)| f * x).sum();
    elastic - work
}

/// Internal nodal forces `∫ (v²+η) Bᵀσ dX`.
pub fn internal_force(space: &FeSpace, u: &[f64], v: &[f64], mat: &Material) -> Vec<f64> {
    let mut r = vec![0.0; space.num_u_dofs()];
    for (e, conn) in space.mesh.elements().iter().enumerate() {
        for g in 0..4 {
            let p = &space.points[e][g];
            let (vg, _) = space.interpolate_v(v, e, g);
            let s = mat.stress(&strain_at(space, u, e, g)) * (p.w * degradation(vg, mat.params.eta_eps));
            for a in 0..4 {
                let [dx, dy] = p.dn[a];
                r[2 * conn[a]] += s.xx * dx + s.xy * dy;
                r[2 * conn[a] + 1] += s.xy * dx + s.yy * dy;
            }
        }
    }
    r
}

/// Gradient of [`energy_d`] with respect to every displacement dof.
pub fn residual_d(space: &FeSpace, u: &[f64], v: &[f64], f_ext: &[f64], mat: &Material) -> Vec<f64> {
    let mut r = internal_force(space, u, v, mat);
    for (ri, fi) in r.iter_mut().zip(f_ext) {
        *ri -= fi;
    }
    r
}

/// Hessian of [`energy_d`]; independent of `u`.
pub fn tangent_d(space: &FeSpace, v: &[f64], mat: &Material) -> SparseMatrix {
    let (mu, lambda) = (mat.params.mu, mat.params.lambda);
    let d11 = lambda + 2.0 * mu;
    let mut k = space.pattern_u.zeros();
    let mut ke = [0.0; 64];
    for e in 0..space.mesh.num_elements() {
        ke.fill(0.0);
        for g in 0..4 {
            let p = &space.points[e][g];
            let (vg, _) = space.interpolate_v(v, e, g);
            let scale = p.w * degradation(vg, mat.params.eta_eps);
            for a in 0..4 {
                let [ax, ay] = p.dn[a];
                for b in 0..4 {
                    let [bx, by] = p.dn[b];
                    // B_aᵀ D B_b with D = [[λ+2μ, λ, 0], [λ, λ+2μ, 0], [0, 0, μ]]
                    let kxx = d11 * ax * bx + mu * ay * by;
                    let kxy = lambda * ax * by + mu * ay * bx;
                    let kyx = lambda * ay * bx + mu * ax * by;
                    let kyy = d11 * ay * by + mu * ax * bx;
                    let (r, c) = (2 * a, 2 * b);
                    ke[r * 8 + c] += scale * kxx;
                    ke[r * 8 + c + 1] += scale * kxy;
                    ke[(r + 1) * 8 + c] += scale * kyx;
                    ke[(r + 1) * 8 + c + 1] += scale * kyy;
                }
            }
        }
        space.pattern_u.add_element(&mut k, e, &ke);
    }
    k
}

/// Which functional governs the phase field.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FunctionalKind {
    /// Fracture functional with the strength term and `3δᵋG_c/8` surface factor.
    Strength,
    /// Griffith energy functional: no strength term, `3G_c/8` surface factor.
    Griffith,
}

impl FunctionalKind {
    pub fn name(&self) -> &'static str {
        match self {
            FunctionalKind::Strength => "strength",
            FunctionalKind::Griffith => "griffith",
        }
    }
}

/// Scalar coefficients of a phase-field functional
/// `∫ v² W + ∫ (v³/3) ĉ_e + surface ∫ ((1−v)/ε + ε|∇v|²)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FunctionalCoefficients {
    pub include_che: bool,
    pub surface: f64,
    pub eps: f64,
}

impl FunctionalCoefficients {
    pub fn new(kind: FunctionalKind, mat: &Material) -> Self {
        let p = &mat.params;
        match kind {
            FunctionalKind::Strength => FunctionalCoefficients {
                include_che: true,
                surface: 3.0 * p.delta_eps * p.g_c / 8.0,
                eps: p.eps,
            },
            FunctionalKind::Griffith => FunctionalCoefficients {
                include_che: false,
                surface: 3.0 * p.g_c / 8.0,
                eps: p.eps,
            },
        }
    }

    /// Force density scale of the regularization term, `surface / ε`.
    pub fn natural_density(&self) -> f64 {
        self.surface / self.eps
    }
}

/// `W(E(u))` and `ĉ_e(E(u))` at every Gauss point, index `4 e + g`.
#[derive(Debug, Clone, PartialEq)]
pub struct StrainDensities {
    pub w: Vec<f64>,
    pub che: Vec<f64>,
}

pub fn strain_densities(space: &FeSpace, u: &[f64], mat: &Material) -> StrainDensities {
    let ne = space.mesh.num_elements();
    let mut w = Vec::with_capacity(4 * ne);
    let mut che = Vec::with_capacity(4 * ne);
    for e in 0..ne {
        for g in 0..4 {
            let strain = strain_at(space, u, e, g);
            w.push(mat.stored_energy(&strain));
            che.push(mat.che(&strain));
        }
    }
    StrainDensities { w, che }
}

/// Value of a phase-field functional split into its three integrals.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct FractureEnergy {
    /// `∫ v² W`
    pub elastic: f64,
    /// `∫ (v³/3) ĉ_e` (zero for the Griffith functional)
    pub strength: f64,
    /// `surface ∫ ((1−v)/ε + ε|∇v|²)`
    pub surface: f64,
}

impl FractureEnergy {
    pub fn total(&self) -> f64 {
        self.elastic + self.strength + self.surface
    }
}

impl std::ops::AddAssign for FractureEnergy {
    fn add_assign(&mut self, o: FractureEnergy) {
        self.elastic += o.elastic;
        self.strength += o.strength;
        self.surface += o.surface;
    }
}

pub fn element_energy_v(
    space: &FeSpace,
    v: &[f64],
    dens: &StrainDensities,
    c: &FunctionalCoefficients,
    e: usize,
) -> FractureEnergy {
    let mut out = FractureEnergy::default();
    for g in 0..4 {
        let w = space.points[e][g].w;
        let (vg, gv) = space.interpolate_v(v, e, g);
        let q = 4 * e + g;
        out.elastic += w * vg * vg * dens.w[q];
        if c.include_che {
            out.strength += w * vg * vg * vg / 3.0 * dens.che[q];
        }
        out.surface += w * c.surface * ((1.0 - vg) / c.eps + c.eps * (gv[0] * gv[0] + gv[1] * gv[1]));
    }
    out
}

pub fn energy_v(space: &FeSpace, v: &[f64], dens: &StrainDensities, c: &FunctionalCoefficients) -> FractureEnergy {
    let mut out = FractureEnergy::default();
    for e in 0..space.mesh.num_elements() {
        out += element_energy_v(space, v, dens, c, e);
    }
    out
}

pub fn residual_v(space: &FeSpace, v: &[f64], dens: &StrainDensities, c: &FunctionalCoefficients) -> Vec<f64> {
    let mut r = vec![0.0; space.num_nodes()];
    for (e, conn) in space.mesh.elements().iter().enumerate() {
        for g in 0..4 {
            let p = &space.points[e][g];
            let (vg, gv) = space.interpolate_v(v, e, g);
            let q = 4 * e + g;
            let mut pointwise = 2.0 * vg * dens.w[q] - c.surface / c.eps;
            if c.include_che {
                pointwise += vg * vg * dens.che[q];
            }
            for a in 0..4 {
                let grad_term = 2.0 * c.surface * c.eps * (gv[0] * p.dn[a][0] + gv[1] * p.dn[a][1]);
                r[conn[a]] += p.w * (pointwise * p.n[a] + grad_term);
            }
        }
    }
    r
}

pub fn tangent_v(space: &FeSpace, v: &[f64], dens: &StrainDensities, c: &FunctionalCoefficients) -> SparseMatrix {
    let mut k = space.pattern_v.zeros();
    let mut ke = [0.0; 16];
    for e in 0..space.mesh.num_elements() {
        ke.fill(0.0);
        for g in 0..4 {
            let p = &space.points[e][g];
            let (vg, _) = space.interpolate_v(v, e, g);
            let q = 4 * e + g;
            let mut mass = 2.0 * dens.w[q];
            if c.include_che {
                mass += 2.0 * vg * dens.che[q];
            }
            let stiff = 2.0 * c.surface * c.eps;
            for a in 0..4 {
                for b in 0..4 {
                    let dd = p.dn[a][0] * p.dn[b][0] + p.dn[a][1] * p.dn[b][1];
                    ke[a * 4 + b] += p.w * (mass * p.n[a] * p.n[b] + stiff * dd);
                }
            }
        }
        space.pattern_v.add_element(&mut k, e, &ke);
    }
    k
}

/// Fracture functional `𝓔ᶠ(v; u)`.
pub fn energy_f(space: &FeSpace, v: &[f64], u: &[f64], mat: &Material) -> FractureEnergy {
    let dens = strain_densities(space, u, mat);
    energy_v(space, v, &dens, &FunctionalCoefficients::new(FunctionalKind::Strength, mat))
}

/// Griffith energy functional `𝓔ᴳ(v; u)`.
pub fn energy_g(space: &FeSpace, v: &[f64], u: &[f64], mat: &Material) -> FractureEnergy {
    let dens = strain_densities(space, u, mat);
    energy_v(space, v, &dens, &FunctionalCoefficients::new(FunctionalKind::Griffith, mat))
}

pub fn residual_f(space: &FeSpace, v: &[f64], u: &[f64], mat: &Material) -> Vec<f64> {
    let dens = strain_densities(space, u, mat);
    residual_v(space, v, &dens, &FunctionalCoefficients::new(FunctionalKind::Strength, mat))
}

pub fn tangent_f(space: &FeSpace, v: &[f64], u: &[f64], mat: &Material) -> SparseMatrix {
    let dens = strain_densities(space, u, mat);
    tangent_v(space, v, &dens, &FunctionalCoefficients::new(FunctionalKind::Strength, mat))
}

/// `‖u_h − u_exact‖_{L²}` using a 3×3 Gauss rule.
pub fn l2_error(space: &FeSpace, u: &[f64], exact: impl Fn([f64; 2]) -> [f64; 2]) -> f64 {
    let pts = [-(0.6_f64).sqrt(), 0.0, (0.6_f64).sqrt()];
    let wts = [5.0 / 9.0, 8.0 / 9.0, 5.0 / 9.0];
    let mut err2 = 0.0;
    for (e, conn) in space.mesh.elements().iter().enumerate() {
        let coords = space.mesh.element_coords(e);
        for (i, &xi) in pts.iter().enumerate() {
            for (j, &eta) in pts.iter().enumerate() {
                let p = map_point(&coords, [xi, eta], wts[i] * wts[j]);
                let mut uh = [0.0; 2];
                for a in 0..4 {
                    uh[0] += p.n[a] * u[2 * conn[a]];
                    uh[1] += p.n[a] * u[2 * conn[a] + 1];
                }
                let ue = exact(p.x);
                err2 += p.w * ((uh[0] - ue[0]).powi(2) + (uh[1] - ue[1]).powi(2));
            }
        }
    }
    err2.sqrt()
}
