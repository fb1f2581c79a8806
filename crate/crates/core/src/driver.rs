//! Quasistatic load stepping with alternating minimization: at every load
//! step the displacement minimizes the deformation energy for the current
//! phase field, the phase field minimizes its functional for the current
//! displacement, and the two solves alternate until the phase field settles.
//!
//! Irreversibility is enforced only through the upper bound `v ≤ v_{k−1}` of
//! the phase-field solve.

use std::collections::BTreeMap;

use crate::fem::{self, BodyForce, FeSpace, FractureEnergy, FunctionalCoefficients, FunctionalKind};
use crate::material::Material;
use crate::mesh::MeshError;
use crate::solver::{self, LinearOptions, NewtonOptions, SolveReport, SolverError};
use crate::tensor::SymTensor2;

#[derive(Debug, thiserror::Error)]
pub enum DriverError {
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error(transparent)]
    Mesh(#[from] MeshError),
    #[error("invalid load program: {0}")]
    Load(String),
    #[error("invalid problem: {0}")]
    Setup(String),
    #[error("step {step} did not converge after {iterations} staggered iterations (|dv| = {dv:e})")]
    NotConverged { step: usize, iterations: usize, dv: f64 },
    #[error("step {step}, iteration {iteration}: {functional} increased from {before:e} to {after:e}")]
    Monotonicity { step: usize, iteration: usize, functional: &'static str, before: f64, after: f64 },
    #[error("step {step}: phase field violates the bound v <= previous step by {excess:e} at node {node}")]
    Irreversibility { step: usize, node: usize, excess: f64 },
    #[error("step {step}: stationarity check failed ({check})")]
    Stationarity { step: usize, check: StationarityCheck },
}

/// Prescribed displacement component, multiplied by the load factor.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BcValue {
    Constant(f64),
    /// `c + gx·x + gy·y`
    Linear { c: f64, gx: f64, gy: f64 },
}

impl BcValue {
    pub fn at(&self, x: [f64; 2]) -> f64 {
        match *self {
            BcValue::Constant(c) => c,
            BcValue::Linear { c, gx, gy } => c + gx * x[0] + gy * x[1],
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DirichletBc {
    /// Facet tag or node set.
    pub tag: String,
    /// 0 for x, 1 for y.
    pub component: usize,
    pub value: BcValue,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Traction {
    pub tag: String,
    /// Force per unit length at load factor 1.
    pub value: [f64; 2],
}

/// Load factors applied at one step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LoadStep {
    pub dirichlet: f64,
    pub traction: f64,
    pub body: f64,
}

impl LoadStep {
    pub fn uniform(t: f64) -> Self {
        LoadStep { dirichlet: t, traction: t, body: t }
    }

    /// Representative scalar: the largest factor in magnitude.
    pub fn magnitude(&self) -> f64 {
        [self.dirichlet, self.traction, self.body]
            .into_iter()
            .fold(0.0, |m: f64, x| if x.abs() > m.abs() { x } else { m })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LoadProgram {
    steps: Vec<LoadStep>,
    monotone: bool,
}

impl LoadProgram {
    pub fn new(steps: Vec<LoadStep>, monotone: bool) -> Result<Self, DriverError> {
        if steps.is_empty() {
            return Err(DriverError::Load("no load steps".into()));
        }
        for (k, s) in steps.iter().enumerate() {
            if ![s.dirichlet, s.traction, s.body].iter().all(|x| x.is_finite()) {
                return Err(DriverError::Load(format!("step {k} has a non-finite factor")));
            }
        }
        if monotone {
            for (k, w) in steps.windows(2).enumerate() {
                let (a, b) = (w[0], w[1]);
                if b.dirichlet < a.dirichlet || b.traction < a.traction || b.body < a.body {
                    return Err(DriverError::Load(format!(
                        "factors decrease between steps {k} and {}, but the program is monotone",
                        k + 1
                    )));
                }
            }
        }
        Ok(LoadProgram { steps, monotone })
    }

    /// Same factor for every load type at each step.
    pub fn proportional(factors: &[f64]) -> Result<Self, DriverError> {
        Self::proportional_with(factors, true)
    }

    pub fn proportional_with(factors: &[f64], monotone: bool) -> Result<Self, DriverError> {
        Self::new(factors.iter().map(|&t| LoadStep::uniform(t)).collect(), monotone)
    }

    /// `n` equal increments from `start` (excluded when `n > 0`) to `end`.
    pub fn linear_ramp(start: f64, end: f64, n: usize) -> Result<Self, DriverError> {
        let factors: Vec<f64> = (1..=n.max(1)).map(|i| start + (end - start) * i as f64 / n.max(1) as f64).collect();
        Self::proportional(&factors)
    }

    pub fn steps(&self) -> &[LoadStep] {
        &self.steps
    }

    pub fn is_monotone(&self) -> bool {
        self.monotone
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NonConvergencePolicy {
    Abort,
    Continue,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StaggerOptions {
    /// Bound on `‖v_i − v_{i−1}‖∞`.
    pub stagger_tol: f64,
    /// Bound on the relative change of the deformation energy between iterations.
    pub energy_tol: f64,
    pub max_stagger: usize,
    /// Phase-field stationarity tolerance; `None` selects [`solver::default_v_tol`].
    pub v_tol: Option<f64>,
    pub v_max_iter: usize,
    pub linear: LinearOptions,
    pub policy: NonConvergencePolicy,
    pub functional: FunctionalKind,
    /// Relative slack of the per-iteration descent checks.
    pub monotonicity_tol: f64,
}

impl Default for StaggerOptions {
    fn default() -> Self {
        StaggerOptions {
            stagger_tol: 1e-4,
            energy_tol: 1e-4,
            max_stagger: 500,
            v_tol: None,
            v_max_iter: 200,
            linear: LinearOptions::default(),
            policy: NonConvergencePolicy::Abort,
            functional: FunctionalKind::Strength,
            monotonicity_tol: 1e-10,
        }
    }
}

/// Everything needed to run a load program.
#[derive(Debug, Clone)]
pub struct Problem {
    pub space: FeSpace,
    pub material: Material,
    pub dirichlet: Vec<DirichletBc>,
    pub tractions: Vec<Traction>,
    pub body: BodyForce,
    /// Initial phase field and upper bound of the first step.
    pub v0: Vec<f64>,
    pub options: StaggerOptions,
    /// Tags whose reaction forces are reported each step.
    pub reaction_tags: Vec<String>,
    /// Nodes with `v` below this count as damaged.
    pub damage_threshold: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct EnergyReport {
    pub ed: f64,
    /// Fracture functional (with strength term), split into its integrals.
    pub ef: FractureEnergy,
    pub eg: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct IterationRecord {
    pub step: usize,
    pub iteration: usize,
    pub load: f64,
    /// Deformation energy before and after the displacement solve (phase field fixed).
    pub ed_before: f64,
    pub ed: f64,
    /// Minimized phase-field functional before and after the phase-field solve.
    pub phase_before: f64,
    pub phase_after: f64,
    pub ef: FractureEnergy,
    pub eg: f64,
    pub dv_inf: f64,
    pub v_min: f64,
    pub u_report: SolveReport,
    pub v_report: SolveReport,
}

/// Discrete Euler–Lagrange conditions of the phase-field solve at a
/// converged step: zero gradient at free nodes, non-positive gradient at
/// nodes on the upper bound, non-negative gradient at nodes on zero.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StationarityCheck {
    pub tolerance: f64,
    pub free: usize,
    pub at_upper: usize,
    pub at_zero: usize,
    pub pinned: usize,
    /// Largest `|g|` over free nodes.
    pub max_free_gradient: f64,
    /// Largest sign violation over clamped nodes.
    pub max_sign_violation: f64,
    pub passed: bool,
}

impl std::fmt::Display for StationarityCheck {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "free {} (max |g| {:e}), upper {}, zero {}, pinned {}, max sign violation {:e}, tolerance {:e}",
            self.free, self.max_free_gradient, self.at_upper, self.at_zero, self.pinned, self.max_sign_violation, self.tolerance
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepState {
    pub step: usize,
    /// Representative load factor.
    pub load: f64,
    pub factors: LoadStep,
    pub u: Vec<f64>,
    pub v: Vec<f64>,
    pub energies: EnergyReport,
    pub iterations: usize,
    pub converged: bool,
    /// Staggered loop interrupted by an iteration hook.
    pub interrupted: bool,
    pub records: Vec<IterationRecord>,
    pub reactions: BTreeMap<String, [f64; 2]>,
    pub v_min: f64,
    /// Area fraction with `v` below the damage threshold (lumped).
    pub damaged_fraction: f64,
    /// Mean stress after the first displacement solve of the step, i.e. the
    /// stress carried under the step's load before the phase field responds.
    pub trial_stress: SymTensor2,
    /// Mean stress of the returned state.
    pub stress: SymTensor2,
    pub stationarity: Option<StationarityCheck>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Flow {
    Continue,
    Stop,
}

/// Result of a load program: the states reached and, if the program ended
/// early because of an error, that error.
#[derive(Debug)]
pub struct RunOutcome {
    pub states: Vec<StepState>,
    pub failure: Option<DriverError>,
    /// The step observer requested a stop.
    pub stopped: bool,
}

impl Problem {
    pub fn new(
        space: FeSpace,
        material: Material,
        dirichlet: Vec<DirichletBc>,
        tractions: Vec<Traction>,
        v0: Option<Vec<f64>>,
    ) -> Result<Problem, DriverError> {
        let n = space.num_nodes();
        let v0 = v0.unwrap_or_else(|| vec![1.0; n]);
        let p = Problem {
            space,
            material,
            dirichlet,
            tractions,
            body: BodyForce::None,
            v0,
            options: StaggerOptions::default(),
            reaction_tags: Vec::new(),
            damage_threshold: 0.05,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<(), DriverError> {
        let n = self.space.num_nodes();
        let mesh = self.space.mesh();
        if self.v0.len() != n {
            return Err(DriverError::Setup(format!("initial phase field has {} values, mesh {n} nodes", self.v0.len())));
        }
        if let Some(i) = self.v0.iter().position(|v| !(0.0..=1.0).contains(v)) {
            return Err(DriverError::Setup(format!("initial phase field {} at node {i} outside [0, 1]", self.v0[i])));
        }
        for bc in &self.dirichlet {
            if bc.component > 1 {
                return Err(DriverError::Setup(format!("Dirichlet component {} on {}", bc.component, bc.tag)));
            }
            mesh.nodes_of_tag(&bc.tag)?;
        }
        for t in &self.tractions {
            if !mesh.facets().iter().any(|f| f.tag == t.tag) {
                return Err(DriverError::Mesh(MeshError::UnknownTag(t.tag.clone())));
            }
        }
        for t in &self.reaction_tags {
            mesh.nodes_of_tag(t)?;
        }
        if self.dirichlet.is_empty() && self.tractions.is_empty() {
            log::warn!("problem has neither Dirichlet data nor tractions");
        }
        Ok(())
    }

    pub fn coefficients(&self) -> FunctionalCoefficients {
        FunctionalCoefficients::new(self.options.functional, &self.material)
    }

    pub fn v_tol(&self) -> f64 {
        self.options.v_tol.unwrap_or_else(|| solver::default_v_tol(&self.space, &self.coefficients()))
    }

    /// Constrained displacement dofs and their values at Dirichlet factor `t`.
    /// Later conditions override earlier ones on shared nodes.
    pub fn dirichlet_values(&self, t: f64) -> Result<Vec<(usize, f64)>, DriverError> {
        let mesh = self.space.mesh();
        let mut map = BTreeMap::new();
        for bc in &self.dirichlet {
            for node in mesh.nodes_of_tag(&bc.tag)? {
                map.insert(2 * node + bc.component, t * bc.value.at(mesh.nodes()[node]));
            }
        }
        Ok(map.into_iter().collect())
    }

    pub fn external_force(&self, load: &LoadStep) -> Vec<f64> {
        let tr: Vec<(String, [f64; 2])> = self.tractions.iter().map(|t| (t.tag.clone(), t.value)).collect();
        fem::external_force(&self.space, &self.body, load.body, &tr, load.traction)
    }

    /// `u ≡ 0` and `v = v0`, the state before the first load step.
    pub fn initial_state(&self) -> StepState {
        let n = self.space.num_nodes();
        let u = vec![0.0; 2 * n];
        let v = self.v0.clone();
        let zero = LoadStep::uniform(0.0);
        let energies = self.energy_report(&u, &v, &vec![0.0; 2 * n]);
        StepState {
            step: 0,
            load: 0.0,
            factors: zero,
            reactions: self.reaction_tags.iter().map(|t| (t.clone(), [0.0; 2])).collect(),
            v_min: v.iter().copied().fold(f64::INFINITY, f64::min),
            damaged_fraction: self.damaged_fraction(&v),
            energies,
            u,
            v,
            iterations: 0,
            converged: true,
            interrupted: false,
            records: Vec::new(),
            trial_stress: SymTensor2::ZERO,
            stress: SymTensor2::ZERO,
            stationarity: None,
        }
    }

    fn energy_report(&self, u: &[f64], v: &[f64], f_ext: &[f64]) -> EnergyReport {
        let dens = fem::strain_densities(&self.space, u, &self.material);
        let m = &self.material;
        EnergyReport {
            ed: fem::energy_d(&self.space, u, v, f_ext, m),
            ef: fem::energy_v(&self.space, v, &dens, &FunctionalCoefficients::new(FunctionalKind::Strength, m)),
            eg: fem::energy_v(&self.space, v, &dens, &FunctionalCoefficients::new(FunctionalKind::Griffith, m)).total(),
        }
    }

    pub fn damaged_fraction(&self, v: &[f64]) -> f64 {
        let w = self.space.lumped_weights();
        let damaged = v
            .iter()
            .zip(w)
            .filter(|(vi, _)| **vi < self.damage_threshold)
            .fold(0.0, |acc, (_, w)| acc + w);
        damaged / self.space.area()
    }

    /// Area average of the degraded stress `(v² + η) σ(E(u))`.
    pub fn mean_stress(&self, u: &[f64], v: &[f64]) -> SymTensor2 {
        let eta = self.material.params.eta_eps;
        let mut s = SymTensor2::ZERO;
        for e in 0..self.space.mesh().num_elements() {
            for g in 0..4 {
                let w = self.space.points(e)[g].w;
                let (vg, _) = self.space.interpolate_v(v, e, g);
                s += self.material.stress(&fem::strain_at(&self.space, u, e, g)) * (w * (vg * vg + eta));
            }
        }
        s * (1.0 / self.space.area())
    }

    /// Sum of the internal nodal forces `∫ (v²+η) Bᵀσ` over the nodes of
    /// `tag`. On a Dirichlet boundary this is the support reaction; on a
    /// loaded boundary it balances the applied traction.
    pub fn reaction_force(&self, u: &[f64], v: &[f64], tag: &str) -> Result<[f64; 2], DriverError> {
        let nodes = self.space.mesh().nodes_of_tag(tag)?;
        let f = fem::internal_force(&self.space, u, v, &self.material);
        Ok(nodes.iter().fold([0.0; 2], |acc, &n| [acc[0] + f[2 * n], acc[1] + f[2 * n + 1]]))
    }

    /// Euler–Lagrange conditions of the minimized phase-field functional.
    pub fn stationarity_check(&self, u: &[f64], v: &[f64], upper: &[f64]) -> StationarityCheck {
        let dens = fem::strain_densities(&self.space, u, &self.material);
        let g = fem::residual_v(&self.space, v, &dens, &self.coefficients());
        let tol = self.v_tol();
        let mut c = StationarityCheck {
            tolerance: tol,
            free: 0,
            at_upper: 0,
            at_zero: 0,
            pinned: 0,
            max_free_gradient: 0.0,
            max_sign_violation: 0.0,
            passed: true,
        };
        for i in 0..v.len() {
            if upper[i] == 0.0 {
                c.pinned += 1;
                if v[i] != 0.0 {
                    c.max_sign_violation = f64::INFINITY;
                }
            } else if upper[i] - v[i] <= tol {
                c.at_upper += 1;
                c.max_sign_violation = c.max_sign_violation.max(g[i]);
            } else if v[i] <= tol {
                c.at_zero += 1;
                c.max_sign_violation = c.max_sign_violation.max(-g[i]);
            } else {
                c.free += 1;
                c.max_free_gradient = c.max_free_gradient.max(g[i].abs());
            }
        }
        c.passed = c.max_free_gradient <= tol && c.max_sign_violation <= tol;
        c
    }

    pub fn run_step(&self, prev: &StepState, step: usize, load: &LoadStep) -> Result<StepState, DriverError> {
        self.run_step_with(prev, step, load, &mut |_, _| Flow::Continue)
    }

    /// One load step of alternating minimization. `hook` sees every
    /// staggered iteration and the current phase field and may end the
    /// step early.
    pub fn run_step_with(
        &self,
        prev: &StepState,
        step: usize,
        load: &LoadStep,
        hook: &mut dyn FnMut(&IterationRecord, &[f64]) -> Flow,
    ) -> Result<StepState, DriverError> {
        let m = &self.material;
        let opts = &self.options;
        let coeffs = self.coefficients();
        let griffith = FunctionalCoefficients::new(FunctionalKind::Griffith, m);
        let strength = FunctionalCoefficients::new(FunctionalKind::Strength, m);
        let newton = NewtonOptions { max_iter: opts.v_max_iter, ..NewtonOptions::with_tol(self.v_tol()) };
        let f_ext = self.external_force(load);
        let bc = self.dirichlet_values(load.dirichlet)?;
        let upper = &prev.v;

        let mut u = prev.u.clone();
        for &(d, val) in &bc {
            u[d] = val;
        }
        let mut v = prev.v.clone();
        let mut records = Vec::new();
        let mut trial_stress = SymTensor2::ZERO;
        let mut converged = false;
        let mut interrupted = false;
        let mut last_ed: Option<f64> = None;
        let mut dv = f64::INFINITY;

        for iteration in 1..=opts.max_stagger {
            let ed_before = fem::energy_d(&self.space, &u, &v, &f_ext, m);
            let k = fem::tangent_d(&self.space, &v, m);
            let (u_new, u_report) = solver::solve_u(&k, &f_ext, &bc, Some(&u), &opts.linear)?;
            if !u_report.converged {
                log::warn!("step {step}, iteration {iteration}: displacement residual {:e} above {:e}", u_report.residual, u_report.tolerance);
            }
            let ed = fem::energy_d(&self.space, &u_new, &v, &f_ext, m);
            let ed_scale = fem::energy_d(&self.space, &u_new, &v, &vec![0.0; f_ext.len()], m).abs()
                + solver::dot(&f_ext, &u_new).abs();
            if ed > ed_before + opts.monotonicity_tol * ed_scale.max(ed_before.abs()) {
                return Err(DriverError::Monotonicity { step, iteration, functional: "deformation energy", before: ed_before, after: ed });
            }
            if iteration == 1 {
                trial_stress = self.mean_stress(&u_new, &v);
            }

            let dens = fem::strain_densities(&self.space, &u_new, m);
            let before = fem::energy_v(&self.space, &v, &dens, &coeffs);
            let (v_new, v_report) = solver::solve_v(&self.space, &dens, coeffs, &v, upper, &newton)?;
            if !v_report.converged {
                log::warn!(
                    "step {step}, iteration {iteration}: phase-field solve stopped at stationarity {:e} (tolerance {:e})",
                    v_report.residual,
                    v_report.tolerance
                );
            }
            let after = fem::energy_v(&self.space, &v_new, &dens, &coeffs);
            let scale = before.elastic.abs() + before.strength.abs() + before.surface.abs();
            if after.total() > before.total() + opts.monotonicity_tol * scale {
                return Err(DriverError::Monotonicity {
                    step,
                    iteration,
                    functional: "phase-field functional",
                    before: before.total(),
                    after: after.total(),
                });
            }
            dv = v_new.iter().zip(&v).fold(0.0_f64, |mx, (a, b)| mx.max((a - b).abs()));
            let ef = if coeffs == strength { after } else { fem::energy_v(&self.space, &v_new, &dens, &strength) };
            let eg = if coeffs == griffith { after.total() } else { fem::energy_v(&self.space, &v_new, &dens, &griffith).total() };
            let record = IterationRecord {
                step,
                iteration,
                load: load.magnitude(),
                ed_before,
                ed,
                phase_before: before.total(),
                phase_after: after.total(),
                ef,
                eg,
                dv_inf: dv,
                v_min: v_new.iter().copied().fold(f64::INFINITY, f64::min),
                u_report,
                v_report,
            };
            log::debug!(
                "step {step} it {iteration}: ed {:e} phase {:e} dv {:e} vmin {:e} newton {}",
                record.ed,
                record.phase_after,
                dv,
                record.v_min,
                record.v_report.iterations
            );
            u = u_new;
            v = v_new;
            let energy_settled = match last_ed {
                None => true,
                Some(prev_ed) => (ed - prev_ed).abs() <= opts.energy_tol * ed_scale.max(f64::MIN_POSITIVE),
            };
            last_ed = Some(ed);
            let v_ok = record.v_report.converged;
            let flow = hook(&record, &v);
            records.push(record);
            if dv <= opts.stagger_tol && (iteration == 1 || energy_settled) && v_ok {
                converged = true;
                break;
            }
            if flow == Flow::Stop {
                interrupted = true;
                break;
            }
        }

        for i in 0..v.len() {
            let excess = v[i] - upper[i];
            if excess > 0.0 || v[i] < 0.0 {
                return Err(DriverError::Irreversibility { step, node: i, excess: excess.max(-v[i]) });
            }
        }

        let stationarity = converged.then(|| self.stationarity_check(&u, &v, upper));
        let mut reactions = BTreeMap::new();
        for t in &self.reaction_tags {
            reactions.insert(t.clone(), self.reaction_force(&u, &v, t)?);
        }
        let iterations = records.len();
        let state = StepState {
            step,
            load: load.magnitude(),
            factors: *load,
            energies: self.energy_report(&u, &v, &f_ext),
            iterations,
            converged,
            interrupted,
            records,
            reactions,
            v_min: v.iter().copied().fold(f64::INFINITY, f64::min),
            damaged_fraction: self.damaged_fraction(&v),
            trial_stress,
            stress: self.mean_stress(&u, &v),
            stationarity,
            u,
            v,
        };
        if !converged && !interrupted {
            log::warn!("step {step}: no convergence after {iterations} staggered iterations (|dv| = {dv:e})");
        }
        Ok(state)
    }

    /// Runs every step of `program`. `observer` sees each finished step and
    /// may stop the program; `hook` is forwarded to [`Problem::run_step_with`].
    pub fn run_program_with(
        &self,
        program: &LoadProgram,
        observer: &mut dyn FnMut(&StepState) -> Flow,
        hook: &mut dyn FnMut(&IterationRecord, &[f64]) -> Flow,
    ) -> RunOutcome {
        let check = self.material.check_eps();
        if check.status == crate::material::EpsStatus::Warn {
            log::warn!("regularization length check: {check}");
        } else {
            log::info!("regularization length check: {check}");
        }
        let mut states: Vec<StepState> = Vec::with_capacity(program.len());
        let initial = self.initial_state();
        for (k, load) in program.steps().iter().enumerate() {
            let prev = states.last().unwrap_or(&initial);
            let state = match self.run_step_with(prev, k, load, hook) {
                Ok(s) => s,
                Err(e) => return RunOutcome { states, failure: Some(e), stopped: false },
            };
            let failure = if !state.converged && !state.interrupted && self.options.policy == NonConvergencePolicy::Abort {
                Some(DriverError::NotConverged {
                    step: k,
                    iterations: state.iterations,
                    dv: state.records.last().map_or(f64::NAN, |r| r.dv_inf),
                })
            } else {
                match state.stationarity {
                    Some(c) if !c.passed && self.options.policy == NonConvergencePolicy::Abort => {
                        Some(DriverError::Stationarity { step: k, check: c })
                    }
                    Some(c) if !c.passed => {
                        log::warn!("step {k}: stationarity check failed ({c})");
                        None
                    }
                    _ => None,
                }
            };
            let flow = observer(&state);
            states.push(state);
            if failure.is_some() {
                return RunOutcome { states, failure, stopped: false };
            }
            if flow == Flow::Stop {
                return RunOutcome { states, failure: None, stopped: true };
            }
        }
        RunOutcome { states, failure: None, stopped: false }
    }

    pub fn run_program(&self, program: &LoadProgram) -> RunOutcome {
        self.run_program_with(program, &mut |_| Flow::Continue, &mut |_, _| Flow::Continue)
    }
}

/// `min_i (v_prev[i] − v[i])`; irreversibility holds when this is ≥ 0.
pub fn irreversibility_margin(v_prev: &[f64], v: &[f64]) -> f64 {
    v_prev.iter().zip(v).map(|(a, b)| a - b).fold(f64::INFINITY, f64::min)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::material::MaterialParams;
    use crate::mesh::generate_rect;
    use std::sync::Arc;

    fn material() -> Material {
        Material::new(MaterialParams {
            mu: 100.0,
            lambda: 150.0,
            sigma_ts: 1.0,
            sigma_hs: 1.2,
            g_c: 0.002,
            eps: 0.05,
            eta_eps: 1e-5,
            delta_eps: 2.0,
        })
        .unwrap()
    }

    fn stretch_problem(nx: usize) -> Problem {
        let space = FeSpace::new(Arc::new(generate_rect(1.0, 1.0, nx, nx).unwrap()));
        let bcs = vec![
            DirichletBc { tag: "left".into(), component: 0, value: BcValue::Constant(0.0) },
            DirichletBc { tag: "right".into(), component: 0, value: BcValue::Constant(1.0) },
            DirichletBc { tag: "corner_bl".into(), component: 1, value: BcValue::Constant(0.0) },
        ];
        let mut p = Problem::new(space, material(), bcs, vec![], None).unwrap();
        p.reaction_tags = vec!["left".into(), "right".into()];
        p
    }

    #[test]
    fn zero_load_step_is_trivial() {
        let p = stretch_problem(3);
        let prog = LoadProgram::proportional(&[0.0]).unwrap();
        let out = p.run_program(&prog);
        assert!(out.failure.is_none());
        let s = &out.states[0];
        assert_eq!(s.iterations, 1);
        assert!(s.u.iter().all(|&x| x == 0.0));
        assert!(s.v.iter().all(|&x| x == 1.0));
        assert_eq!(s.reactions["right"], [0.0, 0.0]);
    }

    #[test]
    fn monotone_program_rejects_decrease() {
        assert!(LoadProgram::proportional(&[0.0, 1.0, 0.5]).is_err());
        assert!(LoadProgram::new(vec![LoadStep::uniform(1.0), LoadStep::uniform(0.5)], false).is_ok());
    }

    #[test]
    fn unknown_tag_rejected() {
        let space = FeSpace::new(Arc::new(generate_rect(1.0, 1.0, 2, 2).unwrap()));
        let bcs = vec![DirichletBc { tag: "nowhere".into(), component: 0, value: BcValue::Constant(0.0) }];
        assert!(Problem::new(space, material(), bcs, vec![], None).is_err());
    }

    #[test]
    fn elastic_stretch_below_strength() {
        let p = stretch_problem(4);
        // plane-strain stretch giving roughly half the tensile strength
        let prog = LoadProgram::proportional(&[0.002]).unwrap();
        let out = p.run_program(&prog);
        assert!(out.failure.is_none(), "{:?}", out.failure);
        let s = &out.states[0];
        assert!(s.converged);
        assert!(s.v.iter().all(|&x| x == 1.0));
        let c = s.stationarity.unwrap();
        assert!(c.passed && c.at_upper == p.space.num_nodes());
        let (mu, lam) = (100.0, 150.0);
        let exx = 0.002;
        let sxx = (lam + 2.0 * mu - lam * lam / (lam + 2.0 * mu)) * exx;
        let r = s.reactions["right"];
        assert!((r[0] - sxx * (1.0 + 1e-5)).abs() < 1e-8 * sxx, "{} vs {}", r[0], sxx);
        let l = s.reactions["left"];
        assert!((l[0] + r[0]).abs() < 1e-10 * sxx);
    }
}
