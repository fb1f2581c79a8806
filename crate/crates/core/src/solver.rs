//! Linear solves for the displacement subproblem and bound-constrained
//! minimization for the phase-field subproblem.

use std::collections::VecDeque;
use std::time::{Duration, Instant};

use crate::fem::{self, FeSpace, FunctionalCoefficients, StrainDensities};
use crate::sparse::SparseMatrix;

#[derive(Debug, thiserror::Error)]
pub enum SolverError {
    #[error("matrix is not positive definite (pivot {pivot} = {value:e})")]
    NotPositiveDefinite { pivot: usize, value: f64 },
    #[error("conjugate gradients stalled after {iterations} iterations (residual {residual:e}, tolerance {tolerance:e})")]
    NoConvergence { iterations: usize, residual: f64, tolerance: f64 },
    #[error("dimension mismatch: {0}")]
    Dimension(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveReport {
    pub iterations: usize,
    /// Residual 2-norm (linear solves) or projected-gradient ∞-norm (bound-constrained solves).
    pub residual: f64,
    pub tolerance: f64,
    /// Number of degrees of freedom held at a bound at exit.
    pub active: usize,
    pub converged: bool,
    pub wall_time: Duration,
}

/// Symmetric reverse Cuthill–McKee ordering of the sub-graph of `a`
/// induced by `dofs`. Returns `perm` with `perm[new] = local old index`.
fn reverse_cuthill_mckee(a: &SparseMatrix, dofs: &[usize], local: &[usize]) -> Vec<usize> {
    let n = dofs.len();
    let neighbours = |i: usize| {
        let (cols, _) = a.row(dofs[i]);
        cols.iter().filter_map(|&c| {
            let l = local[c];
            (l != usize::MAX).then_some(l)
        })
    };
    let degree: Vec<usize> = (0..n).map(|i| neighbours(i).count()).collect();
    let mut visited = vec![false; n];
    let mut order = Vec::with_capacity(n);
    let mut by_degree: Vec<usize> = (0..n).collect();
    by_degree.sort_by_key(|&i| (degree[i], i));
    let bfs_last = |start: usize, visited: &[bool]| {
        let mut seen = visited.to_vec();
        let mut q = VecDeque::from([start]);
        seen[start] = true;
        let mut last = start;
        while let Some(i) = q.pop_front() {
            last = i;
            for j in neighbours(i) {
                if !seen[j] {
                    seen[j] = true;
                    q.push_back(j);
                }
            }
        }
        last
    };
    for &seed in &by_degree {
        if visited[seed] {
            continue;
        }
        let start = bfs_last(bfs_last(seed, &visited), &visited);
        let mut q = VecDeque::from([start]);
        visited[start] = true;
        while let Some(i) = q.pop_front() {
            order.push(i);
            let mut next: Vec<usize> = neighbours(i).filter(|&j| !visited[j]).collect();
            next.sort_by_key(|&j| (degree[j], j));
            for j in next {
                visited[j] = true;
                q.push_back(j);
            }
        }
    }
    order.reverse();
    order
}

/// Envelope (skyline) Cholesky factorization `P (A + τI) Pᵀ = L Lᵀ` of a
/// principal sub-matrix of a sparse symmetric matrix.
#[derive(Debug, Clone)]
pub struct SkylineCholesky {
    /// `perm[new] = local index`
    perm: Vec<usize>,
    first: Vec<usize>,
    offset: Vec<usize>,
    data: Vec<f64>,
}

impl SkylineCholesky {
    /// Factors `A[dofs, dofs] + shift·I`.
    pub fn factor(a: &SparseMatrix, dofs: &[usize], shift: f64) -> Result<Self, SolverError> {
        Self::factor_with(a, dofs, shift, None)
    }

    fn factor_with(a: &SparseMatrix, dofs: &[usize], shift: f64, perm: Option<Vec<usize>>) -> Result<Self, SolverError> {
        let n = dofs.len();
        let mut local = vec![usize::MAX; a.dim()];
        for (l, &d) in dofs.iter().enumerate() {
            local[d] = l;
        }
        let perm = perm.unwrap_or_else(|| reverse_cuthill_mckee(a, dofs, &local));
        let mut inv = vec![0; n];
        for (new, &old) in perm.iter().enumerate() {
            inv[old] = new;
        }
        let mut first: Vec<usize> = (0..n).collect();
        for (new, &old) in perm.iter().enumerate() {
            let (cols, _) = a.row(dofs[old]);
            for &c in cols {
                if local[c] != usize::MAX {
                    first[new] = first[new].min(inv[local[c]]);
                }
            }
        }
        let mut offset = Vec::with_capacity(n + 1);
        offset.push(0);
        for i in 0..n {
            offset.push(offset[i] + (i - first[i] + 1));
        }
        let mut data = vec![0.0; offset[n]];
        for (new, &old) in perm.iter().enumerate() {
            let (cols, vals) = a.row(dofs[old]);
            for (&c, &v) in cols.iter().zip(vals) {
                if local[c] == usize::MAX {
                    continue;
                }
                let j = inv[local[c]];
                if j <= new {
                    data[offset[new] + j - first[new]] += v;
                }
            }
            data[offset[new] + new - first[new]] += shift;
        }
        for i in 0..n {
            let (fi, oi) = (first[i], offset[i]);
            for j in fi..i {
                let (fj, oj) = (first[j], offset[j]);
                let k0 = fi.max(fj);
                let mut s = data[oi + j - fi];
                for k in k0..j {
                    s -= data[oi + k - fi] * data[oj + k - fj];
                }
                data[oi + j - fi] = s / data[oj + j - fj];
            }
            let mut d = data[oi + i - fi];
            for k in fi..i {
                d -= data[oi + k - fi].powi(2);
            }
            if !(d > 0.0 && d.is_finite()) {
                return Err(SolverError::NotPositiveDefinite { pivot: dofs[perm[i]], value: d });
            }
            data[oi + i - fi] = d.sqrt();
        }
        Ok(SkylineCholesky { perm, first, offset, data })
    }

    pub fn dim(&self) -> usize {
        self.perm.len()
    }

    /// Stored envelope entries.
    pub fn envelope_size(&self) -> usize {
        self.data.len()
    }

    /// Solves with a right-hand side indexed like `dofs`.
    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let n = self.dim();
        let mut y: Vec<f64> = self.perm.iter().map(|&old| b[old]).collect();
        for i in 0..n {
            let (fi, oi) = (self.first[i], self.offset[i]);
            let mut s = y[i];
            for k in fi..i {
                s -= self.data[oi + k - fi] * y[k];
            }
            y[i] = s / self.data[oi + i - fi];
        }
        for i in (0..n).rev() {
            let (fi, oi) = (self.first[i], self.offset[i]);
            y[i] /= self.data[oi + i - fi];
            let xi = y[i];
            for k in fi..i {
                y[k] -= self.data[oi + k - fi] * xi;
            }
        }
        let mut x = vec![0.0; n];
        for (new, &old) in self.perm.iter().enumerate() {
            x[old] = y[new];
        }
        x
    }
}

/// Envelope size the ordering would produce, used to pick a solver.
fn envelope_estimate(a: &SparseMatrix, dofs: &[usize]) -> usize {
    let mut local = vec![usize::MAX; a.dim()];
    for (l, &d) in dofs.iter().enumerate() {
        local[d] = l;
    }
    let perm = reverse_cuthill_mckee(a, dofs, &local);
    let mut inv = vec![0; dofs.len()];
    for (new, &old) in perm.iter().enumerate() {
        inv[old] = new;
    }
    let mut total = 0;
    for (new, &old) in perm.iter().enumerate() {
        let (cols, _) = a.row(dofs[old]);
        let lo = cols.iter().filter(|&&c| local[c] != usize::MAX).map(|&c| inv[local[c]]).min().unwrap_or(new);
        total += new - lo.min(new) + 1;
    }
    total
}

/// Jacobi-preconditioned conjugate gradients for `A x = b` restricted to
/// `dofs`. `x` holds the initial guess on entry.
pub fn pcg(
    a: &SparseMatrix,
    dofs: &[usize],
    b: &[f64],
    x: &mut [f64],
    tol: f64,
    max_iter: usize,
) -> Result<usize, SolverError> {
    let n = dofs.len();
    let mut local = vec![usize::MAX; a.dim()];
    for (l, &d) in dofs.iter().enumerate() {
        local[d] = l;
    }
    let apply = |p: &[f64], out: &mut [f64]| {
        for (i, o) in out.iter_mut().enumerate() {
            let (cols, vals) = a.row(dofs[i]);
            *o = cols
                .iter()
                .zip(vals)
                .filter(|(&c, _)| local[c] != usize::MAX)
                .map(|(&c, &v)| v * p[local[c]])
                .sum();
        }
    };
    let diag: Vec<f64> = dofs.iter().map(|&d| a.get(d, d)).collect();
    if let Some(i) = diag.iter().position(|&d| !(d > 0.0)) {
        return Err(SolverError::NotPositiveDefinite { pivot: dofs[i], value: diag[i] });
    }
    let bnorm = norm2(b);
    let target = tol * (1.0 + bnorm);
    let mut r = vec![0.0; n];
    apply(x, &mut r);
    for i in 0..n {
        r[i] = b[i] - r[i];
    }
    let mut z: Vec<f64> = r.iter().zip(&diag).map(|(r, d)| r / d).collect();
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    let mut ap = vec![0.0; n];
    for it in 0..max_iter {
        if norm2(&r) <= target {
            return Ok(it);
        }
        apply(&p, &mut ap);
        let pap = dot(&p, &ap);
        if !(pap > 0.0) {
            return Err(SolverError::NotPositiveDefinite { pivot: dofs[0], value: pap });
        }
        let alpha = rz / pap;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
            z[i] = r[i] / diag[i];
        }
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }
    let residual = norm2(&r);
    if residual <= target {
        Ok(max_iter)
    } else {
        Err(SolverError::NoConvergence { iterations: max_iter, residual, tolerance: target })
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

pub(crate) fn norm_inf(a: &[f64]) -> f64 {
    a.iter().fold(0.0_f64, |m, x| m.max(x.abs()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LinearSolver {
    /// Envelope Cholesky below [`LinearOptions::direct_limit`] stored entries, CG above.
    Auto,
    Direct,
    ConjugateGradient,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinearOptions {
    pub method: LinearSolver,
    /// Relative tolerance: free residual 2-norm ≤ `tol·(1 + ‖rhs‖)`.
    pub tol: f64,
    pub max_iter: usize,
    pub direct_limit: usize,
}

impl Default for LinearOptions {
    fn default() -> Self {
        LinearOptions { method: LinearSolver::Auto, tol: 1e-10, max_iter: 20_000, direct_limit: 40_000_000 }
    }
}

/// Minimizes `½ uᵀKu − rhs·u` subject to `u[d] = value` for every
/// `(d, value)` in `dirichlet`. `guess` seeds the iterative solver.
pub fn solve_u(
    k: &SparseMatrix,
    rhs: &[f64],
    dirichlet: &[(usize, f64)],
    guess: Option<&[f64]>,
    opts: &LinearOptions,
) -> Result<(Vec<f64>, SolveReport), SolverError> {
    let start = Instant::now();
    let n = k.dim();
    if rhs.len() != n {
        return Err(SolverError::Dimension(format!("rhs has {} entries, matrix {}", rhs.len(), n)));
    }
    let mut u = vec![0.0; n];
    let mut fixed = vec![false; n];
    for &(d, val) in dirichlet {
        if d >= n {
            return Err(SolverError::Dimension(format!("Dirichlet dof {d} out of range {n}")));
        }
        u[d] = val;
        fixed[d] = true;
    }
    let free: Vec<usize> = (0..n).filter(|&i| !fixed[i]).collect();
    let ku = k.mul_vec(&u);
    let b: Vec<f64> = free.iter().map(|&i| rhs[i] - ku[i]).collect();
    let free_residual = |u: &[f64]| {
        let ku = k.mul_vec(u);
        let r: Vec<f64> = free.iter().map(|&i| rhs[i] - ku[i]).collect();
        norm2(&r)
    };
    let bnorm = norm2(&free.iter().map(|&i| rhs[i]).collect::<Vec<_>>());
    let target = opts.tol * (1.0 + bnorm);
    let method = match opts.method {
        LinearSolver::Auto if envelope_estimate(k, &free) <= opts.direct_limit => LinearSolver::Direct,
        LinearSolver::Auto => LinearSolver::ConjugateGradient,
        m => m,
    };
    let mut iterations = 1;
    match method {
        LinearSolver::Direct => {
            let chol = SkylineCholesky::factor(k, &free, 0.0)?;
            let x = chol.solve(&b);
            for (&i, xi) in free.iter().zip(&x) {
                u[i] = *xi;
            }
            // iterative refinement, rarely needed
            while free_residual(&u) > target && iterations < 4 {
                let ku = k.mul_vec(&u);
                let r: Vec<f64> = free.iter().map(|&i| rhs[i] - ku[i]).collect();
                let dx = chol.solve(&r);
                for (&i, d) in free.iter().zip(&dx) {
                    u[i] += d;
                }
                iterations += 1;
            }
        }
        _ => {
            let mut x: Vec<f64> = match guess {
                Some(g) => free.iter().map(|&i| g[i]).collect(),
                None => vec![0.0; free.len()],
            };
            iterations = pcg(k, &free, &b, &mut x, opts.tol * (1.0 + bnorm) / (1.0 + norm2(&b)), opts.max_iter)?;
            for (&i, xi) in free.iter().zip(&x) {
                u[i] = *xi;
            }
        }
    }
    let residual = free_residual(&u);
    Ok((
        u,
        SolveReport {
            iterations,
            residual,
            tolerance: target,
            active: dirichlet.len(),
            converged: residual <= target,
            wall_time: start.elapsed(),
        },
    ))
}

/// Smooth objective minimized over a box.
pub trait BoxObjective {
    fn value(&self, x: &[f64]) -> f64;
    fn gradient(&self, x: &[f64]) -> Vec<f64>;
    fn hessian(&self, x: &[f64]) -> SparseMatrix;
    /// Magnitude against which round-off in [`BoxObjective::value`] is judged.
    fn value_scale(&self, x: &[f64]) -> f64 {
        self.value(x).abs()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NewtonOptions {
    /// Bound on `‖x − Π(x − ∇f)‖∞`.
    pub tol: f64,
    pub max_iter: usize,
    /// Sufficient-decrease constant of the Armijo rule.
    pub armijo: f64,
    pub max_backtracks: usize,
}

impl NewtonOptions {
    pub fn with_tol(tol: f64) -> Self {
        NewtonOptions { tol, max_iter: 200, armijo: 1e-4, max_backtracks: 60 }
    }
}

/// `x − Π_[lo,hi](x − g)` componentwise.
pub fn projected_gradient(x: &[f64], g: &[f64], lo: &[f64], hi: &[f64]) -> Vec<f64> {
    (0..x.len()).map(|i| x[i] - (x[i] - g[i]).clamp(lo[i], hi[i])).collect()
}

fn project(x: &mut [f64], lo: &[f64], hi: &[f64]) {
    for i in 0..x.len() {
        x[i] = x[i].clamp(lo[i], hi[i]);
    }
}

fn count_active(x: &[f64], lo: &[f64], hi: &[f64]) -> usize {
    (0..x.len()).filter(|&i| x[i] == lo[i] || x[i] == hi[i]).count()
}

/// Projected Newton method with active-set reduction for
/// `min f(x)` subject to `lo ≤ x ≤ hi`.
///
/// Variables near a bound with the gradient pushing outward are moved by a
/// scaled gradient step; the rest take a Newton step on the reduced Hessian,
/// shifted by `τI` (τ doubling from `1e-8‖H‖`) when it is not positive
/// definite. Steps are projected onto the box and accepted by an Armijo
/// backtracking rule, so every iterate is feasible and `f` never increases.
pub fn projected_newton<O: BoxObjective>(
    obj: &O,
    x0: &[f64],
    lo: &[f64],
    hi: &[f64],
    opts: &NewtonOptions,
) -> Result<(Vec<f64>, SolveReport), SolverError> {
    let start = Instant::now();
    let n = x0.len();
    if lo.len() != n || hi.len() != n {
        return Err(SolverError::Dimension("bounds and initial point differ in length".into()));
    }
    if let Some(i) = (0..n).find(|&i| !(lo[i] <= hi[i])) {
        return Err(SolverError::Dimension(format!("empty box at dof {i}: [{}, {}]", lo[i], hi[i])));
    }
    let mut x = x0.to_vec();
    project(&mut x, lo, hi);
    let mut f = obj.value(&x);
    let mut g = obj.gradient(&x);
    let mut w = norm_inf(&projected_gradient(&x, &g, lo, hi));
    let mut tau_prev = 0.0_f64;
    let mut iterations = 0;
    let mut converged = w <= opts.tol;
    while !converged && iterations < opts.max_iter {
        iterations += 1;
        let h = obj.hessian(&x);
        let hdiag = h.diagonal();
        let hnorm = h.norm_inf().max(f64::MIN_POSITIVE);
        let dscale: Vec<f64> = hdiag.iter().map(|&d| d.max(1e-8 * hnorm)).collect();
        let scaled = norm_inf(
            &(0..n)
                .map(|i| x[i] - (x[i] - g[i] / dscale[i]).clamp(lo[i], hi[i]))
                .collect::<Vec<_>>(),
        );
        let eps_k = scaled.clamp(1e-14, 1e-3);
        let active: Vec<bool> = (0..n)
            .map(|i| {
                lo[i] == hi[i] || (x[i] - lo[i] <= eps_k && g[i] > 0.0) || (hi[i] - x[i] <= eps_k && g[i] < 0.0)
            })
            .collect();
        let free: Vec<usize> = (0..n).filter(|&i| !active[i]).collect();
        let mut d = vec![0.0; n];
        for i in 0..n {
            if active[i] {
                d[i] = -g[i] / dscale[i];
            }
        }
        if !free.is_empty() {
            let gf: Vec<f64> = free.iter().map(|&i| -g[i]).collect();
            let (chol, tau) = factor_shifted(&h, &free, hnorm, tau_prev)?;
            tau_prev = tau;
            for (&i, di) in free.iter().zip(chol.solve(&gf)) {
                d[i] = di;
            }
        }
        let predicted_free: f64 = free.iter().map(|&i| -g[i] * d[i]).sum();
        let noise = 1e-13 * obj.value_scale(&x).max(f.abs());
        let mut alpha = 1.0;
        let mut accepted = None;
        for bt in 0..=opts.max_backtracks {
            let mut xt: Vec<f64> = (0..n).map(|i| x[i] + alpha * d[i]).collect();
            project(&mut xt, lo, hi);
            let ft = obj.value(&xt);
            let decrease: f64 = alpha * predicted_free
                + (0..n).filter(|&i| active[i]).map(|i| g[i] * (x[i] - xt[i])).sum::<f64>();
            if ft <= f - opts.armijo * decrease {
                accepted = Some((xt, ft, None));
                break;
            }
            if bt == 0 && ft <= f + noise {
                // Near the solution the decrease is below round-off; fall back
                // to the stationarity measure.
                let gt = obj.gradient(&xt);
                let wt = norm_inf(&projected_gradient(&xt, &gt, lo, hi));
                if wt < w {
                    accepted = Some((xt, ft.min(f), Some(gt)));
                    break;
                }
            }
            alpha *= 0.5;
        }
        let Some((xt, ft, gt)) = accepted else {
            log::debug!("projected Newton: line search failed at iteration {iterations}, stationarity {w:e}");
            break;
        };
        x = xt;
        f = ft;
        g = gt.unwrap_or_else(|| obj.gradient(&x));
        w = norm_inf(&projected_gradient(&x, &g, lo, hi));
        converged = w <= opts.tol;
    }
    Ok((
        x.clone(),
        SolveReport {
            iterations,
            residual: w,
            tolerance: opts.tol,
            active: count_active(&x, lo, hi),
            converged,
            wall_time: start.elapsed(),
        },
    ))
}

/// Cholesky of `H[free, free] + τI` with the smallest τ in the sequence
/// `0, τ₀, 2τ₀, 4τ₀, …` that succeeds. `τ₀ = 1e-8‖H‖`, raised to a quarter
/// of the previous iteration's shift so repeated indefinite solves do not
/// restart the doubling from scratch.
fn factor_shifted(
    h: &SparseMatrix,
    free: &[usize],
    hnorm: f64,
    tau_prev: f64,
) -> Result<(SkylineCholesky, f64), SolverError> {
    if let Ok(c) = SkylineCholesky::factor(h, free, 0.0) {
        return Ok((c, 0.0));
    }
    let mut tau = (1e-8 * hnorm).max(0.25 * tau_prev);
    let mut last = None;
    for _ in 0..200 {
        match SkylineCholesky::factor(h, free, tau) {
            Ok(c) => return Ok((c, tau)),
            Err(e) => last = Some(e),
        }
        tau *= 2.0;
    }
    Err(last.expect("at least one attempt"))
}

/// Phase-field functional with the strain densities frozen.
pub struct PhaseFieldObjective<'a> {
    pub space: &'a FeSpace,
    pub densities: &'a StrainDensities,
    pub coeffs: FunctionalCoefficients,
}

impl BoxObjective for PhaseFieldObjective<'_> {
    fn value(&self, x: &[f64]) -> f64 {
        fem::energy_v(self.space, x, self.densities, &self.coeffs).total()
    }

    fn gradient(&self, x: &[f64]) -> Vec<f64> {
        fem::residual_v(self.space, x, self.densities, &self.coeffs)
    }

    fn hessian(&self, x: &[f64]) -> SparseMatrix {
        fem::tangent_v(self.space, x, self.densities, &self.coeffs)
    }

    fn value_scale(&self, x: &[f64]) -> f64 {
        let e = fem::energy_v(self.space, x, self.densities, &self.coeffs);
        e.elastic.abs() + e.strength.abs() + e.surface.abs() + self.coeffs.natural_density() * self.space.area()
    }
}

/// Default stationarity tolerance of the phase-field solve:
/// `1e-8 · (surface/ε) · |Ω| / nodes`, i.e. relative to the regularization
/// force carried by an average node.
pub fn default_v_tol(space: &FeSpace, coeffs: &FunctionalCoefficients) -> f64 {
    1e-8 * coeffs.natural_density() * space.area() / space.num_nodes() as f64
}

/// Minimizes the phase-field functional over `0 ≤ v ≤ v_upper`, starting
/// from `v_init`.
pub fn solve_v(
    space: &FeSpace,
    densities: &StrainDensities,
    coeffs: FunctionalCoefficients,
    v_init: &[f64],
    v_upper: &[f64],
    opts: &NewtonOptions,
) -> Result<(Vec<f64>, SolveReport), SolverError> {
    let n = space.num_nodes();
    if v_init.len() != n || v_upper.len() != n {
        return Err(SolverError::Dimension(format!("phase field must have {n} entries")));
    }
    let lo = vec![0.0; n];
    let obj = PhaseFieldObjective { space, densities, coeffs };
    projected_newton(&obj, v_init, &lo, v_upper, opts)
}
