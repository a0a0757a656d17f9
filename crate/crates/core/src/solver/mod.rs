//! Regularized solutions `u^ε` as minimizers of the exponential energy, and ε-continuation.
//!
//! The Euler–Lagrange equation of `∫ exp(H(x, ∇u)/ε)` is `−𝒜[u] − 2ε div(A ∇u) = 0` in the
//! normalization of [`crate::operator`]; [`viscosity`] converts between the two parameters.
//!
//! `minimize` runs Newton's method on the discrete energy. Row `i` of the Newton system is
//! divided by `exp(m_i)` with `m_i` the largest `H_q/ε` among the Gauss points touching node
//! `i`, so the system stays representable when `H/ε` varies by thousands across the domain.
//! A step is accepted when it satisfies the Armijo condition on the log-energy and decreases
//! the squared locally-scaled gradient (with the scaling frozen for the line search).

mod banded;
mod collocation;
mod energy;

pub use energy::{energy, energy_gradient, Quadrature, StabilizedEnergy};

use crate::coefficients::CoefficientField;
use crate::error::{Error, Result};
use crate::grid::{Grid2D, ScalarField};
use crate::operator;
use banded::BandMatrix;
use collocation::Collocation;
use energy::{check_eps, PointState};
use serde::{Deserialize, Serialize};
use std::time::Instant;

/// Viscosity of the regularized equation solved by minimizers of the energy with parameter `eps`.
pub fn viscosity(eps: f64) -> f64 {
    2.0 * eps
}

/// Geometric ε ladder `eps0 · ratio^k`, `k = 0..count`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpsSchedule {
    pub eps0: f64,
    pub ratio: f64,
    pub count: usize,
}

impl EpsSchedule {
    pub fn values(&self) -> Vec<f64> {
        (0..self.count)
            .map(|k| self.eps0 * self.ratio.powi(k as i32))
            .collect()
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.ratio > 0.0 && self.ratio < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "schedule ratio must lie in (0, 1), got {}",
                self.ratio
            )));
        }
        if self.count == 0 {
            return Err(Error::InvalidParameter("schedule is empty".into()));
        }
        check_eps(self.eps0)
    }
}

/// How `u^ε` is discretized.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Discretization {
    /// Minimizer of the bilinear-cell exponential energy (convex; default).
    #[default]
    Energy,
    /// Nodal second-order collocation of the Euler–Lagrange equation.
    Collocation,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveConfig {
    pub eps: f64,
    pub grad_tol: f64,
    pub max_newton_iters: usize,
    /// Armijo sufficient-decrease fraction.
    pub armijo_fraction: f64,
    /// Step shrink factor during backtracking.
    pub backtrack: f64,
    pub eps_schedule: Option<EpsSchedule>,
    pub discretization: Discretization,
}

impl SolveConfig {
    pub fn new(eps: f64) -> Self {
        SolveConfig {
            eps,
            grad_tol: 1e-8,
            max_newton_iters: 200,
            armijo_fraction: 1e-4,
            backtrack: 0.5,
            eps_schedule: None,
            discretization: Discretization::Energy,
        }
    }

    pub fn with_eps(&self, eps: f64) -> Self {
        SolveConfig {
            eps,
            ..self.clone()
        }
    }

    pub fn validate(&self) -> Result<()> {
        check_eps(self.eps)?;
        if !(self.grad_tol > 0.0) {
            return Err(Error::InvalidParameter("grad_tol must be positive".into()));
        }
        if !(self.armijo_fraction > 0.0 && self.armijo_fraction < 0.5) {
            return Err(Error::InvalidParameter(
                "armijo fraction must lie in (0, 1/2)".into(),
            ));
        }
        if !(self.backtrack > 0.0 && self.backtrack < 1.0) {
            return Err(Error::InvalidParameter(
                "backtrack factor must lie in (0, 1)".into(),
            ));
        }
        if let Some(s) = &self.eps_schedule {
            s.validate()?;
        }
        Ok(())
    }
}

/// A converged minimizer.
#[derive(Debug, Clone)]
pub struct RegularizedSolution {
    pub u: ScalarField,
    pub eps: f64,
    pub energy: StabilizedEnergy,
    /// Stopping quantity: sup-norm of the locally scaled energy gradient (which bounds the
    /// globally scaled one), or of the nodal residual for collocation.
    pub grad_norm: f64,
    pub iterations: usize,
    /// Sup-norm of `−𝒜[u] − viscosity(ε) div(A∇u)` over interior nodes.
    pub residual_sup: f64,
    pub wall_time: f64,
    /// Line-search objective after every accepted step, starting with the initial iterate:
    /// the log-energy for [`Discretization::Energy`], `‖R‖²` for [`Discretization::Collocation`].
    pub objective_trace: Vec<f64>,
}

/// JSON form of a solve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveReport {
    pub eps: f64,
    pub iters: usize,
    pub energy_scale: f64,
    pub energy_mantissa: f64,
    pub grad_norm: f64,
    pub residual_sup: f64,
    pub wall_time: f64,
}

impl RegularizedSolution {
    pub fn report(&self) -> SolveReport {
        SolveReport {
            eps: self.eps,
            iters: self.iterations,
            energy_scale: self.energy.scale,
            energy_mantissa: self.energy.mantissa,
            grad_norm: self.grad_norm,
            residual_sup: self.residual_sup,
            wall_time: self.wall_time,
        }
    }
}

/// Maps interior nodes to unknown numbers (row-major, x fastest).
struct Unknowns {
    of_node: Vec<Option<usize>>,
    nodes: Vec<usize>,
    bandwidth: usize,
}

impl Unknowns {
    fn new(grid: &Grid2D) -> Self {
        let mut of_node = vec![None; grid.len()];
        let nodes: Vec<usize> = grid.interior_indices().collect();
        for (r, &k) in nodes.iter().enumerate() {
            of_node[k] = Some(r);
        }
        Unknowns {
            of_node,
            nodes,
            bandwidth: grid.nx() - 1,
        }
    }
}

/// Linear solve of `div(A ∇u) = 0` (same bilinear cells) with the boundary values of `g`.
pub fn harmonic_extension(g: &ScalarField, a: &CoefficientField) -> Result<ScalarField> {
    if g.grid() != a.grid() {
        return Err(Error::GridMismatch);
    }
    let quad = Quadrature::new(a);
    let unk = Unknowns::new(g.grid());
    let mut band = BandMatrix::zeros(unk.nodes.len(), unk.bandwidth);
    let mut rhs = vec![0.0; unk.nodes.len()];
    let w = quad.weight();
    for (cell, ci, cj) in quad.cells() {
        let nodes = quad.cell_nodes(ci, cj);
        for q in 0..4 {
            let aq = quad.a_at(cell, q);
            for (la, &na) in nodes.iter().enumerate() {
                let Some(row) = unk.of_node[na] else { continue };
                for (lb, &nb) in nodes.iter().enumerate() {
                    let kab = w * aq.bilinear(quad.grad(q, lb), quad.grad(q, la));
                    match unk.of_node[nb] {
                        Some(col) => band.add(row, col, kab),
                        None => rhs[row] -= kab * g.values()[nb],
                    }
                }
            }
        }
    }
    band.factorize().map_err(|p| {
        Error::InvalidParameter(format!("singular stiffness matrix at row {}", p.row))
    })?;
    band.solve(&mut rhs);
    let mut u = g.values().to_vec();
    for (r, &k) in unk.nodes.iter().enumerate() {
        u[k] = rhs[r];
    }
    ScalarField::new(*g.grid(), u)
}

struct NewtonSystem<'a> {
    quad: &'a Quadrature,
    unk: Unknowns,
    band: BandMatrix,
    eps: f64,
}

impl<'a> NewtonSystem<'a> {
    fn new(quad: &'a Quadrature, eps: f64) -> Self {
        let unk = Unknowns::new(quad.grid());
        let band = BandMatrix::zeros(unk.nodes.len(), unk.bandwidth);
        NewtonSystem {
            quad,
            unk,
            band,
            eps,
        }
    }

    /// Row-scaled Hessian into `self.band`.
    fn assemble(&mut self, st: &PointState, scales: &[f64]) {
        self.band.clear();
        let w = self.quad.weight();
        let c1 = 2.0 * w / self.eps;
        let c2 = 4.0 * w / (self.eps * self.eps);
        for (cell, ci, cj) in self.quad.cells() {
            let nodes = self.quad.cell_nodes(ci, cj);
            for q in 0..4 {
                let idx = 4 * cell + q;
                let aq = self.quad.a_at(cell, q);
                let f = st.flux[idx];
                let fg: [f64; 4] =
                    std::array::from_fn(|l| crate::mat::dot(f, self.quad.grad(q, l)));
                for (la, &na) in nodes.iter().enumerate() {
                    let Some(row) = self.unk.of_node[na] else {
                        continue;
                    };
                    let e = (st.s[idx] - scales[na]).exp();
                    if e == 0.0 {
                        continue;
                    }
                    for (lb, &nb) in nodes.iter().enumerate() {
                        let Some(col) = self.unk.of_node[nb] else {
                            continue;
                        };
                        let kab = aq.bilinear(self.quad.grad(q, lb), self.quad.grad(q, la));
                        self.band
                            .add(row, col, e * (c1 * kab + c2 * fg[la] * fg[lb]));
                    }
                }
            }
        }
    }

    /// Newton direction (full node vector) or a diagonally scaled gradient step if the
    /// factorization breaks down. Returns the direction and whether it is a Newton step.
    fn direction(&mut self, st: &PointState, scales: &[f64], ghat: &[f64]) -> (Vec<f64>, bool) {
        self.assemble(st, scales);
        let diag: Vec<f64> = (0..self.unk.nodes.len())
            .map(|r| self.band.diag(r))
            .collect();
        let mut rhs: Vec<f64> = self.unk.nodes.iter().map(|&k| -ghat[k]).collect();
        let newton = match self.band.factorize() {
            Ok(()) => {
                self.band.solve(&mut rhs);
                rhs.iter().all(|v| v.is_finite())
            }
            Err(_) => false,
        };
        let mut d = vec![0.0; self.quad.grid().len()];
        if newton {
            for (r, &k) in self.unk.nodes.iter().enumerate() {
                d[k] = rhs[r];
            }
        } else {
            for (r, &k) in self.unk.nodes.iter().enumerate() {
                d[k] = -ghat[k] / diag[r].max(f64::MIN_POSITIVE);
            }
        }
        (d, newton)
    }
}

fn sup_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

fn sum_sq(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum()
}

/// Largest ratio between consecutive ε values the solver steps through internally.
const HOMOTOPY_RATIO: f64 = 0.8;

/// Consecutive accepted steps shorter than this count as stagnation.
const STALL_STEP: f64 = 1e-3;
const STALL_COUNT: usize = 8;

/// How often a failing ε step may be halved (geometrically) before giving up.
const MAX_SPLITS: usize = 6;

/// Outcome of one Newton run at fixed ε.
struct Converged {
    u: Vec<f64>,
    grad_norm: f64,
    iterations: usize,
    trace: Vec<f64>,
}

fn not_converged(grid: Grid2D, u: Vec<f64>, iterations: usize, grad_norm: f64) -> Error {
    match ScalarField::new(grid, u) {
        Ok(best) => Error::NotConverged {
            iterations,
            grad_norm,
            best: Box::new(best),
        },
        Err(e) => e,
    }
}

fn newton_energy(quad: &Quadrature, u0: &[f64], config: &SolveConfig) -> Result<Converged> {
    let eps = config.eps;
    let grid = *quad.grid();
    let mut system = NewtonSystem::new(quad, eps);
    let mut u = u0.to_vec();
    let mut st = quad.state(&u, eps);
    let mut en = quad.energy_from_state(&st);
    let mut trace = vec![en.ln()];
    let mut iterations = 0;
    let mut stalled = 0;
    loop {
        let scales = quad.local_scales(&st);
        let ghat = quad.locally_scaled_gradient(&st, eps, &scales);
        let gnorm = sup_abs(&ghat);
        if gnorm <= config.grad_tol {
            let (u, gnorm, polished) = polish(quad, &mut system, u, st, scales, gnorm, eps);
            return Ok(Converged {
                u,
                grad_norm: gnorm,
                iterations: iterations + polished,
                trace,
            });
        }
        if iterations >= config.max_newton_iters || stalled >= STALL_COUNT {
            return Err(not_converged(grid, u, iterations, gnorm));
        }
        iterations += 1;

        let f0 = en.ln();
        let f_tol = 64.0 * f64::EPSILON * f0.abs().max(1.0);
        let merit0 = sum_sq(&ghat);
        let g_glob = quad.gradient_at_scale(&st, eps, en.scale);

        let (mut d, mut newton) = system.direction(&st, &scales, &ghat);
        let mut accepted = None;
        for _attempt in 0..2 {
            let slope = g_glob.iter().zip(&d).map(|(x, y)| x * y).sum::<f64>() / en.mantissa;
            let mut t = 1.0;
            while t > 1e-12 {
                let trial: Vec<f64> = u.iter().zip(&d).map(|(x, dx)| x + t * dx).collect();
                let st_t = quad.state(&trial, eps);
                let en_t = quad.energy_from_state(&st_t);
                let f_t = en_t.ln();
                let energy_ok = f_t.is_finite()
                    && f_t <= f0 + config.armijo_fraction * t * slope.min(0.0) + f_tol;
                // Far from the minimizer the log-energy cannot see cold regions, so Newton steps
                // must also shrink the locally scaled gradient (scales frozen for this step).
                let merit_ok = !newton || {
                    let m_t = sum_sq(&quad.locally_scaled_gradient(&st_t, eps, &scales));
                    m_t.is_finite() && m_t <= (1.0 - 2.0 * config.armijo_fraction * t) * merit0
                };
                if energy_ok && merit_ok {
                    accepted = Some((trial, st_t, en_t, t));
                    break;
                }
                t *= config.backtrack;
            }
            if accepted.is_some() || !newton {
                break;
            }
            d = vec![0.0; grid.len()];
            for &k in &system.unk.nodes {
                d[k] = -ghat[k];
            }
            newton = false;
        }
        let Some((trial, st_t, en_t, t)) = accepted else {
            return Err(not_converged(grid, u, iterations, gnorm));
        };
        stalled = if t < STALL_STEP { stalled + 1 } else { 0 };
        u = trial;
        st = st_t;
        en = en_t;
        trace.push(en.ln());
    }
}

/// Full Newton steps taken after convergence while each one at least halves the scaled gradient.
const POLISH_STEPS: usize = 3;

fn polish(
    quad: &Quadrature,
    system: &mut NewtonSystem,
    mut u: Vec<f64>,
    mut st: PointState,
    mut scales: Vec<f64>,
    mut gnorm: f64,
    eps: f64,
) -> (Vec<f64>, f64, usize) {
    let mut taken = 0;
    while taken < POLISH_STEPS && gnorm > 0.0 {
        let ghat = quad.locally_scaled_gradient(&st, eps, &scales);
        let (d, newton) = system.direction(&st, &scales, &ghat);
        if !newton {
            break;
        }
        let trial: Vec<f64> = u.iter().zip(&d).map(|(x, dx)| x + dx).collect();
        let st_t = quad.state(&trial, eps);
        let scales_t = quad.local_scales(&st_t);
        let g_t = sup_abs(&quad.locally_scaled_gradient(&st_t, eps, &scales_t));
        if !(g_t <= 0.5 * gnorm) {
            break;
        }
        u = trial;
        st = st_t;
        scales = scales_t;
        gnorm = g_t;
        taken += 1;
    }
    (u, gnorm, taken)
}

fn newton_collocation(a: &CoefficientField, u0: &[f64], config: &SolveConfig) -> Result<Converged> {
    let grid = *a.grid();
    let mut col = Collocation::new(a, viscosity(config.eps));
    let mut u = u0.to_vec();
    let mut r = col.residual(&u);
    let mut merit = sum_sq(&r);
    let mut trace = vec![merit];
    let mut iterations = 0;
    let mut stalled = 0;
    loop {
        let rnorm = sup_abs(&r);
        if rnorm <= config.grad_tol {
            return Ok(Converged {
                u,
                grad_norm: rnorm,
                iterations,
                trace,
            });
        }
        if iterations >= config.max_newton_iters || stalled >= STALL_COUNT {
            return Err(not_converged(grid, u, iterations, rnorm));
        }
        iterations += 1;
        let Some(d) = col.direction(&u, &r) else {
            return Err(not_converged(grid, u, iterations, rnorm));
        };
        let mut t = 1.0;
        let mut accepted = None;
        while t > 1e-12 {
            let trial: Vec<f64> = u.iter().zip(&d).map(|(x, dx)| x + t * dx).collect();
            let r_t = col.residual(&trial);
            let m_t = sum_sq(&r_t);
            if m_t.is_finite() && m_t <= (1.0 - 2.0 * config.armijo_fraction * t) * merit {
                accepted = Some((trial, r_t, m_t));
                break;
            }
            t *= config.backtrack;
        }
        let Some((trial, r_t, m_t)) = accepted else {
            return Err(not_converged(grid, u, iterations, rnorm));
        };
        stalled = if t < STALL_STEP { stalled + 1 } else { 0 };
        u = trial;
        r = r_t;
        merit = m_t;
        trace.push(merit);
    }
}

fn newton(
    a: &CoefficientField,
    quad: &Quadrature,
    u0: &[f64],
    config: &SolveConfig,
) -> Result<Converged> {
    match config.discretization {
        Discretization::Energy => newton_energy(quad, u0, config),
        Discretization::Collocation => newton_collocation(a, u0, config),
    }
}

/// ε ladder from `from` down to `to` with ratios no smaller than [`HOMOTOPY_RATIO`]; excludes `from`.
fn homotopy_steps(from: f64, to: f64) -> Vec<f64> {
    if !(from > to) {
        return vec![to];
    }
    let n = ((to / from).ln() / HOMOTOPY_RATIO.ln()).ceil().max(1.0) as usize;
    let ratio = (to / from).powf(1.0 / n as f64);
    (1..=n)
        .map(|k| {
            if k == n {
                to
            } else {
                from * ratio.powi(k as i32)
            }
        })
        .collect()
}

/// Newton at `to` from `u`, a solution for `from`; on failure the step is split geometrically.
fn descend(
    a: &CoefficientField,
    quad: &Quadrature,
    u: &[f64],
    from: f64,
    to: f64,
    config: &SolveConfig,
    depth: usize,
) -> Result<Converged> {
    match newton(a, quad, u, &config.with_eps(to)) {
        Err(Error::NotConverged { .. }) if depth > 0 => {
            let mid = (from * to).sqrt();
            let first = descend(a, quad, u, from, mid, config, depth - 1)?;
            let second = descend(a, quad, &first.u, mid, to, config, depth - 1)?;
            Ok(Converged {
                iterations: first.iterations + second.iterations,
                ..second
            })
        }
        other => other,
    }
}

/// Walks from `from` down to `config.eps` through [`homotopy_steps`].
fn descend_ladder(
    a: &CoefficientField,
    quad: &Quadrature,
    u0: &[f64],
    from: f64,
    config: &SolveConfig,
) -> Result<Converged> {
    let mut u = u0.to_vec();
    let mut prev = from;
    let mut total = 0;
    let mut last = None;
    for e in homotopy_steps(from, config.eps) {
        let step = descend(a, quad, &u, prev, e, config, MAX_SPLITS)?;
        total += step.iterations;
        u.clone_from(&step.u);
        prev = e;
        last = Some(step);
    }
    let last = last.expect("ladder is nonempty");
    Ok(Converged {
        iterations: total,
        ..last
    })
}

/// Computes `u^ε` with the boundary values of `g`, starting from the harmonic-type extension.
pub fn minimize(
    g: &ScalarField,
    a: &CoefficientField,
    config: &SolveConfig,
) -> Result<RegularizedSolution> {
    config.validate()?;
    let init = harmonic_extension(g, a)?;
    minimize_from(&init, a, config)
}

/// As [`minimize`], starting from `initial` (whose boundary values are the data).
///
/// If Newton's method fails directly at `config.eps`, the solve is retried along an ε ladder
/// that starts where the regularization is resolved on the grid.
pub fn minimize_from(
    initial: &ScalarField,
    a: &CoefficientField,
    config: &SolveConfig,
) -> Result<RegularizedSolution> {
    config.validate()?;
    if initial.grid() != a.grid() {
        return Err(Error::GridMismatch);
    }
    let start = Instant::now();
    let quad = Quadrature::new(a);
    let mut run = newton(a, &quad, initial.values(), config);
    if let Err(Error::NotConverged { .. }) = run {
        let h_max = quad
            .state(initial.values(), 1.0)
            .s
            .iter()
            .fold(0.0f64, |m, &v| m.max(v));
        if h_max > config.eps {
            run = descend_ladder(a, &quad, initial.values(), h_max, config);
        }
    }
    let done = run?;
    finish(done, a, &quad, config.eps, start)
}

fn finish(
    done: Converged,
    a: &CoefficientField,
    quad: &Quadrature,
    eps: f64,
    start: Instant,
) -> Result<RegularizedSolution> {
    let u = ScalarField::new(*a.grid(), done.u)?;
    let energy = quad.energy(&u, eps);
    let residual_sup = operator::regularized_residual(&u, a, viscosity(eps))?.sup_abs();
    Ok(RegularizedSolution {
        u,
        eps,
        energy,
        grad_norm: done.grad_norm,
        iterations: done.iterations,
        residual_sup,
        wall_time: start.elapsed().as_secs_f64(),
        objective_trace: done.trace,
    })
}

/// Result of a warm-started sweep down an ε ladder.
#[derive(Debug, Clone)]
pub struct ContinuationReport {
    pub solutions: Vec<RegularizedSolution>,
    /// Sup-norm of consecutive differences on `subdomain`.
    pub sup_differences: Vec<f64>,
    /// Interior nodes at index depth ≥ max(2, min(nx, ny)/8).
    pub subdomain: Vec<usize>,
    pub warnings: Vec<String>,
}

/// Interior subdomain used for locally-uniform comparisons.
pub fn comparison_subdomain(grid: &Grid2D) -> Vec<usize> {
    let margin = 2.max(grid.nx().min(grid.ny()) / 8);
    (0..grid.len())
        .filter(|&k| {
            let (i, j) = grid.ij(k);
            grid.depth(i, j) >= margin
        })
        .collect()
}

/// Sweeps `config.eps_schedule`.
pub fn continuation(
    g: &ScalarField,
    a: &CoefficientField,
    config: &SolveConfig,
) -> Result<ContinuationReport> {
    config.validate()?;
    let schedule = config
        .eps_schedule
        .ok_or_else(|| Error::InvalidParameter("continuation needs an eps schedule".into()))?;
    continuation_over(g, a, config, &schedule.values())
}

/// Sweeps an explicit ε list with warm starts.
pub fn continuation_over(
    g: &ScalarField,
    a: &CoefficientField,
    config: &SolveConfig,
    eps_values: &[f64],
) -> Result<ContinuationReport> {
    if eps_values.is_empty() {
        return Err(Error::InvalidParameter("schedule is empty".into()));
    }
    let grid = *g.grid();
    let mut warnings = Vec::new();
    let flags = a.flags();
    if !flags.below_convergence_threshold {
        warnings.push(format!(
            "ellipticity {:.6} is not below 2^(1/5); convergence hypothesis not met",
            flags.ellipticity
        ));
    }
    match a.delta0(0.5) {
        Some(d0) if a.lip() <= d0 => {}
        Some(d0) => warnings.push(format!(
            "coefficient Lipschitz seminorm {:.3e} exceeds delta0 = {:.3e}",
            a.lip(),
            d0
        )),
        None => warnings.push("barrier constant is non-positive; delta0 undefined".into()),
    }
    let h2 = grid.h() * grid.h();
    let quad = Quadrature::new(a);
    let mut current = harmonic_extension(g, a)?;
    let mut solutions: Vec<RegularizedSolution> = Vec::with_capacity(eps_values.len());
    for (position, &eps) in eps_values.iter().enumerate() {
        if eps < h2 {
            warnings.push(format!(
                "eps = {eps:e} is below h^2 = {h2:e}; regularization under-resolved"
            ));
        }
        let wrap = |e| Error::Continuation {
            position,
            eps,
            source: Box::new(e),
        };
        let sol = match solutions.last() {
            None => minimize_from(&current, a, &config.with_eps(eps)),
            Some(prev) => {
                let start = Instant::now();
                descend_ladder(a, &quad, current.values(), prev.eps, &config.with_eps(eps))
                    .and_then(|done| finish(done, a, &quad, eps, start))
            }
        }
        .map_err(wrap)?;
        current = sol.u.clone();
        solutions.push(sol);
    }
    let subdomain = comparison_subdomain(&grid);
    let sup_differences = solutions
        .windows(2)
        .map(|w| w[1].u.sup_diff_on(&w[0].u, &subdomain))
        .collect();
    Ok(ContinuationReport {
        solutions,
        sup_differences,
        subdomain,
        warnings,
    })
}
