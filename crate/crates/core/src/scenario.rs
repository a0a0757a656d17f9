//! Declarative scenarios: domain, coefficients, boundary data, ε ladder and the checks to run.
//!
//! Parsing is strict (unknown keys are errors) so parameter studies stay reproducible.

use crate::coefficients::{CoefficientField, CoefficientPreset};
use crate::error::{Error, Result};
use crate::estimates::{self, BarrierSpec, CheckReport, Outcome};
use crate::grid::{ball_mask, BallMetric, Grid2D, ScalarField};
use crate::intrinsic::{self, BlowupTrace};
use crate::mat::norm;
use crate::solver::{self, Discretization, EpsSchedule, RegularizedSolution, SolveConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

/// Smallest accepted number of nodes per side.
pub const MIN_RESOLUTION: usize = 17;

type GradientFn = Box<dyn Fn([f64; 2]) -> [f64; 2]>;

/// Boundary data presets. `g` is evaluated on the whole grid; only boundary values matter to
/// the solver, interior values serve as the comparison function where one is known.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "snake_case", deny_unknown_fields)]
pub enum BoundaryPreset {
    Constant {
        value: f64,
    },
    Affine {
        b: [f64; 2],
        c: f64,
    },
    /// `|x|^{4/3} − |y|^{4/3}`.
    Aronsson,
    /// `y + λ p(x, y)` with a seeded trigonometric perturbation `|p| ≤ 1/2`.
    Flat {
        lambda: f64,
        seed: u64,
    },
}

fn aronsson(p: [f64; 2]) -> f64 {
    p[0].abs().powf(4.0 / 3.0) - p[1].abs().powf(4.0 / 3.0)
}

fn aronsson_grad(p: [f64; 2]) -> [f64; 2] {
    let d = |t: f64| 4.0 / 3.0 * t.signum() * t.abs().powf(1.0 / 3.0);
    [d(p[0]), -d(p[1])]
}

/// Seeded perturbation `Σ a_m sin(⟨k_m, x⟩ + φ_m)` with `Σ |a_m| = 1/2`, `|k_m| ∈ [1/2, 1]`.
#[derive(Debug, Clone)]
struct Perturbation {
    modes: Vec<(f64, [f64; 2], f64)>,
}

impl Perturbation {
    fn new(seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut modes: Vec<(f64, [f64; 2], f64)> = (0..4)
            .map(|_| {
                let amp: f64 = rng.random_range(0.2..1.0);
                let angle: f64 = rng.random_range(0.0..std::f64::consts::TAU);
                let k: f64 = rng.random_range(0.5..1.0);
                let phase: f64 = rng.random_range(0.0..std::f64::consts::TAU);
                (amp, [k * angle.cos(), k * angle.sin()], phase)
            })
            .collect();
        let total: f64 = modes.iter().map(|m| m.0).sum();
        for m in &mut modes {
            m.0 *= 0.5 / total;
        }
        Perturbation { modes }
    }

    fn value(&self, p: [f64; 2]) -> f64 {
        self.modes
            .iter()
            .map(|(a, k, phi)| a * (k[0] * p[0] + k[1] * p[1] + phi).sin())
            .sum()
    }
}

impl BoundaryPreset {
    pub fn field(&self, grid: Grid2D) -> Result<ScalarField> {
        match *self {
            BoundaryPreset::Constant { value } => ScalarField::constant(grid, value),
            BoundaryPreset::Affine { b, c } => {
                ScalarField::from_fn(grid, |p| c + b[0] * p[0] + b[1] * p[1])
            }
            BoundaryPreset::Aronsson => ScalarField::from_fn(grid, aronsson),
            BoundaryPreset::Flat { lambda, seed } => {
                let pert = Perturbation::new(seed);
                ScalarField::from_fn(grid, |p| p[1] + lambda * pert.value(p))
            }
        }
    }

    /// Gradient of the exact solution, when the data and coefficients determine one.
    fn exact_gradient(&self, coefficients: &CoefficientPreset) -> Option<GradientFn> {
        match (*self, coefficients) {
            (BoundaryPreset::Constant { .. }, _) => Some(Box::new(|_| [0.0, 0.0])),
            (
                BoundaryPreset::Affine { b, .. },
                CoefficientPreset::Identity | CoefficientPreset::Constant { .. },
            ) => Some(Box::new(move |_| b)),
            (BoundaryPreset::Aronsson, CoefficientPreset::Identity) => {
                Some(Box::new(aronsson_grad))
            }
            _ => None,
        }
    }

    fn validate(&self) -> Result<()> {
        let finite = match *self {
            BoundaryPreset::Constant { value } => value.is_finite(),
            BoundaryPreset::Affine { b, c } => {
                b[0].is_finite() && b[1].is_finite() && c.is_finite()
            }
            BoundaryPreset::Aronsson => true,
            BoundaryPreset::Flat { lambda, .. } => lambda > 0.0 && lambda < 1.0,
        };
        if finite {
            Ok(())
        } else {
            Err(Error::InvalidParameter(format!(
                "invalid boundary preset {self:?}"
            )))
        }
    }
}

/// ε values to sweep: a geometric schedule or an explicit decreasing list.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum EpsLadder {
    Geometric(EpsSchedule),
    Explicit(Vec<f64>),
}

impl Default for EpsLadder {
    fn default() -> Self {
        EpsLadder::Geometric(EpsSchedule {
            eps0: 0.1,
            ratio: 0.5,
            count: 4,
        })
    }
}

impl EpsLadder {
    pub fn values(&self) -> Vec<f64> {
        match self {
            EpsLadder::Geometric(s) => s.values(),
            EpsLadder::Explicit(v) => v.clone(),
        }
    }

    fn validate(&self) -> Result<()> {
        match self {
            EpsLadder::Geometric(s) => s.validate(),
            EpsLadder::Explicit(v) => {
                if v.is_empty() {
                    return Err(Error::InvalidParameter("eps list is empty".into()));
                }
                if v.iter().any(|e| !(*e > 0.0 && e.is_finite()))
                    || v.windows(2).any(|w| w[1] >= w[0])
                {
                    return Err(Error::InvalidParameter(
                        "eps list must be positive and strictly decreasing".into(),
                    ));
                }
                Ok(())
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverOptions {
    pub grad_tol: f64,
    pub max_newton_iters: usize,
    pub discretization: Discretization,
}

impl Default for SolverOptions {
    fn default() -> Self {
        let c = SolveConfig::new(0.1);
        SolverOptions {
            grad_tol: c.grad_tol,
            max_newton_iters: c.max_newton_iters,
            discretization: c.discretization,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BarrierOptions {
    /// Defaults to the midpoint of the bottom edge.
    #[serde(default)]
    pub vertex: Option<[f64; 2]>,
    #[serde(default = "default_amplitude")]
    pub amplitude: f64,
    #[serde(default = "default_gamma")]
    pub gamma: f64,
}

fn default_amplitude() -> f64 {
    2.0
}

fn default_gamma() -> f64 {
    0.5
}

impl Default for BarrierOptions {
    fn default() -> Self {
        BarrierOptions {
            vertex: None,
            amplitude: default_amplitude(),
            gamma: default_gamma(),
        }
    }
}

/// Check families a scenario can request.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Suite {
    MaxPrinciple,
    GradientBound,
    Barrier,
    Holder,
    Flatness,
    SlopeMonotonicity,
    Blowup,
    Lebesgue,
    MinimizerProbe,
}

impl Suite {
    pub const ALL: [Suite; 9] = [
        Suite::MaxPrinciple,
        Suite::GradientBound,
        Suite::Barrier,
        Suite::Holder,
        Suite::Flatness,
        Suite::SlopeMonotonicity,
        Suite::Blowup,
        Suite::Lebesgue,
        Suite::MinimizerProbe,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Suite::MaxPrinciple => "max_principle",
            Suite::GradientBound => "gradient_bound",
            Suite::Barrier => "barrier",
            Suite::Holder => "holder",
            Suite::Flatness => "flatness",
            Suite::SlopeMonotonicity => "slope_monotonicity",
            Suite::Blowup => "blowup",
            Suite::Lebesgue => "lebesgue",
            Suite::MinimizerProbe => "minimizer_probe",
        }
    }

    pub fn from_name(name: &str) -> Result<Self> {
        Suite::ALL
            .into_iter()
            .find(|s| s.name() == name)
            .ok_or_else(|| Error::InvalidParameter(format!("unknown suite {name:?}")))
    }
}

fn default_suites() -> Vec<Suite> {
    vec![Suite::MaxPrinciple, Suite::GradientBound]
}

/// A fully specified run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub name: String,
    /// `[xmin, xmax, ymin, ymax]`.
    pub domain: [f64; 4],
    /// Nodes along x; the spacing is shared by both axes.
    pub resolution: usize,
    #[serde(default = "default_coefficients")]
    pub coefficients: CoefficientPreset,
    pub boundary: BoundaryPreset,
    #[serde(default)]
    pub eps: EpsLadder,
    #[serde(default)]
    pub solver: SolverOptions,
    #[serde(default = "default_suites")]
    pub suites: Vec<Suite>,
    #[serde(default)]
    pub barrier: BarrierOptions,
    #[serde(default)]
    pub output_dir: Option<String>,
    #[serde(default)]
    pub seed: u64,
}

fn default_coefficients() -> CoefficientPreset {
    CoefficientPreset::Identity
}

impl Scenario {
    /// Parses and validates a JSON scenario.
    pub fn from_json(text: &str) -> Result<Self> {
        let s: Scenario = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if self.resolution < MIN_RESOLUTION {
            return Err(Error::Config(format!(
                "field `resolution`: need at least {MIN_RESOLUTION} nodes per side, got {}",
                self.resolution
            )));
        }
        let field = |name: &str, e: Error| Error::Config(format!("field `{name}`: {e}"));
        self.grid().map_err(|e| field("domain", e))?;
        self.eps.validate().map_err(|e| field("eps", e))?;
        self.boundary.validate().map_err(|e| field("boundary", e))?;
        self.config(0.1)
            .validate()
            .map_err(|e| field("solver", e))?;
        if self.suites.is_empty() {
            return Err(Error::Config("field `suites`: no suite selected".into()));
        }
        Ok(())
    }

    pub fn grid(&self) -> Result<Grid2D> {
        let [x0, x1, y0, y1] = self.domain;
        let g = Grid2D::from_bounds(x0, x1, y0, y1, self.resolution)?;
        if g.ny() < MIN_RESOLUTION {
            return Err(Error::InvalidGrid(format!(
                "domain gives {} nodes along y, need at least {MIN_RESOLUTION}",
                g.ny()
            )));
        }
        Ok(g)
    }

    pub fn config(&self, eps: f64) -> SolveConfig {
        let mut c = SolveConfig::new(eps);
        c.grad_tol = self.solver.grad_tol;
        c.max_newton_iters = self.solver.max_newton_iters;
        c.discretization = self.solver.discretization;
        c
    }

    /// Coefficients and boundary data on the scenario grid.
    pub fn build(&self) -> Result<(CoefficientField, ScalarField)> {
        let g = self.grid()?;
        Ok((self.coefficients.build(g)?, self.boundary.field(g)?))
    }
}

/// Everything a scenario run produces.
#[derive(Debug, Clone)]
pub struct ScenarioOutcome {
    pub solutions: Vec<RegularizedSolution>,
    pub checks: Vec<CheckReport>,
    pub blowups: Vec<BlowupTrace>,
    pub warnings: Vec<String>,
}

impl ScenarioOutcome {
    /// `Fail` if any verdict failed, else `HypothesisNotMet` if any check lacked its
    /// hypotheses, else `Pass`. Diagnostic checks never count.
    pub fn overall(&self) -> Outcome {
        let mut out = Outcome::Pass;
        for c in &self.checks {
            match c.outcome {
                Outcome::Fail => return Outcome::Fail,
                Outcome::HypothesisNotMet => out = Outcome::HypothesisNotMet,
                _ => {}
            }
        }
        out
    }
}

/// Solves the ε ladder and runs the selected suites.
pub fn run(s: &Scenario) -> Result<ScenarioOutcome> {
    run_suites(s, &s.suites)
}

/// As [`run`] with an explicit suite selection.
pub fn run_suites(s: &Scenario, suites: &[Suite]) -> Result<ScenarioOutcome> {
    s.validate()?;
    let (a, g) = s.build()?;
    let eps = s.eps.values();
    let cont = solver::continuation_over(&g, &a, &s.config(eps[0]), &eps)?;
    let mut out = ScenarioOutcome {
        solutions: cont.solutions,
        checks: Vec::new(),
        blowups: Vec::new(),
        warnings: cont.warnings,
    };
    let mut suites = suites.to_vec();
    suites.sort();
    suites.dedup();
    for suite in suites {
        run_suite(s, suite, &a, &g, &mut out)?;
    }
    Ok(out)
}

fn tag(mut r: CheckReport, label: String) -> CheckReport {
    r.name = label;
    r
}

/// Interior nodes usable as centres of balls of radius `r`: the centre node plus the
/// four points halfway between it and the corners, snapped to the grid.
fn probe_points(grid: &Grid2D, r: f64) -> Vec<[f64; 2]> {
    let [x0, x1, y0, y1] = grid.bounds();
    let c = [(x0 + x1) / 2.0, (y0 + y1) / 2.0];
    let mut pts = vec![c];
    for (sx, sy) in [(-1.0, -1.0), (1.0, -1.0), (-1.0, 1.0), (1.0, 1.0)] {
        pts.push([c[0] + sx * (x1 - x0) / 4.0, c[1] + sy * (y1 - y0) / 4.0]);
    }
    pts.into_iter()
        .filter_map(|p| grid.nearest(p).map(|(i, j)| grid.point(i, j)))
        .filter(|p| {
            p[0] - r >= x0 - 1e-12
                && p[0] + r <= x1 + 1e-12
                && p[1] - r >= y0 - 1e-12
                && p[1] + r <= y1 + 1e-12
        })
        .collect()
}

fn run_suite(
    s: &Scenario,
    suite: Suite,
    a: &CoefficientField,
    g: &ScalarField,
    out: &mut ScenarioOutcome,
) -> Result<()> {
    let grid = *a.grid();
    let h = grid.h();
    let last = out
        .solutions
        .last()
        .expect("continuation returns at least one solution");
    match suite {
        Suite::MaxPrinciple => {
            for sol in &out.solutions {
                let r = estimates::check_max_principle(&sol.u, g)?;
                out.checks
                    .push(tag(r, format!("max_principle[eps={:e}]", sol.eps)));
            }
        }
        Suite::GradientBound => {
            let mask = solver::comparison_subdomain(&grid);
            let reference = s.boundary.exact_gradient(&s.coefficients).map(|du| {
                mask.iter()
                    .map(|&k| norm(du(grid.point_at(k))))
                    .fold(0.0, f64::max)
            });
            let us: Vec<&ScalarField> = out.solutions.iter().map(|x| &x.u).collect();
            out.checks.push(estimates::gradient_bound_check(
                &us, &mask, reference, 0.05,
            )?);
        }
        Suite::Barrier | Suite::Holder => {
            let [x0, x1, y0, _] = grid.bounds();
            let vertex = s.barrier.vertex.unwrap_or([(x0 + x1) / 2.0, y0]);
            let spec = match BarrierSpec::new(a, vertex, s.barrier.amplitude, s.barrier.gamma) {
                Ok(spec) => spec,
                Err(Error::HypothesisViolated(msg)) => {
                    out.warnings.push(msg);
                    out.checks.push(hypothesis_only(suite, a, s.barrier.gamma));
                    return Ok(());
                }
                Err(e) => return Err(e),
            };
            if suite == Suite::Barrier {
                for sol in &out.solutions {
                    let r = estimates::barrier_supersolution_check(&spec, a, sol.eps)?;
                    out.checks
                        .push(tag(r, format!("barrier[eps={:e}]", sol.eps)));
                }
            } else {
                let pairs: Vec<(f64, &ScalarField)> =
                    out.solutions.iter().map(|x| (x.eps, &x.u)).collect();
                out.checks
                    .push(estimates::boundary_holder_check(&pairs, g, &spec)?);
            }
        }
        Suite::Flatness => {
            let BoundaryPreset::Flat { lambda, .. } = s.boundary else {
                return Err(Error::Config(
                    "flatness suite needs the flat boundary preset".into(),
                ));
            };
            out.checks
                .push(estimates::flatness_check(&last.u, lambda, a)?.to_check());
        }
        Suite::SlopeMonotonicity => {
            for sol in &out.solutions {
                out.checks.push(tag(
                    slope_monotonicity(&sol.u, a)?,
                    format!("slope_monotonicity[eps={:e}]", sol.eps),
                ));
            }
        }
        Suite::Blowup => {
            let ladder = [32.0 * h, 16.0 * h, 8.0 * h];
            for p in probe_points(&grid, ladder[0]) {
                let trace = intrinsic::blowup_trace(&last.u, p, &ladder)?;
                let dist = intrinsic::intrinsic_distance(a, p)?;
                let lip = intrinsic::lip_at(&last.u, &dist)?;
                let (i, j) = dist.source();
                let e = *trace.slopes.last().expect("non-empty ladder");
                let (r_h, r_sqrt) = intrinsic::normalization_ratios(a.at(i, j), e, lip.value);
                let steps = trace.consecutive_distances();
                let floor = 1e-12 * norm(e).max(1.0);
                let decreasing = steps.windows(2).all(|w| w[1] <= w[0] + floor);
                let mut r = CheckReport::diagnostic(
                    &format!("blowup[x={:.4},{:.4}]", p[0], p[1]),
                    steps[steps.len() - 1],
                    steps[0],
                )
                .with_detail("ratio_h_over_lip", r_h)
                .with_detail("ratio_sqrt_h_over_lip", r_sqrt)
                .with_detail("lip", lip.value)
                .with_detail("lip_shell", lip.shell);
                for (k, x) in trace.excess.iter().enumerate() {
                    r = r.with_detail(&format!("excess_{k}"), *x);
                }
                out.checks.push(r.decide(decreasing));
                out.blowups.push(trace);
            }
        }
        Suite::Lebesgue => {
            let radii = [16.0 * h, 8.0 * h, 4.0 * h];
            for p in probe_points(&grid, radii[0]) {
                out.checks.push(lebesgue_check(&last.u, a, p, &radii)?);
            }
        }
        Suite::MinimizerProbe => {
            let [x0, x1, y0, y1] = grid.bounds();
            let c = [(x0 + x1) / 2.0, (y0 + y1) / 2.0];
            let rad = 0.25 * (x1 - x0).min(y1 - y0);
            let mask = ball_mask(&grid, c, rad, BallMetric::Euclidean)?;
            let inner = 0.8 * rad;
            let bump = ScalarField::new(
                grid,
                (0..grid.len())
                    .map(|k| {
                        let d = norm([grid.point_at(k)[0] - c[0], grid.point_at(k)[1] - c[1]]);
                        let t = (1.0 - (d / inner).powi(2)).max(0.0);
                        last.u.values()[k] + 0.1 * t * t * t
                    })
                    .collect(),
            )?;
            let p = intrinsic::absolute_minimizer_probe(&last.u, a, &mask, &bump)?;
            out.checks.push(
                CheckReport::diagnostic("minimizer_probe", p.f_u, p.f_v)
                    .with_detail("pass", if p.pass { 1.0 } else { 0.0 }),
            );
        }
    }
    Ok(())
}

fn hypothesis_only(suite: Suite, a: &CoefficientField, gamma: f64) -> CheckReport {
    CheckReport::diagnostic(suite.name(), a.gamma_tilde(gamma), 0.0)
        .with_flag("gamma_tilde_positive", false)
        .with_detail("ellipticity", a.ellipticity())
        .decide(false)
}

/// `S⁺_r u` at the probe points over `r ∈ {4h, 8h, 16h, 32h}` (radii that fit); passes when
/// every step up the ladder is non-decreasing up to the shell tolerance.
pub fn slope_monotonicity(u: &ScalarField, a: &CoefficientField) -> Result<CheckReport> {
    let grid = *u.grid();
    let h = grid.h();
    let lip = crate::grid::gradient(u)?
        .values()
        .iter()
        .map(|p| norm(*p))
        .fold(0.0, f64::max);
    let mut worst = f64::NEG_INFINITY;
    let mut details = BTreeMap::new();
    let mut count = 0usize;
    for p in probe_points(&grid, 4.0 * h) {
        let radii: Vec<f64> = [4.0, 8.0, 16.0, 32.0]
            .iter()
            .map(|m| m * h)
            .filter(|r| probe_fits(&grid, p, *r))
            .collect();
        if radii.len() < 2 {
            continue;
        }
        let dist = intrinsic::intrinsic_distance(a, p)?;
        let s: Vec<f64> = radii
            .iter()
            .map(|r| intrinsic::slope(u, *r, &dist))
            .collect::<Result<_>>()?;
        for k in 1..s.len() {
            // positive when S⁺ drops by more than the tolerance
            let excess =
                s[k - 1] - s[k] - intrinsic::shell_tolerance(lip, h, radii[k - 1], radii[k]);
            worst = worst.max(excess);
        }
        details.insert(format!("S(x={:.4},{:.4},r=min)", p[0], p[1]), s[0]);
        details.insert(
            format!("S(x={:.4},{:.4},r=max)", p[0], p[1]),
            s[s.len() - 1],
        );
        count += 1;
    }
    if count == 0 {
        return Err(Error::EmptyMask(
            "no probe point admits two slope radii".into(),
        ));
    }
    let mut r = CheckReport::diagnostic("slope_monotonicity", worst, 0.0).with_detail("lip", lip);
    for (k, v) in details {
        r = r.with_detail(&k, v);
    }
    Ok(r.decide(worst <= 0.0))
}

fn probe_fits(grid: &Grid2D, p: [f64; 2], r: f64) -> bool {
    let [x0, x1, y0, y1] = grid.bounds();
    let slack = 0.5 * grid.h();
    p[0] - r >= x0 - slack
        && p[0] + r <= x1 + slack
        && p[1] - r >= y0 - slack
        && p[1] + r <= y1 + slack
}

/// Root-mean-square deviation `sqrt(mean |Du − e_r|²)` on intrinsic balls of decreasing radius;
/// passes when each halving of `r` divides it by a factor in `[2/1.5, 2·1.5]`.
pub fn lebesgue_check(
    u: &ScalarField,
    a: &CoefficientField,
    x0: [f64; 2],
    radii: &[f64],
) -> Result<CheckReport> {
    let dist = intrinsic::intrinsic_distance(a, x0)?;
    let p = dist.source_point();
    let mut rms = Vec::with_capacity(radii.len());
    for &r in radii {
        rms.push(intrinsic::lebesgue_deviation(u, &dist, r, None)?.sqrt());
    }
    let ratios: Vec<f64> = rms.windows(2).map(|w| w[0] / w[1]).collect();
    let ok = ratios.iter().all(|q| (2.0 / 1.5..=3.0).contains(q));
    let worst = ratios
        .iter()
        .map(|q| (q / 2.0).max(2.0 / q))
        .fold(1.0, f64::max);
    let mut r =
        CheckReport::diagnostic(&format!("lebesgue[x={:.4},{:.4}]", p[0], p[1]), worst, 1.5);
    for (k, (rad, v)) in radii.iter().zip(&rms).enumerate() {
        r = r
            .with_detail(&format!("r_{k}"), *rad)
            .with_detail(&format!("rms_{k}"), *v);
    }
    Ok(r.decide(ok))
}
