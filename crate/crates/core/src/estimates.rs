//! Numerical checks of the a priori estimates satisfied by regularized solutions: maximum
//! principle, interior gradient bound, boundary barrier and Hölder bound, flatness.
//!
//! Checks never assume values for the constants in these estimates. They either verify a
//! sign or ordering, or fit the constant and test that it stays uniform along an ε or λ
//! ladder. When a check's hypotheses are not met it still records its measurement but
//! reports no verdict.

use crate::coefficients::CoefficientField;
use crate::error::{Error, Result};
use crate::grid::{ball_mask, gradient_raw, BallMetric, Grid2D, ScalarField};
use crate::mat::{dot, norm, Sym2};
use crate::operator;
use crate::solver::viscosity;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

/// Verdict of a check.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    Pass,
    Fail,
    /// A hypothesis flag is false; the measurement is recorded without a verdict.
    HypothesisNotMet,
    /// Recorded only; never affects pass/fail.
    Diagnostic,
}

/// JSON-serializable result of one check.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckReport {
    pub name: String,
    pub hypothesis_flags: BTreeMap<String, bool>,
    pub measured: f64,
    pub threshold: f64,
    pub pass: Option<bool>,
    pub outcome: Outcome,
    /// Secondary measurements.
    pub details: BTreeMap<String, f64>,
}

impl CheckReport {
    /// A report without a verdict.
    pub fn diagnostic(name: &str, measured: f64, threshold: f64) -> Self {
        CheckReport {
            name: name.to_string(),
            hypothesis_flags: BTreeMap::new(),
            measured,
            threshold,
            pass: None,
            outcome: Outcome::Diagnostic,
            details: BTreeMap::new(),
        }
    }

    pub fn with_flag(mut self, name: &str, value: bool) -> Self {
        self.hypothesis_flags.insert(name.to_string(), value);
        self
    }

    pub fn with_detail(mut self, name: &str, value: f64) -> Self {
        self.details.insert(name.to_string(), value);
        self
    }

    /// Sets the verdict unless a hypothesis flag is false.
    pub fn decide(mut self, ok: bool) -> Self {
        if self.hypothesis_flags.values().all(|&f| f) {
            self.pass = Some(ok);
            self.outcome = if ok { Outcome::Pass } else { Outcome::Fail };
        } else {
            self.pass = None;
            self.outcome = Outcome::HypothesisNotMet;
        }
        self
    }

    pub fn hypotheses_met(&self) -> bool {
        self.hypothesis_flags.values().all(|&f| f)
    }
}

fn boundary_extremes(g: &ScalarField) -> (f64, f64, f64) {
    let grid = g.grid();
    let (mut lo, mut hi, mut abs) = (f64::INFINITY, f64::NEG_INFINITY, 0.0f64);
    for k in grid.boundary_indices() {
        let v = g.values()[k];
        lo = lo.min(v);
        hi = hi.max(v);
        abs = abs.max(v.abs());
    }
    (lo, hi, abs)
}

/// `max_∂ |g| − max_interior |u|`, which must not be negative beyond solver slack.
///
/// The two-sided bounds `min_∂ g ≤ u ≤ max_∂ g` are recorded as details.
pub fn check_max_principle(u: &ScalarField, g: &ScalarField) -> Result<CheckReport> {
    if u.grid() != g.grid() {
        return Err(Error::GridMismatch);
    }
    let (lo, hi, bmax) = boundary_extremes(g);
    let grid = u.grid();
    let (mut ulo, mut uhi, mut umax) = (f64::INFINITY, f64::NEG_INFINITY, 0.0f64);
    for k in grid.interior_indices() {
        let v = u.values()[k];
        ulo = ulo.min(v);
        uhi = uhi.max(v);
        umax = umax.max(v.abs());
    }
    let scale = bmax.max(1.0);
    let slack = 1e-8 * scale;
    let margin = bmax - umax;
    let lower = ulo - lo;
    let upper = hi - uhi;
    Ok(CheckReport::diagnostic("max_principle", margin, -slack)
        .with_detail("max_boundary_abs", bmax)
        .with_detail("max_interior_abs", umax)
        .with_detail("lower_margin", lower)
        .with_detail("upper_margin", upper)
        .decide(margin >= -slack && lower >= -slack && upper >= -slack))
}

/// `sup_V |Du|`; `V` must stay two nodes away from the boundary.
pub fn interior_gradient_bound(u: &ScalarField, mask: &[usize]) -> Result<f64> {
    let grid = u.grid();
    if mask.is_empty() {
        return Err(Error::EmptyMask("gradient-bound mask is empty".into()));
    }
    for &k in mask {
        if k >= grid.len() {
            return Err(Error::OutOfGrid { i: k, j: 0 });
        }
        let (i, j) = grid.ij(k);
        if grid.depth(i, j) < 2 {
            return Err(Error::InvalidParameter(format!(
                "gradient-bound mask touches the boundary layer at node ({i}, {j})"
            )));
        }
    }
    let du = gradient_raw(grid, u.values());
    Ok(mask.iter().map(|&k| norm(du[k])).fold(0.0, f64::max))
}

/// Max over a schedule of [`interior_gradient_bound`]; with a reference value the check
/// passes when the max lies within `rel_tol` of it (plus an absolute `1e−8`).
pub fn gradient_bound_check(
    solutions: &[&ScalarField],
    mask: &[usize],
    reference: Option<f64>,
    rel_tol: f64,
) -> Result<CheckReport> {
    let mut per = Vec::with_capacity(solutions.len());
    for u in solutions {
        per.push(interior_gradient_bound(u, mask)?);
    }
    let max = per.iter().copied().fold(0.0, f64::max);
    let mut report = CheckReport::diagnostic(
        "interior_gradient_bound",
        max,
        reference.unwrap_or(f64::NAN),
    );
    for (n, v) in per.iter().enumerate() {
        report = report.with_detail(&format!("sup_grad_{n}"), *v);
    }
    Ok(match reference {
        Some(r) => {
            let dev = (max - r).abs();
            report
                .with_detail("relative_deviation", dev / r.abs())
                .decide(dev <= rel_tol * r.abs() + 1e-8)
        }
        None => report,
    })
}

/// Boundary barrier `w(x) = λ_b |x − y0|^γ` with its derived constants.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BarrierSpec {
    pub vertex: [f64; 2],
    pub amplitude: f64,
    pub gamma: f64,
    /// `(2 − γ)/L² − L²`.
    pub gamma_tilde: f64,
    /// `min_x (γ̃ / (2|x − y0|)) / sup_norm(A)` over the grid.
    pub delta0: f64,
}

impl BarrierSpec {
    pub fn new(a: &CoefficientField, vertex: [f64; 2], amplitude: f64, gamma: f64) -> Result<Self> {
        if !(gamma > 0.0 && gamma < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "barrier exponent must lie in (0, 1), got {gamma}"
            )));
        }
        if !(amplitude > 0.0 && amplitude.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "barrier amplitude must be positive, got {amplitude}"
            )));
        }
        let grid = a.grid();
        let (i, j) = grid
            .nearest(vertex)
            .ok_or_else(|| Error::InvalidParameter("barrier vertex outside the grid".into()))?;
        if grid.is_interior(i, j) {
            return Err(Error::InvalidParameter(
                "barrier vertex must lie on the boundary".into(),
            ));
        }
        let gamma_tilde = a.gamma_tilde(gamma);
        if gamma_tilde <= 0.0 {
            return Err(Error::HypothesisViolated(format!(
                "ellipticity {:.6} with exponent {gamma} gives non-positive barrier constant {gamma_tilde:.6}",
                a.ellipticity()
            )));
        }
        let far = (0..grid.len())
            .map(|k| norm(sub(grid.point_at(k), vertex)))
            .fold(0.0, f64::max);
        Ok(BarrierSpec {
            vertex,
            amplitude,
            gamma,
            gamma_tilde,
            delta0: gamma_tilde / (2.0 * far) / a.sup_norm(),
        })
    }

    pub fn value(&self, x: [f64; 2]) -> f64 {
        self.amplitude * norm(sub(x, self.vertex)).powf(self.gamma)
    }

    pub fn field(&self, grid: Grid2D) -> Result<ScalarField> {
        ScalarField::from_fn(grid, |p| self.value(p))
    }

    /// Interior nodes at distance at least `2h` from the vertex.
    pub fn admissible(&self, grid: &Grid2D) -> Vec<usize> {
        grid.interior_indices()
            .filter(|&k| norm(sub(grid.point_at(k), self.vertex)) >= 2.0 * grid.h())
            .collect()
    }

    /// The three terms of `−𝒜[w] − ν div(A∇w)` for constant `A` at `x`, in the normalization
    /// of [`operator`]: principal part, coefficient-derivative part (zero here), viscous part.
    pub fn analytic_terms(&self, a: Sym2, x: [f64; 2], viscosity: f64) -> [f64; 3] {
        let y = sub(x, self.vertex);
        let r2 = dot(y, y);
        let (lam, g) = (self.amplitude, self.gamma);
        let c = lam * g * r2.powf(g / 2.0 - 1.0);
        let ay = a.apply(y);
        let yay = dot(y, ay);
        // Dw = c y, D²w = c (I + (γ − 2) y yᵀ / r²)
        let principal = c * c * c * (dot(ay, ay) + (g - 2.0) * yay * yay / r2);
        let div = c * (a.trace() + (g - 2.0) * yay / r2);
        [-4.0 * principal, 0.0, -viscosity * div]
    }

    /// The bound `2 λ³ γ³ γ̃ |x − y0|^{3γ−4}` on the principal term, stated for the operator
    /// normalized as `2⟨A Dw, D²w A Dw⟩ + …` (half of [`operator::aronsson_operator`]).
    pub fn proof_leading_term(&self, x: [f64; 2]) -> f64 {
        let r = norm(sub(x, self.vertex));
        let (lam, g) = (self.amplitude, self.gamma);
        2.0 * lam.powi(3) * g.powi(3) * self.gamma_tilde * r.powf(3.0 * g - 4.0)
    }
}

fn sub(a: [f64; 2], b: [f64; 2]) -> [f64; 2] {
    [a[0] - b[0], a[1] - b[1]]
}

/// `min −𝒜^ε[w]` over admissible nodes; passes when it is at least `−1e−8·max(sup|w|, 1)`.
pub fn barrier_supersolution_check(
    spec: &BarrierSpec,
    a: &CoefficientField,
    eps: f64,
) -> Result<CheckReport> {
    let grid = *a.grid();
    let w = spec.field(grid)?;
    let res = operator::regularized_residual(&w, a, viscosity(eps))?;
    let pts = spec.admissible(&grid);
    if pts.is_empty() {
        return Err(Error::EmptyMask("no admissible barrier points".into()));
    }
    let min = pts
        .iter()
        .map(|&k| res.raw()[k])
        .fold(f64::INFINITY, f64::min);
    let scale = w.max_abs().max(1.0);
    let threshold = -1e-8 * scale;
    Ok(
        CheckReport::diagnostic("barrier_supersolution", min, threshold)
            .with_flag("lip_le_delta0", a.lip() <= spec.delta0)
            .with_flag("below_barrier_threshold", a.flags().below_barrier_threshold)
            .with_detail("eps", eps)
            .with_detail("gamma", spec.gamma)
            .with_detail("gamma_tilde", spec.gamma_tilde)
            .with_detail("delta0", spec.delta0)
            .with_detail("lip", a.lip())
            .decide(min >= threshold),
    )
}

/// Least `C` with `|u(x) − g(y0)| ≤ C |x − y0|^γ` over all nodes `x ≠ y0`.
pub fn holder_constant(u: &ScalarField, g: &ScalarField, spec: &BarrierSpec) -> Result<f64> {
    if u.grid() != g.grid() {
        return Err(Error::GridMismatch);
    }
    let grid = u.grid();
    let (i, j) = grid
        .nearest(spec.vertex)
        .ok_or_else(|| Error::InvalidParameter("vertex outside the grid".into()))?;
    let y0 = grid.point(i, j);
    let g0 = g.get(i, j);
    Ok((0..grid.len())
        .filter_map(|k| {
            let r = norm(sub(grid.point_at(k), y0));
            (r > 0.0).then(|| (u.values()[k] - g0).abs() / r.powf(spec.gamma))
        })
        .fold(0.0, f64::max))
}

/// Fitted Hölder constants along a schedule; passes when `max C / min C ≤ 2`.
pub fn boundary_holder_check(
    solutions: &[(f64, &ScalarField)],
    g: &ScalarField,
    spec: &BarrierSpec,
) -> Result<CheckReport> {
    let mut cs = Vec::with_capacity(solutions.len());
    for (_, u) in solutions {
        cs.push(holder_constant(u, g, spec)?);
    }
    let max = cs.iter().copied().fold(0.0, f64::max);
    let min = cs.iter().copied().fold(f64::INFINITY, f64::min);
    let spread = if max == 0.0 { 1.0 } else { max / min };
    let mut report =
        CheckReport::diagnostic("boundary_holder", spread, 2.0).with_detail("gamma", spec.gamma);
    for ((eps, _), c) in solutions.iter().zip(&cs) {
        report = report.with_detail(&format!("C(eps={eps:e})"), *c);
    }
    Ok(report.decide(spread <= 2.0))
}

/// `Φ(p) = ((|p|² − p₂)_+)²`.
pub fn flatness_phi(p: [f64; 2]) -> f64 {
    let e = (dot(p, p) - p[1]).max(0.0);
    e * e
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlatnessReport {
    pub lambda: f64,
    /// `sup_{B(0,1)} (|Du|² − ∂₂u)_+`.
    pub sup_excess: f64,
    pub ratio: f64,
    pub phi_max: f64,
    /// `max_{B(0,2)} |u − x₂|`.
    pub flatness: f64,
    pub coefficient_seminorms: f64,
    pub a_at_origin_deviation: f64,
    pub hypothesis_ok: bool,
}

/// Flatness estimate on `B(0,1)` for a solution that is `λ`-close to `x₂` on `B(0,2)`.
pub fn flatness_check(
    u: &ScalarField,
    lambda: f64,
    a: &CoefficientField,
) -> Result<FlatnessReport> {
    if u.grid() != a.grid() {
        return Err(Error::GridMismatch);
    }
    if !(lambda > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "flatness scale must be positive, got {lambda}"
        )));
    }
    let grid = *u.grid();
    let b = grid.bounds();
    let tol = 1e-9;
    let b3_inside =
        b[0] <= -3.0 + tol && b[1] >= 3.0 - tol && b[2] <= -3.0 + tol && b[3] >= 3.0 - tol;
    let b2 = ball_mask(&grid, [0.0, 0.0], 2.0, BallMetric::Euclidean)?;
    let b1 = ball_mask(&grid, [0.0, 0.0], 1.0, BallMetric::Euclidean)?;
    let flatness = b2
        .iter()
        .map(|&k| (u.values()[k] - grid.point_at(k)[1]).abs())
        .fold(0.0, f64::max);
    let (i0, j0) = grid
        .nearest([0.0, 0.0])
        .ok_or_else(|| Error::InvalidParameter("origin outside the grid".into()))?;
    let a0 = a.at(i0, j0) - Sym2::IDENTITY;
    let dev = a0.max_abs_entry();
    let seminorms = a.lip() + a.hess();
    let du = gradient_raw(&grid, u.values());
    let (mut sup, mut phi) = (0.0f64, 0.0f64);
    for &k in &b1 {
        let p = du[k];
        sup = sup.max((dot(p, p) - p[1]).max(0.0));
        phi = phi.max(flatness_phi(p));
    }
    Ok(FlatnessReport {
        lambda,
        sup_excess: sup,
        ratio: sup / lambda.sqrt(),
        phi_max: phi,
        flatness,
        coefficient_seminorms: seminorms,
        a_at_origin_deviation: dev,
        hypothesis_ok: b3_inside && flatness <= lambda && seminorms <= lambda && dev <= 1e-12,
    })
}

impl FlatnessReport {
    /// Diagnostic report; flagged when the hypotheses fail.
    pub fn to_check(&self) -> CheckReport {
        let mut r = CheckReport::diagnostic("flatness", self.ratio, f64::NAN)
            .with_flag("flatness_hypothesis", self.hypothesis_ok)
            .with_detail("lambda", self.lambda)
            .with_detail("sup_excess", self.sup_excess)
            .with_detail("phi_max", self.phi_max)
            .with_detail("flatness", self.flatness)
            .with_detail("coefficient_seminorms", self.coefficient_seminorms);
        if !self.hypothesis_ok {
            r.outcome = Outcome::HypothesisNotMet;
        }
        r
    }
}

/// Ratios along a decreasing λ ladder must stay within twice the first one.
pub fn flatness_scaling_check(reports: &[FlatnessReport]) -> Result<CheckReport> {
    let first = reports
        .first()
        .ok_or_else(|| Error::InvalidParameter("flatness ladder is empty".into()))?;
    let bound = 2.0 * first.ratio;
    let worst = reports.iter().map(|r| r.ratio).fold(0.0, f64::max);
    let mut report = CheckReport::diagnostic("flatness_scaling", worst, bound).with_flag(
        "flatness_hypothesis",
        reports.iter().all(|r| r.hypothesis_ok),
    );
    for r in reports {
        report = report.with_detail(&format!("ratio(lambda={})", r.lambda), r.ratio);
    }
    Ok(report.decide(worst <= bound))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coefficients::CoefficientPreset;

    fn unit() -> Grid2D {
        Grid2D::from_bounds(0.0, 1.0, 0.0, 1.0, 33).unwrap()
    }

    #[test]
    fn max_principle_on_zero_and_affine() {
        let g = unit();
        let z = ScalarField::constant(g, 0.0).unwrap();
        let r = check_max_principle(&z, &z).unwrap();
        assert_eq!(r.measured, 0.0);
        assert_eq!(r.outcome, Outcome::Pass);
        let lin = ScalarField::from_fn(g, |p| 2.0 * p[0] - p[1] + 0.5).unwrap();
        let r = check_max_principle(&lin, &lin).unwrap();
        assert!(r.measured > 0.0);
        assert_eq!(r.pass, Some(true));
        let mut v = lin.values().to_vec();
        v[g.idx(16, 16)] = 10.0;
        let bad = ScalarField::new(g, v).unwrap();
        assert_eq!(check_max_principle(&bad, &lin).unwrap().pass, Some(false));
    }

    #[test]
    fn gradient_bound_examples() {
        let g = unit();
        let mask: Vec<usize> = (0..g.len())
            .filter(|&k| {
                let (i, j) = g.ij(k);
                g.depth(i, j) >= 4
            })
            .collect();
        let lin = ScalarField::from_fn(g, |p| 3.0 * p[0] - 4.0 * p[1]).unwrap();
        assert!((interior_gradient_bound(&lin, &mask).unwrap() - 5.0).abs() < 1e-12);
        let c = ScalarField::constant(g, 1.0).unwrap();
        assert_eq!(interior_gradient_bound(&c, &mask).unwrap(), 0.0);
        assert!(interior_gradient_bound(&c, &[g.idx(1, 5)]).is_err());
    }

    #[test]
    fn barrier_leading_term_at_unit_point() {
        let g = Grid2D::from_bounds(0.0, 2.0, 0.0, 2.0, 33).unwrap();
        let a = CoefficientField::identity(g).unwrap();
        let spec = BarrierSpec::new(&a, [0.0, 0.0], 1.0, 0.5).unwrap();
        assert!((spec.gamma_tilde - 0.5).abs() < 1e-15);
        assert!((spec.proof_leading_term([1.0, 0.0]) - 0.125).abs() < 1e-15);
        // with A = I the bound is attained: the operator module's normalization doubles it
        let t = spec.analytic_terms(Sym2::IDENTITY, [1.0, 0.0], 0.0);
        assert!((t[0] - 0.25).abs() < 1e-15);
        assert_eq!(t[2], 0.0);
    }

    #[test]
    fn barrier_rejects_large_ellipticity() {
        let g = Grid2D::from_bounds(0.0, 1.0, 0.0, 1.0, 9).unwrap();
        let a = CoefficientField::constant(g, Sym2::diag(1.3, 1.0)).unwrap();
        assert!(matches!(
            BarrierSpec::new(&a, [0.0, 0.5], 2.0, 0.5),
            Err(Error::HypothesisViolated(_))
        ));
        let id = CoefficientField::identity(g).unwrap();
        assert!(BarrierSpec::new(&id, [0.5, 0.5], 2.0, 0.5).is_err());
    }

    #[test]
    fn barrier_check_flags_large_lipschitz() {
        let g = Grid2D::from_bounds(-1.0, 1.0, 0.0, 2.0, 33).unwrap();
        let a = CoefficientPreset::Smooth { lambda: 0.2 }.build(g).unwrap();
        let spec = BarrierSpec::new(&a, [0.0, 0.0], 2.0, 0.3).unwrap();
        assert!(a.lip() > spec.delta0);
        let r = barrier_supersolution_check(&spec, &a, 1e-3).unwrap();
        assert_eq!(r.outcome, Outcome::HypothesisNotMet);
        assert!(r.pass.is_none());
        assert!(r.measured.is_finite());
    }

    #[test]
    fn holder_constant_examples() {
        let g = unit();
        let a = CoefficientField::identity(g).unwrap();
        let spec = BarrierSpec::new(&a, [0.5, 0.0], 2.0, 0.5).unwrap();
        let z = ScalarField::constant(g, 0.0).unwrap();
        assert_eq!(holder_constant(&z, &z, &spec).unwrap(), 0.0);
        let r = boundary_holder_check(&[(0.1, &z), (0.01, &z)], &z, &spec).unwrap();
        assert_eq!(r.pass, Some(true));
    }

    #[test]
    fn phi_vanishes_below_the_parabola() {
        assert_eq!(flatness_phi([0.0, 1.0]), 0.0);
        assert_eq!(flatness_phi([0.3, 0.5]), 0.0);
        assert!((flatness_phi([1.0, 0.0]) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn flat_linear_solution_has_zero_excess() {
        let g = Grid2D::from_bounds(-3.0, 3.0, -3.0, 3.0, 49).unwrap();
        let a = CoefficientField::identity(g).unwrap();
        let u = ScalarField::from_fn(g, |p| p[1]).unwrap();
        let r = flatness_check(&u, 0.1, &a).unwrap();
        assert!(r.hypothesis_ok);
        assert!(r.sup_excess < 1e-12);
        assert_eq!(r.phi_max, 0.0);
    }
}
