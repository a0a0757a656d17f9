//! Intrinsic geometry of `A` and differentiability diagnostics: the distance `d_A`, slope
//! functionals, blow-up traces, gradient localization and Lebesgue-point deviations.

use crate::coefficients::CoefficientField;
use crate::error::{Error, Result};
use crate::grid::{ball_mask, gradient_raw, BallMetric, Grid2D, ScalarField};
use crate::mat::{dot, norm, Sym2};
use crate::operator;
use serde::{Deserialize, Serialize};
use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::io::Write;

/// Primitive lattice directions with entries in `[0, 3]`, one octant; the full stencil is
/// their images under the eight symmetries of the square (32 directions).
const OCTANT: [(i64, i64); 5] = [(1, 0), (1, 1), (2, 1), (3, 1), (3, 2)];

fn stencil() -> Vec<(i64, i64)> {
    let mut out = Vec::with_capacity(32);
    for &(p, q) in &OCTANT {
        for (a, b) in [(p, q), (q, p)] {
            for (sa, sb) in [(1, 1), (1, -1), (-1, 1), (-1, -1)] {
                let v = (sa * a, sb * b);
                if !out.contains(&v) {
                    out.push(v);
                }
            }
        }
    }
    out
}

#[derive(PartialEq)]
struct Entry {
    dist: f64,
    node: usize,
}

impl Eq for Entry {}

impl Ord for Entry {
    // reversed so the max-heap pops the smallest distance, then the lowest index
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .dist
            .total_cmp(&self.dist)
            .then_with(|| other.node.cmp(&self.node))
    }
}

impl PartialOrd for Entry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// `d_A(source, ·)` at every node.
#[derive(Debug, Clone, PartialEq)]
pub struct DistanceField {
    source: (usize, usize),
    values: ScalarField,
    neighbors: usize,
}

impl DistanceField {
    pub fn source(&self) -> (usize, usize) {
        self.source
    }

    pub fn source_point(&self) -> [f64; 2] {
        self.values.grid().point(self.source.0, self.source.1)
    }

    pub fn source_index(&self) -> usize {
        self.values.grid().idx(self.source.0, self.source.1)
    }

    pub fn grid(&self) -> &Grid2D {
        self.values.grid()
    }

    pub fn values(&self) -> &ScalarField {
        &self.values
    }

    pub fn at(&self, k: usize) -> f64 {
        self.values.values()[k]
    }

    /// Number of directions in the lattice stencil.
    pub fn neighbors(&self) -> usize {
        self.neighbors
    }
}

/// Shortest-path distance on the lattice with edge cost `sqrt(⟨A⁻¹(mid) Δx, Δx⟩)`.
pub fn intrinsic_distance(a: &CoefficientField, source: [f64; 2]) -> Result<DistanceField> {
    let grid = *a.grid();
    let (si, sj) = grid.nearest(source).ok_or(Error::OutOfGrid {
        i: usize::MAX,
        j: usize::MAX,
    })?;
    let dirs = stencil();
    let (nx, ny) = (grid.nx() as i64, grid.ny() as i64);
    let h = grid.h();
    let inv: Vec<Sym2> = a
        .matrix()
        .values()
        .iter()
        .map(|m| {
            m.inverse()
                .expect("coefficient fields are positive definite")
        })
        .collect();
    let inv_at = |i: i64, j: i64| inv[grid.idx(i as usize, j as usize)];

    let mut dist = vec![f64::INFINITY; grid.len()];
    let mut done = vec![false; grid.len()];
    let start = grid.idx(si, sj);
    dist[start] = 0.0;
    let mut heap = BinaryHeap::new();
    heap.push(Entry {
        dist: 0.0,
        node: start,
    });
    while let Some(Entry { dist: d, node }) = heap.pop() {
        if done[node] {
            continue;
        }
        done[node] = true;
        let (i, j) = grid.ij(node);
        let (i, j) = (i as i64, j as i64);
        for &(di, dj) in &dirs {
            let (ni, nj) = (i + di, j + dj);
            if ni < 0 || nj < 0 || ni >= nx || nj >= ny {
                continue;
            }
            let k = grid.idx(ni as usize, nj as usize);
            if done[k] {
                continue;
            }
            // metric at the step midpoint: a node, edge centre or cell centre
            let (i0, j0) = (i + di.div_euclid(2), j + dj.div_euclid(2));
            let (i1, j1) = (i + (di + 1).div_euclid(2), j + (dj + 1).div_euclid(2));
            let m = 0.25 * (inv_at(i0, j0) + inv_at(i1, j0) + inv_at(i0, j1) + inv_at(i1, j1));
            let step = [di as f64 * h, dj as f64 * h];
            let nd = d + m.quad(step).sqrt();
            if nd < dist[k] {
                dist[k] = nd;
                heap.push(Entry { dist: nd, node: k });
            }
        }
    }
    Ok(DistanceField {
        source: (si, sj),
        values: ScalarField::new(grid, dist)?,
        neighbors: dirs.len(),
    })
}

/// Width of the discrete sphere `{|d − r| ≤ width/2}`.
pub fn shell_width(h: f64) -> f64 {
    h * (1.0 + std::f64::consts::SQRT_2) / 2.0
}

/// Allowed violation of `S⁺_{r₁} ≤ S⁺_{r₂}` for a field with Lipschitz bound `lip`: each
/// shell misplaces its nodes radially by at most half its width.
pub fn shell_tolerance(lip: f64, h: f64, r1: f64, r2: f64) -> f64 {
    lip * shell_width(h) / 2.0 * (1.0 / r1 + 1.0 / r2)
}

fn shell(dist: &DistanceField, r: f64) -> Result<Vec<usize>> {
    let half = shell_width(dist.grid().h()) / 2.0;
    let pts: Vec<usize> = (0..dist.grid().len())
        .filter(|&k| (dist.at(k) - r).abs() <= half)
        .collect();
    if pts.is_empty() {
        return Err(Error::EmptyMask(format!(
            "no node on the sphere of radius {r}"
        )));
    }
    Ok(pts)
}

fn check_grids(u: &ScalarField, dist: &DistanceField) -> Result<()> {
    if u.grid() != dist.grid() {
        return Err(Error::GridMismatch);
    }
    Ok(())
}

/// `S⁺_r u(x) = max_{d_A(z, x) = r} (u(z) − u(x)) / r` with `x` the source of `dist`.
pub fn slope(u: &ScalarField, r: f64, dist: &DistanceField) -> Result<f64> {
    check_grids(u, dist)?;
    if !(r > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "radius must be positive, got {r}"
        )));
    }
    let ux = u.values()[dist.source_index()];
    Ok(shell(dist, r)?
        .into_iter()
        .map(|k| (u.values()[k] - ux) / r)
        .fold(f64::NEG_INFINITY, f64::max))
}

/// Estimate of `Lip_{d_A} u` at the source of `dist`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LipEstimate {
    pub value: f64,
    /// Radius of the shell attaining the maximum.
    pub shell: f64,
}

/// Max of `|u(z) − u(x)| / d_A(z, x)` over the shells of radius `2h`, `3h` and `4h`.
pub fn lip_at(u: &ScalarField, dist: &DistanceField) -> Result<LipEstimate> {
    check_grids(u, dist)?;
    let h = dist.grid().h();
    let ux = u.values()[dist.source_index()];
    let mut best = LipEstimate {
        value: f64::NEG_INFINITY,
        shell: 0.0,
    };
    for r in [2.0 * h, 3.0 * h, 4.0 * h] {
        for k in shell(dist, r)? {
            let d = dist.at(k);
            if d > 0.0 {
                let v = (u.values()[k] - ux).abs() / d;
                if v > best.value {
                    best = LipEstimate { value: v, shell: r };
                }
            }
        }
    }
    Ok(best)
}

/// `(H(x, e) / lip, sqrt(H(x, e)) / lip)`: the two candidate normalizations linking a blow-up
/// slope to the intrinsic Lipschitz constant.
pub fn normalization_ratios(a_at_x: Sym2, e: [f64; 2], lip: f64) -> (f64, f64) {
    let hval = a_at_x.quad(e);
    (hval / lip, hval.sqrt() / lip)
}

/// Affine fits of `u` on a decreasing ladder of balls around a node.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlowupTrace {
    pub center: [f64; 2],
    pub radii: Vec<f64>,
    pub slopes: Vec<[f64; 2]>,
    /// `sup_{|y| < r} |u(x + y) − u(x) − ⟨e, y⟩| / r`.
    pub excess: Vec<f64>,
    /// `|e_i − e_j|`.
    pub pairwise: Vec<Vec<f64>>,
}

impl BlowupTrace {
    /// Rows `r,e1,e2,excess`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let csv_err = |e: csv::Error| Error::Csv(e.to_string());
        w.write_record(["r", "e1", "e2", "excess"])
            .map_err(csv_err)?;
        for ((r, e), x) in self.radii.iter().zip(&self.slopes).zip(&self.excess) {
            w.write_record([r, &e[0], &e[1], x].map(|v| format!("{v:.16e}")))
                .map_err(csv_err)?;
        }
        w.flush()?;
        Ok(())
    }

    /// `|e_{r_k} − e_{r_{k+1}}|` down the ladder.
    pub fn consecutive_distances(&self) -> Vec<f64> {
        (1..self.radii.len())
            .map(|k| self.pairwise[k - 1][k])
            .collect()
    }
}

/// Least-squares slope of `f` over the points `ys` (intercept fitted and discarded).
fn ls_slope(ys: &[[f64; 2]], fs: &[f64]) -> Option<[f64; 2]> {
    let n = ys.len() as f64;
    let my = [
        ys.iter().map(|y| y[0]).sum::<f64>() / n,
        ys.iter().map(|y| y[1]).sum::<f64>() / n,
    ];
    let mf = fs.iter().sum::<f64>() / n;
    let (mut sxx, mut sxy, mut syy, mut sxf, mut syf) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for (y, f) in ys.iter().zip(fs) {
        let (dx, dy, df) = (y[0] - my[0], y[1] - my[1], f - mf);
        sxx += dx * dx;
        sxy += dx * dy;
        syy += dy * dy;
        sxf += dx * df;
        syf += dy * df;
    }
    let det = sxx * syy - sxy * sxy;
    if !(det.abs() > 1e-14 * (sxx * syy).max(f64::MIN_POSITIVE)) {
        return None;
    }
    Some([(syy * sxf - sxy * syf) / det, (sxx * syf - sxy * sxf) / det])
}

/// Least-squares slope of `u` over the Euclidean ball `B(x, r)` around node `x`.
pub fn fitted_slope(u: &ScalarField, x: [f64; 2], r: f64) -> Result<[f64; 2]> {
    let grid = u.grid();
    let mask = ball_mask(grid, x, r, BallMetric::Euclidean)?;
    let ys: Vec<[f64; 2]> = mask.iter().map(|&k| sub(grid.point_at(k), x)).collect();
    let fs: Vec<f64> = mask.iter().map(|&k| u.values()[k]).collect();
    ls_slope(&ys, &fs)
        .ok_or_else(|| Error::EmptyMask(format!("ball of radius {r} too small for a fit")))
}

fn sub(a: [f64; 2], b: [f64; 2]) -> [f64; 2] {
    [a[0] - b[0], a[1] - b[1]]
}

/// Affine fits of `u` on `B(x, r)` for each radius of a strictly decreasing ladder.
pub fn blowup_trace(u: &ScalarField, x: [f64; 2], ladder: &[f64]) -> Result<BlowupTrace> {
    let grid = u.grid();
    let (i, j) = grid
        .nearest(x)
        .ok_or_else(|| Error::InvalidParameter("blow-up centre outside the grid".into()))?;
    let x = grid.point(i, j);
    if ladder.is_empty()
        || ladder.iter().any(|r| !(*r > 0.0))
        || ladder.windows(2).any(|w| w[1] >= w[0])
    {
        return Err(Error::InvalidParameter(
            "blow-up ladder must be positive and strictly decreasing".into(),
        ));
    }
    let b = grid.bounds();
    let r0 = ladder[0];
    let corners = [
        [x[0] - r0, x[1] - r0],
        [x[0] + r0, x[1] - r0],
        [x[0] - r0, x[1] + r0],
        [x[0] + r0, x[1] + r0],
    ];
    let outside: Vec<[f64; 2]> = corners
        .into_iter()
        .filter(|p| p[0] < b[0] || p[0] > b[1] || p[1] < b[2] || p[1] > b[3])
        .collect();
    if !outside.is_empty() {
        return Err(Error::EscapesDomain { corners: outside });
    }
    let ux = u.get(i, j);
    let mut slopes = Vec::with_capacity(ladder.len());
    let mut excess = Vec::with_capacity(ladder.len());
    for &r in ladder {
        let e = fitted_slope(u, x, r)?;
        let mask = ball_mask(grid, x, r, BallMetric::Euclidean)?;
        let ex = mask
            .iter()
            .map(|&k| (u.values()[k] - ux - dot(e, sub(grid.point_at(k), x))).abs())
            .fold(0.0, f64::max)
            / r;
        slopes.push(e);
        excess.push(ex);
    }
    let pairwise = slopes
        .iter()
        .map(|a| slopes.iter().map(|b| norm(sub(*a, *b))).collect())
        .collect();
    Ok(BlowupTrace {
        center: x,
        radii: ladder.to_vec(),
        slopes,
        excess,
        pairwise,
    })
}

/// Outcome of the gradient localization scan.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GradientNear {
    /// `max_{B} |v(x) − v(c) − ⟨b, x − c⟩| / ρ`.
    pub deviation: f64,
    pub hypothesis_ok: bool,
    pub x0: [f64; 2],
    /// `|Dv(x₀) − b|`.
    pub distance: f64,
    /// `4η + 10h / ρ`.
    pub bound: f64,
    /// `None` when the hypothesis fails.
    pub pass: Option<bool>,
}

/// Scans `B(c, ρ)` for the point whose gradient is closest to `b`, given that `v` is `ηρ`-close
/// to an affine function with slope `b` on that ball.
pub fn gradient_near(
    v: &ScalarField,
    center: [f64; 2],
    radius: f64,
    b: [f64; 2],
    eta: f64,
) -> Result<GradientNear> {
    if !(eta >= 0.0) {
        return Err(Error::InvalidParameter(format!(
            "eta must be non-negative, got {eta}"
        )));
    }
    let grid = v.grid();
    let (ci, cj) = grid
        .nearest(center)
        .ok_or_else(|| Error::InvalidParameter("centre outside the grid".into()))?;
    let c = grid.point(ci, cj);
    let vc = v.get(ci, cj);
    let mask = ball_mask(grid, c, radius, BallMetric::Euclidean)?;
    let deviation = mask
        .iter()
        .map(|&k| (v.values()[k] - vc - dot(b, sub(grid.point_at(k), c))).abs())
        .fold(0.0, f64::max)
        / radius;
    let du = gradient_raw(grid, v.values());
    let (mut best, mut x0) = (f64::INFINITY, c);
    for &k in &mask {
        let (i, j) = grid.ij(k);
        if !grid.is_interior(i, j) {
            continue;
        }
        let d = norm(sub(du[k], b));
        if d < best {
            best = d;
            x0 = grid.point_at(k);
        }
    }
    if !best.is_finite() {
        return Err(Error::EmptyMask("ball has no interior node".into()));
    }
    let bound = 4.0 * eta + 10.0 * grid.h() / radius;
    let hypothesis_ok = deviation <= eta;
    Ok(GradientNear {
        deviation,
        hypothesis_ok,
        x0,
        distance: best,
        bound,
        pass: hypothesis_ok.then_some(best <= bound),
    })
}

/// Mean of `|Du − a|²` over the intrinsic ball `B_{d_A}(x₀, r)`; without `a` the slope is the
/// least-squares fit on the Euclidean ball of the same radius.
pub fn lebesgue_deviation(
    u: &ScalarField,
    dist: &DistanceField,
    r: f64,
    a: Option<[f64; 2]>,
) -> Result<f64> {
    check_grids(u, dist)?;
    let grid = u.grid();
    let x0 = dist.source_point();
    let mask = ball_mask(grid, x0, r, BallMetric::Field(dist.values()))?;
    if mask.len() < 10 {
        return Err(Error::EmptyMask(format!(
            "intrinsic ball of radius {r} holds {} nodes, need at least 10",
            mask.len()
        )));
    }
    let a = match a {
        Some(a) => a,
        None => fitted_slope(u, x0, r)?,
    };
    let du = gradient_raw(grid, u.values());
    Ok(mask
        .iter()
        .map(|&k| {
            let d = sub(du[k], a);
            dot(d, d)
        })
        .sum::<f64>()
        / mask.len() as f64)
}

/// `F_∞` of a solution and a competitor on a subdomain.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MinimizerProbe {
    pub f_u: f64,
    pub f_v: f64,
    pub pass: bool,
}

/// Compares `sup_U H(x, Du)` with `sup_U H(x, Dv)` for a competitor `v` agreeing with `u` on the
/// discrete boundary of `U` (mask nodes with a 4-neighbour outside the mask).
pub fn absolute_minimizer_probe(
    u: &ScalarField,
    a: &CoefficientField,
    mask: &[usize],
    v: &ScalarField,
) -> Result<MinimizerProbe> {
    if u.grid() != v.grid() || u.grid() != a.grid() {
        return Err(Error::GridMismatch);
    }
    let grid = u.grid();
    let mut inside = vec![false; grid.len()];
    for &k in mask {
        if k >= grid.len() {
            return Err(Error::OutOfGrid { i: k, j: 0 });
        }
        inside[k] = true;
    }
    for &k in mask {
        let (i, j) = grid.ij(k);
        let edge = !grid.is_interior(i, j)
            || [(i - 1, j), (i + 1, j), (i, j - 1), (i, j + 1)]
                .iter()
                .any(|&(p, q)| !inside[grid.idx(p, q)]);
        if edge && u.values()[k] != v.values()[k] {
            return Err(Error::BoundaryMismatch { i, j });
        }
    }
    let f_u = operator::sup_energy(u, a, mask)?;
    let f_v = operator::sup_energy(v, a, mask)?;
    Ok(MinimizerProbe {
        f_u,
        f_v,
        pass: f_u <= f_v + 1e-12 * f_v.abs().max(1.0),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit(n: usize) -> Grid2D {
        Grid2D::from_bounds(0.0, 1.0, 0.0, 1.0, n).unwrap()
    }

    #[test]
    fn stencil_has_32_distinct_primitive_directions() {
        let s = stencil();
        assert_eq!(s.len(), 32);
        fn gcd(a: i64, b: i64) -> i64 {
            if b == 0 {
                a.abs()
            } else {
                gcd(b, a % b)
            }
        }
        assert!(s.iter().all(|&(a, b)| gcd(a, b) == 1));
    }

    #[test]
    fn distance_is_zero_at_source_and_euclidean_for_identity() {
        let g = unit(65);
        let a = CoefficientField::identity(g).unwrap();
        let d = intrinsic_distance(&a, [0.5, 0.5]).unwrap();
        assert_eq!(d.at(d.source_index()), 0.0);
        for k in 0..g.len() {
            let e = norm(sub(g.point_at(k), [0.5, 0.5]));
            assert!(d.at(k) >= e - 1e-12);
            assert!(d.at(k) <= 1.02 * e + 1e-12);
        }
        // axis and lattice directions are exact
        assert!((d.at(g.idx(62, 32)) - 30.0 / 64.0).abs() < 1e-12);
        assert!((d.at(g.idx(35, 34)) - (13.0f64).sqrt() / 64.0).abs() < 1e-12);
    }

    #[test]
    fn source_outside_grid_is_rejected() {
        let a = CoefficientField::identity(unit(9)).unwrap();
        assert!(intrinsic_distance(&a, [2.0, 0.5]).is_err());
    }

    #[test]
    fn slope_examples() {
        let g = unit(65);
        let a = CoefficientField::identity(g).unwrap();
        let d = intrinsic_distance(&a, [0.5, 0.5]).unwrap();
        let c = ScalarField::constant(g, 3.0).unwrap();
        assert_eq!(slope(&c, 0.25, &d).unwrap(), 0.0);
        let b = [0.6, -0.8];
        let lin = ScalarField::from_fn(g, |p| dot(b, p)).unwrap();
        for r in [0.0625, 0.125, 0.25] {
            let s = slope(&lin, r, &d).unwrap();
            assert!((s - 1.0).abs() <= 2.0 * g.h() / r, "{r} {s}");
        }
        assert!(slope(&lin, 5.0, &d).is_err());
    }

    #[test]
    fn lip_at_examples() {
        let g = unit(65);
        let a = CoefficientField::identity(g).unwrap();
        let d = intrinsic_distance(&a, [0.5, 0.5]).unwrap();
        let c = ScalarField::constant(g, 1.0).unwrap();
        assert_eq!(lip_at(&c, &d).unwrap().value, 0.0);
        let lin = ScalarField::from_fn(g, |p| 3.0 * p[0] + 4.0 * p[1]).unwrap();
        let l = lip_at(&lin, &d).unwrap();
        assert!((l.value - 5.0).abs() < 5.0 * 0.02);
        assert!([2.0, 3.0, 4.0]
            .iter()
            .any(|m| (l.shell - m * g.h()).abs() < 1e-15));
    }

    #[test]
    fn normalization_ratios_for_identity() {
        let (r1, r2) = normalization_ratios(Sym2::IDENTITY, [3.0, 4.0], 5.0);
        assert!((r1 - 5.0).abs() < 1e-15);
        assert!((r2 - 1.0).abs() < 1e-15);
    }

    #[test]
    fn blowup_of_affine_is_exact() {
        let g = unit(65);
        let lin = ScalarField::from_fn(g, |p| 1.0 + 2.0 * p[0] - p[1]).unwrap();
        let t = blowup_trace(&lin, [0.5, 0.5], &[0.25, 0.125, 0.0625]).unwrap();
        for (e, x) in t.slopes.iter().zip(&t.excess) {
            assert!((e[0] - 2.0).abs() < 1e-12 && (e[1] + 1.0).abs() < 1e-12);
            assert!(*x < 1e-12);
        }
        assert!(t.consecutive_distances().iter().all(|d| *d < 1e-12));
    }

    #[test]
    fn blowup_of_square_excess_is_radius() {
        let g = Grid2D::from_bounds(-1.0, 1.0, -1.0, 1.0, 129).unwrap();
        let q = ScalarField::from_fn(g, |p| p[0] * p[0]).unwrap();
        let t = blowup_trace(&q, [0.0, 0.0], &[0.5, 0.25, 0.125]).unwrap();
        for ((r, e), x) in t.radii.iter().zip(&t.slopes).zip(&t.excess) {
            assert!(norm(*e) < 1e-12);
            let sup = (0..g.len())
                .map(|k| g.point_at(k))
                .filter(|p| norm(*p) < *r)
                .map(|p| p[0] * p[0])
                .fold(0.0, f64::max);
            assert!((x - sup / r).abs() < 1e-14);
            assert!(*x <= *r);
        }
    }

    #[test]
    fn blowup_rejects_bad_ladders() {
        let g = unit(33);
        let u = ScalarField::constant(g, 0.0).unwrap();
        assert!(blowup_trace(&u, [0.5, 0.5], &[0.1, 0.2]).is_err());
        assert!(matches!(
            blowup_trace(&u, [0.2, 0.5], &[0.3]),
            Err(Error::EscapesDomain { .. })
        ));
    }

    #[test]
    fn blowup_csv_has_header_and_rows() {
        let g = unit(33);
        let u = ScalarField::from_fn(g, |p| p[0]).unwrap();
        let t = blowup_trace(&u, [0.5, 0.5], &[0.25, 0.125]).unwrap();
        let mut buf = Vec::new();
        t.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "r,e1,e2,excess");
        assert_eq!(lines.len(), 3);
    }

    #[test]
    fn gradient_near_examples() {
        let g = Grid2D::from_bounds(-1.5, 1.5, -1.5, 1.5, 97).unwrap();
        let b = [0.3, 0.7];
        let lin = ScalarField::from_fn(g, |p| dot(b, p)).unwrap();
        let r = gradient_near(&lin, [0.0, 0.0], 1.0, b, 0.0).unwrap();
        assert!(r.distance < 1e-12);
        assert_eq!(r.pass, Some(true));
        let eta = 0.05;
        let v = ScalarField::from_fn(g, |p| dot(b, p) + eta * p[0].sin()).unwrap();
        let r = gradient_near(&v, [0.0, 0.0], 1.0, b, eta).unwrap();
        assert!(r.hypothesis_ok);
        assert!(r.distance <= 4.0 * eta);
        let r = gradient_near(&v, [0.0, 0.0], 1.0, b, 0.001).unwrap();
        assert!(!r.hypothesis_ok);
        assert_eq!(r.pass, None);
    }

    #[test]
    fn lebesgue_examples() {
        let g = Grid2D::from_bounds(-1.0, 1.0, -1.0, 1.0, 129).unwrap();
        let a = CoefficientField::identity(g).unwrap();
        let d = intrinsic_distance(&a, [0.0, 0.0]).unwrap();
        let lin = ScalarField::from_fn(g, |p| 2.0 * p[0] + p[1]).unwrap();
        assert!(lebesgue_deviation(&lin, &d, 0.25, Some([2.0, 1.0])).unwrap() < 1e-24);
        assert!(lebesgue_deviation(&lin, &d, 0.25, None).unwrap() < 1e-24);
        let q = ScalarField::from_fn(g, |p| p[0] * p[0]).unwrap();
        let r = 0.5;
        let dev = lebesgue_deviation(&q, &d, r, Some([0.0, 0.0])).unwrap();
        assert!((dev - r * r).abs() < 0.1 * r * r, "{dev}");
        assert!(lebesgue_deviation(&q, &d, 0.02, None).is_err());
    }

    #[test]
    fn minimizer_probe_examples() {
        let g = unit(33);
        let a = CoefficientField::constant(g, Sym2::new(1.2, 0.1, 0.9)).unwrap();
        let u = ScalarField::from_fn(g, |p| p[0] - 2.0 * p[1]).unwrap();
        let mask = ball_mask(&g, [0.5, 0.5], 0.3, BallMetric::Euclidean).unwrap();
        let same = absolute_minimizer_probe(&u, &a, &mask, &u).unwrap();
        assert_eq!(same.f_u, same.f_v);
        assert!(same.pass);
        let bump = ScalarField::from_fn(g, |p| {
            let r2 = (p[0] - 0.5).powi(2) + (p[1] - 0.5).powi(2);
            u.interpolate(p).unwrap()
                + if r2 < 0.04 {
                    0.1 * (1.0 - r2 / 0.04).powi(3)
                } else {
                    0.0
                }
        })
        .unwrap();
        let p = absolute_minimizer_probe(&u, &a, &mask, &bump).unwrap();
        assert!(p.pass && p.f_v > p.f_u);
        let shifted = ScalarField::from_fn(g, |p| p[0] - 2.0 * p[1] + 0.01).unwrap();
        assert!(matches!(
            absolute_minimizer_probe(&u, &a, &mask, &shifted),
            Err(Error::BoundaryMismatch { .. })
        ));
    }
}
