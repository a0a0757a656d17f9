//! The coefficient field `A(x)`: validation, C^{1,1} seminorms, smoothing, pullbacks and presets.

use crate::error::{Error, Result};
use crate::grid::{self, Grid2D, ScalarField, SymMatrixField};
use crate::mat::Sym2;
use serde::{Deserialize, Serialize};

/// Largest ellipticity constant under which vanishing-viscosity limits are known to converge (2^{1/5}).
pub fn convergence_threshold() -> f64 {
    2f64.powf(0.2)
}

/// Largest ellipticity constant admitted by the boundary barrier construction (2^{1/4}).
pub fn barrier_threshold() -> f64 {
    2f64.powf(0.25)
}

/// `A(x)` together with its ellipticity constant, seminorms and entry-derivative fields.
#[derive(Debug, Clone)]
pub struct CoefficientField {
    matrix: SymMatrixField,
    ellipticity: f64,
    sup_norm: f64,
    lip: f64,
    hess: f64,
    // ∂A/∂x and ∂A/∂y, entrywise, with the grid gradient stencil.
    dx: SymMatrixField,
    dy: SymMatrixField,
}

impl CoefficientField {
    pub fn new(matrix: SymMatrixField) -> Result<Self> {
        let ellipticity = ellipticity_constant(&matrix)?;
        let (lip, hess) = c11_seminorms(&matrix);
        let sup_norm = matrix
            .values()
            .iter()
            .map(|m| m.eigenvalues().1)
            .fold(0.0, f64::max);
        let (dx, dy) = entry_derivatives(&matrix);
        Ok(CoefficientField {
            matrix,
            ellipticity,
            sup_norm,
            lip,
            hess,
            dx,
            dy,
        })
    }

    pub fn constant(grid: Grid2D, m: Sym2) -> Result<Self> {
        CoefficientField::new(SymMatrixField::constant(grid, m)?)
    }

    pub fn identity(grid: Grid2D) -> Result<Self> {
        CoefficientField::constant(grid, Sym2::IDENTITY)
    }

    pub fn grid(&self) -> &Grid2D {
        self.matrix.grid()
    }
    pub fn matrix(&self) -> &SymMatrixField {
        &self.matrix
    }
    #[inline]
    pub fn at(&self, i: usize, j: usize) -> Sym2 {
        self.matrix.get(i, j)
    }
    /// `(∂A/∂x, ∂A/∂y)` at a node.
    #[inline]
    pub fn derivatives_at(&self, i: usize, j: usize) -> (Sym2, Sym2) {
        (self.dx.get(i, j), self.dy.get(i, j))
    }
    pub fn ellipticity(&self) -> f64 {
        self.ellipticity
    }
    /// `max_x λ_max(A(x))`.
    pub fn sup_norm(&self) -> f64 {
        self.sup_norm
    }
    pub fn lip(&self) -> f64 {
        self.lip
    }
    pub fn hess(&self) -> f64 {
        self.hess
    }

    /// `(2 − γ)/L² − L²`; positive only for small enough `L` and `γ`.
    pub fn gamma_tilde(&self, gamma: f64) -> f64 {
        let l2 = self.ellipticity * self.ellipticity;
        (2.0 - gamma) / l2 - l2
    }

    /// Smallness bound on `lip(A)` valid for every barrier vertex in the domain:
    /// `γ̃ / (2 · diam) / sup_norm`. `None` when `γ̃ ≤ 0`.
    pub fn delta0(&self, gamma: f64) -> Option<f64> {
        let gt = self.gamma_tilde(gamma);
        (gt > 0.0).then(|| gt / (2.0 * self.grid().diameter()) / self.sup_norm)
    }

    pub fn flags(&self) -> EllipticityFlags {
        EllipticityFlags {
            ellipticity: self.ellipticity,
            below_convergence_threshold: self.ellipticity < convergence_threshold(),
            below_barrier_threshold: self.ellipticity < barrier_threshold(),
        }
    }
}

/// Which ellipticity thresholds a coefficient field satisfies; reported, never enforced.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EllipticityFlags {
    pub ellipticity: f64,
    pub below_convergence_threshold: bool,
    pub below_barrier_threshold: bool,
}

/// `L = max_x max(λ_max(A(x)), 1/λ_min(A(x)))`.
pub fn ellipticity_constant(a: &SymMatrixField) -> Result<f64> {
    let grid = *a.grid();
    let mut l: f64 = 1.0;
    for (k, m) in a.values().iter().enumerate() {
        let (lo, hi) = m.eigenvalues();
        if !(lo > 0.0) {
            let (i, j) = grid.ij(k);
            return Err(Error::NotPositiveDefinite { i, j, min_eig: lo });
        }
        l = l.max(hi).max(1.0 / lo);
    }
    Ok(l)
}

fn entry_fields(a: &SymMatrixField) -> [ScalarField; 3] {
    [a.entry(|m| m.a11), a.entry(|m| m.a12), a.entry(|m| m.a22)]
}

fn entry_derivatives(a: &SymMatrixField) -> (SymMatrixField, SymMatrixField) {
    let grid = *a.grid();
    let grads = entry_fields(a).map(|f| grid::gradient_raw(&grid, f.values()));
    let build = |c: usize| {
        let values = (0..grid.len())
            .map(|k| Sym2::new(grads[0][k][c], grads[1][k][c], grads[2][k][c]))
            .collect();
        SymMatrixField::new(grid, values).expect("derivatives of finite fields are finite")
    };
    (build(0), build(1))
}

/// Discrete `(‖DA‖_∞, ‖D²A‖_∞)`: largest |first difference| over all nodes and entries,
/// largest |second difference| over interior nodes and entries.
pub fn c11_seminorms(a: &SymMatrixField) -> (f64, f64) {
    let grid = *a.grid();
    let mut lip: f64 = 0.0;
    let mut hess: f64 = 0.0;
    for f in entry_fields(a) {
        for d in grid::gradient_raw(&grid, f.values()) {
            lip = lip.max(d[0].abs()).max(d[1].abs());
        }
        for k in grid.interior_indices() {
            let (i, j) = grid.ij(k);
            hess = hess.max(grid::hessian_raw(&grid, f.values(), i, j).max_abs_entry());
        }
    }
    (lip, hess)
}

/// Output of [`smooth_coefficients`].
#[derive(Debug, Clone)]
pub struct Smoothed {
    pub field: CoefficientField,
    /// Kernel narrower than the grid spacing; the input was returned unchanged.
    pub below_resolution: bool,
}

fn gaussian_weights(sigma_nodes: f64, max_radius: usize) -> Vec<f64> {
    let radius = ((3.0 * sigma_nodes).ceil() as usize).min(max_radius);
    let w: Vec<f64> = (0..=radius)
        .map(|k| (-0.5 * (k as f64 / sigma_nodes).powi(2)).exp())
        .collect();
    let total = w[0] + 2.0 * w[1..].iter().sum::<f64>();
    w.into_iter().map(|x| x / total).collect()
}

// One pass of symmetric convolution along a line with odd reflection about the end nodes,
// which keeps affine data affine.
fn convolve_line(line: &[f64], w: &[f64]) -> Vec<f64> {
    let n = line.len() as isize;
    let at = |m: isize| -> f64 {
        if m < 0 {
            2.0 * line[0] - line[(-m) as usize]
        } else if m >= n {
            2.0 * line[(n - 1) as usize] - line[(2 * (n - 1) - m) as usize]
        } else {
            line[m as usize]
        }
    };
    (0..n)
        .map(|p| {
            let mut s = w[0] * line[p as usize];
            for (k, wk) in w.iter().enumerate().skip(1) {
                let k = k as isize;
                s += wk * (at(p - k) + at(p + k));
            }
            s
        })
        .collect()
}

fn smooth_scalar(f: &ScalarField, sigma_nodes: f64) -> ScalarField {
    let g = *f.grid();
    let (nx, ny) = (g.nx(), g.ny());
    let wx = gaussian_weights(sigma_nodes, nx - 1);
    let wy = gaussian_weights(sigma_nodes, ny - 1);
    let mut vals = f.values().to_vec();
    for j in 0..ny {
        let row = convolve_line(&vals[j * nx..(j + 1) * nx], &wx);
        vals[j * nx..(j + 1) * nx].copy_from_slice(&row);
    }
    for i in 0..nx {
        let col: Vec<f64> = (0..ny).map(|j| vals[j * nx + i]).collect();
        for (j, v) in convolve_line(&col, &wy).into_iter().enumerate() {
            vals[j * nx + i] = v;
        }
    }
    ScalarField::new(g, vals).expect("convolution of finite data is finite")
}

/// Gaussian smoothing of each entry with standard deviation `eps`, followed by clamping the
/// eigenvalues to `[1/(2L), 2L]`.
pub fn smooth_coefficients(a: &CoefficientField, eps: f64) -> Result<Smoothed> {
    if !(eps > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "eps must be positive, got {eps}"
        )));
    }
    let h = a.grid().h();
    if eps < h {
        return Ok(Smoothed {
            field: a.clone(),
            below_resolution: true,
        });
    }
    let sigma_nodes = eps / h;
    let [a11, a12, a22] = entry_fields(&a.matrix).map(|f| smooth_scalar(&f, sigma_nodes));
    let mixed = SymMatrixField::from_entries(&a11, &a12, &a22)?;
    let (lo, hi) = (0.5 / a.ellipticity, 2.0 * a.ellipticity);
    let clamped = SymMatrixField::new(
        *a.grid(),
        mixed
            .values()
            .iter()
            .map(|m| {
                let (l, u) = m.eigenvalues();
                if l >= lo && u <= hi {
                    *m
                } else {
                    m.map_eigen(|e| e.clamp(lo, hi))
                }
            })
            .collect(),
    )?;
    Ok(Smoothed {
        field: CoefficientField::new(clamped)?,
        below_resolution: false,
    })
}

fn check_mapped_corners(
    source: &Grid2D,
    target: &Grid2D,
    map: impl Fn([f64; 2]) -> [f64; 2],
) -> Result<()> {
    let b = target.bounds();
    let corners = [[b[0], b[2]], [b[1], b[2]], [b[0], b[3]], [b[1], b[3]]];
    let bad: Vec<[f64; 2]> = corners
        .into_iter()
        .filter(|&c| !source.contains(map(c)))
        .collect();
    if bad.is_empty() {
        Ok(())
    } else {
        Err(Error::EscapesDomain { corners: bad })
    }
}

/// `y ↦ A(x0 + M y)` sampled on `target` by bilinear interpolation. `m` is row-major.
pub fn pullback(
    a: &CoefficientField,
    x0: [f64; 2],
    m: [[f64; 2]; 2],
    target: Grid2D,
) -> Result<CoefficientField> {
    let det = m[0][0] * m[1][1] - m[0][1] * m[1][0];
    if det == 0.0 || !det.is_finite() {
        return Err(Error::InvalidParameter(
            "pullback matrix is singular".into(),
        ));
    }
    let map = |y: [f64; 2]| {
        [
            x0[0] + m[0][0] * y[0] + m[0][1] * y[1],
            x0[1] + m[1][0] * y[0] + m[1][1] * y[1],
        ]
    };
    check_mapped_corners(a.grid(), &target, map)?;
    let values = (0..target.len())
        .map(|k| {
            a.matrix
                .interpolate(map(target.point_at(k)))
                .expect("corners checked; the image is convex")
        })
        .collect();
    CoefficientField::new(SymMatrixField::new(target, values)?)
}

/// `y ↦ (u(x0 + r y) − u(x0)) / r` sampled on `target` by bilinear interpolation.
pub fn rescale_solution(
    u: &ScalarField,
    x0: [f64; 2],
    r: f64,
    target: Grid2D,
) -> Result<ScalarField> {
    if r == 0.0 || !r.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "scale must be nonzero, got {r}"
        )));
    }
    let map = |y: [f64; 2]| [x0[0] + r * y[0], x0[1] + r * y[1]];
    check_mapped_corners(u.grid(), &target, map)?;
    let base = u
        .interpolate(x0)
        .ok_or(Error::EscapesDomain { corners: vec![x0] })?;
    let values = (0..target.len())
        .map(|k| (u.interpolate(map(target.point_at(k))).unwrap() - base) / r)
        .collect();
    ScalarField::new(target, values)
}

/// Named coefficient scenarios.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "snake_case")]
pub enum CoefficientPreset {
    Identity,
    Constant {
        a11: f64,
        a12: f64,
        a22: f64,
    },
    /// `A = I` at the node nearest the origin with `‖DA‖ + ‖D²A‖ ≤ λ`.
    Smooth {
        lambda: f64,
    },
}

/// Perturbation amplitude of the smooth preset relative to λ. Each entry is `c·sin(·)` of a
/// unit-speed argument, so first and second differences are bounded by `c` (centered) and
/// by `c(1 + O(h²))` (one-sided); `2c = 0.9λ` leaves room for the latter.
const SMOOTH_AMPLITUDE: f64 = 0.45;

impl CoefficientPreset {
    pub fn from_name(name: &str, params: &[f64]) -> Result<Self> {
        let arity = |n: usize| {
            if params.len() == n {
                Ok(())
            } else {
                Err(Error::InvalidParameter(format!(
                    "preset {name} takes {n} parameters, got {}",
                    params.len()
                )))
            }
        };
        match name {
            "identity" => arity(0).map(|_| CoefficientPreset::Identity),
            "constant" => arity(3).map(|_| CoefficientPreset::Constant {
                a11: params[0],
                a12: params[1],
                a22: params[2],
            }),
            "smooth" => arity(1).map(|_| CoefficientPreset::Smooth { lambda: params[0] }),
            other => Err(Error::InvalidParameter(format!(
                "unknown coefficient preset {other:?}"
            ))),
        }
    }

    pub fn build(&self, grid: Grid2D) -> Result<CoefficientField> {
        match *self {
            CoefficientPreset::Identity => CoefficientField::identity(grid),
            CoefficientPreset::Constant { a11, a12, a22 } => {
                let m = Sym2::new(a11, a12, a22);
                let (lo, _) = m.eigenvalues();
                if !(lo > 0.0) || !m.is_finite() {
                    return Err(Error::InvalidParameter(format!(
                        "constant({a11}, {a12}, {a22}) is not positive definite"
                    )));
                }
                CoefficientField::constant(grid, m)
            }
            CoefficientPreset::Smooth { lambda } => {
                if !(lambda > 0.0 && lambda < 1.0) {
                    return Err(Error::InvalidParameter(format!(
                        "smooth preset needs 0 < lambda < 1, got {lambda}"
                    )));
                }
                let b = grid.bounds();
                let o = [0f64.clamp(b[0], b[1]), 0f64.clamp(b[2], b[3])];
                let (ci, cj) = grid.nearest(o).expect("clamped into the rectangle");
                let c0 = grid.point(ci, cj);
                let c = SMOOTH_AMPLITUDE * lambda;
                CoefficientField::new(SymMatrixField::from_fn(grid, |p| {
                    let (x, y) = (p[0] - c0[0], p[1] - c0[1]);
                    Sym2::new(
                        1.0 + c * x.sin(),
                        0.5 * c * ((x + y) / std::f64::consts::SQRT_2).sin(),
                        1.0 + c * y.sin(),
                    )
                })?)
            }
        }
    }
}
