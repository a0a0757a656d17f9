//! Discrete exponential energy `Σ_q w_q exp(H(x_q, ∇u_h(x_q)) / ε)` over bilinear cells.
//!
//! Every grid cell carries the bilinear interpolant of the nodal values and a 2×2 Gauss rule
//! (weights `h²/4`); `A` at a Gauss point is the bilinear interpolant of the nodal matrices.
//! Each `H_q` is a convex quadratic of the nodal values and `exp` is convex increasing, so the
//! discrete energy is convex.
//!
//! Values are kept in log-scaled form. [`StabilizedEnergy`] stores `M = max_q H_q/ε` and
//! `Σ_q w_q exp(H_q/ε − M)`; the gradient is reported on the same scale. The Newton system
//! uses a per-node scale instead (see [`Quadrature::local_scales`]) because the global one
//! underflows wherever `H` sits more than ~700ε below its maximum.

use crate::coefficients::CoefficientField;
use crate::grid::{Grid2D, ScalarField};
use crate::mat::{dot, Sym2};
use serde::Serialize;

/// Energy as `exp(scale) · mantissa`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StabilizedEnergy {
    pub scale: f64,
    pub mantissa: f64,
}

impl StabilizedEnergy {
    /// `log(energy)`.
    pub fn ln(&self) -> f64 {
        self.scale + self.mantissa.ln()
    }

    /// Energy expressed relative to `exp(scale)`, i.e. `energy / exp(scale)`.
    pub fn at_scale(&self, scale: f64) -> f64 {
        self.mantissa * (self.scale - scale).exp()
    }

    /// Plain value; overflows to infinity for large scales.
    pub fn value(&self) -> f64 {
        self.at_scale(0.0)
    }
}

const GAUSS_LO: f64 = 0.5 - 0.288_675_134_594_812_9; // 1/2 - 1/(2√3)
const GAUSS_HI: f64 = 0.5 + 0.288_675_134_594_812_9;
const GAUSS: [[f64; 2]; 4] = [
    [GAUSS_LO, GAUSS_LO],
    [GAUSS_HI, GAUSS_LO],
    [GAUSS_LO, GAUSS_HI],
    [GAUSS_HI, GAUSS_HI],
];

/// Local node order in a cell: (0,0), (1,0), (0,1), (1,1).
const CORNERS: [(usize, usize); 4] = [(0, 0), (1, 0), (0, 1), (1, 1)];

fn basis(s: f64, t: f64) -> [f64; 4] {
    [(1.0 - s) * (1.0 - t), s * (1.0 - t), (1.0 - s) * t, s * t]
}

/// Reference-cell basis gradients (multiply by 1/h).
fn basis_grad(s: f64, t: f64) -> [[f64; 2]; 4] {
    [
        [-(1.0 - t), -(1.0 - s)],
        [1.0 - t, -s],
        [-t, 1.0 - s],
        [t, s],
    ]
}

/// Per-cell Gauss data for one grid and coefficient field.
#[derive(Debug, Clone)]
pub struct Quadrature {
    grid: Grid2D,
    // A at each Gauss point, cell-major
    a_q: Vec<Sym2>,
    // physical basis gradients per Gauss point and local node
    grads: [[[f64; 2]; 4]; 4],
    weight: f64,
}

/// Per-Gauss-point state of a field: `s_q = H_q / ε` and `A_q ∇u_q`.
#[derive(Debug, Clone)]
pub(crate) struct PointState {
    pub s: Vec<f64>,
    pub flux: Vec<[f64; 2]>,
}

impl Quadrature {
    pub fn new(a: &CoefficientField) -> Self {
        let grid = *a.grid();
        let (nx, ny, h) = (grid.nx(), grid.ny(), grid.h());
        let mut a_q = Vec::with_capacity((nx - 1) * (ny - 1) * 4);
        for cj in 0..ny - 1 {
            for ci in 0..nx - 1 {
                let corner = CORNERS.map(|(di, dj)| a.at(ci + di, cj + dj));
                for [s, t] in GAUSS {
                    let w = basis(s, t);
                    a_q.push(
                        (w[0] * corner[0])
                            + (w[1] * corner[1])
                            + (w[2] * corner[2])
                            + (w[3] * corner[3]),
                    );
                }
            }
        }
        let grads = GAUSS.map(|[s, t]| basis_grad(s, t).map(|g| [g[0] / h, g[1] / h]));
        Quadrature {
            grid,
            a_q,
            grads,
            weight: 0.25 * h * h,
        }
    }

    pub fn grid(&self) -> &Grid2D {
        &self.grid
    }

    pub(crate) fn weight(&self) -> f64 {
        self.weight
    }

    #[inline]
    pub(crate) fn cell_nodes(&self, ci: usize, cj: usize) -> [usize; 4] {
        CORNERS.map(|(di, dj)| self.grid.idx(ci + di, cj + dj))
    }

    pub(crate) fn cells(&self) -> impl Iterator<Item = (usize, usize, usize)> + '_ {
        let nxc = self.grid.nx() - 1;
        (0..self.grid.ny() - 1).flat_map(move |cj| (0..nxc).map(move |ci| (cj * nxc + ci, ci, cj)))
    }

    #[inline]
    pub(crate) fn a_at(&self, cell: usize, q: usize) -> Sym2 {
        self.a_q[4 * cell + q]
    }

    #[inline]
    pub(crate) fn grad(&self, q: usize, local: usize) -> [f64; 2] {
        self.grads[q][local]
    }

    pub(crate) fn state(&self, u: &[f64], eps: f64) -> PointState {
        let n = self.a_q.len();
        let mut s = Vec::with_capacity(n);
        let mut flux = Vec::with_capacity(n);
        for (cell, ci, cj) in self.cells() {
            let nodes = self.cell_nodes(ci, cj);
            for q in 0..4 {
                let mut du = [0.0, 0.0];
                for (a, &node) in nodes.iter().enumerate() {
                    let g = self.grads[q][a];
                    du[0] += u[node] * g[0];
                    du[1] += u[node] * g[1];
                }
                let aq = self.a_at(cell, q);
                let f = aq.apply(du);
                s.push(dot(f, du) / eps);
                flux.push(f);
            }
        }
        PointState { s, flux }
    }

    pub(crate) fn energy_from_state(&self, st: &PointState) -> StabilizedEnergy {
        let scale = st.s.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mantissa = self.weight * st.s.iter().map(|&x| (x - scale).exp()).sum::<f64>();
        StabilizedEnergy { scale, mantissa }
    }

    pub fn energy(&self, u: &ScalarField, eps: f64) -> StabilizedEnergy {
        self.energy_from_state(&self.state(u.values(), eps))
    }

    /// Gradient of the energy divided by `exp(scale)`; boundary entries are zero.
    pub(crate) fn gradient_at_scale(&self, st: &PointState, eps: f64, scale: f64) -> Vec<f64> {
        let mut g = vec![0.0; self.grid.len()];
        let coef = 2.0 * self.weight / eps;
        for (cell, ci, cj) in self.cells() {
            let nodes = self.cell_nodes(ci, cj);
            for q in 0..4 {
                let idx = 4 * cell + q;
                let e = (st.s[idx] - scale).exp() * coef;
                if e == 0.0 {
                    continue;
                }
                for (a, &node) in nodes.iter().enumerate() {
                    g[node] += e * dot(st.flux[idx], self.grads[q][a]);
                }
            }
        }
        for k in self.grid.boundary_indices() {
            g[k] = 0.0;
        }
        g
    }

    /// `m_i = max over Gauss points touching node i of H_q/ε`.
    pub(crate) fn local_scales(&self, st: &PointState) -> Vec<f64> {
        let mut m = vec![f64::NEG_INFINITY; self.grid.len()];
        for (cell, ci, cj) in self.cells() {
            let cmax = (0..4)
                .map(|q| st.s[4 * cell + q])
                .fold(f64::NEG_INFINITY, f64::max);
            for node in self.cell_nodes(ci, cj) {
                m[node] = m[node].max(cmax);
            }
        }
        m
    }

    /// Gradient with row `i` divided by `exp(scales[i])`; boundary entries are zero.
    pub(crate) fn locally_scaled_gradient(
        &self,
        st: &PointState,
        eps: f64,
        scales: &[f64],
    ) -> Vec<f64> {
        let mut g = vec![0.0; self.grid.len()];
        let coef = 2.0 * self.weight / eps;
        for (cell, ci, cj) in self.cells() {
            let nodes = self.cell_nodes(ci, cj);
            for q in 0..4 {
                let idx = 4 * cell + q;
                for (a, &node) in nodes.iter().enumerate() {
                    let e = (st.s[idx] - scales[node]).exp() * coef;
                    g[node] += e * dot(st.flux[idx], self.grads[q][a]);
                }
            }
        }
        for k in self.grid.boundary_indices() {
            g[k] = 0.0;
        }
        g
    }
}

/// Discrete energy of `u` in stabilized form.
pub fn energy(u: &ScalarField, a: &CoefficientField, eps: f64) -> crate::Result<StabilizedEnergy> {
    check_eps(eps)?;
    if u.grid() != a.grid() {
        return Err(crate::Error::GridMismatch);
    }
    Ok(Quadrature::new(a).energy(u, eps))
}

/// Exact gradient of the discrete energy divided by `exp(energy(u).scale)`; zero on the boundary.
pub fn energy_gradient(
    u: &ScalarField,
    a: &CoefficientField,
    eps: f64,
) -> crate::Result<ScalarField> {
    check_eps(eps)?;
    if u.grid() != a.grid() {
        return Err(crate::Error::GridMismatch);
    }
    let quad = Quadrature::new(a);
    let st = quad.state(u.values(), eps);
    let scale = quad.energy_from_state(&st).scale;
    ScalarField::new(*u.grid(), quad.gradient_at_scale(&st, eps, scale))
}

pub(crate) fn check_eps(eps: f64) -> crate::Result<()> {
    if eps > 0.0 && eps.is_finite() {
        Ok(())
    } else {
        Err(crate::Error::InvalidParameter(format!(
            "eps must be positive, got {eps}"
        )))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid() -> Grid2D {
        Grid2D::from_bounds(0.0, 1.0, 0.0, 0.5, 9).unwrap()
    }

    #[test]
    fn zero_field_energy_is_area() {
        let g = grid();
        let a = CoefficientField::constant(g, Sym2::new(1.3, 0.2, 0.7)).unwrap();
        let u = ScalarField::constant(g, 0.0).unwrap();
        let e = energy(&u, &a, 0.1).unwrap();
        assert_eq!(e.scale, 0.0);
        assert!((e.mantissa - 0.5).abs() < 1e-14);
    }

    #[test]
    fn affine_field_energy_has_constant_integrand() {
        let g = grid();
        let a = CoefficientField::identity(g).unwrap();
        let u = ScalarField::from_fn(g, |p| 2.0 * p[0] - p[1]).unwrap();
        let e = energy(&u, &a, 0.01).unwrap();
        assert!((e.scale - 5.0 / 0.01).abs() < 1e-10);
        assert!((e.mantissa - 0.5).abs() < 1e-12);
    }

    #[test]
    fn affine_gradient_vanishes_in_interior() {
        let g = grid();
        let a = CoefficientField::constant(g, Sym2::new(1.3, 0.2, 0.7)).unwrap();
        let u = ScalarField::from_fn(g, |p| 0.3 * p[0] + 0.8 * p[1]).unwrap();
        let grad = energy_gradient(&u, &a, 0.05).unwrap();
        assert!(grad.max_abs() < 1e-10, "{}", grad.max_abs());
    }

    #[test]
    fn rejects_bad_eps() {
        let g = grid();
        let a = CoefficientField::identity(g).unwrap();
        let u = ScalarField::constant(g, 0.0).unwrap();
        assert!(energy(&u, &a, 0.0).is_err());
        assert!(energy_gradient(&u, &a, -1.0).is_err());
    }

    #[test]
    fn bilinear_interpolant_recovers_bilinear_gradient() {
        // u = xy is bilinear: ∇u at Gauss points must be exact.
        let g = grid();
        let a = CoefficientField::identity(g).unwrap();
        let quad = Quadrature::new(&a);
        let u = ScalarField::from_fn(g, |p| p[0] * p[1]).unwrap();
        let st = quad.state(u.values(), 1.0);
        for (cell, ci, cj) in quad.cells() {
            let x0 = g.point(ci, cj);
            for (q, [s, t]) in GAUSS.iter().enumerate() {
                let p = [x0[0] + s * g.h(), x0[1] + t * g.h()];
                let expect = p[1] * p[1] + p[0] * p[0];
                assert!((st.s[4 * cell + q] - expect).abs() < 1e-13);
            }
        }
    }
}
