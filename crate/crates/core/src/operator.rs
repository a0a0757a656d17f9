//! Pointwise Hamiltonian, Aronsson operator and regularized residual.
//!
//! With `H(x, p) = ⟨A(x) p, p⟩` the Aronsson operator `⟨D_x(H(x, Du)), D_p H(x, Du)⟩`
//! expands by the product rule into
//!
//! ```text
//! 4 ⟨A Du, D²u A Du⟩ + 2 Σ_k ⟨∂_k A Du, Du⟩ (A Du)_k
//! ```
//!
//! which is what [`aronsson_operator`] evaluates, using the grid's centered gradient and
//! Hessian stencils and the precomputed entry derivatives of `A`. For `A = I` this is
//! `4 Δ∞u`. The regularized residual is `−𝒜[u] − ν div(A ∇u)`.

use crate::coefficients::CoefficientField;
use crate::error::{Error, Result};
use crate::grid::{self, InteriorField, ScalarField, VectorField};
use crate::mat::dot;
use serde::Serialize;

fn same_grid(a: &crate::grid::Grid2D, b: &crate::grid::Grid2D) -> Result<()> {
    if a == b {
        Ok(())
    } else {
        Err(Error::GridMismatch)
    }
}

/// `H(x, p(x)) = ⟨A(x) p(x), p(x)⟩` at every node.
pub fn hamiltonian(a: &CoefficientField, p: &VectorField) -> Result<ScalarField> {
    same_grid(a.grid(), p.grid())?;
    let values = a
        .matrix()
        .values()
        .iter()
        .zip(p.values())
        .map(|(m, &v)| m.quad(v))
        .collect();
    ScalarField::new(*a.grid(), values)
}

#[inline]
fn aronsson_at(
    a: &CoefficientField,
    du: [f64; 2],
    d2u: crate::mat::Sym2,
    i: usize,
    j: usize,
) -> f64 {
    let m = a.at(i, j);
    let (dax, day) = a.derivatives_at(i, j);
    let adu = m.apply(du);
    let principal = dot(adu, d2u.apply(adu));
    let coeff = dax.quad(du) * adu[0] + day.quad(du) * adu[1];
    4.0 * principal + 2.0 * coeff
}

/// Aronsson operator at interior nodes.
pub fn aronsson_operator(u: &ScalarField, a: &CoefficientField) -> Result<InteriorField> {
    same_grid(u.grid(), a.grid())?;
    let g = *u.grid();
    let du = grid::gradient_raw(&g, u.values());
    let d2u = grid::hessian(u);
    Ok(InteriorField::from_interior_fn(g, |i, j| {
        aronsson_at(a, du[g.idx(i, j)], d2u.get(i, j), i, j)
    }))
}

/// `4 ⟨Du, D²u Du⟩` with the same stencils; equals [`aronsson_operator`] for `A = I`.
pub fn scaled_infinity_laplacian(u: &ScalarField) -> InteriorField {
    let g = *u.grid();
    let du = grid::gradient_raw(&g, u.values());
    let d2u = grid::hessian(u);
    InteriorField::from_interior_fn(g, |i, j| {
        let p = du[g.idx(i, j)];
        4.0 * dot(p, d2u.get(i, j).apply(p))
    })
}

/// `A ∇u` as a node field.
pub fn flux(u: &ScalarField, a: &CoefficientField) -> Result<VectorField> {
    same_grid(u.grid(), a.grid())?;
    let du = grid::gradient_raw(u.grid(), u.values());
    VectorField::new(
        *u.grid(),
        a.matrix()
            .values()
            .iter()
            .zip(du)
            .map(|(m, p)| m.apply(p))
            .collect(),
    )
}

/// `−𝒜[u] − viscosity · div(A ∇u)` at interior nodes.
pub fn regularized_residual(
    u: &ScalarField,
    a: &CoefficientField,
    viscosity: f64,
) -> Result<InteriorField> {
    if !(viscosity >= 0.0) {
        return Err(Error::InvalidParameter(format!(
            "viscosity must be non-negative, got {viscosity}"
        )));
    }
    let op = aronsson_operator(u, a)?;
    let div = grid::divergence(&flux(u, a)?);
    let g = *u.grid();
    Ok(InteriorField::from_interior_fn(g, |i, j| {
        let k = g.idx(i, j);
        -op.raw()[k] - viscosity * div.raw()[k]
    }))
}

/// Everything the operator module knows about one interior node.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OperatorSample {
    pub index: usize,
    pub hamiltonian: f64,
    pub aronsson: f64,
    pub residual: f64,
    pub viscosity: f64,
}

pub fn sample(
    u: &ScalarField,
    a: &CoefficientField,
    viscosity: f64,
    i: usize,
    j: usize,
) -> Result<OperatorSample> {
    let g = *u.grid();
    g.check_node(i, j)?;
    if !g.is_interior(i, j) {
        return Err(Error::BoundaryPoint { i, j });
    }
    let res = regularized_residual(u, a, viscosity)?;
    let op = aronsson_operator(u, a)?;
    let du = grid::gradient_raw(&g, u.values())[g.idx(i, j)];
    Ok(OperatorSample {
        index: g.idx(i, j),
        hamiltonian: a.at(i, j).quad(du),
        aronsson: op.at(i, j)?,
        residual: res.at(i, j)?,
        viscosity,
    })
}

/// `max` of `H(x, Du(x))` over the interior nodes of `mask`.
pub fn sup_energy(u: &ScalarField, a: &CoefficientField, mask: &[usize]) -> Result<f64> {
    same_grid(u.grid(), a.grid())?;
    let g = *u.grid();
    let du = grid::gradient_raw(&g, u.values());
    let mut best: Option<f64> = None;
    for &k in mask {
        if k >= g.len() {
            let (i, j) = g.ij(k);
            return Err(Error::OutOfGrid { i, j });
        }
        let (i, j) = g.ij(k);
        if g.is_interior(i, j) {
            let hval = a.matrix().values()[k].quad(du[k]);
            best = Some(best.map_or(hval, |b: f64| b.max(hval)));
        }
    }
    best.ok_or_else(|| Error::EmptyMask("no interior node in mask".into()))
}
