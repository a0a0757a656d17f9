//! Nodal collocation of the regularized equation `−𝒜[u] − ν div(A∇u) = 0`.
//!
//! The Aronsson term uses the grid's centered gradient and compact Hessian stencils; the
//! viscous term is expanded as `tr(A D²u) + (div A)·Du` so the whole residual lives on the
//! 3×3 stencil and its Jacobian fits the band solver. Unlike the cell energy this scheme stays
//! second-order when `ε` is far below `h |∇H|`, at the price of losing the variational
//! structure: the Newton iteration is globalized on `‖R‖²`.

use super::banded::PivotedBand;
use crate::coefficients::CoefficientField;
use crate::grid::{gradient_raw, hessian_raw, Grid2D};
use crate::mat::{dot, Sym2};

pub(crate) struct Collocation<'a> {
    a: &'a CoefficientField,
    grid: Grid2D,
    viscosity: f64,
    of_node: Vec<Option<usize>>,
    nodes: Vec<usize>,
    lu: PivotedBand,
}

struct Local {
    du: [f64; 2],
    d2: Sym2,
    m: Sym2,
    p: [f64; 2],
    q: [f64; 2],
    diva: [f64; 2],
}

impl<'a> Collocation<'a> {
    pub fn new(a: &'a CoefficientField, viscosity: f64) -> Self {
        let grid = *a.grid();
        let mut of_node = vec![None; grid.len()];
        let nodes: Vec<usize> = grid.interior_indices().collect();
        for (r, &k) in nodes.iter().enumerate() {
            of_node[k] = Some(r);
        }
        let lu = PivotedBand::zeros(nodes.len(), grid.nx() - 1);
        Collocation {
            a,
            grid,
            viscosity,
            of_node,
            nodes,
            lu,
        }
    }

    fn local(&self, du: [f64; 2], d2: Sym2, i: usize, j: usize) -> Local {
        let m = self.a.at(i, j);
        let (dax, day) = self.a.derivatives_at(i, j);
        Local {
            du,
            d2,
            m,
            p: m.apply(du),
            q: [dax.quad(du), day.quad(du)],
            diva: [dax.a11 + day.a12, dax.a12 + day.a22],
        }
    }

    /// Residual at every node (zero on the boundary).
    pub fn residual(&self, u: &[f64]) -> Vec<f64> {
        let du = gradient_raw(&self.grid, u);
        let mut out = vec![0.0; u.len()];
        for &k in &self.nodes {
            let (i, j) = self.grid.ij(k);
            let l = self.local(du[k], hessian_raw(&self.grid, u, i, j), i, j);
            let aronsson = 4.0 * dot(l.p, l.d2.apply(l.p)) + 2.0 * dot(l.q, l.p);
            let div = l.m.a11 * l.d2.a11
                + 2.0 * l.m.a12 * l.d2.a12
                + l.m.a22 * l.d2.a22
                + dot(l.diva, l.du);
            out[k] = -aronsson - self.viscosity * div;
        }
        out
    }

    fn assemble(&mut self, u: &[f64]) {
        self.lu.clear();
        let g = self.grid;
        let h = g.h();
        let du = gradient_raw(&g, u);
        for (row, &k) in self.nodes.iter().enumerate() {
            let (i, j) = g.ij(k);
            let l = self.local(du[k], hessian_raw(&g, u, i, j), i, j);
            let (dax, day) = self.a.derivatives_at(i, j);
            // R linearizes to −(c·Dδ + M:D²δ)
            let mm = Sym2::new(
                4.0 * l.p[0] * l.p[0] + self.viscosity * l.m.a11,
                4.0 * l.p[0] * l.p[1] + self.viscosity * l.m.a12,
                4.0 * l.p[1] * l.p[1] + self.viscosity * l.m.a22,
            );
            let hp = l.m.apply(l.d2.apply(l.p));
            let ak = [dax.apply(l.du), day.apply(l.du)];
            let aq = l.m.apply(l.q);
            let c = [
                8.0 * hp[0]
                    + 4.0 * (l.p[0] * ak[0][0] + l.p[1] * ak[1][0])
                    + 2.0 * aq[0]
                    + self.viscosity * l.diva[0],
                8.0 * hp[1]
                    + 4.0 * (l.p[0] * ak[0][1] + l.p[1] * ak[1][1])
                    + 2.0 * aq[1]
                    + self.viscosity * l.diva[1],
            ];
            let h2 = h * h;
            let gx = c[0] / (2.0 * h);
            let gy = c[1] / (2.0 * h);
            let xy = 2.0 * mm.a12 / (4.0 * h2);
            let stencil = [
                (0i64, 0i64, -2.0 * (mm.a11 + mm.a22) / h2),
                (1, 0, mm.a11 / h2 + gx),
                (-1, 0, mm.a11 / h2 - gx),
                (0, 1, mm.a22 / h2 + gy),
                (0, -1, mm.a22 / h2 - gy),
                (1, 1, xy),
                (-1, -1, xy),
                (1, -1, -xy),
                (-1, 1, -xy),
            ];
            for (di, dj, w) in stencil {
                let ni = (i as i64 + di) as usize;
                let nj = (j as i64 + dj) as usize;
                if let Some(col) = self.of_node[g.idx(ni, nj)] {
                    self.lu.add(row, col, -w);
                }
            }
        }
    }

    /// Newton direction for the residual `r`, or `None` if the Jacobian is singular.
    pub fn direction(&mut self, u: &[f64], r: &[f64]) -> Option<Vec<f64>> {
        self.assemble(u);
        self.lu.factorize().ok()?;
        let mut rhs: Vec<f64> = self.nodes.iter().map(|&k| -r[k]).collect();
        self.lu.solve(&mut rhs);
        if !rhs.iter().all(|v| v.is_finite()) {
            return None;
        }
        let mut d = vec![0.0; u.len()];
        for (row, &k) in self.nodes.iter().enumerate() {
            d[k] = rhs[row];
        }
        Some(d)
    }
}
