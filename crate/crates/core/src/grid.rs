//! Uniform 2D Cartesian grid, grid-sampled fields, finite-difference kernels and CSV I/O.
//!
//! Node `(i, j)` sits at `(x0 + i h, y0 + j h)` and is stored at flat index `j * nx + i`
//! (x varies fastest). The outermost ring of nodes is the boundary; everything else is
//! interior.
//!
//! Stencils:
//! * gradient: centered differences where both neighbours exist, second-order one-sided
//!   `(∓3 f₀ ± 4 f₁ ∓ f₂) / 2h` on the boundary ring. Affine fields are reproduced exactly.
//! * hessian: 3-point second differences and the 4-point cross difference, interior only.
//! * divergence: centered differences of a node-based vector field, interior only.

use crate::error::{Error, Result};
use crate::mat::Sym2;
use serde::{Deserialize, Serialize};
use std::io::{Read, Write};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid2D {
    nx: usize,
    ny: usize,
    origin: [f64; 2],
    h: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NodeKind {
    Interior,
    Boundary,
}

impl Grid2D {
    pub fn new(nx: usize, ny: usize, origin: [f64; 2], h: f64) -> Result<Self> {
        if nx < 3 || ny < 3 {
            return Err(Error::InvalidGrid(format!(
                "need at least 3 points per side, got {nx}x{ny}"
            )));
        }
        if !(h > 0.0 && h.is_finite()) {
            return Err(Error::InvalidGrid(format!(
                "spacing must be positive, got {h}"
            )));
        }
        if !(origin[0].is_finite() && origin[1].is_finite()) {
            return Err(Error::InvalidGrid("origin must be finite".into()));
        }
        Ok(Grid2D { nx, ny, origin, h })
    }

    /// Grid covering `[xmin, xmax] × [ymin, ymax]` with `nx` points along x.
    ///
    /// The y extent must be an integer multiple of the resulting spacing.
    pub fn from_bounds(xmin: f64, xmax: f64, ymin: f64, ymax: f64, nx: usize) -> Result<Self> {
        if !(xmax > xmin && ymax > ymin) {
            return Err(Error::InvalidGrid("empty rectangle".into()));
        }
        if nx < 3 {
            return Err(Error::InvalidGrid(format!("need nx >= 3, got {nx}")));
        }
        let h = (xmax - xmin) / (nx - 1) as f64;
        let cells = (ymax - ymin) / h;
        let ny_cells = cells.round();
        if (cells - ny_cells).abs() > 1e-9 * cells.max(1.0) {
            return Err(Error::InvalidGrid(format!(
                "y extent {} is not a multiple of spacing {h}",
                ymax - ymin
            )));
        }
        Grid2D::new(nx, ny_cells as usize + 1, [xmin, ymin], h)
    }

    pub fn nx(&self) -> usize {
        self.nx
    }
    pub fn ny(&self) -> usize {
        self.ny
    }
    pub fn h(&self) -> f64 {
        self.h
    }
    pub fn origin(&self) -> [f64; 2] {
        self.origin
    }
    pub fn len(&self) -> usize {
        self.nx * self.ny
    }
    pub fn is_empty(&self) -> bool {
        false
    }

    /// `[xmin, xmax, ymin, ymax]`.
    pub fn bounds(&self) -> [f64; 4] {
        [
            self.origin[0],
            self.origin[0] + (self.nx - 1) as f64 * self.h,
            self.origin[1],
            self.origin[1] + (self.ny - 1) as f64 * self.h,
        ]
    }

    pub fn diameter(&self) -> f64 {
        let b = self.bounds();
        (b[1] - b[0]).hypot(b[3] - b[2])
    }

    #[inline]
    pub fn idx(&self, i: usize, j: usize) -> usize {
        debug_assert!(i < self.nx && j < self.ny);
        j * self.nx + i
    }

    #[inline]
    pub fn ij(&self, k: usize) -> (usize, usize) {
        (k % self.nx, k / self.nx)
    }

    #[inline]
    pub fn point(&self, i: usize, j: usize) -> [f64; 2] {
        [
            self.origin[0] + i as f64 * self.h,
            self.origin[1] + j as f64 * self.h,
        ]
    }

    #[inline]
    pub fn point_at(&self, k: usize) -> [f64; 2] {
        let (i, j) = self.ij(k);
        self.point(i, j)
    }

    #[inline]
    pub fn kind(&self, i: usize, j: usize) -> NodeKind {
        if i == 0 || j == 0 || i + 1 == self.nx || j + 1 == self.ny {
            NodeKind::Boundary
        } else {
            NodeKind::Interior
        }
    }

    #[inline]
    pub fn is_interior(&self, i: usize, j: usize) -> bool {
        self.kind(i, j) == NodeKind::Interior
    }

    /// Index distance to the boundary ring (0 on the boundary).
    pub fn depth(&self, i: usize, j: usize) -> usize {
        i.min(j).min(self.nx - 1 - i).min(self.ny - 1 - j)
    }

    pub fn check_node(&self, i: usize, j: usize) -> Result<()> {
        if i >= self.nx || j >= self.ny {
            Err(Error::OutOfGrid { i, j })
        } else {
            Ok(())
        }
    }

    pub fn interior_indices(&self) -> impl Iterator<Item = usize> + '_ {
        (1..self.ny - 1).flat_map(move |j| (1..self.nx - 1).map(move |i| self.idx(i, j)))
    }

    pub fn boundary_indices(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.len()).filter(move |&k| {
            let (i, j) = self.ij(k);
            !self.is_interior(i, j)
        })
    }

    pub fn contains(&self, p: [f64; 2]) -> bool {
        let b = self.bounds();
        let tol = 1e-12 * self.h;
        p[0] >= b[0] - tol && p[0] <= b[1] + tol && p[1] >= b[2] - tol && p[1] <= b[3] + tol
    }

    /// Closest node to `p`, if `p` lies in the grid rectangle.
    pub fn nearest(&self, p: [f64; 2]) -> Option<(usize, usize)> {
        if !self.contains(p) {
            return None;
        }
        let i = ((p[0] - self.origin[0]) / self.h)
            .round()
            .clamp(0.0, (self.nx - 1) as f64);
        let j = ((p[1] - self.origin[1]) / self.h)
            .round()
            .clamp(0.0, (self.ny - 1) as f64);
        Some((i as usize, j as usize))
    }

    /// Cell index and local coordinates in `[0, 1]²` for bilinear interpolation.
    fn locate(&self, p: [f64; 2]) -> Option<(usize, usize, f64, f64)> {
        if !self.contains(p) {
            return None;
        }
        // points within rounding of a grid line are snapped onto it, so coincident nodes copy exactly
        let snap = |v: f64| {
            if (v - v.round()).abs() < 1e-9 {
                v.round()
            } else {
                v
            }
        };
        let sx = snap((p[0] - self.origin[0]) / self.h).clamp(0.0, (self.nx - 1) as f64);
        let sy = snap((p[1] - self.origin[1]) / self.h).clamp(0.0, (self.ny - 1) as f64);
        let i = (sx.floor() as usize).min(self.nx - 2);
        let j = (sy.floor() as usize).min(self.ny - 2);
        Some((i, j, sx - i as f64, sy - j as f64))
    }
}

fn check_finite(grid: &Grid2D, values: impl Iterator<Item = bool>) -> Result<()> {
    for (k, ok) in values.enumerate() {
        if !ok {
            let (i, j) = grid.ij(k);
            return Err(Error::NonFinite { i, j });
        }
    }
    Ok(())
}

/// One real per node.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField {
    grid: Grid2D,
    values: Vec<f64>,
}

impl ScalarField {
    pub fn new(grid: Grid2D, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::LengthMismatch {
                expected: grid.len(),
                found: values.len(),
            });
        }
        check_finite(&grid, values.iter().map(|v| v.is_finite()))?;
        Ok(ScalarField { grid, values })
    }

    pub fn from_fn(grid: Grid2D, f: impl Fn([f64; 2]) -> f64) -> Result<Self> {
        let values = (0..grid.len()).map(|k| f(grid.point_at(k))).collect();
        ScalarField::new(grid, values)
    }

    pub fn constant(grid: Grid2D, c: f64) -> Result<Self> {
        ScalarField::new(grid, vec![c; grid.len()])
    }

    pub fn grid(&self) -> &Grid2D {
        &self.grid
    }
    pub fn values(&self) -> &[f64] {
        &self.values
    }
    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[self.grid.idx(i, j)]
    }

    pub fn interpolate(&self, p: [f64; 2]) -> Option<f64> {
        let (i, j, s, t) = self.grid.locate(p)?;
        let f = |a, b| self.get(i + a, j + b);
        Some(
            (1.0 - t) * ((1.0 - s) * f(0, 0) + s * f(1, 0))
                + t * ((1.0 - s) * f(0, 1) + s * f(1, 1)),
        )
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Largest |difference| over the given flat indices.
    pub fn sup_diff_on(&self, other: &ScalarField, indices: &[usize]) -> f64 {
        indices
            .iter()
            .map(|&k| (self.values[k] - other.values[k]).abs())
            .fold(0.0, f64::max)
    }
}

/// Two reals per node.
#[derive(Debug, Clone, PartialEq)]
pub struct VectorField {
    grid: Grid2D,
    values: Vec<[f64; 2]>,
}

impl VectorField {
    pub fn new(grid: Grid2D, values: Vec<[f64; 2]>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::LengthMismatch {
                expected: grid.len(),
                found: values.len(),
            });
        }
        check_finite(
            &grid,
            values.iter().map(|v| v[0].is_finite() && v[1].is_finite()),
        )?;
        Ok(VectorField { grid, values })
    }

    pub fn from_fn(grid: Grid2D, f: impl Fn([f64; 2]) -> [f64; 2]) -> Result<Self> {
        let values = (0..grid.len()).map(|k| f(grid.point_at(k))).collect();
        VectorField::new(grid, values)
    }

    pub fn grid(&self) -> &Grid2D {
        &self.grid
    }
    pub fn values(&self) -> &[[f64; 2]] {
        &self.values
    }
    #[inline]
    pub fn get(&self, i: usize, j: usize) -> [f64; 2] {
        self.values[self.grid.idx(i, j)]
    }
}

/// Symmetric 2×2 matrix per node.
#[derive(Debug, Clone, PartialEq)]
pub struct SymMatrixField {
    grid: Grid2D,
    values: Vec<Sym2>,
}

impl SymMatrixField {
    pub fn new(grid: Grid2D, values: Vec<Sym2>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::LengthMismatch {
                expected: grid.len(),
                found: values.len(),
            });
        }
        check_finite(&grid, values.iter().map(Sym2::is_finite))?;
        Ok(SymMatrixField { grid, values })
    }

    pub fn from_fn(grid: Grid2D, f: impl Fn([f64; 2]) -> Sym2) -> Result<Self> {
        let values = (0..grid.len()).map(|k| f(grid.point_at(k))).collect();
        SymMatrixField::new(grid, values)
    }

    pub fn constant(grid: Grid2D, m: Sym2) -> Result<Self> {
        SymMatrixField::new(grid, vec![m; grid.len()])
    }

    pub fn grid(&self) -> &Grid2D {
        &self.grid
    }
    pub fn values(&self) -> &[Sym2] {
        &self.values
    }
    #[inline]
    pub fn get(&self, i: usize, j: usize) -> Sym2 {
        self.values[self.grid.idx(i, j)]
    }

    /// Entry field `select(A)` as a scalar field.
    pub fn entry(&self, select: impl Fn(&Sym2) -> f64) -> ScalarField {
        ScalarField {
            grid: self.grid,
            values: self.values.iter().map(select).collect(),
        }
    }

    pub fn from_entries(a11: &ScalarField, a12: &ScalarField, a22: &ScalarField) -> Result<Self> {
        if a11.grid != a12.grid || a11.grid != a22.grid {
            return Err(Error::GridMismatch);
        }
        let values = (0..a11.grid.len())
            .map(|k| Sym2::new(a11.values[k], a12.values[k], a22.values[k]))
            .collect();
        SymMatrixField::new(a11.grid, values)
    }

    pub fn interpolate(&self, p: [f64; 2]) -> Option<Sym2> {
        let (i, j, s, t) = self.grid.locate(p)?;
        let f = |a, b| self.get(i + a, j + b);
        Some(
            ((1.0 - t) * (1.0 - s)) * f(0, 0)
                + ((1.0 - t) * s) * f(1, 0)
                + (t * (1.0 - s)) * f(0, 1)
                + (t * s) * f(1, 1),
        )
    }
}

/// Node-based scalar values defined only at interior nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct InteriorField {
    grid: Grid2D,
    values: Vec<f64>,
}

impl InteriorField {
    pub(crate) fn from_interior_fn(grid: Grid2D, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut values = vec![0.0; grid.len()];
        for j in 1..grid.ny - 1 {
            for i in 1..grid.nx - 1 {
                values[grid.idx(i, j)] = f(i, j);
            }
        }
        InteriorField { grid, values }
    }

    pub fn grid(&self) -> &Grid2D {
        &self.grid
    }

    pub fn at(&self, i: usize, j: usize) -> Result<f64> {
        self.grid.check_node(i, j)?;
        if !self.grid.is_interior(i, j) {
            return Err(Error::BoundaryPoint { i, j });
        }
        Ok(self.values[self.grid.idx(i, j)])
    }

    /// `(flat index, value)` over interior nodes.
    pub fn iter(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.grid
            .interior_indices()
            .map(move |k| (k, self.values[k]))
    }

    pub fn sup_abs(&self) -> f64 {
        self.iter().fold(0.0, |m, (_, v)| m.max(v.abs()))
    }

    pub fn min(&self) -> f64 {
        self.iter().fold(f64::INFINITY, |m, (_, v)| m.min(v))
    }

    /// Raw storage; boundary slots hold 0.
    pub fn raw(&self) -> &[f64] {
        &self.values
    }
}

/// Per-node Hessians, interior only.
#[derive(Debug, Clone, PartialEq)]
pub struct HessianField {
    grid: Grid2D,
    values: Vec<Sym2>,
}

impl HessianField {
    pub fn at(&self, i: usize, j: usize) -> Result<Sym2> {
        self.grid.check_node(i, j)?;
        if !self.grid.is_interior(i, j) {
            return Err(Error::BoundaryPoint { i, j });
        }
        Ok(self.values[self.grid.idx(i, j)])
    }

    pub fn grid(&self) -> &Grid2D {
        &self.grid
    }

    /// Unchecked interior access for hot loops.
    #[inline]
    pub(crate) fn get(&self, i: usize, j: usize) -> Sym2 {
        self.values[self.grid.idx(i, j)]
    }
}

#[inline]
fn d1(f: &[f64], k: usize, stride: usize, pos: usize, n: usize, h: f64) -> f64 {
    if pos == 0 {
        (-3.0 * f[k] + 4.0 * f[k + stride] - f[k + 2 * stride]) / (2.0 * h)
    } else if pos + 1 == n {
        (3.0 * f[k] - 4.0 * f[k - stride] + f[k - 2 * stride]) / (2.0 * h)
    } else {
        (f[k + stride] - f[k - stride]) / (2.0 * h)
    }
}

pub(crate) fn gradient_raw(grid: &Grid2D, f: &[f64]) -> Vec<[f64; 2]> {
    let (nx, ny, h) = (grid.nx, grid.ny, grid.h);
    let mut out = Vec::with_capacity(f.len());
    for j in 0..ny {
        for i in 0..nx {
            let k = grid.idx(i, j);
            out.push([d1(f, k, 1, i, nx, h), d1(f, k, nx, j, ny, h)]);
        }
    }
    out
}

/// Node-wise gradient: centered in the interior, second-order one-sided on the boundary.
pub fn gradient(f: &ScalarField) -> Result<VectorField> {
    VectorField::new(f.grid, gradient_raw(&f.grid, &f.values))
}

#[inline]
pub(crate) fn hessian_raw(grid: &Grid2D, f: &[f64], i: usize, j: usize) -> Sym2 {
    let nx = grid.nx;
    let k = grid.idx(i, j);
    let h2 = grid.h * grid.h;
    let fxx = (f[k + 1] - 2.0 * f[k] + f[k - 1]) / h2;
    let fyy = (f[k + nx] - 2.0 * f[k] + f[k - nx]) / h2;
    let fxy = (f[k + nx + 1] - f[k - nx + 1] - f[k + nx - 1] + f[k - nx - 1]) / (4.0 * h2);
    Sym2::new(fxx, fxy, fyy)
}

pub fn hessian_at(f: &ScalarField, i: usize, j: usize) -> Result<Sym2> {
    f.grid.check_node(i, j)?;
    if !f.grid.is_interior(i, j) {
        return Err(Error::BoundaryPoint { i, j });
    }
    Ok(hessian_raw(&f.grid, &f.values, i, j))
}

pub fn hessian(f: &ScalarField) -> HessianField {
    let grid = f.grid;
    let mut values = vec![Sym2::ZERO; grid.len()];
    for k in grid.interior_indices() {
        let (i, j) = grid.ij(k);
        values[k] = hessian_raw(&grid, &f.values, i, j);
    }
    HessianField { grid, values }
}

/// Centered divergence at interior nodes.
pub fn divergence(v: &VectorField) -> InteriorField {
    let g = v.grid;
    let nx = g.nx;
    InteriorField::from_interior_fn(g, |i, j| {
        let k = g.idx(i, j);
        (v.values[k + 1][0] - v.values[k - 1][0]) / (2.0 * g.h)
            + (v.values[k + nx][1] - v.values[k - nx][1]) / (2.0 * g.h)
    })
}

/// Distance used by [`ball_mask`].
#[derive(Debug, Clone, Copy)]
pub enum BallMetric<'a> {
    Euclidean,
    /// Precomputed distances from the ball's centre to every node.
    Field(&'a ScalarField),
}

/// Flat indices of nodes with `distance(center, node) < radius`.
pub fn ball_mask(
    grid: &Grid2D,
    center: [f64; 2],
    radius: f64,
    metric: BallMetric<'_>,
) -> Result<Vec<usize>> {
    if !(radius > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "radius must be positive, got {radius}"
        )));
    }
    let mask: Vec<usize> = match metric {
        BallMetric::Euclidean => (0..grid.len())
            .filter(|&k| {
                let p = grid.point_at(k);
                (p[0] - center[0]).hypot(p[1] - center[1]) < radius
            })
            .collect(),
        BallMetric::Field(d) => {
            if d.grid() != grid {
                return Err(Error::GridMismatch);
            }
            (0..grid.len()).filter(|&k| d.values[k] < radius).collect()
        }
    };
    if mask.is_empty() {
        return Err(Error::EmptyMask(format!(
            "no node within {radius} of ({}, {})",
            center[0], center[1]
        )));
    }
    Ok(mask)
}

fn fmt17(v: f64) -> String {
    format!("{v:.16e}")
}

fn write_rows<W: Write>(
    grid: &Grid2D,
    header: &[&str],
    row: impl Fn(usize) -> Vec<f64>,
    out: W,
) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let csv_err = |e: csv::Error| Error::Csv(e.to_string());
    w.write_record(header).map_err(csv_err)?;
    for k in 0..grid.len() {
        let p = grid.point_at(k);
        let mut rec = vec![fmt17(p[0]), fmt17(p[1])];
        rec.extend(row(k).into_iter().map(fmt17));
        w.write_record(&rec).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

/// Writes `x,y,value` rows in storage order with 17 significant digits.
pub fn write_scalar_csv<W: Write>(f: &ScalarField, out: W) -> Result<()> {
    write_rows(&f.grid, &["x", "y", "value"], |k| vec![f.values[k]], out)
}

/// Writes `x,y,v1,v2` rows in storage order with 17 significant digits.
pub fn write_vector_csv<W: Write>(f: &VectorField, out: W) -> Result<()> {
    write_rows(
        &f.grid,
        &["x", "y", "v1", "v2"],
        |k| f.values[k].to_vec(),
        out,
    )
}

fn read_rows<R: Read>(input: R, header: &[&str]) -> Result<(Grid2D, Vec<Vec<f64>>)> {
    let mut rdr = csv::Reader::from_reader(input);
    let csv_err = |e: csv::Error| Error::Csv(e.to_string());
    let found: Vec<String> = rdr
        .headers()
        .map_err(csv_err)?
        .iter()
        .map(str::to_owned)
        .collect();
    if found != header {
        return Err(Error::Csv(format!(
            "expected header {header:?}, found {found:?}"
        )));
    }
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (line, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(csv_err)?;
        let row = rec
            .iter()
            .map(|s| {
                s.trim()
                    .parse::<f64>()
                    .map_err(|e| Error::Csv(format!("row {}: {e}", line + 2)))
            })
            .collect::<Result<Vec<f64>>>()?;
        if row.len() != header.len() {
            return Err(Error::Csv(format!(
                "row {} has {} columns",
                line + 2,
                row.len()
            )));
        }
        rows.push(row);
    }
    if rows.len() < 9 {
        return Err(Error::Csv("too few rows for a grid".into()));
    }
    let y0 = rows[0][1];
    let nx = rows.iter().take_while(|r| r[1] == y0).count();
    if nx < 3 || !rows.len().is_multiple_of(nx) {
        return Err(Error::Csv("rows do not form a rectangular grid".into()));
    }
    let h = rows[1][0] - rows[0][0];
    let grid = Grid2D::new(nx, rows.len() / nx, [rows[0][0], y0], h)?;
    let tol = 1e-9 * h;
    for (k, r) in rows.iter().enumerate() {
        let p = grid.point_at(k);
        if (p[0] - r[0]).abs() > tol || (p[1] - r[1]).abs() > tol {
            return Err(Error::Csv(format!(
                "row {} coordinates off the grid",
                k + 2
            )));
        }
    }
    Ok((grid, rows))
}

pub fn read_scalar_csv<R: Read>(input: R) -> Result<ScalarField> {
    let (grid, rows) = read_rows(input, &["x", "y", "value"])?;
    ScalarField::new(grid, rows.into_iter().map(|r| r[2]).collect())
}

pub fn read_vector_csv<R: Read>(input: R) -> Result<VectorField> {
    let (grid, rows) = read_rows(input, &["x", "y", "v1", "v2"])?;
    VectorField::new(grid, rows.into_iter().map(|r| [r[2], r[3]]).collect())
}
