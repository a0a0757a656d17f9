//! Symmetric 2×2 matrices and the handful of operations the solver and checks need.

use serde::{Deserialize, Serialize};
use std::ops::{Add, Mul, Sub};

/// Symmetric 2×2 matrix stored as its upper triangle.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Sym2 {
    pub a11: f64,
    pub a12: f64,
    pub a22: f64,
}

impl Sym2 {
    pub const IDENTITY: Sym2 = Sym2 {
        a11: 1.0,
        a12: 0.0,
        a22: 1.0,
    };
    pub const ZERO: Sym2 = Sym2 {
        a11: 0.0,
        a12: 0.0,
        a22: 0.0,
    };

    pub const fn new(a11: f64, a12: f64, a22: f64) -> Self {
        Sym2 { a11, a12, a22 }
    }

    pub fn diag(d1: f64, d2: f64) -> Self {
        Sym2::new(d1, 0.0, d2)
    }

    #[inline]
    pub fn apply(&self, p: [f64; 2]) -> [f64; 2] {
        [
            self.a11 * p[0] + self.a12 * p[1],
            self.a12 * p[0] + self.a22 * p[1],
        ]
    }

    /// ⟨M p, q⟩.
    #[inline]
    pub fn bilinear(&self, p: [f64; 2], q: [f64; 2]) -> f64 {
        dot(self.apply(p), q)
    }

    #[inline]
    pub fn quad(&self, p: [f64; 2]) -> f64 {
        self.bilinear(p, p)
    }

    pub fn trace(&self) -> f64 {
        self.a11 + self.a22
    }

    pub fn det(&self) -> f64 {
        self.a11 * self.a22 - self.a12 * self.a12
    }

    /// Eigenvalues in ascending order.
    pub fn eigenvalues(&self) -> (f64, f64) {
        let mean = 0.5 * (self.a11 + self.a22);
        let half_diff = 0.5 * (self.a11 - self.a22);
        let rad = half_diff.hypot(self.a12);
        (mean - rad, mean + rad)
    }

    /// Eigenvalues (ascending) with the unit eigenvector of the smaller one.
    pub fn eigen(&self) -> ((f64, f64), [f64; 2]) {
        let (lo, hi) = self.eigenvalues();
        // (A - lo I) v = 0; pick the better-conditioned row.
        let r1 = [self.a11 - lo, self.a12];
        let r2 = [self.a12, self.a22 - lo];
        let r = if r1[0].hypot(r1[1]) >= r2[0].hypot(r2[1]) {
            r1
        } else {
            r2
        };
        let n = r[0].hypot(r[1]);
        let v = if n == 0.0 {
            [1.0, 0.0]
        } else {
            [-r[1] / n, r[0] / n]
        };
        ((lo, hi), v)
    }

    /// Rebuilds `lo·v vᵀ + hi·w wᵀ` with `w ⟂ v`.
    pub fn from_eigen(lo: f64, hi: f64, v: [f64; 2]) -> Self {
        let w = [-v[1], v[0]];
        Sym2::new(
            lo * v[0] * v[0] + hi * w[0] * w[0],
            lo * v[0] * v[1] + hi * w[0] * w[1],
            lo * v[1] * v[1] + hi * w[1] * w[1],
        )
    }

    /// Applies `f` to the eigenvalues.
    pub fn map_eigen(&self, f: impl Fn(f64) -> f64) -> Self {
        let ((lo, hi), v) = self.eigen();
        if lo == hi {
            return Sym2::diag(f(lo), f(lo));
        }
        Sym2::from_eigen(f(lo), f(hi), v)
    }

    pub fn inverse(&self) -> Option<Self> {
        let d = self.det();
        if d == 0.0 || !d.is_finite() {
            return None;
        }
        Some(Sym2::new(self.a22 / d, -self.a12 / d, self.a11 / d))
    }

    /// `M A M^T` for a general 2×2 `m` given row-major.
    pub fn congruence(&self, m: [[f64; 2]; 2]) -> Self {
        let col = |k: usize| self.apply([m[k][0], m[k][1]]);
        let c0 = col(0);
        let c1 = col(1);
        Sym2::new(
            dot([m[0][0], m[0][1]], c0),
            dot([m[0][0], m[0][1]], c1),
            dot([m[1][0], m[1][1]], c1),
        )
    }

    pub fn max_abs_entry(&self) -> f64 {
        self.a11.abs().max(self.a12.abs()).max(self.a22.abs())
    }

    pub fn is_finite(&self) -> bool {
        self.a11.is_finite() && self.a12.is_finite() && self.a22.is_finite()
    }
}

impl Add for Sym2 {
    type Output = Sym2;
    fn add(self, o: Sym2) -> Sym2 {
        Sym2::new(self.a11 + o.a11, self.a12 + o.a12, self.a22 + o.a22)
    }
}

impl Sub for Sym2 {
    type Output = Sym2;
    fn sub(self, o: Sym2) -> Sym2 {
        Sym2::new(self.a11 - o.a11, self.a12 - o.a12, self.a22 - o.a22)
    }
}

impl Mul<Sym2> for f64 {
    type Output = Sym2;
    fn mul(self, m: Sym2) -> Sym2 {
        Sym2::new(self * m.a11, self * m.a12, self * m.a22)
    }
}

#[inline]
pub fn dot(a: [f64; 2], b: [f64; 2]) -> f64 {
    a[0] * b[0] + a[1] * b[1]
}

#[inline]
pub fn norm(a: [f64; 2]) -> f64 {
    a[0].hypot(a[1])
}
