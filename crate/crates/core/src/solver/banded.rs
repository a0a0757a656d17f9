//! Dense-band LU without pivoting.
//!
//! The Newton matrices are row-scaled SPD matrices, for which elimination without pivoting
//! exists and inherits the stability of the unscaled factorization.

#[derive(Debug, Clone)]
pub(crate) struct BandMatrix {
    n: usize,
    bw: usize,
    // row r holds columns r - bw ..= r + bw
    data: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct SingularPivot {
    pub row: usize,
}

impl BandMatrix {
    pub fn zeros(n: usize, bw: usize) -> Self {
        BandMatrix {
            n,
            bw,
            data: vec![0.0; n * (2 * bw + 1)],
        }
    }

    pub fn clear(&mut self) {
        self.data.iter_mut().for_each(|v| *v = 0.0);
    }

    #[inline]
    fn slot(&self, r: usize, c: usize) -> usize {
        debug_assert!(c + self.bw >= r && c <= r + self.bw);
        r * (2 * self.bw + 1) + (c + self.bw - r)
    }

    #[inline]
    pub fn add(&mut self, r: usize, c: usize, v: f64) {
        let s = self.slot(r, c);
        self.data[s] += v;
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[self.slot(r, c)]
    }

    pub fn diag(&self, r: usize) -> f64 {
        self.get(r, r)
    }

    /// In-place LU; afterwards the strict lower band holds L (unit diagonal) and the rest U.
    pub fn factorize(&mut self) -> Result<(), SingularPivot> {
        let (n, bw) = (self.n, self.bw);
        let width = 2 * bw + 1;
        for k in 0..n {
            let piv = self.data[k * width + bw];
            if !(piv.abs() > f64::MIN_POSITIVE) || !piv.is_finite() {
                return Err(SingularPivot { row: k });
            }
            let last = (k + bw).min(n - 1);
            for r in k + 1..=last {
                let rk = r * width + (k + bw - r);
                let l = self.data[rk] / piv;
                if l == 0.0 {
                    continue;
                }
                self.data[rk] = l;
                let (head, tail) = self.data.split_at_mut(r * width);
                let krow = &head[k * width..(k + 1) * width];
                let rrow = &mut tail[..width];
                // columns k+1 ..= last: in row k at offset c+bw-k, in row r at c+bw-r
                let shift = r - k;
                for c_off in (bw + 1)..=(bw + last - k) {
                    rrow[c_off - shift] -= l * krow[c_off];
                }
            }
        }
        Ok(())
    }

    /// Solves in place with factors from [`factorize`](Self::factorize).
    pub fn solve(&self, b: &mut [f64]) {
        let (n, bw) = (self.n, self.bw);
        for r in 0..n {
            let first = r.saturating_sub(bw);
            let mut s = b[r];
            for c in first..r {
                s -= self.get(r, c) * b[c];
            }
            b[r] = s;
        }
        for r in (0..n).rev() {
            let last = (r + bw).min(n - 1);
            let mut s = b[r];
            for c in r + 1..=last {
                s -= self.get(r, c) * b[c];
            }
            b[r] = s / self.get(r, r);
        }
    }
}

/// Band LU with partial pivoting for non-symmetric band matrices (`bw` sub- and super-diagonals).
#[derive(Debug, Clone)]
pub(crate) struct PivotedBand {
    n: usize,
    bw: usize,
    // row r holds columns r - bw ..= r + 2 bw; the extra bw columns absorb pivoting fill
    data: Vec<f64>,
    pivots: Vec<usize>,
}

impl PivotedBand {
    pub fn zeros(n: usize, bw: usize) -> Self {
        PivotedBand {
            n,
            bw,
            data: vec![0.0; n * (3 * bw + 1)],
            pivots: vec![0; n],
        }
    }

    pub fn clear(&mut self) {
        self.data.iter_mut().for_each(|v| *v = 0.0);
    }

    #[inline]
    fn slot(&self, r: usize, c: usize) -> usize {
        debug_assert!(c + self.bw >= r && c <= r + 2 * self.bw);
        r * (3 * self.bw + 1) + (c + self.bw - r)
    }

    #[inline]
    pub fn add(&mut self, r: usize, c: usize, v: f64) {
        debug_assert!(c <= r + self.bw);
        let s = self.slot(r, c);
        self.data[s] += v;
    }

    pub fn factorize(&mut self) -> Result<(), SingularPivot> {
        let (n, bw) = (self.n, self.bw);
        for k in 0..n {
            let last_row = (k + bw).min(n - 1);
            let last_col = (k + 2 * bw).min(n - 1);
            let mut p = k;
            let mut best = self.data[self.slot(k, k)].abs();
            for r in k + 1..=last_row {
                let v = self.data[self.slot(r, k)].abs();
                if v > best {
                    best = v;
                    p = r;
                }
            }
            if !(best > f64::MIN_POSITIVE) || !best.is_finite() {
                return Err(SingularPivot { row: k });
            }
            self.pivots[k] = p;
            if p != k {
                for c in k..=last_col {
                    let (a, b) = (self.slot(k, c), self.slot(p, c));
                    self.data.swap(a, b);
                }
            }
            let piv = self.data[self.slot(k, k)];
            let width = 3 * bw + 1;
            let span = last_col - k;
            for r in k + 1..=last_row {
                let rk = self.slot(r, k);
                let l = self.data[rk] / piv;
                self.data[rk] = l;
                if l == 0.0 {
                    continue;
                }
                // columns k+1 ..= last_col are contiguous in both rows
                let (head, tail) = self.data.split_at_mut(r * width);
                let krow = &head[k * width + bw + 1..k * width + bw + 1 + span];
                let start = k + 1 + bw - r;
                let rrow = &mut tail[start..start + span];
                for (x, y) in rrow.iter_mut().zip(krow) {
                    *x -= l * y;
                }
            }
        }
        Ok(())
    }

    pub fn solve(&self, b: &mut [f64]) {
        let (n, bw) = (self.n, self.bw);
        for k in 0..n {
            b.swap(k, self.pivots[k]);
            let bk = b[k];
            for r in k + 1..=(k + bw).min(n - 1) {
                b[r] -= self.data[self.slot(r, k)] * bk;
            }
        }
        for r in (0..n).rev() {
            let mut s = b[r];
            for c in r + 1..=(r + 2 * bw).min(n - 1) {
                s -= self.data[self.slot(r, c)] * b[c];
            }
            b[r] = s / self.data[self.slot(r, r)];
        }
    }
}
