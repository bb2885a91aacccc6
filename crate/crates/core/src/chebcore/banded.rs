//! Real band matrices and a partial-pivoting band LU (LAPACK `gbtf2` layout).

use crate::error::{Error, Result};

/// Band matrix with `kl` sub- and `ku` super-diagonals, stored by diagonals.
#[derive(Debug, Clone, PartialEq)]
pub struct BandMatrix {
    rows: usize,
    cols: usize,
    kl: usize,
    ku: usize,
    // data[(ku + i - j) + j * (kl + ku + 1)] = A[i, j]
    data: Vec<f64>,
}

impl BandMatrix {
    pub fn zeros(rows: usize, cols: usize, kl: usize, ku: usize) -> Self {
        Self {
            rows,
            cols,
            kl,
            ku,
            data: vec![0.0; (kl + ku + 1) * cols],
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn bandwidths(&self) -> (usize, usize) {
        (self.kl, self.ku)
    }

    #[inline]
    fn in_band(&self, i: usize, j: usize) -> bool {
        i < self.rows && j < self.cols && i + self.ku >= j && j + self.kl >= i
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        if self.in_band(i, j) {
            self.data[self.ku + i - j + j * (self.kl + self.ku + 1)]
        } else {
            0.0
        }
    }

    /// Panics if `(i, j)` lies outside the band.
    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        assert!(self.in_band(i, j), "({i}, {j}) outside band");
        let w = self.kl + self.ku + 1;
        self.data[self.ku + i - j + j * w] = v;
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.rows];
        for (j, &xj) in x.iter().enumerate().take(self.cols) {
            if xj == 0.0 {
                continue;
            }
            let lo = j.saturating_sub(self.ku);
            let hi = (j + self.kl + 1).min(self.rows);
            for (i, yi) in y.iter_mut().enumerate().take(hi).skip(lo) {
                *yi += self.get(i, j) * xj;
            }
        }
        y
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        (0..self.rows)
            .map(|i| (0..self.cols).map(|j| self.get(i, j)).collect())
            .collect()
    }
}

/// LU factors of a square band matrix with row interchanges.
#[derive(Debug, Clone)]
pub struct BandLu {
    n: usize,
    kl: usize,
    kv: usize,
    ldab: usize,
    ab: Vec<f64>,
    ipiv: Vec<usize>,
}

impl BandLu {
    pub fn factor(a: &BandMatrix) -> Result<Self> {
        if a.rows != a.cols {
            return Err(Error::DimensionMismatch {
                expected: a.rows,
                found: a.cols,
            });
        }
        let n = a.rows;
        let (kl, ku) = (a.kl, a.ku);
        let kv = kl + ku;
        let ldab = 2 * kl + ku + 1;
        let mut ab = vec![0.0; ldab * n];
        for j in 0..n {
            for i in j.saturating_sub(ku)..(j + kl + 1).min(n) {
                ab[kv + i - j + j * ldab] = a.get(i, j);
            }
        }
        let idx = |r: usize, c: usize| kv + r - c + c * ldab;
        let mut ipiv = vec![0; n];
        let mut ju = 0usize;
        for j in 0..n {
            let km = kl.min(n - 1 - j);
            let mut p = 0;
            let mut best = ab[idx(j, j)].abs();
            for i in 1..=km {
                let v = ab[idx(j + i, j)].abs();
                if v > best {
                    best = v;
                    p = i;
                }
            }
            ipiv[j] = j + p;
            if best == 0.0 {
                return Err(Error::Singular {
                    context: Some(format!("zero pivot in band LU at column {j}")),
                });
            }
            ju = ju.max((j + ku + p).min(n - 1));
            if p != 0 {
                for c in j..=ju {
                    ab.swap(idx(j + p, c), idx(j, c));
                }
            }
            let pivot = ab[idx(j, j)];
            for i in 1..=km {
                ab[idx(j + i, j)] /= pivot;
            }
            for c in j + 1..=ju {
                let u = ab[idx(j, c)];
                if u == 0.0 {
                    continue;
                }
                for i in 1..=km {
                    let l = ab[idx(j + i, j)];
                    ab[idx(j + i, c)] -= l * u;
                }
            }
        }
        Ok(Self {
            n,
            kl,
            kv,
            ldab,
            ab,
            ipiv,
        })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    #[inline]
    fn at(&self, r: usize, c: usize) -> f64 {
        self.ab[self.kv + r - c + c * self.ldab]
    }

    /// Solve in place.
    pub fn solve_in_place(&self, b: &mut [f64]) {
        let n = self.n;
        debug_assert_eq!(b.len(), n);
        for j in 0..n {
            let p = self.ipiv[j];
            if p != j {
                b.swap(j, p);
            }
            let bj = b[j];
            if bj != 0.0 {
                for i in 1..=self.kl.min(n - 1 - j) {
                    b[j + i] -= self.at(j + i, j) * bj;
                }
            }
        }
        for j in (0..n).rev() {
            b[j] /= self.at(j, j);
            let bj = b[j];
            if bj != 0.0 {
                for i in j.saturating_sub(self.kv)..j {
                    b[i] -= self.at(i, j) * bj;
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dense_solve(a: &[Vec<f64>], b: &[f64]) -> Vec<f64> {
        let n = b.len();
        let mut m: Vec<Vec<f64>> = a.to_vec();
        let mut x = b.to_vec();
        for k in 0..n {
            let p = (k..n)
                .max_by(|&i, &j| m[i][k].abs().total_cmp(&m[j][k].abs()))
                .unwrap();
            m.swap(k, p);
            x.swap(k, p);
            for i in k + 1..n {
                let f = m[i][k] / m[k][k];
                for j in k..n {
                    m[i][j] -= f * m[k][j];
                }
                x[i] -= f * x[k];
            }
        }
        for k in (0..n).rev() {
            let s: f64 = (k + 1..n).map(|j| m[k][j] * x[j]).sum();
            x[k] = (x[k] - s) / m[k][k];
        }
        x
    }

    #[test]
    fn band_lu_matches_dense_with_pivoting() {
        let n = 40;
        let mut a = BandMatrix::zeros(n, n, 1, 2);
        for j in 0..n {
            for i in j.saturating_sub(2)..(j + 2).min(n) {
                // small diagonal forces row interchanges
                let v = if i == j { 1e-3 * (j as f64 + 1.0) } else { ((i * 31 + j * 17) % 11) as f64 - 5.0 };
                a.set(i, j, v);
            }
        }
        let b: Vec<f64> = (0..n).map(|i| (i as f64).sin()).collect();
        let lu = BandLu::factor(&a).unwrap();
        let mut x = b.clone();
        lu.solve_in_place(&mut x);
        let xd = dense_solve(&a.to_dense(), &b);
        for (u, v) in x.iter().zip(&xd) {
            assert!((u - v).abs() < 1e-10 * (1.0 + v.abs()));
        }
        let r = a.matvec(&x);
        for (u, v) in r.iter().zip(&b) {
            assert!((u - v).abs() < 1e-11);
        }
    }

    #[test]
    fn singular_band_detected() {
        let a = BandMatrix::zeros(3, 3, 1, 1);
        assert!(matches!(BandLu::factor(&a), Err(Error::Singular { .. })));
    }
}
