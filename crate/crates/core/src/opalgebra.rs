//! Operators on TCP coefficient vectors: multiplication, boundary
//! functionals, sums and products, and bordered dense systems.

use nalgebra::{DMatrix, DVector};

use crate::chebcore::ChebSeries;
use crate::error::{Error, Result};
use crate::fio::{BandProfile, FIOApprox};
use crate::scalar::Scalar;

/// Condition estimate above which a dense solve logs a warning.
pub const CONDITION_LIMIT: f64 = 1e13;

/// An `N x N` matrix acting on coefficient vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct CoeffOperator<T: Scalar = f64> {
    matrix: DMatrix<T>,
    band: BandProfile,
}

impl<T: Scalar> CoeffOperator<T> {
    pub fn new(matrix: DMatrix<T>) -> Result<Self> {
        if matrix.nrows() != matrix.ncols() {
            return Err(Error::DimensionMismatch {
                expected: matrix.nrows(),
                found: matrix.ncols(),
            });
        }
        if matrix.iter().any(|v| !v.to_c64().is_finite()) {
            return Err(Error::InvalidParameter("operator has non-finite entries".into()));
        }
        let band = BandProfile::measure(&matrix);
        Ok(Self { matrix, band })
    }

    fn with_band(matrix: DMatrix<T>, band: BandProfile) -> Self {
        Self { matrix, band }
    }

    pub fn identity(n: usize) -> Self {
        Self::with_band(DMatrix::identity(n, n), BandProfile { lower: 0, upper: 0 })
    }

    pub fn zeros(n: usize) -> Self {
        Self::with_band(DMatrix::zeros(n, n), BandProfile { lower: 0, upper: 0 })
    }

    pub fn n(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<T> {
        &self.matrix
    }

    pub fn into_matrix(self) -> DMatrix<T> {
        self.matrix
    }

    /// Declared profile; sums and products widen it conservatively.
    pub fn band(&self) -> BandProfile {
        self.band
    }

    pub fn apply(&self, c: &[T]) -> Result<Vec<T>> {
        self.check_len(c.len())?;
        Ok((&self.matrix * DVector::from_column_slice(c)).as_slice().to_vec())
    }

    fn check_len(&self, len: usize) -> Result<()> {
        if len != self.n() {
            return Err(Error::DimensionMismatch {
                expected: self.n(),
                found: len,
            });
        }
        Ok(())
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.check_len(other.n())?;
        let band = BandProfile {
            lower: self.band.lower.max(other.band.lower),
            upper: self.band.upper.max(other.band.upper),
        };
        Ok(Self::with_band(&self.matrix + &other.matrix, band))
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.add(&other.scale(-T::one()))
    }

    /// `self * other`, i.e. `other` acts first.
    pub fn compose(&self, other: &Self) -> Result<Self> {
        self.check_len(other.n())?;
        let n = self.n().saturating_sub(1);
        let band = BandProfile {
            lower: (self.band.lower + other.band.lower).min(n),
            upper: (self.band.upper + other.band.upper).min(n),
        };
        Ok(Self::with_band(&self.matrix * &other.matrix, band))
    }

    pub fn scale(&self, s: T) -> Self {
        Self::with_band(&self.matrix * s, self.band)
    }

    /// Leading `m x m` block.
    pub fn truncated(&self, m: usize) -> Result<Self> {
        if m > self.n() {
            return Err(Error::DimensionMismatch {
                expected: self.n(),
                found: m,
            });
        }
        let band = BandProfile {
            lower: self.band.lower.min(m.saturating_sub(1)),
            upper: self.band.upper.min(m.saturating_sub(1)),
        };
        Ok(Self::with_band(self.matrix.view((0, 0), (m, m)).into_owned(), band))
    }
}

impl CoeffOperator<f64> {
    pub fn from_fio(a: &FIOApprox) -> Self {
        Self::with_band(a.matrix().clone(), a.band_profile())
    }

    pub fn to_complex(&self) -> CoeffOperator<num_complex::Complex64> {
        CoeffOperator::with_band(self.matrix.map(|v| num_complex::Complex64::new(v, 0.0)), self.band)
    }
}

/// Multiplication by `a(x) = sum a_k Q_k(x)` truncated to `N x N`:
/// `M_ij = (a_|i-j| + a_{i+j}) / 2` for `i >= 1`, `M_0j = a_j / 2` off the
/// diagonal and `M_00 = a_0`.
pub fn mult_operator<T: Scalar>(a: &ChebSeries<T>, n: usize) -> CoeffOperator<T> {
    let c = a.coeffs();
    let at = |k: usize| c.get(k).copied().unwrap_or_else(T::zero);
    let half = T::from_real(0.5);
    let m = DMatrix::from_fn(n, n, |i, j| {
        let toeplitz = if i == j { at(0) } else { at(i.abs_diff(j)) * half };
        if i == 0 {
            toeplitz
        } else {
            toeplitz + at(i + j) * half
        }
    });
    let d = a.len().saturating_sub(1).min(n.saturating_sub(1));
    CoeffOperator::with_band(m, BandProfile { lower: d, upper: d })
}

/// Evaluation at `x = +1` or `x = -1` as a row acting on coefficients.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryFunctional {
    endpoint: f64,
    row: Vec<f64>,
}

impl BoundaryFunctional {
    pub fn endpoint(&self) -> f64 {
        self.endpoint
    }

    pub fn row(&self) -> &[f64] {
        &self.row
    }

    /// `u(endpoint)` for `u` given by its leading coefficients.
    pub fn apply<T: Scalar>(&self, c: &[T]) -> T {
        c.iter()
            .zip(&self.row)
            .fold(T::zero(), |acc, (&v, &r)| acc + v * T::from_real(r))
    }

    /// Row vector `B A`.
    pub fn compose<T: Scalar>(&self, a: &CoeffOperator<T>) -> Result<Vec<T>> {
        if a.n() != self.row.len() {
            return Err(Error::DimensionMismatch {
                expected: self.row.len(),
                found: a.n(),
            });
        }
        Ok((0..a.n()).map(|j| self.apply(a.matrix().column(j).as_slice())).collect())
    }
}

pub fn boundary_row(endpoint: f64, n: usize) -> Result<BoundaryFunctional> {
    let row = if endpoint == 1.0 {
        vec![1.0; n]
    } else if endpoint == -1.0 {
        (0..n).map(|k| if k % 2 == 0 { 1.0 } else { -1.0 }).collect()
    } else {
        return Err(Error::Domain {
            name: "endpoint",
            value: endpoint,
            reason: "boundary functionals exist at x = -1 and x = 1 only",
        });
    };
    Ok(BoundaryFunctional { endpoint, row })
}

/// LU factorization keeping the factors for adjoint solves.
pub struct DenseLu<T: Scalar> {
    lu: nalgebra::LU<T, nalgebra::Dyn, nalgebra::Dyn>,
    norm1: f64,
    n: usize,
}

impl<T: Scalar> DenseLu<T> {
    pub fn factor(a: DMatrix<T>) -> Result<Self> {
        if a.nrows() != a.ncols() {
            return Err(Error::DimensionMismatch {
                expected: a.nrows(),
                found: a.ncols(),
            });
        }
        let norm1 = norm_1(&a);
        let n = a.nrows();
        let lu = a.lu();
        if !lu.is_invertible() {
            return Err(Error::Singular { context: None });
        }
        Ok(Self { lu, norm1, n })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn solve(&self, b: &[T]) -> Result<Vec<T>> {
        self.lu
            .solve(&DVector::from_column_slice(b))
            .map(|x| x.as_slice().to_vec())
            .ok_or(Error::Singular { context: None })
    }

    /// `A^H x = b` from the stored factors, `P A = L U`.
    pub fn solve_adjoint(&self, b: &[T]) -> Result<Vec<T>> {
        let mut x = DVector::from_column_slice(b);
        let ok = self.lu.u().ad_solve_upper_triangular_mut(&mut x) && self.lu.l().ad_solve_lower_triangular_mut(&mut x);
        if !ok {
            return Err(Error::Singular { context: None });
        }
        self.lu.p().inv_permute_rows(&mut x);
        Ok(x.as_slice().to_vec())
    }

    /// Hager–Higham estimate of the 1-norm condition number.
    pub fn condition_estimate(&self) -> Result<f64> {
        let n = self.dim();
        let mut x = vec![T::from_real(1.0 / n as f64); n];
        let mut est = 0.0;
        let mut last_j = usize::MAX;
        for _ in 0..5 {
            let y = self.solve(&x)?;
            est = y.iter().map(|v| v.abs_val()).sum::<f64>();
            let xi: Vec<T> = y
                .iter()
                .map(|&v| {
                    let m = v.abs_val();
                    if m == 0.0 {
                        T::one()
                    } else {
                        v.unscale(m)
                    }
                })
                .collect();
            let z = self.solve_adjoint(&xi)?;
            let (j, zmax) = z
                .iter()
                .enumerate()
                .map(|(i, v)| (i, v.abs_val()))
                .fold((0, -1.0), |a, b| if b.1 > a.1 { b } else { a });
            let ztx: f64 = z.iter().zip(&x).map(|(&a, &b)| (a.conjugate() * b).real()).sum();
            if zmax <= ztx || j == last_j {
                break;
            }
            last_j = j;
            x = vec![T::zero(); n];
            x[j] = T::one();
        }
        Ok(est * self.norm1)
    }
}

fn norm_1<T: Scalar>(a: &DMatrix<T>) -> f64 {
    a.column_iter()
        .map(|c| c.iter().map(|v| v.abs_val()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// Normwise backward error above which a dense solve is rejected.
pub const BACKWARD_ERROR_LIMIT: f64 = 1e-11;

/// Dense solve returning the solution and a condition estimate. Estimates
/// above [`CONDITION_LIMIT`] are logged; the solve fails only when the
/// factorization is singular or the backward error exceeds
/// [`BACKWARD_ERROR_LIMIT`]. Multipliers such as `sqrt(1 + x)` vanish to
/// working precision at the ends of a double-exponential map, so large
/// estimates alone do not indicate an inaccurate solve.
pub fn solve_checked<T: Scalar>(a: DMatrix<T>, b: &[T]) -> Result<(Vec<T>, f64)> {
    let lu = DenseLu::factor(a.clone())?;
    let cond = lu.condition_estimate()?;
    let x = lu.solve(b)?;
    let xv = DVector::from_column_slice(&x);
    let bv = DVector::from_column_slice(b);
    let r = (&a * &xv - &bv).norm();
    let scale = a.norm() * xv.norm() + bv.norm();
    let backward = if scale > 0.0 { r / scale } else { 0.0 };
    if !cond.is_finite() || x.iter().any(|v| !v.to_c64().is_finite()) || backward > BACKWARD_ERROR_LIMIT {
        return Err(Error::IllConditioned {
            condition: cond,
            threshold: CONDITION_LIMIT,
        });
    }
    if cond > CONDITION_LIMIT {
        log::warn!("condition estimate {cond:.2e} exceeds {CONDITION_LIMIT:.0e}; backward error {backward:.2e}");
    }
    Ok((x, cond))
}

/// A square core operator bordered by extra unknown columns and constraint
/// rows, laid out as
///
/// ```text
/// [ rows   | corner ] [ u ]   [ rhs_border ]
/// [ core   | cols   ] [ a ] = [ rhs        ]
/// ```
#[derive(Debug, Clone)]
pub struct BorderedSystem<T: Scalar> {
    pub core: CoeffOperator<T>,
    /// Each of length `N`: coefficients of an extra unknown in the core rows.
    pub border_cols: Vec<Vec<T>>,
    /// Each of length `N`: a constraint acting on `u`.
    pub border_rows: Vec<Vec<T>>,
    /// `rows x cols` block coupling constraints to extra unknowns.
    pub corner: Vec<Vec<T>>,
    pub rhs: Vec<T>,
    pub rhs_border: Vec<T>,
}

#[derive(Debug, Clone)]
pub struct BorderedSolution<T: Scalar> {
    pub coeffs: ChebSeries<T>,
    pub border: Vec<T>,
    /// `||M x - b|| / ||b||` in the 2-norm.
    pub residual: f64,
    pub condition: f64,
}

impl<T: Scalar> BorderedSystem<T> {
    pub fn plain(core: CoeffOperator<T>, rhs: Vec<T>) -> Self {
        Self {
            core,
            border_cols: Vec::new(),
            border_rows: Vec::new(),
            corner: Vec::new(),
            rhs,
            rhs_border: Vec::new(),
        }
    }

    fn validate(&self) -> Result<usize> {
        let n = self.core.n();
        let nb = self.border_cols.len();
        let mismatch = |expected, found| Err(Error::DimensionMismatch { expected, found });
        if self.border_rows.len() != nb {
            return mismatch(nb, self.border_rows.len());
        }
        if self.rhs.len() != n {
            return mismatch(n, self.rhs.len());
        }
        if self.rhs_border.len() != nb {
            return mismatch(nb, self.rhs_border.len());
        }
        if self.corner.len() != nb {
            return mismatch(nb, self.corner.len());
        }
        for v in self.border_cols.iter().chain(&self.border_rows) {
            if v.len() != n {
                return mismatch(n, v.len());
            }
        }
        for r in &self.corner {
            if r.len() != nb {
                return mismatch(nb, r.len());
            }
        }
        Ok(nb)
    }

    /// The full `(N + nb) x (N + nb)` matrix and right-hand side.
    pub fn assemble(&self) -> Result<(DMatrix<T>, Vec<T>)> {
        let nb = self.validate()?;
        let n = self.core.n();
        let mut m = DMatrix::zeros(n + nb, n + nb);
        for (r, row) in self.border_rows.iter().enumerate() {
            for (j, &v) in row.iter().enumerate() {
                m[(r, j)] = v;
            }
            for (c, &v) in self.corner[r].iter().enumerate() {
                m[(r, n + c)] = v;
            }
        }
        m.view_mut((nb, 0), (n, n)).copy_from(self.core.matrix());
        for (c, col) in self.border_cols.iter().enumerate() {
            for (i, &v) in col.iter().enumerate() {
                m[(nb + i, n + c)] = v;
            }
        }
        let mut b = self.rhs_border.clone();
        b.extend_from_slice(&self.rhs);
        Ok((m, b))
    }
}

pub fn solve_bordered<T: Scalar>(system: &BorderedSystem<T>) -> Result<BorderedSolution<T>> {
    let (m, b) = system.assemble()?;
    let n = system.core.n();
    let (x, condition) = solve_checked(m.clone(), &b)?;
    let r = &m * DVector::from_column_slice(&x) - DVector::from_column_slice(&b);
    let bn = b.iter().map(|v| v.abs_val().powi(2)).sum::<f64>().sqrt();
    let residual = r.norm() / if bn > 0.0 { bn } else { 1.0 };
    Ok(BorderedSolution {
        coeffs: ChebSeries::from_t(x[..n].to_vec()),
        border: x[n..].to_vec(),
        residual,
        condition,
    })
}
