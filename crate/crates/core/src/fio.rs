//! Spectral approximation of the fractional integral operators
//! `_{-1}I_x^mu`, `_xI_1^mu` and their Riesz combination in a transplanted
//! Chebyshev basis.
//!
//! Column `n` of the matrix holds the coefficients of `I^mu[Q_n]`. After
//! integration by parts it splits into a closed-form term `(1 ± psi)^mu` and
//! `n phi_n(y)`, where `phi_n = (1 ± y) sum_j sigma_j f_j(y) phi_n^j(y)` and the
//! moment polynomials `phi_n^j` obey a three-term recurrence in `n` that is a
//! first-order ODE in `y`. Each step is solved in coefficient space with the
//! ultraspherical operators, using a basis that satisfies the Dirichlet
//! condition so the system is strictly banded.
//!
//! All inputs shared across the parallel sections (kernel, transform,
//! evaluator caches) are read-only while those sections run.

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::chebcore::{cheb_mul_acc, mul_one_pm_y, BandLu, BandMatrix, ChebSeries};
use crate::error::{Error, Result};
use crate::kernel::{build_kernel, AcaOptions, LowRankKernel};
use crate::quadrature::{moments_h, BoundaryEvaluator};
use crate::scalar::Scalar;
use crate::special::gamma;
use crate::transform::{tcp_expand, VariableTransform};

/// Relative threshold used when measuring band profiles.
pub const BAND_THRESHOLD: f64 = 1e-13;

/// Minimum interpolation size for the `(1 ± psi)^mu` column term, so leading
/// blocks agree across truncation sizes.
pub const POWER_EXPANSION_MIN: usize = 1024;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Side {
    Left,
    Right,
    Riesz,
}

impl Side {
    pub fn name(&self) -> &'static str {
        match self {
            Side::Left => "left",
            Side::Right => "right",
            Side::Riesz => "riesz",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "left" => Ok(Side::Left),
            "right" => Ok(Side::Right),
            "riesz" => Ok(Side::Riesz),
            other => Err(Error::InvalidParameter(format!("unknown side '{other}'"))),
        }
    }

    fn one_sided(self) -> Result<Self> {
        if self == Side::Riesz {
            return Err(Error::InvalidParameter(
                "moment recurrence is defined for left or right operators only".into(),
            ));
        }
        Ok(self)
    }
}

/// Largest sub- and super-diagonal offsets holding entries above
/// `BAND_THRESHOLD * max|a|`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BandProfile {
    pub lower: usize,
    pub upper: usize,
}

impl BandProfile {
    pub fn measure<T: Scalar>(a: &DMatrix<T>) -> Self {
        let amax = a.iter().fold(0.0f64, |m, v| m.max(v.abs_val()));
        let thr = BAND_THRESHOLD * amax;
        let (mut lower, mut upper) = (0, 0);
        for j in 0..a.ncols() {
            for i in 0..a.nrows() {
                if a[(i, j)].abs_val() > thr {
                    if i > j {
                        lower = lower.max(i - j);
                    } else {
                        upper = upper.max(j - i);
                    }
                }
            }
        }
        Self { lower, upper }
    }
}

/// Truncated `N x N` operator on transplanted Chebyshev coefficients.
#[derive(Debug, Clone)]
pub struct FIOApprox {
    side: Side,
    mu: f64,
    transform: VariableTransform,
    matrix: DMatrix<f64>,
    band: BandProfile,
    kernel_rank: usize,
    kernel_degrees: (usize, usize),
}

impl FIOApprox {
    /// Wrap a precomputed matrix (e.g. read back from disk).
    pub fn from_parts(
        side: Side,
        mu: f64,
        transform: VariableTransform,
        matrix: DMatrix<f64>,
        kernel_rank: usize,
        kernel_degrees: (usize, usize),
    ) -> Result<Self> {
        if matrix.nrows() != matrix.ncols() {
            return Err(Error::DimensionMismatch {
                expected: matrix.nrows(),
                found: matrix.ncols(),
            });
        }
        let band = BandProfile::measure(&matrix);
        Ok(Self {
            side,
            mu,
            transform,
            matrix,
            band,
            kernel_rank,
            kernel_degrees,
        })
    }

    pub fn side(&self) -> Side {
        self.side
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    pub fn transform(&self) -> &VariableTransform {
        &self.transform
    }

    pub fn n(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.matrix
    }

    pub fn band_profile(&self) -> BandProfile {
        self.band
    }

    /// Lower bandwidth `K + 1` implied by the kernel degree.
    pub fn lower_bandwidth(&self) -> usize {
        self.kernel_degrees.0 + 1
    }

    pub fn kernel_rank(&self) -> usize {
        self.kernel_rank
    }

    pub fn kernel_degrees(&self) -> (usize, usize) {
        self.kernel_degrees
    }

    /// `A c`, with `c` zero-padded or truncated to `N`.
    pub fn apply<T: Scalar>(&self, c: &[T]) -> Vec<T> {
        let n = self.n();
        let mut out = vec![T::zero(); n];
        for (j, &cj) in c.iter().enumerate().take(n) {
            if cj.abs_val() == 0.0 {
                continue;
            }
            let col = self.matrix.column(j);
            for (o, &a) in out.iter_mut().zip(col.iter()) {
                *o += cj * T::from_real(a);
            }
        }
        out
    }

    /// Evaluate `I^mu[u](x)` for `u` given by TCP coefficients.
    pub fn apply_series(&self, c: &ChebSeries<f64>) -> ChebSeries<f64> {
        ChebSeries::from_t(self.apply(c.coeffs()))
    }
}

/// Construction knobs.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct FioOptions {
    /// Kernel approximation settings; table defaults when `None`.
    pub aca: Option<AcaOptions>,
}

/// Coefficients of the `phi_n^j`, `n = 0..=N`, for one kernel term.
#[derive(Debug, Clone, PartialEq)]
pub struct MomentTable {
    pub j: usize,
    pub columns: Vec<ChebSeries<f64>>,
}

/// `(phi_0^j, phi_1^j, phi_2^j)` from the moments `h_0..h_{L+1}`.
pub fn initial_moments(h: &[f64], g: &ChebSeries<f64>, side: Side) -> Result<[ChebSeries<f64>; 3]> {
    let side = side.one_sided()?;
    let b = g.coeffs();
    let l = b.len() - 1;
    if h.len() < l + 2 {
        return Err(Error::DimensionMismatch {
            expected: l + 2,
            found: h.len(),
        });
    }
    let bb = |i: usize| if i <= l { b[i] } else { 0.0 };
    let bt = |i: usize| match i {
        0 => (2.0 * bb(0) + bb(1)) / 4.0,
        1 => (2.0 * bb(0) + 2.0 * bb(1) + bb(2)) / 4.0,
        _ => (bb(i - 1) + 2.0 * bb(i) + bb(i + 1)) / 4.0,
    };
    let phi1: f64 = (0..=l).map(|i| h[i] * b[i]).sum();
    let (mut s_diff, mut s_t) = (0.0, 0.0);
    for (i, &hi) in h.iter().enumerate().take(l + 2) {
        let t = bt(i);
        s_diff += hi * (bb(i) - t);
        s_t += hi * t;
    }
    let c0 = match side {
        Side::Left => -2.0 * s_t,
        _ => 2.0 * s_t,
    };
    Ok([
        ChebSeries::from_t(vec![0.0]),
        ChebSeries::from_t(vec![phi1]),
        ChebSeries::from_t(vec![c0, 2.0 * s_diff]),
    ])
}

// Column j of a * (M D) + b * S, where M multiplies U-series by (1 + sigma y):
// (row, value) pairs for rows j - 2, j - 1, j.
#[inline]
fn op_col(j: usize, sigma: f64, a: f64, b: f64) -> [(isize, f64); 3] {
    let jf = j as f64;
    let ji = j as isize;
    let s_diag = if j == 0 { 1.0 } else { 0.5 };
    let s_up = if j >= 2 { -0.5 } else { 0.0 };
    let md_diag = if j >= 1 { jf * sigma / 2.0 } else { 0.0 };
    let md_up2 = if j >= 2 { jf * sigma / 2.0 } else { 0.0 };
    [
        (ji - 2, a * md_up2 + b * s_up),
        (ji - 1, a * jf),
        (ji, a * md_diag + b * s_diag),
    ]
}

#[inline]
fn side_signs(side: Side) -> (f64, f64, f64) {
    // (sigma, nu, rho): operator M_sigma D + nu n S, Dirichlet basis T_{k+1} + rho T_k
    match side {
        Side::Left => (1.0, -1.0, -1.0),
        _ => (-1.0, 1.0, 1.0),
    }
}

/// Factored step `phi_{n-1}, phi_n -> phi_{n+1}`; depends only on `n` and
/// the side, so one factorization serves every kernel term.
#[derive(Debug, Clone)]
pub struct RecurrenceStep {
    n: usize,
    side: Side,
    lu: BandLu,
}

impl RecurrenceStep {
    pub fn new(n: usize, side: Side) -> Result<Self> {
        let side = side.one_sided()?;
        if n < 2 {
            return Err(Error::InvalidParameter(format!("recurrence step needs n >= 2, got {n}")));
        }
        let (sigma, nu, rho) = side_signs(side);
        let nf = n as f64;
        let mut m = BandMatrix::zeros(n, n, 1, 2);
        for k in 0..n {
            for (col, w) in [(k + 1, 1.0), (k, rho)] {
                for (row, v) in op_col(col, sigma, 1.0, nu * nf) {
                    if row >= 0 && (row as usize) < n && v != 0.0 {
                        let r = row as usize;
                        m.set(r, k, m.get(r, k) + w * v);
                    }
                }
            }
        }
        let lu = BandLu::factor(&m)?;
        Ok(Self { n, side, lu })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Coefficients of `phi_{n+1}` (length `n + 1`) with endpoint value
    /// `boundary` at `y = 1` (left) or `y = -1` (right).
    pub fn solve(&self, prev: &[f64], curr: &[f64], boundary: f64) -> Vec<f64> {
        let n = self.n;
        let nf = n as f64;
        let (sigma, nu, rho) = side_signs(self.side);
        let mut rhs = vec![0.0; n + 2];
        let mut acc = |c: &[f64], a: f64, b: f64| {
            for (j, &cj) in c.iter().enumerate() {
                if cj == 0.0 {
                    continue;
                }
                for (row, v) in op_col(j, sigma, a, b) {
                    if row >= 0 {
                        rhs[row as usize] += v * cj;
                    }
                }
            }
        };
        acc(prev, 1.0, -nu * nf);
        acc(curr, 0.0, 2.0 * nf);
        rhs.truncate(n);
        // move the boundary part beta * T_0 to the right-hand side
        rhs[0] -= boundary * nu * nf;
        self.lu.solve_in_place(&mut rhs);
        let d = rhs;
        let mut c = vec![0.0; n + 1];
        c[0] = boundary + rho * d[0];
        for k in 1..n {
            c[k] = d[k - 1] + rho * d[k];
        }
        c[n] = d[n - 1];
        c
    }
}

/// One step of the moment recurrence.
pub fn recurrence_step(n: usize, prev: &ChebSeries<f64>, curr: &ChebSeries<f64>, boundary: f64, side: Side) -> Result<ChebSeries<f64>> {
    let step = RecurrenceStep::new(n, side)?;
    Ok(ChebSeries::from_t(step.solve(prev.coeffs(), curr.coeffs(), boundary)))
}

/// `phi_0^j .. phi_N^j` for kernel term `j`.
pub fn build_moment_table(kernel: &LowRankKernel, j: usize, n_max: usize) -> Result<MomentTable> {
    let side = kernel.side.one_sided()?;
    if j >= kernel.rank() {
        return Err(Error::InvalidParameter(format!("kernel term {j} out of range (rank {})", kernel.rank())));
    }
    if n_max < 3 {
        return Err(Error::InvalidParameter(format!("moment table needs N >= 3, got {n_max}")));
    }
    let g = &kernel.gcols[j];
    let h = moments_h(kernel.mu, g.len())?;
    let [p0, p1, p2] = initial_moments(&h, g, side)?;
    let mut ev = BoundaryEvaluator::new(kernel.mu, std::slice::from_ref(g), n_max, side)?;
    let mut columns = vec![p0, p1, p2];
    for n in 2..n_max {
        while ev.n() < n + 1 {
            ev.advance();
        }
        let beta = ev.values()[0];
        let next = recurrence_step(n, &columns[n - 1], &columns[n], beta, side)?;
        columns.push(next);
    }
    Ok(MomentTable { j, columns })
}

/// TCP coefficients of `(1 + psi)^mu` (left) or `(1 - psi)^mu` (right),
/// interpolated at a fixed resolution and truncated to `n`.
pub fn endpoint_power(tr: &VariableTransform, mu: f64, side: Side, n: usize) -> Result<Vec<f64>> {
    let m = n.next_power_of_two().max(POWER_EXPANSION_MIN);
    let s = match side.one_sided()? {
        Side::Left => tcp_expand(tr, |p| p.pow_1px(mu), m)?,
        _ => tcp_expand(tr, |p| p.pow_1mx(mu), m)?,
    };
    let mut c = s.into_coeffs();
    c.resize(n.max(c.len()), 0.0);
    c.truncate(n);
    Ok(c)
}

struct TermState {
    prev: Vec<f64>,
    curr: Vec<f64>,
}

/// Assemble the `N x N` matrix of a one-sided operator from its kernel.
pub fn assemble(tr: &VariableTransform, kernel: &LowRankKernel, n: usize) -> Result<FIOApprox> {
    let side = kernel.side.one_sided()?;
    let mu = kernel.mu;
    if n < 1 {
        return Err(Error::InvalidParameter("truncation size must be positive".into()));
    }
    let g1 = gamma(1.0 + mu)?;
    let inv_g = 1.0 / g1;
    let p = endpoint_power(tr, mu, side, n)?;
    let r = kernel.rank();
    let l_max = kernel.l();
    let h = moments_h(mu, l_max + 1)?;
    let mut states = Vec::with_capacity(r);
    let mut seconds = Vec::with_capacity(r);
    for g in &kernel.gcols {
        let [p0, p1, p2] = initial_moments(&h, g, side)?;
        states.push(TermState {
            prev: p0.into_coeffs(),
            curr: p1.into_coeffs(),
        });
        seconds.push(p2.into_coeffs());
    }
    let mut ev = BoundaryEvaluator::new(mu, &kernel.gcols, n.max(3), side)?;
    let mut a = DMatrix::<f64>::zeros(n, n);
    for (i, &v) in p.iter().enumerate() {
        a[(i, 0)] = v * inv_g;
    }
    let k_max = kernel.k();
    let pm = if side == Side::Left { 1.0 } else { -1.0 };
    for col in 1..n {
        // states hold phi_{col-1}^j, phi_col^j
        let len = (col + k_max + 1).min(n + 1);
        let partial: Vec<f64> = states
            .par_iter()
            .zip(kernel.fcols.par_iter().zip(kernel.sigma.par_iter()))
            .fold(
                || vec![0.0; len],
                |mut acc, (st, (f, &sg))| {
                    cheb_mul_acc(f.coeffs(), &st.curr, sg, &mut acc);
                    acc
                },
            )
            .reduce(
                || vec![0.0; len],
                |mut x, y| {
                    x.iter_mut().zip(&y).for_each(|(u, v)| *u += v);
                    x
                },
            );
        // (1 + y) for left, (y - 1) = -(1 - y) for right
        let mut phi = mul_one_pm_y(&partial, pm);
        if side == Side::Right {
            phi.iter_mut().for_each(|v| *v = -*v);
        }
        let sgn = if side == Side::Left && col % 2 == 1 { -1.0 } else { 1.0 };
        let cf = col as f64;
        for i in 0..n {
            let ph = phi.get(i).copied().unwrap_or(0.0);
            a[(i, col)] = (sgn * p[i] + cf * ph) * inv_g;
        }
        if col + 1 >= n {
            break;
        }
        if col == 1 {
            for (st, second) in states.iter_mut().zip(seconds.iter_mut()) {
                st.prev = std::mem::take(&mut st.curr);
                st.curr = std::mem::take(second);
            }
            continue;
        }
        while ev.n() < col + 1 {
            ev.advance();
        }
        let betas = ev.values();
        let step = RecurrenceStep::new(col, side)?;
        states.par_iter_mut().zip(betas.par_iter()).for_each(|(st, &beta)| {
            let next = step.solve(&st.prev, &st.curr, beta);
            st.prev = std::mem::replace(&mut st.curr, next);
        });
    }
    let (kd, ld) = (kernel.k(), kernel.l());
    FIOApprox::from_parts(side, mu, *tr, a, r, (kd, ld))
}

/// Build the kernel and assemble a one-sided operator.
pub fn build_fio(tr: &VariableTransform, mu: f64, side: Side, n: usize, opts: &FioOptions) -> Result<FIOApprox> {
    check_order(mu)?;
    if side == Side::Riesz {
        return build_riesz(tr, mu, n, opts);
    }
    let kernel = build_kernel(tr, mu, side, opts.aca.as_ref())?;
    assemble(tr, &kernel, n)
}

fn check_order(mu: f64) -> Result<()> {
    if !(mu > 0.0 && mu.is_finite()) {
        return Err(Error::Domain {
            name: "mu",
            value: mu,
            reason: "fractional order must be positive",
        });
    }
    Ok(())
}

/// `1 / (2 cos(pi mu / 2))`, rejecting odd integer orders.
pub fn riesz_factor(mu: f64) -> Result<f64> {
    check_order(mu)?;
    let nearest_odd = 2.0 * ((mu - 1.0) / 2.0).round() + 1.0;
    if (mu - nearest_odd).abs() < 1e-8 {
        return Err(Error::Domain {
            name: "mu",
            value: mu,
            reason: "Riesz operator is undefined at odd integer orders",
        });
    }
    Ok(1.0 / (2.0 * (std::f64::consts::FRAC_PI_2 * mu).cos()))
}

/// `(A_left + A_right) / (2 cos(pi mu / 2))`.
pub fn build_riesz(tr: &VariableTransform, mu: f64, n: usize, opts: &FioOptions) -> Result<FIOApprox> {
    riesz_factor(mu)?;
    let left = build_fio(tr, mu, Side::Left, n, opts)?;
    let right = build_fio(tr, mu, Side::Right, n, opts)?;
    combine_riesz(&left, &right)
}

/// Riesz operator from prebuilt one-sided operators of the same order.
pub fn combine_riesz(left: &FIOApprox, right: &FIOApprox) -> Result<FIOApprox> {
    if left.side != Side::Left || right.side != Side::Right {
        return Err(Error::InvalidParameter("expected a left and a right operator".into()));
    }
    if left.n() != right.n() {
        return Err(Error::DimensionMismatch {
            expected: left.n(),
            found: right.n(),
        });
    }
    if (left.mu - right.mu).abs() > 0.0 {
        return Err(Error::InvalidParameter("orders of the one-sided operators differ".into()));
    }
    let c = riesz_factor(left.mu)?;
    let m = (&left.matrix + &right.matrix) * c;
    FIOApprox::from_parts(
        Side::Riesz,
        left.mu,
        left.transform,
        m,
        left.kernel_rank.max(right.kernel_rank),
        left.kernel_degrees,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::algebraic_factorization;
    use crate::quadrature::gauss_jacobi;

    fn unit_kernel(mu: f64, side: Side) -> LowRankKernel {
        let mut k = algebraic_factorization(1.0, mu, 8, 8).unwrap();
        k.side = side;
        k
    }

    #[test]
    fn initial_moments_constant_kernel() {
        let h = moments_h(1.0, 1).unwrap();
        let g = ChebSeries::from_t(vec![1.0]);
        let [p0, p1, p2] = initial_moments(&h, &g, Side::Left).unwrap();
        assert_eq!(p0.coeffs(), &[0.0]);
        assert!((p1.coeff(0) - 0.5).abs() < 1e-15);
        assert!((p2.coeff(0) + 2.0 / 3.0).abs() < 1e-15);
        assert!((p2.coeff(1) - 1.0 / 3.0).abs() < 1e-15);
        let [_, _, r2] = initial_moments(&h, &g, Side::Right).unwrap();
        assert!((r2.coeff(0) - 2.0 / 3.0).abs() < 1e-15);
        assert!((r2.coeff(1) - 1.0 / 3.0).abs() < 1e-15);
    }

    // phi_n^j(y) = int_0^1 t^mu U_{n-1}(y -/+ (1 -/+ y) t) g(t) dt by Gauss–Jacobi
    fn direct_moment(mu: f64, n: usize, g: &ChebSeries<f64>, side: Side, y: f64) -> f64 {
        let rule = gauss_jacobi(mu, n + g.len() + 4).unwrap();
        let mut u = vec![0.0; n];
        u[n - 1] = 1.0;
        rule.integrate(|t| {
            let arg = match side {
                Side::Left => y - (1.0 + y) * t,
                _ => y + (1.0 - y) * t,
            };
            crate::chebcore::clenshaw(crate::chebcore::BasisKind::U, &u, arg)
                * crate::quadrature::eval_on_unit(g, t)
        })
    }

    #[test]
    fn moment_table_matches_direct_quadrature() {
        let g = ChebSeries::from_t(vec![0.9, -0.3, 0.05, 0.02, -0.004]);
        for side in [Side::Left, Side::Right] {
            let kernel = LowRankKernel {
                sigma: vec![1.0],
                fcols: vec![ChebSeries::from_t(vec![1.0])],
                gcols: vec![g.clone()],
                mu: 0.37,
                side,
                residual: 0.0,
            };
            let table = build_moment_table(&kernel, 0, 40).unwrap();
            for (n, col) in table.columns.iter().enumerate() {
                assert!(col.len() <= n.max(1), "degree bound at n={n}");
                if n == 0 {
                    assert_eq!(col.coeffs(), &[0.0]);
                    continue;
                }
                for i in 0..11 {
                    let y = -1.0 + 0.2 * i as f64;
                    let d = direct_moment(0.37, n, &g, side, y);
                    let v = col.eval(y).unwrap();
                    assert!((v - d).abs() < 1e-11 * (1.0 + d.abs()), "{side:?} n={n} y={y}: {v} vs {d}");
                }
            }
        }
    }

    #[test]
    fn recurrence_honours_boundary_value() {
        let k = unit_kernel(1.0, Side::Left);
        let t = build_moment_table(&k, 0, 6).unwrap();
        let next = recurrence_step(2, &t.columns[1], &t.columns[2], 0.123, Side::Left).unwrap();
        assert!((next.eval(1.0).unwrap() - 0.123).abs() < 1e-14);
        assert_eq!(next.len(), 3);
        let next = recurrence_step(2, &t.columns[1], &t.columns[2], -0.5, Side::Right).unwrap();
        assert!((next.eval(-1.0).unwrap() + 0.5).abs() < 1e-14);
        assert!(recurrence_step(1, &t.columns[0], &t.columns[1], 0.0, Side::Left).is_err());
    }

    #[test]
    fn riesz_factor_values() {
        assert!((riesz_factor(0.5).unwrap() - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-15);
        assert!(riesz_factor(3.0).is_err());
        assert!(riesz_factor(1.0 + 1e-9).is_err());
        assert!(riesz_factor(2.0).is_ok());
    }

    #[test]
    fn identity_transform_reproduces_classical_antiderivative() {
        // beta = 1 makes psi the identity; mu = 1 gives the plain integral
        let tr = VariableTransform::algebraic(1.0).unwrap();
        let k = algebraic_factorization(1.0, 1.0, 8, 8).unwrap();
        let a = assemble(&tr, &k, 12).unwrap();
        // int_{-1}^x t dt = (x^2 - 1)/2 = (T_2 - T_0)/4
        let out = a.apply(&[0.0, 1.0]);
        assert!((out[0] + 0.25).abs() < 1e-14);
        assert!(out[1].abs() < 1e-14);
        assert!((out[2] - 0.25).abs() < 1e-14);
        assert!(out[3..].iter().all(|v| v.abs() < 1e-14));
    }
}
