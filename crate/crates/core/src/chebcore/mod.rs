//! Chebyshev polynomial primitives: coefficient series, value/coefficient
//! transforms on the Chebyshev–Lobatto grid, Clenshaw evaluation and the
//! sparse ultraspherical operators used by the moment recurrence.

mod banded;
mod ultra;

use std::cell::RefCell;
use std::f64::consts::PI;

use num_complex::Complex64;
use rustfft::FftPlanner;

use crate::error::{Error, Result};
use crate::scalar::Scalar;

pub use banded::{BandLu, BandMatrix};
pub use ultra::UltraOps;

/// Slack allowed past the endpoints of [-1, 1] before evaluation is refused.
pub const DOMAIN_SLACK: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BasisKind {
    /// First kind, `T_n`.
    T,
    /// Second kind, `U_n`.
    U,
}

/// A finite Chebyshev series on [-1, 1].
#[derive(Debug, Clone, PartialEq)]
pub struct ChebSeries<T: Scalar = f64> {
    kind: BasisKind,
    coeffs: Vec<T>,
}

impl<T: Scalar> ChebSeries<T> {
    pub fn new(kind: BasisKind, coeffs: Vec<T>) -> Result<Self> {
        if coeffs.is_empty() {
            return Err(Error::Empty);
        }
        Ok(Self { kind, coeffs })
    }

    /// First-kind series. An empty vector is promoted to the zero series.
    pub fn from_t(mut coeffs: Vec<T>) -> Self {
        if coeffs.is_empty() {
            coeffs.push(T::zero());
        }
        Self {
            kind: BasisKind::T,
            coeffs,
        }
    }

    pub fn zero(kind: BasisKind) -> Self {
        Self {
            kind,
            coeffs: vec![T::zero()],
        }
    }

    pub fn kind(&self) -> BasisKind {
        self.kind
    }

    pub fn coeffs(&self) -> &[T] {
        &self.coeffs
    }

    pub fn coeffs_mut(&mut self) -> &mut [T] {
        &mut self.coeffs
    }

    pub fn into_coeffs(self) -> Vec<T> {
        self.coeffs
    }

    pub fn len(&self) -> usize {
        self.coeffs.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Index of the last nonzero coefficient, or 0 for the zero series.
    pub fn degree(&self) -> usize {
        self.coeffs
            .iter()
            .rposition(|c| c.abs_val() > 0.0)
            .unwrap_or(0)
    }

    /// Coefficient `n`, zero beyond the stored length.
    pub fn coeff(&self, n: usize) -> T {
        self.coeffs.get(n).copied().unwrap_or_else(T::zero)
    }

    /// Resize to exactly `len` coefficients (zero-padding or truncating).
    pub fn resized(&self, len: usize) -> Self {
        let mut coeffs = self.coeffs.clone();
        coeffs.resize(len.max(1), T::zero());
        Self {
            kind: self.kind,
            coeffs,
        }
    }

    /// Drop trailing coefficients below `tol * max|c|`, keeping at least one.
    pub fn chop(&mut self, tol: f64) {
        let scale = self.coeffs.iter().map(|c| c.abs_val()).fold(0.0, f64::max);
        let keep = self
            .coeffs
            .iter()
            .rposition(|c| c.abs_val() > tol * scale)
            .map_or(1, |i| i + 1);
        self.coeffs.truncate(keep);
    }

    pub fn eval(&self, y: f64) -> Result<T> {
        if !(y.abs() <= 1.0 + DOMAIN_SLACK) {
            return Err(Error::Domain {
                name: "y",
                value: y,
                reason: "Chebyshev series evaluated outside [-1, 1]",
            });
        }
        Ok(self.eval_unchecked(y))
    }

    /// Clenshaw evaluation without the domain check.
    pub fn eval_unchecked(&self, y: f64) -> T {
        clenshaw(self.kind, &self.coeffs, y)
    }

    pub fn max_abs_coeff(&self) -> f64 {
        self.coeffs.iter().map(|c| c.abs_val()).fold(0.0, f64::max)
    }
}

impl ChebSeries<f64> {
    pub fn to_complex(&self) -> ChebSeries<Complex64> {
        ChebSeries {
            kind: self.kind,
            coeffs: self.coeffs.iter().map(|&c| Complex64::new(c, 0.0)).collect(),
        }
    }
}

/// Backward recurrence for `sum c_n T_n(y)` or `sum c_n U_n(y)`.
pub fn clenshaw<T: Scalar>(kind: BasisKind, coeffs: &[T], y: f64) -> T {
    let n = coeffs.len();
    if n == 0 {
        return T::zero();
    }
    let two_y = T::from_real(2.0 * y);
    let mut b1 = T::zero();
    let mut b2 = T::zero();
    for k in (1..n).rev() {
        let b0 = coeffs[k] + two_y * b1 - b2;
        b2 = b1;
        b1 = b0;
    }
    match kind {
        BasisKind::T => coeffs[0] + T::from_real(y) * b1 - b2,
        BasisKind::U => coeffs[0] + two_y * b1 - b2,
    }
}

/// The `n + 1` Chebyshev–Lobatto points `cos(k pi / n)`, from 1 down to -1.
pub fn lobatto_points(n: usize) -> Vec<f64> {
    if n == 0 {
        return vec![1.0];
    }
    // sin form keeps the points exactly antisymmetric
    (0..=n)
        .map(|k| (PI * (n as f64 - 2.0 * k as f64) / (2.0 * n as f64)).sin())
        .collect()
}

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

/// Unnormalised DCT-I: `out_k = a_0 + (-1)^k a_n + 2 sum_{m=1}^{n-1} a_m cos(pi m k / n)`.
fn dct1(data: &[Complex64]) -> Vec<Complex64> {
    let n = data.len() - 1;
    if n == 0 {
        return data.to_vec();
    }
    let m = 2 * n;
    let mut buf: Vec<Complex64> = Vec::with_capacity(m);
    buf.extend_from_slice(data);
    buf.extend(data[1..n].iter().rev());
    let fft = PLANNER.with(|p| p.borrow_mut().plan_fft_forward(m));
    fft.process(&mut buf);
    buf.truncate(n + 1);
    buf
}

/// Interpolation coefficients from samples at the Lobatto points
/// `cos(k pi / n)`, `k = 0..n`, in O(n log n).
pub fn values_to_coeffs<T: Scalar>(values: &[T]) -> Result<ChebSeries<T>> {
    if values.is_empty() {
        return Err(Error::Empty);
    }
    let n = values.len() - 1;
    if n == 0 {
        return Ok(ChebSeries::from_t(values.to_vec()));
    }
    let data: Vec<Complex64> = values.iter().map(|v| v.to_c64()).collect();
    let out = dct1(&data);
    let scale = 1.0 / n as f64;
    let coeffs = out
        .into_iter()
        .enumerate()
        .map(|(k, z)| {
            let s = if k == 0 || k == n { 0.5 * scale } else { scale };
            T::from_c64(z * s)
        })
        .collect();
    Ok(ChebSeries::from_t(coeffs))
}

/// Values of a first-kind series at the Lobatto points of its own length.
pub fn coeffs_to_values<T: Scalar>(series: &ChebSeries<T>) -> Result<Vec<T>> {
    if series.kind() != BasisKind::T {
        return Err(Error::InvalidParameter(
            "coeffs_to_values expects a first-kind series".into(),
        ));
    }
    let c = series.coeffs();
    let n = c.len() - 1;
    if n == 0 {
        return Ok(c.to_vec());
    }
    let data: Vec<Complex64> = c
        .iter()
        .enumerate()
        .map(|(k, v)| {
            let z = v.to_c64();
            if k == 0 || k == n {
                z
            } else {
                z * 0.5
            }
        })
        .collect();
    Ok(dct1(&data).into_iter().map(T::from_c64).collect())
}

/// Product of two first-kind series via `T_k T_l = (T_{k+l} + T_{|k-l|}) / 2`.
pub fn cheb_mul<T: Scalar>(a: &[T], b: &[T]) -> Vec<T> {
    if a.is_empty() || b.is_empty() {
        return vec![T::zero()];
    }
    let mut out = vec![T::zero(); a.len() + b.len() - 1];
    cheb_mul_acc(a, b, T::one(), &mut out);
    out
}

/// `out += scale * (a * b)`, with terms past `out.len()` dropped.
pub fn cheb_mul_acc<T: Scalar>(a: &[T], b: &[T], scale: T, out: &mut [T]) {
    let half = scale * T::from_real(0.5);
    let len = out.len();
    for (k, &ak) in a.iter().enumerate() {
        if ak.abs_val() == 0.0 {
            continue;
        }
        let ak = ak * half;
        for (l, &bl) in b.iter().enumerate() {
            let p = ak * bl;
            let hi = k + l;
            if hi < len {
                out[hi] += p;
            }
            let lo = k.abs_diff(l);
            if lo < len {
                out[lo] += p;
            }
        }
    }
}

/// Coefficients of `(1 + sign * y) p(y)` for a first-kind series `p`.
pub fn mul_one_pm_y<T: Scalar>(c: &[T], sign: f64) -> Vec<T> {
    let mut out = vec![T::zero(); c.len() + 1];
    let half = T::from_real(0.5 * sign);
    for (k, &ck) in c.iter().enumerate() {
        out[k] += ck;
        out[k + 1] += ck * half;
        out[k.abs_diff(1)] += ck * half;
    }
    out
}

/// Sample `f` at `n + 1` Lobatto points and interpolate.
pub fn interpolate<T: Scalar, F: FnMut(f64) -> T>(n: usize, mut f: F) -> Result<ChebSeries<T>> {
    let values: Vec<T> = lobatto_points(n).into_iter().map(&mut f).collect();
    values_to_coeffs(&values)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn cheb_t(n: usize, y: f64) -> f64 {
        // explicit three-term generation, independent of Clenshaw
        let (mut t0, mut t1) = (1.0, y);
        if n == 0 {
            return t0;
        }
        for _ in 1..n {
            let t2 = 2.0 * y * t1 - t0;
            t0 = t1;
            t1 = t2;
        }
        t1
    }

    #[test]
    fn constant_samples_give_t0() {
        let c = values_to_coeffs(&[1.0; 9]).unwrap();
        assert_abs_diff_eq!(c.coeffs()[0], 1.0, epsilon = 1e-15);
        for &x in &c.coeffs()[1..] {
            assert_abs_diff_eq!(x, 0.0, epsilon = 1e-15);
        }
    }

    #[test]
    fn identity_samples_give_t1() {
        let pts = lobatto_points(12);
        let c = values_to_coeffs(&pts).unwrap();
        for (k, &x) in c.coeffs().iter().enumerate() {
            let expect = if k == 1 { 1.0 } else { 0.0 };
            assert_abs_diff_eq!(x, expect, epsilon = 1e-15);
        }
    }

    #[test]
    fn values_from_simple_series() {
        let v = coeffs_to_values(&ChebSeries::from_t(vec![1.0, 0.0, 0.0])).unwrap();
        for x in v {
            assert_abs_diff_eq!(x, 1.0, epsilon = 1e-15);
        }
        let v = coeffs_to_values(&ChebSeries::from_t(vec![0.0, 1.0])).unwrap();
        assert_eq!(v, lobatto_points(1));
    }

    #[test]
    fn empty_input_rejected() {
        assert_eq!(values_to_coeffs::<f64>(&[]).unwrap_err(), Error::Empty);
        assert!(ChebSeries::<f64>::new(BasisKind::T, vec![]).is_err());
    }

    #[test]
    fn clenshaw_examples() {
        let t2 = ChebSeries::from_t(vec![0.0, 0.0, 1.0]);
        assert_abs_diff_eq!(t2.eval(0.5).unwrap(), -0.5, epsilon = 1e-15);
        let u2 = ChebSeries::new(BasisKind::U, vec![0.0, 0.0, 1.0]).unwrap();
        assert_abs_diff_eq!(u2.eval(1.0).unwrap(), 3.0, epsilon = 1e-15);
        assert!(t2.eval(1.1).is_err());
    }

    #[test]
    fn clenshaw_matches_direct_summation() {
        let coeffs: Vec<f64> = (0..21).map(|k| ((k * 7919) % 13) as f64 / 13.0 - 0.5).collect();
        let s = ChebSeries::from_t(coeffs.clone());
        for i in 0..=40 {
            let y = -1.0 + i as f64 / 20.0;
            let direct: f64 = coeffs.iter().enumerate().map(|(n, c)| c * cheb_t(n, y)).sum();
            assert_abs_diff_eq!(s.eval(y).unwrap(), direct, epsilon = 1e-13);
        }
    }

    #[test]
    fn complex_roundtrip() {
        let c: Vec<Complex64> = (0..17)
            .map(|k| Complex64::new(1.0 / (k + 1) as f64, (k as f64).sin()))
            .collect();
        let s = ChebSeries::from_t(c.clone());
        let back = values_to_coeffs(&coeffs_to_values(&s).unwrap()).unwrap();
        for (a, b) in back.coeffs().iter().zip(&c) {
            assert!((a - b).norm() < 1e-14);
        }
    }

    #[test]
    fn roundtrip_large() {
        let n = 1 << 14;
        let mut c: Vec<f64> = (0..=n).map(|k| ((k as f64) * 0.7).cos()).collect();
        let norm = c.iter().map(|x| x * x).sum::<f64>().sqrt();
        c.iter_mut().for_each(|x| *x /= norm);
        let s = ChebSeries::from_t(c.clone());
        let back = values_to_coeffs(&coeffs_to_values(&s).unwrap()).unwrap();
        let err = back
            .coeffs()
            .iter()
            .zip(&c)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        assert!(err < 1e-14, "roundtrip error {err}");
    }

    #[test]
    fn product_of_basis_polynomials() {
        for n in 0..=50 {
            for m in 0..=50 {
                let mut a = vec![0.0; n + 1];
                a[n] = 1.0;
                let mut b = vec![0.0; m + 1];
                b[m] = 1.0;
                let p = cheb_mul(&a, &b);
                let mut expect = vec![0.0; n + m + 1];
                expect[n + m] += 0.5;
                expect[n.abs_diff(m)] += 0.5;
                assert_eq!(p, expect, "T_{n} T_{m}");
            }
        }
    }

    #[test]
    fn one_plus_y_product() {
        // (1 + y) T_1 = T_1 + (T_2 + T_0) / 2
        let p = mul_one_pm_y(&[0.0, 1.0], 1.0);
        assert_eq!(p, vec![0.5, 1.0, 0.5]);
        let p = mul_one_pm_y(&[2.0, 0.0, 1.0], -1.0);
        for i in 0..=10 {
            let y = -1.0 + 0.2 * i as f64;
            let lhs = clenshaw(BasisKind::T, &p, y);
            let rhs = (1.0 - y) * (2.0 + cheb_t(2, y));
            assert_abs_diff_eq!(lhs, rhs, epsilon = 1e-14);
        }
    }

    proptest! {
        #[test]
        fn roundtrip_random(c in proptest::collection::vec(-1.0f64..1.0, 1..200)) {
            let norm = c.iter().map(|x| x * x).sum::<f64>().sqrt().max(1e-300);
            let c: Vec<f64> = c.iter().map(|x| x / norm).collect();
            let s = ChebSeries::from_t(c.clone());
            let back = values_to_coeffs(&coeffs_to_values(&s).unwrap()).unwrap();
            for (a, b) in back.coeffs().iter().zip(&c) {
                prop_assert!((a - b).abs() < 1e-14);
            }
        }

        #[test]
        fn product_matches_pointwise(
            a in proptest::collection::vec(-1.0f64..1.0, 1..12),
            b in proptest::collection::vec(-1.0f64..1.0, 1..12),
            y in -1.0f64..1.0,
        ) {
            let p = cheb_mul(&a, &b);
            let lhs = clenshaw(BasisKind::T, &p, y);
            let rhs = clenshaw(BasisKind::T, &a, y) * clenshaw(BasisKind::T, &b, y);
            prop_assert!((lhs - rhs).abs() < 1e-13);
        }
    }
}
