//! Variable transforms `x = psi(y)` of [-1, 1] onto itself and expansions in
//! the transplanted Chebyshev basis `Q_n(x) = T_n(psi^{-1}(x))`.
//!
//! Two transforms are provided:
//!
//! * the rescaled double-exponential map `tanh(pi/2 sinh(omega y))`, which
//!   resolves algebraic endpoint singularities at both ends, and
//! * the algebraic map `2((1+y)/2)^{1/beta} - 1`, which builds an
//!   order-`beta` singularity into the basis at `x = -1`.
//!
//! Quantities such as `(1 + x)^k` lose all relative accuracy if `x` is formed
//! first, so functions handed to [`tcp_expand`] receive a [`TcpPoint`] that
//! carries `log(1 + x)` and `log(1 - x)` computed directly from `y`.

use std::f64::consts::{FRAC_PI_2, LN_2, PI};

use crate::chebcore::{interpolate, lobatto_points, ChebSeries, DOMAIN_SLACK};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Smallest `omega` for which `psi(±1)` rounds to `±1` in double precision.
pub const OMEGA_MIN: f64 = 3.154;

/// Machine epsilon used in the `omega` selection rule.
pub const MACHINE_EPS: f64 = f64::EPSILON;

/// Points used when `||f||_inf` has to be estimated from samples.
pub const SUP_NORM_SAMPLES: usize = 257;

/// `log(1 + e^z)` without overflow or cancellation.
#[inline]
pub(crate) fn softplus(z: f64) -> f64 {
    if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

/// `log(cosh z)` for any finite `z`.
#[inline]
pub(crate) fn ln_cosh(z: f64) -> f64 {
    let a = z.abs();
    a + (-2.0 * a).exp().ln_1p() - LN_2
}

/// A monotone map of [-1, 1] onto itself.
pub trait Transform {
    /// `psi(y)`, with `psi(±1) = ±1` exactly.
    fn forward(&self, y: f64) -> Result<f64>;

    /// `psi^{-1}(x)`, clamped to [-1, 1].
    fn inverse(&self, x: f64) -> Result<f64>;

    /// `log(1 + psi(y))` for `sign > 0`, `log(1 - psi(y))` otherwise.
    fn log1pm(&self, y: f64, sign: f64) -> f64;

    /// `psi'(y)`.
    fn derivative(&self, y: f64) -> f64;
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DoubleExpTransform {
    omega: f64,
}

impl DoubleExpTransform {
    pub fn new(omega: f64) -> Result<Self> {
        // the rule in select_omega is rounded to three decimals
        if !(omega.is_finite() && omega >= OMEGA_MIN - 5e-4) {
            return Err(Error::Domain {
                name: "omega",
                value: omega,
                reason: "double-exponential scaling must be at least 3.154",
            });
        }
        Ok(Self { omega })
    }

    pub fn omega(&self) -> f64 {
        self.omega
    }

    /// `(pi/2) sinh(omega y)`, the argument of the outer tanh.
    #[inline]
    pub fn inner(&self, y: f64) -> f64 {
        FRAC_PI_2 * (self.omega * y).sinh()
    }
}

impl Transform for DoubleExpTransform {
    fn forward(&self, y: f64) -> Result<f64> {
        let y = check_unit("y", y)?;
        if y.abs() == 1.0 {
            return Ok(y);
        }
        Ok(self.inner(y).tanh())
    }

    fn inverse(&self, x: f64) -> Result<f64> {
        let x = check_unit("x", x)?;
        let y = ((2.0 / PI) * x.atanh()).asinh() / self.omega;
        Ok(y.clamp(-1.0, 1.0))
    }

    fn log1pm(&self, y: f64, sign: f64) -> f64 {
        let z = PI * (self.omega * y).sinh();
        if sign > 0.0 {
            LN_2 - softplus(-z)
        } else {
            LN_2 - softplus(z)
        }
    }

    fn derivative(&self, y: f64) -> f64 {
        let w = self.omega;
        ((PI * w / 2.0).ln() + ln_cosh(w * y) - 2.0 * ln_cosh(self.inner(y))).exp()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AlgebraicTransform {
    beta: f64,
}

impl AlgebraicTransform {
    pub fn new(beta: f64) -> Result<Self> {
        if !(beta.is_finite() && beta > 0.0) {
            return Err(Error::Domain {
                name: "beta",
                value: beta,
                reason: "algebraic singularity order must be positive",
            });
        }
        Ok(Self { beta })
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }
}

impl Transform for AlgebraicTransform {
    fn forward(&self, y: f64) -> Result<f64> {
        let y = check_unit("y", y)?;
        if y.abs() == 1.0 {
            return Ok(y);
        }
        Ok(2.0 * ((1.0 + y) / 2.0).powf(1.0 / self.beta) - 1.0)
    }

    fn inverse(&self, x: f64) -> Result<f64> {
        let x = check_unit("x", x)?;
        Ok((2.0 * ((1.0 + x) / 2.0).powf(self.beta) - 1.0).clamp(-1.0, 1.0))
    }

    fn log1pm(&self, y: f64, sign: f64) -> f64 {
        let lh = ((y - 1.0) / 2.0).ln_1p(); // log((1 + y) / 2)
        if sign > 0.0 {
            LN_2 + lh / self.beta
        } else {
            LN_2 + (-(lh / self.beta).exp_m1()).ln()
        }
    }

    fn derivative(&self, y: f64) -> f64 {
        ((1.0 + y) / 2.0).powf(1.0 / self.beta - 1.0) / self.beta
    }
}

/// The transforms this crate can build operators for.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum VariableTransform {
    DoubleExp(DoubleExpTransform),
    Algebraic(AlgebraicTransform),
}

impl VariableTransform {
    pub fn double_exp(omega: f64) -> Result<Self> {
        DoubleExpTransform::new(omega).map(Self::DoubleExp)
    }

    pub fn algebraic(beta: f64) -> Result<Self> {
        AlgebraicTransform::new(beta).map(Self::Algebraic)
    }

    /// Short tag used in file metadata and cache keys.
    pub fn kind_name(&self) -> &'static str {
        match self {
            Self::DoubleExp(_) => "de",
            Self::Algebraic(_) => "algebraic",
        }
    }

    /// `omega` or `beta`.
    pub fn parameter(&self) -> f64 {
        match self {
            Self::DoubleExp(t) => t.omega,
            Self::Algebraic(t) => t.beta,
        }
    }

    pub fn point(&self, y: f64) -> Result<TcpPoint> {
        let y = check_unit("y", y)?;
        Ok(TcpPoint {
            y,
            x: self.forward(y)?,
            ln_1px: self.log1pm(y, 1.0),
            ln_1mx: self.log1pm(y, -1.0),
        })
    }
}

impl Transform for VariableTransform {
    fn forward(&self, y: f64) -> Result<f64> {
        match self {
            Self::DoubleExp(t) => t.forward(y),
            Self::Algebraic(t) => t.forward(y),
        }
    }

    fn inverse(&self, x: f64) -> Result<f64> {
        match self {
            Self::DoubleExp(t) => t.inverse(x),
            Self::Algebraic(t) => t.inverse(x),
        }
    }

    fn log1pm(&self, y: f64, sign: f64) -> f64 {
        match self {
            Self::DoubleExp(t) => t.log1pm(y, sign),
            Self::Algebraic(t) => t.log1pm(y, sign),
        }
    }

    fn derivative(&self, y: f64) -> f64 {
        match self {
            Self::DoubleExp(t) => t.derivative(y),
            Self::Algebraic(t) => t.derivative(y),
        }
    }
}

fn check_unit(name: &'static str, v: f64) -> Result<f64> {
    if !(v.abs() <= 1.0 + DOMAIN_SLACK) {
        return Err(Error::Domain {
            name,
            value: v,
            reason: "must lie in [-1, 1]",
        });
    }
    Ok(v.clamp(-1.0, 1.0))
}

/// A sample location carrying `x = psi(y)` together with accurately computed
/// `log(1 + x)` and `log(1 - x)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TcpPoint {
    pub y: f64,
    pub x: f64,
    pub ln_1px: f64,
    pub ln_1mx: f64,
}

impl TcpPoint {
    /// A point given directly in `x`; `y` is left as NaN.
    pub fn from_x(x: f64) -> Self {
        Self {
            y: f64::NAN,
            x,
            ln_1px: x.ln_1p(),
            ln_1mx: (-x).ln_1p(),
        }
    }

    /// `(1 + x)^k`.
    #[inline]
    pub fn pow_1px(&self, k: f64) -> f64 {
        (k * self.ln_1px).exp()
    }

    /// `(1 - x)^k`.
    #[inline]
    pub fn pow_1mx(&self, k: f64) -> f64 {
        (k * self.ln_1mx).exp()
    }
}

/// Endpoint behaviour of a function: `f(x) ~ (1 ± x)^gamma`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SingularityInfo {
    pub gamma: f64,
    pub fnorm: f64,
}

impl SingularityInfo {
    pub fn new(gamma: f64, fnorm: f64) -> Result<Self> {
        let s = Self { gamma, fnorm };
        s.validate()?;
        Ok(s)
    }

    /// No endpoint singularity.
    pub fn smooth(fnorm: f64) -> Self {
        Self {
            gamma: f64::INFINITY,
            fnorm,
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.gamma > 0.0) {
            return Err(Error::Domain {
                name: "gamma",
                value: self.gamma,
                reason: "singularity order must be positive",
            });
        }
        if !(self.fnorm > 0.0 && self.fnorm.is_finite()) {
            return Err(Error::Domain {
                name: "fnorm",
                value: self.fnorm,
                reason: "sup-norm estimate must be positive and finite",
            });
        }
        Ok(())
    }

    /// Combine declarations: the weakest singularity and largest norm win.
    pub fn merge(infos: &[SingularityInfo]) -> Result<Self> {
        let first = infos.first().ok_or(Error::Empty)?;
        let merged = infos.iter().fold(*first, |acc, s| SingularityInfo {
            gamma: acc.gamma.min(s.gamma),
            fnorm: acc.fnorm.max(s.fnorm),
        });
        merged.validate()?;
        Ok(merged)
    }
}

/// Scaling `omega` that resolves an order-`gamma` endpoint singularity of a
/// function with sup-norm `fnorm` down to `eps * fnorm`.
pub fn select_omega(info: &SingularityInfo) -> Result<f64> {
    info.validate()?;
    let ef = MACHINE_EPS * info.fnorm;
    let arg = if info.gamma.is_infinite() {
        // ln 2 - 0 + ln(1 - 1/2)
        0.0
    } else {
        let g = info.gamma;
        LN_2 - ef.ln() / g + (-(ef.ln() / g).exp() / 2.0).ln_1p()
    };
    Ok(OMEGA_MIN.max((arg / PI).asinh()))
}

/// Estimate `||f||_inf` from `SUP_NORM_SAMPLES` Chebyshev points in `x`.
pub fn estimate_sup_norm<T: Scalar, F: Fn(&TcpPoint) -> T>(f: F) -> f64 {
    lobatto_points(SUP_NORM_SAMPLES - 1)
        .into_iter()
        .map(|x| f(&TcpPoint::from_x(x)).abs_val())
        .filter(|v| v.is_finite())
        .fold(0.0, f64::max)
}

/// Transplanted Chebyshev coefficients of `f`, i.e. the Chebyshev
/// interpolant of `f(psi(y))` at `n + 1` Lobatto points.
pub fn tcp_expand<T, F>(t: &VariableTransform, f: F, n: usize) -> Result<ChebSeries<T>>
where
    T: Scalar,
    F: Fn(&TcpPoint) -> T,
{
    let pts = lobatto_points(n);
    let mut values = Vec::with_capacity(pts.len());
    for &y in &pts {
        let v = f(&t.point(y)?);
        if !v.to_c64().is_finite() {
            return Err(Error::NonFinite { y });
        }
        values.push(v);
    }
    crate::chebcore::values_to_coeffs(&values)
}

/// Expand with doubling `n` until the trailing eighth of the coefficients
/// falls below `tol` relative to the largest; chopped before returning.
pub fn tcp_expand_auto<T, F>(t: &VariableTransform, f: F, tol: f64, n_max: usize) -> Result<ChebSeries<T>>
where
    T: Scalar,
    F: Fn(&TcpPoint) -> T,
{
    let mut n = 32;
    loop {
        let mut s = tcp_expand(t, &f, n)?;
        let scale = s.max_abs_coeff();
        let tail = s.coeffs()[n - n / 8..]
            .iter()
            .map(|c| c.abs_val())
            .fold(0.0, f64::max);
        if tail <= tol * scale || n >= n_max {
            s.chop(tol);
            return Ok(s);
        }
        n *= 2;
    }
}

/// `sum c_n Q_n(x)`.
pub fn tcp_eval<T: Scalar>(t: &VariableTransform, series: &ChebSeries<T>, x: f64) -> Result<T> {
    let y = t.inverse(x)?;
    Ok(series.eval_unchecked(y))
}

/// Sample a real function of `y` and return its Chebyshev interpolant.
pub fn interpolate_y<F: FnMut(f64) -> f64>(n: usize, f: F) -> Result<ChebSeries<f64>> {
    interpolate(n, f)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn de(omega: f64) -> VariableTransform {
        VariableTransform::double_exp(omega).unwrap()
    }

    #[test]
    fn forward_examples() {
        assert_eq!(de(3.154).forward(0.0).unwrap(), 0.0);
        let t = de(3.154);
        assert!((t.forward(1.0).unwrap() - 1.0).abs() <= MACHINE_EPS);
        // unclamped evaluation also meets the endpoint condition
        let DoubleExpTransform { .. } = DoubleExpTransform::new(3.154).unwrap();
        let raw = DoubleExpTransform::new(3.154).unwrap().inner(1.0).tanh();
        assert!((raw - 1.0).abs() <= MACHINE_EPS);
        let a = VariableTransform::algebraic(0.5).unwrap();
        assert_abs_diff_eq!(a.forward(0.0).unwrap(), -0.5, epsilon = 1e-16);
        assert!(t.forward(1.5).is_err());
    }

    #[test]
    fn inverse_examples() {
        let t = de(4.0);
        assert_eq!(t.inverse(0.0).unwrap(), 0.0);
        assert_eq!(t.inverse(1.0).unwrap(), 1.0);
        assert_eq!(t.inverse(-1.0).unwrap(), -1.0);
        let a = VariableTransform::algebraic(0.5).unwrap();
        assert_abs_diff_eq!(a.inverse(-0.5).unwrap(), 0.0, epsilon = 1e-16);
        assert!(t.inverse(-1.01).is_err());
    }

    #[test]
    fn forward_inverse_identity() {
        for t in [de(3.154), de(6.0), VariableTransform::algebraic(0.3).unwrap()] {
            for i in 1..200 {
                let y = -1.0 + i as f64 / 100.0;
                let x = t.forward(y).unwrap();
                if x.abs() < 1.0 - 1e-12 {
                    let yy = t.inverse(x).unwrap();
                    let x2 = t.forward(yy).unwrap();
                    assert!((x2 - x).abs() <= 1e-14, "{t:?} y={y}");
                }
            }
        }
    }

    #[test]
    fn monotone_on_fine_grid() {
        for t in [de(3.154), de(14.646), VariableTransform::algebraic(0.5).unwrap()] {
            let pts: Vec<f64> = (0..=10_000).map(|i| -1.0 + 2.0 * i as f64 / 10_000.0).collect();
            // strict monotonicity holds wherever psi is not saturated at ±1
            let xs: Vec<f64> = pts.iter().map(|&y| t.forward(y).unwrap()).collect();
            for w in xs.windows(2) {
                assert!(w[1] >= w[0]);
            }
            // log((1+x)/(1-x)) stays strictly increasing even where x rounds to ±1
            let ls: Vec<f64> = pts[1..10_000].iter().map(|&y| t.log1pm(y, 1.0) - t.log1pm(y, -1.0)).collect();
            for w in ls.windows(2) {
                assert!(w[1] > w[0], "{t:?}");
            }
        }
    }

    #[test]
    fn select_omega_reference_values() {
        let w = select_omega(&SingularityInfo::new(1.0 / 3.0, 1.0).unwrap()).unwrap();
        assert_abs_diff_eq!(w, 4.238, epsilon = 5e-4);
        let w = select_omega(&SingularityInfo::new(1e-5, 1.0).unwrap()).unwrap();
        assert_abs_diff_eq!(w, 14.646, epsilon = 5e-4);
        let w = select_omega(&SingularityInfo::smooth(1.0)).unwrap();
        assert_eq!(w, OMEGA_MIN);
        assert!(SingularityInfo::new(0.0, 1.0).is_err());
        assert!(select_omega(&SingularityInfo { gamma: -1.0, fnorm: 1.0 }).is_err());
    }

    #[test]
    fn endpoint_fidelity_and_singularity_resolution() {
        for gamma in [1e-5, 1e-3, 0.1, 1.0 / 3.0, 0.5, 1.0, 2.5] {
            let omega = select_omega(&SingularityInfo::new(gamma, 1.0).unwrap()).unwrap();
            let t = DoubleExpTransform::new(omega).unwrap();
            assert!((t.inner(1.0).tanh() - 1.0).abs() <= MACHINE_EPS);
            assert!((t.inner(-1.0).tanh() + 1.0).abs() <= MACHINE_EPS);
            // f(x) = (1+x)^gamma at psi(-1) deviates from f(-1) = 0 by at most eps
            let v = (gamma * t.log1pm(-1.0, 1.0)).exp();
            assert!(v <= 1.01 * MACHINE_EPS, "gamma={gamma}: {v:e}");
        }
    }

    #[test]
    fn log1pm_examples() {
        let t = de(3.154);
        assert_eq!(t.log1pm(0.0, 1.0), 0.0);
        assert_eq!(t.log1pm(0.0, -1.0), 0.0);
        assert!((t.log1pm(1.0, 1.0) - LN_2).abs() <= MACHINE_EPS);
        // mpmath, 50 digits: log(1 + tanh(pi/2 sinh(-0.9 * 3.154)))
        let reference = -26.062_717_860_347_18;
        let v = t.log1pm(-0.9, 1.0);
        assert!(((v - reference) / reference).abs() < 1e-14, "{v:.17e}");
    }

    #[test]
    fn derivative_matches_difference_quotient() {
        let t = de(4.0);
        for i in 1..40 {
            let y = -0.975 + 0.05 * i as f64;
            let h = 1e-6;
            let fd = (t.forward(y + h).unwrap() - t.forward(y - h).unwrap()) / (2.0 * h);
            let d = t.derivative(y);
            assert!((fd - d).abs() <= 1e-7 * d.max(1e-3), "y={y}: {fd} vs {d}");
        }
    }

    #[test]
    fn expand_constant_and_identity_in_y() {
        let t = de(3.154);
        let c = tcp_expand(&t, |_p: &TcpPoint| 1.0, 16).unwrap();
        assert_abs_diff_eq!(c.coeffs()[0], 1.0, epsilon = 1e-15);
        assert!(c.coeffs()[1..].iter().all(|x| x.abs() < 1e-15));
        let s = ChebSeries::from_t(vec![0.0, 1.0]);
        let x = t.forward(0.3).unwrap();
        assert_abs_diff_eq!(tcp_eval(&t, &s, x).unwrap(), 0.3, epsilon = 1e-14);
        assert_abs_diff_eq!(tcp_eval(&t, &ChebSeries::from_t(vec![1.0]), 0.7).unwrap(), 1.0);
    }

    #[test]
    fn expansion_of_sqrt_at_origin() {
        let omega = select_omega(&SingularityInfo::new(0.5, 2f64.sqrt()).unwrap()).unwrap();
        let t = de(omega);
        let c = tcp_expand_auto(&t, |p: &TcpPoint| p.pow_1px(0.5), 1e-16, 1024).unwrap();
        assert_abs_diff_eq!(tcp_eval(&t, &c, 0.0).unwrap(), 1.0, epsilon = 1e-13);
    }

    #[test]
    fn non_finite_samples_rejected() {
        let t = de(3.154);
        let r = tcp_expand(&t, |p: &TcpPoint| 1.0 / p.y, 8);
        assert!(matches!(r, Err(Error::NonFinite { .. })));
    }

    #[test]
    fn algebraic_log_forms() {
        let a = AlgebraicTransform::new(0.5).unwrap();
        for i in 1..20 {
            let y = -1.0 + 0.1 * i as f64;
            let x = a.forward(y).unwrap();
            assert_abs_diff_eq!(a.log1pm(y, 1.0), (1.0 + x).ln(), epsilon = 1e-13);
            assert_abs_diff_eq!(a.log1pm(y, -1.0), (1.0 - x).ln(), epsilon = 1e-13);
        }
    }
}
