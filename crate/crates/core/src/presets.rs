//! The six reference experiments, with exact solutions where known.

use std::f64::consts::{E, FRAC_PI_2, FRAC_PI_4, LN_2, SQRT_2};

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::fio::Side;
use crate::kernel::{AcaOptions, RANK_TABLE};
use crate::solver::{
    real_fn, AiryOptions, EigenOptions, PseudoOptions, ProblemSpec, RealFn, Term, TruncationPolicy,
};
use crate::special::gamma;
use crate::transform::TcpPoint;

pub const NAMES: [&str; 6] = ["abel", "riesz", "mixed", "airy", "eig", "pseudospectra"];

/// Smallest-modulus eigenvalues for `mu1 = 1.23456789`, `mu2 = 0.123456789`;
/// all but the first come in conjugate pairs.
pub const EIGEN_MU: (f64, f64) = (1.23456789, 0.123456789);
pub const EIGEN_TABLE: [(f64, f64); 6] = [
    (1.355201481588489, 0.0),
    (4.930015412112804, 3.094646626469975),
    (8.217665634311189, 8.089668419364024),
    (11.387725243090559, 13.804866459545323),
    (14.564020446706387, 20.023206234983594),
    (17.778713260368924, 26.640854355716016),
];

/// An integral equation with an optional closed-form solution.
#[derive(Clone)]
pub struct FiePreset {
    pub name: &'static str,
    pub spec: ProblemSpec,
    pub exact: Option<RealFn>,
}

impl std::fmt::Debug for FiePreset {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("FiePreset")
            .field("name", &self.name)
            .field("spec", &self.spec)
            .field("exact", &self.exact.is_some())
            .finish()
    }
}

/// Fixed-rank kernel options from [`RANK_TABLE`], if `mu` is listed.
pub fn abel_kernel(mu: f64) -> Option<AcaOptions> {
    RANK_TABLE
        .iter()
        .find(|row| (row.0 - mu).abs() <= 1e-12 * mu)
        .map(|&(_, r, k)| AcaOptions::fixed(r, k))
}

/// `u + I^mu[u] = (1+x)^mu + Gamma(1+mu)/Gamma(1+2mu) (1+x)^{2mu}`, solved by
/// `u = (1+x)^mu`.
pub fn abel(mu: f64) -> Result<FiePreset> {
    if !(mu > 0.0 && mu.is_finite()) {
        return Err(Error::Domain {
            name: "mu",
            value: mu,
            reason: "order must be positive",
        });
    }
    let c = gamma(1.0 + mu)? / gamma(1.0 + 2.0 * mu)?;
    let rhs = real_fn(move |p: &TcpPoint| p.pow_1px(mu) + c * p.pow_1px(2.0 * mu));
    let mut spec = ProblemSpec::new(vec![Term::identity(), Term::fio(mu, Side::Left)], rhs);
    spec.gammas = vec![mu];
    spec.policy = TruncationPolicy {
        n_start: 64,
        n_max: 1024,
        tol: 1e-13,
        exhaust: false,
    };
    if mu < 0.5 {
        spec.aca = abel_kernel(mu);
    }
    Ok(FiePreset {
        name: "abel",
        spec,
        exact: Some(real_fn(move |p: &TcpPoint| p.pow_1px(mu))),
    })
}

/// `artanh(sqrt((1 - x)/2))`, accurate as `x -> -1` where the argument tends
/// to one.
fn artanh_sqrt_half_1mx(p: &TcpPoint) -> f64 {
    let s = (0.5 * (p.ln_1mx - LN_2)).exp();
    // artanh s = (ln(1 + s) - ln(1 - s)) / 2 and (1 - s)(1 + s) = (1 + x)/2
    let ln_1ms = p.ln_1px - LN_2 - s.ln_1p();
    0.5 * (s.ln_1p() - ln_1ms)
}

/// `u + I_R^{1/2}[u] = f` with `u = 2 Gamma(1/2) cos(pi/4) sqrt(1 + x)`.
pub fn riesz() -> Result<FiePreset> {
    let c = 2.0 * gamma(0.5)? * FRAC_PI_4.cos();
    let rhs = real_fn(move |p: &TcpPoint| {
        let log_term = if p.ln_1px == f64::NEG_INFINITY {
            0.0
        } else {
            p.pow_1px(1.0) * (FRAC_PI_2 + artanh_sqrt_half_1mx(p))
        };
        c * p.pow_1px(0.5) + SQRT_2 * p.pow_1mx(0.5) + log_term
    });
    let mut spec = ProblemSpec::new(vec![Term::identity(), Term::fio(0.5, Side::Riesz)], rhs);
    spec.gammas = vec![0.5];
    spec.policy.n_max = 512;
    Ok(FiePreset {
        name: "riesz",
        spec,
        exact: Some(real_fn(move |p: &TcpPoint| c * p.pow_1px(0.5))),
    })
}

/// `u + (1+x)^{2/3} I_R^{sqrt 2}[u] + I_right^{pi/4}[(1-x)^{sqrt 3} u]
/// + I_left^{e/3}[u] = 1`.
pub fn mixed() -> FiePreset {
    let terms = vec![
        Term::identity(),
        Term::fio(SQRT_2, Side::Riesz).with_coeff(real_fn(|p: &TcpPoint| p.pow_1px(2.0 / 3.0))),
        Term::fio(FRAC_PI_4, Side::Right).with_inner(real_fn(|p: &TcpPoint| p.pow_1mx(3f64.sqrt()))),
        Term::fio(E / 3.0, Side::Left),
    ];
    let mut spec = ProblemSpec::new(terms, real_fn(|_: &TcpPoint| 1.0));
    spec.gammas = vec![2.0 / 3.0];
    spec.policy = TruncationPolicy {
        n_start: 32,
        n_max: 1024,
        tol: 1e-13,
        exhaust: false,
    };
    FiePreset {
        name: "mixed",
        spec,
        exact: None,
    }
}

/// Desk-scale fractional Airy problem.
pub fn airy() -> AiryOptions {
    AiryOptions::new(1e-2)
}

pub fn eig() -> EigenOptions {
    EigenOptions::new(EIGEN_MU.0, EIGEN_MU.1, EIGEN_TABLE.len())
}

/// Reference eigenvalues with `Im lambda >= 0`.
pub fn eigen_reference() -> Vec<Complex64> {
    EIGEN_TABLE.iter().map(|&(re, im)| Complex64::new(re, im)).collect()
}

/// Default region on a 29 x 29 grid (spacing 1/2, so the real axis and
/// `z = 8` are grid points).
pub fn pseudospectra() -> PseudoOptions {
    let mut o = PseudoOptions::default();
    o.grid.nx = 29;
    o.grid.ny = 29;
    o
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn artanh_matches_direct_formula() {
        for x in [-0.9, -0.3, 0.0, 0.5, 0.99] {
            let p = TcpPoint::from_x(x);
            let direct = ((1.0 - x) / 2.0f64).sqrt().atanh();
            assert!((artanh_sqrt_half_1mx(&p) - direct).abs() < 1e-14 * direct.abs().max(1.0));
        }
        // at x = -1 + 1e-30 the direct formula rounds the argument to 1
        let p = TcpPoint {
            y: f64::NAN,
            x: -1.0,
            ln_1px: -30.0 * std::f64::consts::LN_10,
            ln_1mx: LN_2,
        };
        assert!((artanh_sqrt_half_1mx(&p) - 0.5 * (8.0f64.ln() + 30.0 * std::f64::consts::LN_10)).abs() < 1e-12);
    }

    #[test]
    fn abel_rhs_and_table() {
        let p = abel(0.5).unwrap();
        let f = &p.spec.rhs;
        let pt = TcpPoint::from_x(0.0);
        let c = gamma(1.5).unwrap() / gamma(2.0).unwrap();
        assert!((f(&pt) - (1.0 + c)).abs() < 1e-15);
        assert!(p.spec.aca.is_none());
        let k = abel(1e-2).unwrap().spec.aca.unwrap();
        assert_eq!((k.max_rank, k.k, k.l), (50, 120, 120));
        assert!(abel(0.0).is_err());
    }

    #[test]
    fn riesz_rhs_endpoints() {
        let p = riesz().unwrap();
        // f(1) = 2 sqrt(2) Gamma(1/2) cos(pi/4) + 2 (pi/2)
        let c = 2.0 * gamma(0.5).unwrap() * FRAC_PI_4.cos();
        let v = (p.spec.rhs)(&TcpPoint::from_x(1.0));
        assert!((v - (c * SQRT_2 + std::f64::consts::PI)).abs() < 1e-14);
        // f(-1) = 2
        let v = (p.spec.rhs)(&TcpPoint::from_x(-1.0));
        assert!((v - 2.0).abs() < 1e-14);
    }

    #[test]
    fn names_cover_presets() {
        assert_eq!(NAMES.len(), 6);
        assert_eq!(eig().k, 6);
        assert_eq!(mixed().spec.terms.len(), 4);
    }
}
