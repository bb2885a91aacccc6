//! Reference computations that do not go through the library's operator
//! construction: direct quadrature of the defining integrals and closed forms.

#![allow(dead_code)]

use std::f64::consts::{FRAC_PI_2, PI};
use std::io::Write;
use std::sync::Mutex;

use fracspec::Side;
use statrs::function::gamma::gamma;

/// Serializes timed criteria so runtimes are not inflated by sibling tests.
pub static SERIAL: Mutex<()> = Mutex::new(());

/// One `PASS`/`FAIL` line on the real stdout (bypassing the test harness
/// capture), then the assertion.
pub fn report(name: &str, pass: bool, detail: &str) {
    let line = format!("{} {name}: {detail}", if pass { "PASS" } else { "FAIL" });
    let mut out = std::io::stdout().lock();
    let _ = writeln!(out, "{line}");
    let _ = out.flush();
    assert!(pass, "{line}");
}

pub fn psi_de(omega: f64, y: f64) -> f64 {
    (0.5 * PI * (omega * y).sinh()).tanh()
}

pub fn psi_de_inv(omega: f64, x: f64) -> f64 {
    if x <= -1.0 {
        return -1.0;
    }
    if x >= 1.0 {
        return 1.0;
    }
    ((2.0 / PI * x.atanh()).asinh() / omega).clamp(-1.0, 1.0)
}

/// `T_n(psi^{-1}(t))`.
pub fn tcp(omega: f64, n: usize, t: f64) -> f64 {
    (n as f64 * psi_de_inv(omega, t).acos()).cos()
}

fn integrate(f: impl Fn(f64) -> f64, a: f64, b: f64) -> f64 {
    quadrature::integrate(f, a, b, 1e-16).integral
}

/// `psi'(eta)` for the double-exponential map.
fn psi_de_prime(omega: f64, eta: f64) -> f64 {
    let u = FRAC_PI_2 * (omega * eta).sinh();
    FRAC_PI_2 * omega * (omega * eta).cosh() / u.cosh().powi(2)
}

/// Left-sided `I^mu[Q_n](x)` by quadrature of the defining integral.
///
/// `[-1, m]` with `m = (x - 1)/2` is integrated in the transplanted variable,
/// where `psi'` decays doubly exponentially and `Q_n` becomes `T_n`. `[m, x]`
/// uses `sigma = (x - t)^mu`, which removes the weak singularity. At `x = 1`
/// the whole range goes through the first form with `1 - tanh u` computed
/// without cancellation.
fn fio_left(omega: f64, mu: f64, n: usize, x: f64) -> f64 {
    if x <= -1.0 {
        return 0.0;
    }
    let t_n = |eta: f64| (n as f64 * eta.clamp(-1.0, 1.0).acos()).cos();
    if x >= 1.0 {
        let f = |eta: f64| {
            let u = FRAC_PI_2 * (omega * eta).sinh();
            let gap = 2.0 / (1.0 + (2.0 * u).exp());
            gap.powf(mu - 1.0) * t_n(eta) * psi_de_prime(omega, eta)
        };
        return (integrate(f, -1.0, 0.0) + integrate(f, 0.0, 1.0)) / gamma(mu);
    }
    let m = 0.5 * (x - 1.0);
    let far = integrate(
        |eta| (x - psi_de(omega, eta)).powf(mu - 1.0) * t_n(eta) * psi_de_prime(omega, eta),
        -1.0,
        psi_de_inv(omega, m),
    ) / gamma(mu);
    let near = integrate(|s| tcp(omega, n, x - s.powf(1.0 / mu)), 0.0, (x - m).powf(mu)) / gamma(1.0 + mu);
    far + near
}

/// `I^mu[Q_n](x)`; the right-sided operator follows by reflection since
/// `Q_n(-t) = (-1)^n Q_n(t)`.
pub fn fio_tcp_value(omega: f64, mu: f64, side: Side, n: usize, x: f64) -> f64 {
    match side {
        Side::Left => fio_left(omega, mu, n, x),
        Side::Right if n.is_multiple_of(2) => fio_left(omega, mu, n, -x),
        Side::Right => -fio_left(omega, mu, n, -x),
        Side::Riesz => unreachable!("one-sided only"),
    }
}

/// `count` equispaced points on [-1, 1], both ends included.
pub fn equispaced(count: usize) -> Vec<f64> {
    (0..count)
        .map(|i| -1.0 + 2.0 * i as f64 / (count - 1) as f64)
        .collect()
}

/// Chebyshev–Lobatto points `cos(k pi / n)`, `k = 0..=n`.
pub fn lobatto(n: usize) -> Vec<f64> {
    (0..=n).map(|k| (k as f64 * PI / n as f64).cos()).collect()
}

/// Clenshaw-free direct summation `sum c_k T_k(y)`.
pub fn cheb_sum(c: &[f64], y: f64) -> f64 {
    let th = y.clamp(-1.0, 1.0).acos();
    c.iter().enumerate().map(|(k, &ck)| ck * (k as f64 * th).cos()).sum()
}
