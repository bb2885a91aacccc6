//! Gauss–Jacobi quadrature for `int_0^1 t^mu f(t) dt`, Chebyshev moments of
//! that weight, and the endpoint values of the moment polynomials.

use crate::chebcore::{clenshaw, BasisKind, ChebSeries};
use crate::error::{Error, Result};
use crate::fio::Side;

/// Safety factor applied to the minimum node count for exactness.
pub const NODE_SAFETY: f64 = 1.1;

/// Nodes and weights for the weight `t^mu` on [0, 1].
#[derive(Debug, Clone, PartialEq)]
pub struct JacobiRule {
    mu: f64,
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl JacobiRule {
    pub fn mu(&self) -> f64 {
        self.mu
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn integrate<F: Fn(f64) -> f64>(&self, f: F) -> f64 {
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(&t, &w)| w * f(t))
            .sum()
    }

    /// Largest polynomial degree integrated exactly.
    pub fn exact_degree(&self) -> usize {
        2 * self.nodes.len() - 1
    }
}

/// Node count covering polynomial degree `deg`, including the safety factor.
pub fn nodes_for_degree(deg: usize) -> usize {
    let min = deg / 2 + 1;
    ((min as f64) * NODE_SAFETY).ceil() as usize
}

/// Golub–Welsch construction on the Jacobi matrix of `P^{(0, mu)}`, mapped
/// to [0, 1].
pub fn gauss_jacobi(mu: f64, n_nodes: usize) -> Result<JacobiRule> {
    if !(mu > -1.0 && mu.is_finite()) {
        return Err(Error::Domain {
            name: "mu",
            value: mu,
            reason: "Jacobi weight exponent must exceed -1",
        });
    }
    if n_nodes == 0 {
        return Err(Error::InvalidParameter("quadrature needs at least one node".into()));
    }
    let (a, b) = (0.0f64, mu);
    let ab = a + b;
    let mut diag = vec![0.0; n_nodes];
    let mut off = vec![0.0; n_nodes];
    for k in 0..n_nodes {
        let kf = k as f64;
        let s = 2.0 * kf + ab;
        let ak = if k == 0 {
            (b - a) / (ab + 2.0)
        } else {
            (b * b - a * a) / (s * (s + 2.0))
        };
        // shifted to [0, 1]: t = (1 + x) / 2
        diag[k] = 0.5 * (1.0 + ak);
        if k + 1 < n_nodes {
            let k1 = kf + 1.0;
            let s1 = 2.0 * k1 + ab;
            let bk2 = 4.0 * k1 * (k1 + a) * (k1 + b) * (k1 + ab) / (s1 * s1 * (s1 + 1.0) * (s1 - 1.0));
            off[k] = 0.5 * bk2.sqrt();
        }
    }
    let mut z = vec![0.0; n_nodes];
    z[0] = 1.0;
    tridiagonal_ql(&mut diag, &mut off, &mut z)?;
    let mass = 1.0 / (1.0 + mu);
    let mut pairs: Vec<(f64, f64)> = diag
        .into_iter()
        .zip(z)
        .map(|(t, v)| (t, mass * v * v))
        .collect();
    pairs.sort_by(|p, q| p.0.total_cmp(&q.0));
    let (nodes, weights) = pairs.into_iter().unzip();
    Ok(JacobiRule { mu, nodes, weights })
}

/// Implicit QL on a symmetric tridiagonal matrix, tracking only the first
/// components of the eigenvectors in `z`.
fn tridiagonal_ql(d: &mut [f64], e: &mut [f64], z: &mut [f64]) -> Result<()> {
    let n = d.len();
    for l in 0..n {
        let mut iter = 0;
        loop {
            let mut m = l;
            while m + 1 < n {
                let dd = d[m].abs() + d[m + 1].abs();
                if e[m].abs() <= f64::EPSILON * dd {
                    break;
                }
                m += 1;
            }
            if m == l {
                break;
            }
            iter += 1;
            if iter > 60 {
                return Err(Error::Singular {
                    context: Some("tridiagonal QL failed to converge".into()),
                });
            }
            let mut g = (d[l + 1] - d[l]) / (2.0 * e[l]);
            let mut r = g.hypot(1.0);
            g = d[m] - d[l] + e[l] / (g + r.copysign(g));
            let (mut s, mut c, mut p) = (1.0, 1.0, 0.0);
            let mut deflated = false;
            let mut i = m;
            while i > l {
                i -= 1;
                let f = s * e[i];
                let b = c * e[i];
                r = f.hypot(g);
                e[i + 1] = r;
                if r == 0.0 {
                    d[i + 1] -= p;
                    e[m] = 0.0;
                    deflated = true;
                    break;
                }
                s = f / r;
                c = g / r;
                g = d[i + 1] - p;
                r = (d[i] - g) * s + 2.0 * c * b;
                p = s * r;
                d[i + 1] = g + p;
                g = c * r - b;
                let f = z[i + 1];
                z[i + 1] = s * z[i] + c * f;
                z[i] = c * z[i] - s * f;
            }
            if deflated {
                continue;
            }
            d[l] -= p;
            e[l] = g;
            e[m] = 0.0;
        }
    }
    Ok(())
}

/// `h_l = int_0^1 t^mu T_l(2t - 1) dt` for `l = 0..=l_max`.
pub fn moments_h(mu: f64, l_max: usize) -> Result<Vec<f64>> {
    if !(mu > 0.0) {
        return Err(Error::Domain {
            name: "mu",
            value: mu,
            reason: "moments need a positive order",
        });
    }
    let rule = gauss_jacobi(mu, nodes_for_degree(l_max).max(l_max.div_ceil(2) + 1))?;
    let mut h = vec![0.0; l_max + 1];
    for (&t, &w) in rule.nodes.iter().zip(&rule.weights) {
        let s = 2.0 * t - 1.0;
        let (mut t0, mut t1) = (1.0, s);
        h[0] += w;
        if l_max >= 1 {
            h[1] += w * s;
        }
        for hl in h.iter_mut().skip(2) {
            let t2 = 2.0 * s * t1 - t0;
            *hl += w * t2;
            t0 = t1;
            t1 = t2;
        }
    }
    Ok(h)
}

/// Evaluate `g(t)` for a series stored in the variable `s = 2t - 1`.
pub fn eval_on_unit(g: &ChebSeries<f64>, t: f64) -> f64 {
    clenshaw(BasisKind::T, g.coeffs(), 2.0 * t - 1.0)
}

/// `phi_n(1) = int t^mu U_{n-1}(1 - 2t) g(t) dt` (left) or
/// `phi_n(-1) = int t^mu U_{n-1}(2t - 1) g(t) dt` (right).
pub fn boundary_value(mu: f64, n: usize, g: &ChebSeries<f64>, side: Side) -> Result<f64> {
    if n == 0 {
        return Err(Error::InvalidParameter("boundary value needs n >= 1".into()));
    }
    let rule = gauss_jacobi(mu, nodes_for_degree(n - 1 + g.len()))?;
    let sign = match side {
        Side::Left => 1.0,
        _ => -1.0,
    };
    let coeff_u = {
        let mut c = vec![0.0; n];
        c[n - 1] = 1.0;
        c
    };
    Ok(rule.integrate(|t| {
        clenshaw(BasisKind::U, &coeff_u, sign * (1.0 - 2.0 * t)) * eval_on_unit(g, t)
    }))
}

/// Boundary values of all moment polynomials, one `n` at a time, with node
/// values of each `g_j` cached.
#[derive(Debug, Clone)]
pub struct BoundaryEvaluator {
    rule: JacobiRule,
    // w_i * g_j(t_i), one row per kernel term
    weighted: Vec<Vec<f64>>,
    s: Vec<f64>,
    u_prev: Vec<f64>,
    u_curr: Vec<f64>,
    n: usize,
    sign: f64,
}

impl BoundaryEvaluator {
    /// Covers `n <= n_max` for series `g_j` of length at most `g_len`.
    pub fn new(mu: f64, gs: &[ChebSeries<f64>], n_max: usize, side: Side) -> Result<Self> {
        let g_len = gs.iter().map(|g| g.len()).max().unwrap_or(1);
        let rule = gauss_jacobi(mu, nodes_for_degree(n_max + g_len))?;
        let weighted = gs
            .iter()
            .map(|g| {
                rule.nodes
                    .iter()
                    .zip(&rule.weights)
                    .map(|(&t, &w)| w * eval_on_unit(g, t))
                    .collect()
            })
            .collect();
        let s: Vec<f64> = rule.nodes.iter().map(|&t| 1.0 - 2.0 * t).collect();
        let m = s.len();
        let sign = match side {
            Side::Left => 1.0,
            _ => -1.0,
        };
        Ok(Self {
            rule,
            weighted,
            s,
            u_prev: vec![0.0; m],
            u_curr: vec![1.0; m],
            n: 1,
            sign,
        })
    }

    pub fn rule(&self) -> &JacobiRule {
        &self.rule
    }

    /// Values for the current `n` (starting at 1), one per kernel term.
    pub fn values(&self) -> Vec<f64> {
        // U_{n-1}(-s) = (-1)^{n-1} U_{n-1}(s)
        let parity = if self.sign < 0.0 && self.n.is_multiple_of(2) { -1.0 } else { 1.0 };
        self.weighted
            .iter()
            .map(|wg| parity * wg.iter().zip(&self.u_curr).map(|(a, b)| a * b).sum::<f64>())
            .collect()
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Move from `n` to `n + 1`.
    pub fn advance(&mut self) {
        for i in 0..self.s.len() {
            let next = 2.0 * self.s[i] * self.u_curr[i] - self.u_prev[i];
            self.u_prev[i] = self.u_curr[i];
            self.u_curr[i] = next;
        }
        self.n += 1;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn legendre_two_point() {
        let r = gauss_jacobi(0.0, 2).unwrap();
        let s3 = 3f64.sqrt();
        assert_abs_diff_eq!(r.nodes()[0], (3.0 - s3) / 6.0, epsilon = 1e-15);
        assert_abs_diff_eq!(r.nodes()[1], (3.0 + s3) / 6.0, epsilon = 1e-15);
        assert_abs_diff_eq!(r.weights()[0], 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(r.weights()[1], 0.5, epsilon = 1e-15);
    }

    #[test]
    fn weights_sum_to_mass() {
        for &(mu, n) in &[(0.5, 7), (0.01, 40), (1.5, 300), (1e-6, 90)] {
            let r = gauss_jacobi(mu, n).unwrap();
            let s: f64 = r.weights().iter().sum();
            assert!((s - 1.0 / (1.0 + mu)).abs() < 1e-14, "mu={mu}: {s}");
            assert!(r.weights().iter().all(|&w| w > 0.0));
            assert!(r.nodes().iter().all(|&t| t > 0.0 && t < 1.0));
        }
    }

    #[test]
    fn integrates_high_monomial() {
        let r = gauss_jacobi(0.5, 20).unwrap();
        let v = r.integrate(|t| t.powi(30));
        assert!((v - 1.0 / 31.5).abs() < 1e-14 / 31.5);
    }

    #[test]
    fn exactness_degree() {
        for &mu in &[0.25, 1.0, std::f64::consts::E / 3.0] {
            let n = 12;
            let r = gauss_jacobi(mu, n).unwrap();
            for k in 0..=r.exact_degree() {
                let exact = 1.0 / (k as f64 + mu + 1.0);
                let v = r.integrate(|t| t.powi(k as i32));
                assert!(((v - exact) / exact).abs() < 1e-13, "mu={mu} k={k}");
            }
        }
    }

    #[test]
    fn invalid_mu() {
        assert!(gauss_jacobi(-1.0, 4).is_err());
        assert!(gauss_jacobi(0.5, 0).is_err());
        assert!(moments_h(0.0, 4).is_err());
    }

    #[test]
    fn moment_closed_forms() {
        let h = moments_h(1.0, 5).unwrap();
        assert_abs_diff_eq!(h[0], 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(h[1], 1.0 / 6.0, epsilon = 1e-15);
        let h = moments_h(0.3, 0).unwrap();
        assert_abs_diff_eq!(h[0], 1.0 / 1.3, epsilon = 1e-15);
    }

    #[test]
    fn moments_decay_algebraically() {
        let h = moments_h(0.5, 400).unwrap();
        // |h_l| ~ C l^{-2 mu - 2}: check against a much denser rule
        let dense = gauss_jacobi(0.5, 600).unwrap();
        for &l in &[10usize, 50, 200, 400] {
            let v = dense.integrate(|t| ((l as f64) * (2.0 * t - 1.0).acos()).cos());
            assert!((v - h[l]).abs() < 1e-14, "l={l}: {v} vs {}", h[l]);
        }
        assert!(h[400].abs() < h[50].abs());
        assert!(h[400].abs() * 400.0 * 400.0 < 10.0);
    }

    #[test]
    fn boundary_value_examples() {
        let one = ChebSeries::from_t(vec![1.0]);
        let v = boundary_value(0.7, 1, &one, Side::Left).unwrap();
        assert_abs_diff_eq!(v, 1.0 / 1.7, epsilon = 1e-15);
        let v = boundary_value(1.0, 2, &one, Side::Left).unwrap();
        assert_abs_diff_eq!(v, -1.0 / 3.0, epsilon = 1e-15);
        let v = boundary_value(1.0, 2, &one, Side::Right).unwrap();
        assert_abs_diff_eq!(v, 1.0 / 3.0, epsilon = 1e-15);
    }

    #[test]
    fn cached_evaluator_matches_direct() {
        let g = ChebSeries::from_t(vec![0.7, -0.2, 0.05, 0.01]);
        for side in [Side::Left, Side::Right] {
            let mut ev = BoundaryEvaluator::new(0.37, std::slice::from_ref(&g), 60, side).unwrap();
            for n in 1..=60 {
                assert_eq!(ev.n(), n);
                let direct = boundary_value(0.37, n, &g, side).unwrap();
                assert!((ev.values()[0] - direct).abs() < 1e-13, "n={n} {side:?}");
                ev.advance();
            }
        }
    }
}
