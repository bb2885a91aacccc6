//! The bivariate kernel `G(y, t) = ((psi(y) - psi(y - (1+y)t)) / t)^mu` (and
//! its right-sided mirror) together with a separable approximation
//! `G ~ sum_j sigma_j f_j(y) g_j(t)`.

use std::f64::consts::{LN_2, PI};

use crate::chebcore::{clenshaw, interpolate, lobatto_points, values_to_coeffs, BasisKind, ChebSeries};
use crate::error::{Error, Result};
use crate::fio::Side;
use crate::transform::{ln_cosh, DoubleExpTransform, Transform, VariableTransform};

/// Default relative tolerance for the cross approximation.
pub const ACA_TOL: f64 = 1e-15;

/// Default `K = L` and rank for orders not covered by the calibrated table.
pub const DEFAULT_DEGREE: usize = 100;
pub const DEFAULT_RANK: usize = 30;

/// `(mu, r, K = L)` sufficient for the double-exponential kernel.
pub const RANK_TABLE: [(f64, usize, usize); 7] = [
    (1.0, 28, 80),
    (1e-1, 40, 100),
    (1e-2, 50, 120),
    (1e-3, 58, 170),
    (1e-4, 64, 350),
    (1e-5, 65, 660),
    (1e-6, 64, 920),
];

/// Expected rank and degree `(r, K)` for order `mu`.
///
/// Tabulated orders return their row; `mu >= 0.1` otherwise uses the generic
/// `K = L = 100`, `r = 30`, and smaller orders interpolate in `log10(mu)`.
pub fn table_parameters(mu: f64) -> (usize, usize) {
    if let Some(&(_, r, k)) = RANK_TABLE.iter().find(|(m, _, _)| ((mu - m) / m).abs() < 1e-12) {
        return (r, k);
    }
    if mu >= 0.1 {
        return (DEFAULT_RANK, DEFAULT_DEGREE);
    }
    if mu <= 1e-6 {
        let (_, r, k) = RANK_TABLE[6];
        return (r, k);
    }
    let lm = mu.log10();
    for w in RANK_TABLE.windows(2) {
        let (m0, r0, k0) = w[0];
        let (m1, r1, k1) = w[1];
        if mu <= m0 && mu >= m1 {
            let s = (m0.log10() - lm) / (m0.log10() - m1.log10());
            let r = r0 as f64 + s * (r1 as f64 - r0 as f64);
            let k = k0 as f64 + s * (k1 as f64 - k0 as f64);
            return (r.ceil() as usize, k.ceil() as usize);
        }
    }
    (DEFAULT_RANK, DEFAULT_DEGREE)
}

/// `log(sinh(x) / x)`.
pub(crate) fn ln_sinhc(x: f64) -> f64 {
    let a = x.abs();
    if a < 1.0 {
        // sinhc(a) - 1 = sum_{k>=1} a^{2k} / (2k+1)!
        let a2 = a * a;
        let (mut term, mut sum) = (a2 / 6.0, 0.0);
        let mut k = 1.0;
        while term > 1e-17 * sum || sum == 0.0 {
            sum += term;
            k += 1.0;
            term *= a2 / ((2.0 * k) * (2.0 * k + 1.0));
            if term == 0.0 {
                break;
            }
        }
        sum.ln_1p()
    } else if a < 20.0 {
        (a.sinh() / a).ln()
    } else {
        a - LN_2 - a.ln() + (-(-2.0 * a).exp()).ln_1p()
    }
}

fn check_inputs(mu: f64, y: f64, t: f64) -> Result<()> {
    if !(mu > 0.0 && mu.is_finite()) {
        return Err(Error::Domain {
            name: "mu",
            value: mu,
            reason: "fractional order must be positive",
        });
    }
    if !(y.abs() <= 1.0) {
        return Err(Error::Domain {
            name: "y",
            value: y,
            reason: "must lie in [-1, 1]",
        });
    }
    if !((0.0..=1.0).contains(&t)) {
        return Err(Error::Domain {
            name: "t",
            value: t,
            reason: "must lie in [0, 1]",
        });
    }
    Ok(())
}

fn de_kernel(tr: &DoubleExpTransform, mu: f64, side: Side, y: f64, t: f64) -> f64 {
    let w = tr.omega();
    let (arm, xi1) = match side {
        Side::Left => (1.0 + y, y - (1.0 + y) * t),
        _ => (1.0 - y, y + (1.0 - y) * t),
    };
    if arm == 0.0 {
        return 0.0;
    }
    let xi2 = w * arm * t / 2.0;
    let half = w * (y + xi1) / 2.0;
    let xi3 = PI * half.cosh() * xi2.sinh();
    let (a, b) = (tr.inner(y), tr.inner(xi1));
    let lg = if xi3 <= 1.0 {
        (PI * w * arm / 2.0).ln() + ln_cosh(half) + ln_sinhc(xi3) + ln_sinhc(xi2) - ln_cosh(a) - ln_cosh(b)
    } else {
        // G^{1/mu} = sinh(xi3) / (t cosh a cosh b) with xi3 = |a - b|; the
        // exponentials cancel exactly, leaving -2 min(|a|, |b|) when a and b
        // share a sign and 0 otherwise
        let (hi, lo) = if a >= b { (a, b) } else { (b, a) };
        let expo = if lo >= 0.0 {
            -2.0 * lo
        } else if hi <= 0.0 {
            2.0 * hi
        } else {
            0.0
        };
        -t.ln() + expo + LN_2 + (-(-2.0 * xi3).exp()).ln_1p()
            - (-2.0 * a.abs()).exp().ln_1p()
            - (-2.0 * b.abs()).exp().ln_1p()
    };
    (mu * lg).exp()
}

/// `((1 - (1-t)^{1/beta}) / t)^mu`, with the `t -> 0` limit `beta^{-mu}`.
fn algebraic_g(beta: f64, mu: f64, t: f64) -> f64 {
    if t == 0.0 {
        return (-mu * beta.ln()).exp();
    }
    let q = -((-t).ln_1p() / beta).exp_m1() / t;
    q.powf(mu)
}

/// Kernel value `G(y, t)`.
pub fn eval_g(tr: &VariableTransform, mu: f64, side: Side, y: f64, t: f64) -> Result<f64> {
    check_inputs(mu, y, t)?;
    if side == Side::Riesz {
        return Err(Error::InvalidParameter("kernel is defined per side, not for Riesz".into()));
    }
    match tr {
        VariableTransform::DoubleExp(de) => Ok(de_kernel(de, mu, side, y, t)),
        VariableTransform::Algebraic(al) => {
            let beta = al.beta();
            match side {
                Side::Left => {
                    let f1 = (mu * (1.0 - 1.0 / beta) * LN_2 + (mu / beta) * y.ln_1p()).exp();
                    Ok(f1 * algebraic_g(beta, mu, t))
                }
                _ => {
                    let xi1 = y + (1.0 - y) * t;
                    if t == 0.0 {
                        return Ok(((1.0 - y) * tr.derivative(y)).powf(mu));
                    }
                    let d = (tr.forward(xi1)? - tr.forward(y)?) / t;
                    Ok(d.max(0.0).powf(mu))
                }
            }
        }
    }
}

/// Separable kernel `sum_j sigma_j f_j(y) g_j(t)`; `g_j` is stored in the
/// variable `s = 2t - 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct LowRankKernel {
    pub sigma: Vec<f64>,
    pub fcols: Vec<ChebSeries<f64>>,
    pub gcols: Vec<ChebSeries<f64>>,
    pub mu: f64,
    pub side: Side,
    /// Max-norm residual on the construction grid relative to `max |G|`.
    pub residual: f64,
}

impl LowRankKernel {
    pub fn rank(&self) -> usize {
        self.sigma.len()
    }

    /// Degree bound `K` of the `f_j`.
    pub fn k(&self) -> usize {
        self.fcols.iter().map(|f| f.len()).max().unwrap_or(1) - 1
    }

    /// Degree bound `L` of the `g_j`.
    pub fn l(&self) -> usize {
        self.gcols.iter().map(|g| g.len()).max().unwrap_or(1) - 1
    }

    pub fn eval(&self, y: f64, t: f64) -> f64 {
        let s = 2.0 * t - 1.0;
        self.sigma
            .iter()
            .zip(self.fcols.iter().zip(&self.gcols))
            .map(|(&sg, (f, g))| sg * clenshaw(BasisKind::T, f.coeffs(), y) * clenshaw(BasisKind::T, g.coeffs(), s))
            .sum()
    }
}

/// Exact rank-one kernel of the algebraic transform, with `f_1` and `g_1`
/// interpolated at degrees `k` and `l`.
pub fn algebraic_factorization(beta: f64, mu: f64, k: usize, l: usize) -> Result<LowRankKernel> {
    if !(beta > 0.0 && mu > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "algebraic kernel needs beta > 0 and mu > 0, got beta = {beta}, mu = {mu}"
        )));
    }
    let scale = mu * (1.0 - 1.0 / beta) * LN_2;
    let f = interpolate(k.max(1), |y| (scale + (mu / beta) * y.ln_1p()).exp())?;
    let g = interpolate(l.max(1), |s| algebraic_g(beta, mu, (1.0 + s) / 2.0))?;
    let mut f = f;
    let mut g = g;
    f.chop(1e-17);
    g.chop(1e-17);
    Ok(LowRankKernel {
        sigma: vec![1.0],
        fcols: vec![f],
        gcols: vec![g],
        mu,
        side: Side::Left,
        residual: 0.0,
    })
}

/// Knobs for [`aca_approximate`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AcaOptions {
    pub k: usize,
    pub l: usize,
    pub tol: f64,
    pub max_rank: usize,
    /// Return the rank-`max_rank` approximant instead of failing when the
    /// tolerance is not met.
    pub accept_at_cap: bool,
}

impl AcaOptions {
    /// Table-driven defaults for order `mu`.
    pub fn for_order(mu: f64) -> Self {
        let (r, k) = table_parameters(mu);
        Self {
            k,
            l: k,
            tol: ACA_TOL,
            max_rank: 2 * r,
            accept_at_cap: false,
        }
    }

    /// Fixed rank `r` on a `K = L = k` grid, stopping early only if the
    /// default tolerance is reached first.
    pub fn fixed(r: usize, k: usize) -> Self {
        Self {
            k,
            l: k,
            tol: ACA_TOL,
            max_rank: r,
            accept_at_cap: true,
        }
    }
}

/// Cross approximation with complete pivoting on the `(K+1) x (L+1)`
/// Chebyshev–Lobatto tensor grid in `(y, 2t - 1)`.
pub fn aca_approximate(tr: &VariableTransform, mu: f64, side: Side, opts: &AcaOptions) -> Result<LowRankKernel> {
    let AcaOptions {
        k,
        l,
        tol,
        max_rank,
        accept_at_cap,
    } = *opts;
    if k < 8 || l < 8 {
        return Err(Error::InvalidParameter(format!("ACA grid needs K, L >= 8, got {k}, {l}")));
    }
    if !(tol > 0.0) {
        return Err(Error::Domain {
            name: "tol",
            value: tol,
            reason: "tolerance must be positive",
        });
    }
    let ys = lobatto_points(k);
    let ts: Vec<f64> = lobatto_points(l).iter().map(|s| (1.0 + s) / 2.0).collect();
    let (m, n) = (k + 1, l + 1);
    // row-major residual, rows indexed by y
    let mut res = vec![0.0; m * n];
    for (i, &y) in ys.iter().enumerate() {
        for (j, &t) in ts.iter().enumerate() {
            res[i * n + j] = eval_g(tr, mu, side, y, t)?;
        }
    }
    let gmax = res.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    let mut sigma = Vec::new();
    let mut fcols = Vec::new();
    let mut gcols = Vec::new();
    if gmax == 0.0 {
        return Err(Error::InvalidParameter("kernel vanishes on the grid".into()));
    }
    let threshold = tol * gmax;
    let residual = loop {
        let (p, pv) = res
            .iter()
            .enumerate()
            .fold((0, 0.0f64), |(bi, bv), (i, v)| if v.abs() > bv { (i, v.abs()) } else { (bi, bv) });
        if pv <= threshold {
            break pv / gmax;
        }
        if sigma.len() >= max_rank {
            if accept_at_cap && max_rank > 0 {
                log::info!("ACA mu={mu}: stopped at rank cap {max_rank} with residual {:.2e}", pv / gmax);
                break pv / gmax;
            }
            return Err(Error::AcaNotConverged {
                rank: sigma.len(),
                residual: pv / gmax,
                tolerance: tol,
            });
        }
        let (pi, pj) = (p / n, p % n);
        let pivot = res[p];
        let col: Vec<f64> = (0..m).map(|i| res[i * n + pj]).collect();
        let row: Vec<f64> = res[pi * n..(pi + 1) * n].to_vec();
        for i in 0..m {
            let ci = col[i] / pivot;
            if ci == 0.0 {
                continue;
            }
            for (r, &rv) in res[i * n..(i + 1) * n].iter_mut().zip(&row) {
                *r -= ci * rv;
            }
        }
        sigma.push(1.0 / pivot);
        fcols.push(values_to_coeffs(&col)?);
        gcols.push(values_to_coeffs(&row)?);
    };
    if sigma.is_empty() {
        return Err(Error::InvalidParameter("kernel is numerically zero".into()));
    }
    log::debug!("ACA mu={mu} side={side:?}: rank {} on {m}x{n} grid, residual {residual:.2e}", sigma.len());
    Ok(LowRankKernel {
        sigma,
        fcols,
        gcols,
        mu,
        side,
        residual,
    })
}

/// Kernel for `(transform, mu, side)` with table defaults: exact for the
/// algebraic left-sided case, cross approximation otherwise.
pub fn build_kernel(tr: &VariableTransform, mu: f64, side: Side, opts: Option<&AcaOptions>) -> Result<LowRankKernel> {
    let opts = opts.copied().unwrap_or_else(|| AcaOptions::for_order(mu));
    match (tr, side) {
        (VariableTransform::Algebraic(a), Side::Left) => algebraic_factorization(a.beta(), mu, opts.k, opts.l),
        _ => aca_approximate(tr, mu, side, &opts),
    }
}
