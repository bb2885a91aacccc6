//! Pseudospectra of the Caputo derivative of order `mu` on [0, 1] by
//! solve-then-discretize: `||R(z)||^2 = lambda_max(R*(z) R(z))` from Lanczos,
//! each step solving `(z I - J) v = I u` and `(conj(z) I_right - J) w = I_right v`.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;
use rayon::prelude::*;

use super::{OperatorBank, TruncationPolicy};
use crate::error::{Error, Result};
use crate::fio::Side;
use crate::kernel::AcaOptions;
use crate::opalgebra::DenseLu;
use crate::quadrature::gauss_jacobi;
use crate::transform::{select_omega, SingularityInfo, Transform, VariableTransform};

/// Extra Gauss–Legendre nodes beyond `2N` for the Gram matrix.
const GRAM_EXTRA_NODES: usize = 128;
/// Gram eigenvalues below this fraction of the largest are dropped by the
/// dense reference computation.
const GRAM_CUTOFF: f64 = 1e-13;
/// Absolute slack when comparing values at consecutive sizes; it lies below
/// every contour level of interest, and values near it carry rounding noise
/// of the same order.
pub const VALUE_FLOOR: f64 = 1e-13;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    pub x_lo: f64,
    pub x_hi: f64,
    pub y_lo: f64,
    pub y_hi: f64,
    pub nx: usize,
    pub ny: usize,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self {
            x_lo: -2.0,
            x_hi: 12.0,
            y_lo: -7.0,
            y_hi: 7.0,
            nx: 141,
            ny: 141,
        }
    }
}

impl GridSpec {
    fn validate(&self) -> Result<()> {
        let finite = [self.x_lo, self.x_hi, self.y_lo, self.y_hi].iter().all(|v| v.is_finite());
        if !finite || self.x_lo > self.x_hi || self.y_lo > self.y_hi || self.nx == 0 || self.ny == 0 {
            return Err(Error::InvalidParameter(format!("invalid grid {self:?}")));
        }
        Ok(())
    }

    fn axis(lo: f64, hi: f64, n: usize) -> Vec<f64> {
        if n == 1 {
            return vec![lo];
        }
        (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect()
    }

    /// Row-major points, imaginary part outer.
    pub fn points(&self) -> Vec<Complex64> {
        let xs = Self::axis(self.x_lo, self.x_hi, self.nx);
        let ys = Self::axis(self.y_lo, self.y_hi, self.ny);
        ys.iter()
            .flat_map(|&y| xs.iter().map(move |&x| Complex64::new(x, y)))
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LanczosOptions {
    pub max_iter: usize,
    /// Relative change of the largest Ritz value.
    pub tol: f64,
}

impl Default for LanczosOptions {
    fn default() -> Self {
        Self { max_iter: 200, tol: 1e-8 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PseudoOptions {
    pub mu: f64,
    pub grid: GridSpec,
    pub lanczos: LanczosOptions,
    /// Per-point truncation: `N` doubles until the stored value changes by
    /// less than `tol` relative (plus [`VALUE_FLOOR`]).
    pub policy: TruncationPolicy,
    pub omega: Option<f64>,
    pub aca: Option<AcaOptions>,
}

impl Default for PseudoOptions {
    fn default() -> Self {
        Self {
            mu: 0.5,
            grid: GridSpec::default(),
            lanczos: LanczosOptions::default(),
            policy: TruncationPolicy {
                n_start: 32,
                n_max: 1024,
                tol: 1e-6,
                exhaust: false,
            },
            omega: None,
            aca: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PseudoPoint {
    pub z: Complex64,
    /// `1 / sqrt(lambda_max(R* R))`; NaN when every inner solve failed.
    pub value: f64,
    pub n: usize,
    pub iterations: usize,
    /// Two consecutive sizes agreed to `tol * value + VALUE_FLOOR`.
    pub converged: bool,
    /// An inner solve failed or the value is not finite.
    pub flagged: bool,
}

struct Level {
    left: DMatrix<Complex64>,
    right: DMatrix<Complex64>,
    gram: DMatrix<f64>,
}

/// Operators and Gram matrices shared by every grid point.
pub struct PseudoContext {
    mu: f64,
    transform: VariableTransform,
    levels: BTreeMap<usize, Level>,
}

impl PseudoContext {
    pub fn new(mu: f64, omega: Option<f64>, aca: Option<AcaOptions>, sizes: &[usize]) -> Result<Self> {
        let omega = match omega {
            Some(w) => w,
            None => select_omega(&SingularityInfo::new(mu, 1.0)?)?,
        };
        let transform = VariableTransform::double_exp(omega)?;
        let bank = OperatorBank::new(transform, aca);
        // I on [0, 1] is 2^{-mu} times I on [-1, 1]
        let c = (-mu).exp2();
        let mut levels = BTreeMap::new();
        for &n in sizes {
            let l = bank.fio(mu, Side::Left, n)?;
            let r = bank.fio(mu, Side::Right, n)?;
            levels.insert(
                n,
                Level {
                    left: l.matrix().map(|v| Complex64::from(c * v)),
                    right: r.matrix().map(|v| Complex64::from(c * v)),
                    gram: gram_matrix(&transform, n)?,
                },
            );
        }
        Ok(Self { mu, transform, levels })
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    pub fn transform(&self) -> &VariableTransform {
        &self.transform
    }

    fn level(&self, n: usize) -> Result<&Level> {
        self.levels
            .get(&n)
            .ok_or_else(|| Error::InvalidParameter(format!("no operators prepared for N = {n}")))
    }

    /// `lambda_max(R* R)` at truncation `n` and the iterations used.
    pub fn lanczos(&self, z: Complex64, n: usize, opts: &LanczosOptions) -> Result<(f64, usize)> {
        let lv = self.level(n)?;
        let op = ResolventPair::new(lv, z)?;
        lanczos_max(|u| op.apply(u), &lv.gram, &start_vector(n), opts)
    }

    /// `1 / sqrt(lambda_max)` with `N` doubling over the prepared sizes.
    pub fn point(&self, z: Complex64, policy: &TruncationPolicy, opts: &LanczosOptions) -> PseudoPoint {
        let mut out = PseudoPoint {
            z,
            value: f64::NAN,
            n: 0,
            iterations: 0,
            converged: false,
            flagged: false,
        };
        let mut prev: Option<f64> = None;
        for n in policy.sizes() {
            match self.lanczos(z, n, opts) {
                Ok((lam, it)) => {
                    let v = 1.0 / lam.sqrt();
                    out.value = v;
                    out.n = n;
                    out.iterations = it;
                    if !(v.is_finite() && v > 0.0) {
                        out.flagged = true;
                        return out;
                    }
                    if let Some(p) = prev {
                        if (v - p).abs() <= policy.tol * v + VALUE_FLOOR {
                            out.converged = true;
                            return out;
                        }
                    }
                    prev = Some(v);
                }
                Err(e) => {
                    log::warn!("pseudospectra z = {z} N = {n}: {e}");
                    out.flagged = true;
                    return out;
                }
            }
        }
        out
    }
}

/// `G_jk = int T_j(y) T_k(y) psi'(y) dy`, the L2 inner product on [-1, 1]
/// of TCP coefficient vectors.
pub fn gram_matrix(tr: &VariableTransform, n: usize) -> Result<DMatrix<f64>> {
    let q = 2 * n + GRAM_EXTRA_NODES;
    let rule = gauss_jacobi(0.0, q)?;
    let mut v = DMatrix::zeros(q, n);
    let mut wv = DMatrix::zeros(q, n);
    for (i, (&t, &w)) in rule.nodes().iter().zip(rule.weights()).enumerate() {
        let y = 2.0 * t - 1.0;
        let wt = 2.0 * w * tr.derivative(y);
        let (mut a, mut b) = (1.0, y);
        for k in 0..n {
            let tk = if k == 0 { a } else { b };
            v[(i, k)] = tk;
            wv[(i, k)] = wt * tk;
            if k >= 1 {
                let c = 2.0 * y * b - a;
                a = b;
                b = c;
            }
        }
    }
    Ok(v.transpose() * wv)
}

fn start_vector(n: usize) -> Vec<Complex64> {
    (0..n)
        .map(|k| Complex64::from((k as f64).cos() / ((k + 1) * (k + 1)) as f64))
        .collect()
}

/// `S_R S_L` with `S_L = (z c A_L - I)^{-1} c A_L`, `S_R` likewise with
/// `conj(z)` and `A_R`.
struct ResolventPair<'a> {
    level: &'a Level,
    lu_left: DenseLu<Complex64>,
    lu_right: DenseLu<Complex64>,
}

impl<'a> ResolventPair<'a> {
    fn new(level: &'a Level, z: Complex64) -> Result<Self> {
        let n = level.left.nrows();
        let id = DMatrix::<Complex64>::identity(n, n);
        Ok(Self {
            level,
            lu_left: DenseLu::factor(&level.left * z - &id)?,
            lu_right: DenseLu::factor(&level.right * z.conj() - &id)?,
        })
    }

    fn left(&self, u: &[Complex64]) -> Result<Vec<Complex64>> {
        let rhs = &self.level.left * DVector::from_column_slice(u);
        self.lu_left.solve(rhs.as_slice())
    }

    fn apply(&self, u: &[Complex64]) -> Result<Vec<Complex64>> {
        let v = self.left(u)?;
        let rhs = &self.level.right * DVector::from_column_slice(&v);
        self.lu_right.solve(rhs.as_slice())
    }
}

fn inner(g: &DMatrix<f64>, u: &[Complex64], v: &[Complex64]) -> Complex64 {
    // v^H G u
    let mut s = Complex64::from(0.0);
    for (j, &uj) in u.iter().enumerate() {
        let col = g.column(j);
        let gu: Complex64 = v.iter().zip(col.iter()).map(|(vi, &gij)| vi.conj() * gij).sum();
        s += gu * uj;
    }
    s
}

fn norm_w(g: &DMatrix<f64>, u: &[Complex64]) -> f64 {
    inner(g, u, u).re.max(0.0).sqrt()
}

/// Largest eigenvalue of an operator self-adjoint in the `G` inner product,
/// by Lanczos with full reorthogonalization.
fn lanczos_max<F>(apply: F, g: &DMatrix<f64>, start: &[Complex64], opts: &LanczosOptions) -> Result<(f64, usize)>
where
    F: Fn(&[Complex64]) -> Result<Vec<Complex64>>,
{
    let nrm = norm_w(g, start);
    if !(nrm > 0.0) {
        return Err(Error::InvalidParameter("Lanczos start vector has zero norm".into()));
    }
    let mut basis: Vec<Vec<Complex64>> = vec![start.iter().map(|v| v / nrm).collect()];
    let mut alpha: Vec<f64> = Vec::new();
    let mut beta: Vec<f64> = Vec::new();
    let mut last = f64::NAN;
    let max_iter = opts.max_iter.min(start.len());
    for it in 1..=max_iter {
        let q = basis.last().expect("nonempty basis");
        let mut w = apply(q)?;
        if w.iter().any(|v| !v.is_finite()) {
            return Err(Error::Singular {
                context: Some("resolvent solve produced non-finite values".into()),
            });
        }
        alpha.push(inner(g, &w, q).re);
        for _ in 0..2 {
            for b in &basis {
                let h = inner(g, &w, b);
                w.iter_mut().zip(b).for_each(|(wi, bi)| *wi -= h * bi);
            }
        }
        let lam = tridiagonal_max(&alpha, &beta);
        let b = norm_w(g, &w);
        if (it > 1 && ((lam - last) / lam).abs() < opts.tol) || b <= 1e-14 * lam.abs() {
            return Ok((lam, it));
        }
        last = lam;
        beta.push(b);
        basis.push(w.iter().map(|v| v / b).collect());
    }
    Ok((last, max_iter))
}

fn tridiagonal_max(alpha: &[f64], beta: &[f64]) -> f64 {
    let m = alpha.len();
    let t = DMatrix::from_fn(m, m, |i, j| {
        if i == j {
            alpha[i]
        } else if i.abs_diff(j) == 1 {
            beta[i.min(j)]
        } else {
            0.0
        }
    });
    SymmetricEigen::new(t).eigenvalues.iter().copied().fold(f64::NEG_INFINITY, f64::max)
}

/// Dense reference for `lambda_max(R* R)`: the squared largest singular
/// value of `S_L` in the Gram norm, restricted to the Gram eigenvectors
/// above a relative cutoff.
pub fn dense_lambda_max(ctx: &PseudoContext, z: Complex64, n: usize) -> Result<f64> {
    let lv = ctx.level(n)?;
    let eig = SymmetricEigen::new(lv.gram.clone());
    let gmax = eig.eigenvalues.amax();
    let keep: Vec<usize> = (0..n).filter(|&i| eig.eigenvalues[i] > GRAM_CUTOFF * gmax).collect();
    let k = keep.len();
    let c = DMatrix::from_fn(k, n, |r, j| {
        Complex64::from(eig.eigenvalues[keep[r]].sqrt() * eig.eigenvectors[(j, keep[r])])
    });
    let cinv = DMatrix::from_fn(n, k, |j, r| {
        Complex64::from(eig.eigenvectors[(j, keep[r])] / eig.eigenvalues[keep[r]].sqrt())
    });
    let pair = ResolventPair::new(lv, z)?;
    let mut sl = DMatrix::zeros(n, k);
    for r in 0..k {
        let col = pair.left(cinv.column(r).as_slice())?;
        sl.set_column(r, &DVector::from_column_slice(&col));
    }
    let b = c * sl;
    let s = b.singular_values();
    Ok(s.max().powi(2))
}

/// Inverse resolvent norms over the grid; failed points are flagged.
pub fn pseudospectra(opts: &PseudoOptions) -> Result<Vec<PseudoPoint>> {
    opts.grid.validate()?;
    opts.policy.validate()?;
    if !(opts.mu > 0.0 && opts.mu < 1.0) {
        return Err(Error::Domain {
            name: "mu",
            value: opts.mu,
            reason: "derivative order must lie in (0, 1)",
        });
    }
    let ctx = PseudoContext::new(opts.mu, opts.omega, opts.aca, &opts.policy.sizes())?;
    Ok(opts
        .grid
        .points()
        .par_iter()
        .map(|&z| ctx.point(z, &opts.policy, &opts.lanczos))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_points_layout() {
        let g = GridSpec {
            x_lo: 0.0,
            x_hi: 1.0,
            y_lo: -1.0,
            y_hi: 1.0,
            nx: 2,
            ny: 3,
        };
        let p = g.points();
        assert_eq!(p.len(), 6);
        assert_eq!(p[0], Complex64::new(0.0, -1.0));
        assert_eq!(p[1], Complex64::new(1.0, -1.0));
        assert_eq!(p[5], Complex64::new(1.0, 1.0));
        let d = GridSpec::default();
        assert_eq!((d.x_lo, d.x_hi, d.y_lo, d.y_hi), (-2.0, 12.0, -7.0, 7.0));
    }

    #[test]
    fn gram_gives_l2_norms() {
        let tr = VariableTransform::double_exp(3.836).unwrap();
        let g = gram_matrix(&tr, 128).unwrap();
        // constant 1: int_{-1}^{1} dx = 2
        assert!((g[(0, 0)] - 2.0).abs() < 1e-13);
        // x = psi(y) has TCP coefficients of x; int x^2 dx = 2/3
        let c: crate::chebcore::ChebSeries<f64> = crate::transform::tcp_expand(&tr, |p| p.x, 127).unwrap();
        let cv = DVector::from_column_slice(c.coeffs());
        let q = (cv.transpose() * &g * &cv)[(0, 0)];
        assert!((q - 2.0 / 3.0).abs() < 1e-12, "{q}");
    }

    #[test]
    fn lanczos_on_diagonal_operator() {
        let g = DMatrix::identity(6, 6);
        let d = [1.0, 5.0, 2.0, 0.5, 3.0, 4.0];
        let start: Vec<Complex64> = (0..6).map(|k| Complex64::from(1.0 + k as f64)).collect();
        let (lam, _) = lanczos_max(
            |u| Ok(u.iter().zip(d).map(|(x, s)| x * s).collect()),
            &g,
            &start,
            &LanczosOptions::default(),
        )
        .unwrap();
        assert!((lam - 5.0).abs() < 1e-10);
    }
}
