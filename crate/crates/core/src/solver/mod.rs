//! Drivers: integral equations with adaptive truncation, the fractional Airy
//! problem, operator eigenproblems and pseudospectra.

mod airy;
mod eigen;
mod pseudo;

pub use airy::{solve_fde_airy, AiryAnsatz, AiryOptions, AirySolution};
pub use eigen::{solve_eigen, theta, EigenOptions, EigenPair, EigenResult};
pub use pseudo::{
    dense_lambda_max, pseudospectra, GridSpec, LanczosOptions, PseudoContext, PseudoOptions, PseudoPoint,
};

use std::collections::HashMap;
use std::sync::{Arc, Mutex};

use crate::chebcore::ChebSeries;
use crate::error::{Error, Result};
use crate::fio::{assemble, combine_riesz, riesz_factor, FIOApprox, Side};
use crate::kernel::{build_kernel, AcaOptions, LowRankKernel};
use crate::opalgebra::{mult_operator, solve_checked, CoeffOperator};
use crate::scalar::Scalar;
use crate::transform::{
    estimate_sup_norm, select_omega, tcp_expand, tcp_expand_auto, SingularityInfo, TcpPoint, Transform,
    VariableTransform,
};

/// Number of equispaced points on [-1, 1] for Cauchy errors.
pub const CAUCHY_POINTS: usize = 1000;

/// Relative tolerance for expanding coefficient functions.
const COEFF_EXPANSION_TOL: f64 = 1e-16;
const COEFF_EXPANSION_MAX: usize = 8192;

pub type RealFn = Arc<dyn Fn(&TcpPoint) -> f64 + Send + Sync>;

/// Wrap a closure as a shareable coefficient function.
pub fn real_fn<F: Fn(&TcpPoint) -> f64 + Send + Sync + 'static>(f: F) -> RealFn {
    Arc::new(f)
}

/// `a(x) I^mu[b(.) u](x)`; order 0 is the identity.
#[derive(Clone)]
pub struct Term {
    pub coeff: Option<RealFn>,
    pub order: f64,
    pub side: Side,
    pub inner: Option<RealFn>,
}

impl Term {
    pub fn identity() -> Self {
        Self {
            coeff: None,
            order: 0.0,
            side: Side::Left,
            inner: None,
        }
    }

    pub fn fio(order: f64, side: Side) -> Self {
        Self {
            coeff: None,
            order,
            side,
            inner: None,
        }
    }

    pub fn with_coeff(mut self, a: RealFn) -> Self {
        self.coeff = Some(a);
        self
    }

    pub fn with_inner(mut self, b: RealFn) -> Self {
        self.inner = Some(b);
        self
    }
}

impl std::fmt::Debug for Term {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Term")
            .field("coeff", &self.coeff.is_some())
            .field("order", &self.order)
            .field("side", &self.side)
            .field("inner", &self.inner.is_some())
            .finish()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TransformSpec {
    /// Double-exponential with `omega` from the declared singularities.
    Auto,
    DoubleExp { omega: f64 },
    Algebraic { beta: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TruncationPolicy {
    pub n_start: usize,
    pub n_max: usize,
    pub tol: f64,
    /// Keep doubling up to `n_max` after convergence, for full histories.
    pub exhaust: bool,
}

impl Default for TruncationPolicy {
    fn default() -> Self {
        Self {
            n_start: 64,
            n_max: 1024,
            tol: 1e-13,
            exhaust: false,
        }
    }
}

impl TruncationPolicy {
    pub fn validate(&self) -> Result<()> {
        if self.n_start < 2 || self.n_max < self.n_start {
            return Err(Error::InvalidParameter(format!(
                "truncation sizes need 2 <= n_start <= n_max, got {} and {}",
                self.n_start, self.n_max
            )));
        }
        if !(self.tol > 0.0) {
            return Err(Error::Domain {
                name: "tol",
                value: self.tol,
                reason: "tolerance must be positive",
            });
        }
        Ok(())
    }

    /// `n_start, 2 n_start, ...` up to `n_max`.
    pub fn sizes(&self) -> Vec<usize> {
        std::iter::successors(Some(self.n_start), |&n| Some(2 * n))
            .take_while(|&n| n <= self.n_max)
            .collect()
    }
}

/// `sum_l a_l I^{mu_l}[b_l u] = f`.
#[derive(Clone)]
pub struct ProblemSpec {
    pub terms: Vec<Term>,
    pub rhs: RealFn,
    pub transform: TransformSpec,
    /// Endpoint singularity orders of the data; `Auto` uses the smallest.
    /// Empty means the smallest nonzero operator order.
    pub gammas: Vec<f64>,
    pub policy: TruncationPolicy,
    pub aca: Option<AcaOptions>,
}

impl std::fmt::Debug for ProblemSpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ProblemSpec")
            .field("terms", &self.terms)
            .field("transform", &self.transform)
            .field("gammas", &self.gammas)
            .field("policy", &self.policy)
            .field("aca", &self.aca)
            .finish_non_exhaustive()
    }
}

impl ProblemSpec {
    pub fn new(terms: Vec<Term>, rhs: RealFn) -> Self {
        Self {
            terms,
            rhs,
            transform: TransformSpec::Auto,
            gammas: Vec::new(),
            policy: TruncationPolicy::default(),
            aca: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.terms.is_empty() {
            return Err(Error::Empty);
        }
        for t in &self.terms {
            if !(t.order >= 0.0 && t.order.is_finite()) {
                return Err(Error::Domain {
                    name: "order",
                    value: t.order,
                    reason: "term orders must be nonnegative",
                });
            }
            if t.side == Side::Riesz && t.order > 0.0 {
                riesz_factor(t.order)?;
            }
        }
        for &g in &self.gammas {
            if !(g > 0.0) {
                return Err(Error::Domain {
                    name: "gamma",
                    value: g,
                    reason: "singularity orders must be positive",
                });
            }
        }
        self.policy.validate()
    }

    /// The transform all terms share.
    pub fn resolve_transform(&self) -> Result<VariableTransform> {
        match self.transform {
            TransformSpec::DoubleExp { omega } => VariableTransform::double_exp(omega),
            TransformSpec::Algebraic { beta } => VariableTransform::algebraic(beta),
            TransformSpec::Auto => {
                let gamma = if self.gammas.is_empty() {
                    self.terms
                        .iter()
                        .map(|t| t.order)
                        .filter(|&m| m > 0.0)
                        .fold(f64::INFINITY, f64::min)
                } else {
                    self.gammas.iter().copied().fold(f64::INFINITY, f64::min)
                };
                let rhs = self.rhs.clone();
                let fnorm = estimate_sup_norm(move |p: &TcpPoint| rhs(p));
                let fnorm = if fnorm > 0.0 { fnorm } else { 1.0 };
                let info = if gamma.is_finite() {
                    SingularityInfo::new(gamma, fnorm)?
                } else {
                    SingularityInfo::smooth(fnorm)
                };
                VariableTransform::double_exp(select_omega(&info)?)
            }
        }
    }
}

/// One row of a convergence record.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConvergenceRecord {
    pub n: usize,
    /// Max difference from the previous truncation on the Cauchy grid.
    pub cauchy: Option<f64>,
    /// `||L c - f|| / ||f||` at this truncation.
    pub residual: f64,
    pub condition: f64,
}

#[derive(Debug, Clone)]
pub struct Solution<T: Scalar = f64> {
    pub coeffs: ChebSeries<T>,
    pub transform: VariableTransform,
    pub n_final: usize,
    pub history: Vec<ConvergenceRecord>,
    pub residual: f64,
    pub condition: f64,
}

impl<T: Scalar> Solution<T> {
    pub fn eval(&self, x: f64) -> Result<T> {
        crate::transform::tcp_eval(&self.transform, &self.coeffs, x)
    }

    pub fn cauchy_history(&self) -> Vec<(usize, f64)> {
        cauchy_pairs(&self.history)
    }
}

fn cauchy_pairs(h: &[ConvergenceRecord]) -> Vec<(usize, f64)> {
    h.iter().filter_map(|r| r.cauchy.map(|c| (r.n, c))).collect()
}

/// Equispaced points on [-1, 1] and their preimages under the transform.
pub struct EvalGrid {
    pub xs: Vec<f64>,
    ys: Vec<f64>,
}

impl EvalGrid {
    pub fn new(tr: &VariableTransform, count: usize) -> Result<Self> {
        let count = count.max(2);
        let xs: Vec<f64> = (0..count)
            .map(|i| -1.0 + 2.0 * i as f64 / (count - 1) as f64)
            .collect();
        let ys = xs.iter().map(|&x| tr.inverse(x)).collect::<Result<Vec<_>>>()?;
        Ok(Self { xs, ys })
    }

    pub fn values<T: Scalar>(&self, c: &ChebSeries<T>) -> Vec<T> {
        self.ys.iter().map(|&y| c.eval_unchecked(y)).collect()
    }
}

pub fn max_diff<T: Scalar>(a: &[T], b: &[T]) -> f64 {
    a.iter().zip(b).map(|(&u, &v)| (u - v).abs_val()).fold(0.0, f64::max)
}

/// Kernels cached per `(mu, side)` for repeated assembly at growing `N`.
pub struct OperatorBank {
    transform: VariableTransform,
    aca: Option<AcaOptions>,
    kernels: Mutex<HashMap<(u64, Side), Arc<LowRankKernel>>>,
}

impl OperatorBank {
    pub fn new(transform: VariableTransform, aca: Option<AcaOptions>) -> Self {
        Self {
            transform,
            aca,
            kernels: Mutex::new(HashMap::new()),
        }
    }

    pub fn transform(&self) -> &VariableTransform {
        &self.transform
    }

    pub fn kernel(&self, mu: f64, side: Side) -> Result<Arc<LowRankKernel>> {
        let key = (mu.to_bits(), side);
        if let Some(k) = self.kernels.lock().expect("kernel cache poisoned").get(&key) {
            return Ok(k.clone());
        }
        let k = Arc::new(build_kernel(&self.transform, mu, side, self.aca.as_ref())?);
        self.kernels
            .lock()
            .expect("kernel cache poisoned")
            .insert(key, k.clone());
        Ok(k)
    }

    /// `N x N` approximation of the order-`mu` operator on `side`.
    pub fn fio(&self, mu: f64, side: Side, n: usize) -> Result<FIOApprox> {
        match side {
            Side::Riesz => {
                riesz_factor(mu)?;
                let l = self.fio(mu, Side::Left, n)?;
                let r = self.fio(mu, Side::Right, n)?;
                combine_riesz(&l, &r)
            }
            _ => assemble(&self.transform, &*self.kernel(mu, side)?, n),
        }
    }
}

fn expand_coeff(tr: &VariableTransform, f: &RealFn) -> Result<ChebSeries<f64>> {
    tcp_expand_auto(tr, |p: &TcpPoint| f(p), COEFF_EXPANSION_TOL, COEFF_EXPANSION_MAX)
}

/// Expanded multipliers, reused across truncation sizes.
struct PreparedTerm {
    coeff: Option<ChebSeries<f64>>,
    order: f64,
    side: Side,
    inner: Option<ChebSeries<f64>>,
}

fn prepare_terms(tr: &VariableTransform, terms: &[Term]) -> Result<Vec<PreparedTerm>> {
    terms
        .iter()
        .map(|t| {
            Ok(PreparedTerm {
                coeff: t.coeff.as_ref().map(|a| expand_coeff(tr, a)).transpose()?,
                order: t.order,
                side: t.side,
                inner: t.inner.as_ref().map(|b| expand_coeff(tr, b)).transpose()?,
            })
        })
        .collect()
}

fn assemble_terms(bank: &OperatorBank, terms: &[PreparedTerm], n: usize) -> Result<CoeffOperator<f64>> {
    let mut total = CoeffOperator::zeros(n);
    for t in terms {
        let mut op = if t.order == 0.0 {
            CoeffOperator::identity(n)
        } else {
            CoeffOperator::from_fio(&bank.fio(t.order, t.side, n)?)
        };
        if let Some(b) = &t.inner {
            op = op.compose(&mult_operator(b, n))?;
        }
        if let Some(a) = &t.coeff {
            op = mult_operator(a, n).compose(&op)?;
        }
        total = total.add(&op)?;
    }
    Ok(total)
}

/// Assembled operator of a problem at truncation `n` on `bank`'s transform.
pub fn assemble_problem(spec: &ProblemSpec, bank: &OperatorBank, n: usize) -> Result<CoeffOperator<f64>> {
    let prepared = prepare_terms(bank.transform(), &spec.terms)?;
    assemble_terms(bank, &prepared, n)
}

fn relative_residual<T: Scalar>(op: &CoeffOperator<T>, c: &[T], f: &[T]) -> Result<f64> {
    let lc = op.apply(c)?;
    let num = lc
        .iter()
        .zip(f)
        .map(|(&a, &b)| (a - b).abs_val().powi(2))
        .sum::<f64>()
        .sqrt();
    let den = f.iter().map(|v| v.abs_val().powi(2)).sum::<f64>().sqrt();
    Ok(num / if den > 0.0 { den } else { 1.0 })
}

/// Solve with `N` doubling until consecutive solutions agree to the
/// policy tolerance on the Cauchy grid.
pub fn solve_fie(spec: &ProblemSpec) -> Result<Solution<f64>> {
    spec.validate()?;
    let tr = spec.resolve_transform()?;
    let bank = OperatorBank::new(tr, spec.aca);
    solve_fie_with(spec, &bank)
}

/// [`solve_fie`] reusing kernels from `bank`.
pub fn solve_fie_with(spec: &ProblemSpec, bank: &OperatorBank) -> Result<Solution<f64>> {
    spec.validate()?;
    let tr = *bank.transform();
    let prepared = prepare_terms(&tr, &spec.terms)?;
    let grid = EvalGrid::new(&tr, CAUCHY_POINTS)?;
    let rhs = spec.rhs.clone();
    let mut history = Vec::new();
    let mut prev: Option<Vec<f64>> = None;
    let mut best: Option<Solution<f64>> = None;
    let mut converged = false;
    for n in spec.policy.sizes() {
        let op = assemble_terms(bank, &prepared, n)?;
        let f = tcp_expand(&tr, |p: &TcpPoint| rhs(p), n - 1)?;
        let (c, condition) = solve_checked(op.matrix().clone(), f.coeffs())?;
        let residual = relative_residual(&op, &c, f.coeffs())?;
        let coeffs = ChebSeries::from_t(c);
        let vals = grid.values(&coeffs);
        let cauchy = prev.as_ref().map(|p| max_diff(p, &vals));
        log::info!("N = {n}: Cauchy {cauchy:?}, residual {residual:.2e}, condition {condition:.2e}");
        history.push(ConvergenceRecord {
            n,
            cauchy,
            residual,
            condition,
        });
        prev = Some(vals);
        let hit = cauchy.is_some_and(|e| e <= spec.policy.tol);
        if !converged || spec.policy.exhaust {
            best = Some(Solution {
                coeffs,
                transform: tr,
                n_final: n,
                history: Vec::new(),
                residual,
                condition,
            });
        }
        converged |= hit;
        if converged && !spec.policy.exhaust {
            break;
        }
    }
    match best {
        Some(mut s) if converged => {
            s.history = history;
            Ok(s)
        }
        _ => Err(not_converged(spec.policy.n_max, &history)),
    }
}

fn not_converged(n_max: usize, history: &[ConvergenceRecord]) -> Error {
    let pairs = cauchy_pairs(history);
    Error::NotConverged {
        n_max,
        last_error: pairs.last().map(|p| p.1).unwrap_or(f64::INFINITY),
        history: pairs,
    }
}

/// Solve at a single truncation size.
pub fn solve_fie_fixed(spec: &ProblemSpec, n: usize) -> Result<Solution<f64>> {
    let mut s = spec.clone();
    s.policy = TruncationPolicy {
        n_start: n,
        n_max: n,
        tol: f64::INFINITY,
        exhaust: false,
    };
    s.validate().or_else(|e| match e {
        Error::Domain { name: "tol", .. } => Ok(()),
        e => Err(e),
    })?;
    let tr = spec.resolve_transform()?;
    let bank = OperatorBank::new(tr, spec.aca);
    let prepared = prepare_terms(&tr, &s.terms)?;
    let op = assemble_terms(&bank, &prepared, n)?;
    let rhs = s.rhs.clone();
    let f = tcp_expand(&tr, |p: &TcpPoint| rhs(p), n - 1)?;
    let (c, condition) = solve_checked(op.matrix().clone(), f.coeffs())?;
    let residual = relative_residual(&op, &c, f.coeffs())?;
    Ok(Solution {
        coeffs: ChebSeries::from_t(c),
        transform: tr,
        n_final: n,
        history: vec![ConvergenceRecord {
            n,
            cauchy: None,
            residual,
            condition,
        }],
        residual,
        condition,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn trivial_equation_returns_rhs_coefficients() {
        let f = real_fn(|p| (p.x * 2.0).cos());
        let mut spec = ProblemSpec::new(vec![Term::identity()], f.clone());
        spec.transform = TransformSpec::DoubleExp { omega: 3.154 };
        spec.policy.tol = 1e-14;
        let s = solve_fie(&spec).unwrap();
        let tr = VariableTransform::double_exp(3.154).unwrap();
        let direct = tcp_expand(&tr, |p: &TcpPoint| f(p), s.n_final - 1).unwrap();
        assert_eq!(s.coeffs.coeffs(), direct.coeffs());
        assert!(s.residual == 0.0);
    }

    #[test]
    fn policy_sizes_double() {
        let p = TruncationPolicy {
            n_start: 64,
            n_max: 600,
            ..Default::default()
        };
        assert_eq!(p.sizes(), vec![64, 128, 256, 512]);
        assert!(TruncationPolicy { n_max: 10, ..p }.validate().is_err());
        assert!(TruncationPolicy { tol: 0.0, ..p }.validate().is_err());
    }

    #[test]
    fn invalid_specs_rejected() {
        let f = real_fn(|_| 1.0);
        assert!(matches!(ProblemSpec::new(vec![], f.clone()).validate(), Err(Error::Empty)));
        let bad = ProblemSpec::new(vec![Term::fio(-0.5, Side::Left)], f.clone());
        assert!(bad.validate().is_err());
        let odd = ProblemSpec::new(vec![Term::fio(3.0, Side::Riesz)], f);
        assert!(odd.validate().is_err());
    }

    #[test]
    fn unresolved_problem_reports_history() {
        let mut spec = ProblemSpec::new(
            vec![Term::identity(), Term::fio(0.5, Side::Left)],
            real_fn(|p| (40.0 * p.x).sin()),
        );
        spec.policy = TruncationPolicy {
            n_start: 8,
            n_max: 16,
            tol: 1e-14,
            exhaust: false,
        };
        match solve_fie(&spec) {
            Err(Error::NotConverged { history, .. }) => assert_eq!(history.len(), 1),
            other => panic!("expected NotConverged, got {other:?}"),
        }
    }
}
