//! `eps i^{3/2} D^{3/2} u - x u = 0`, `u(-1) = 0`, `u(1) = 1`, through the
//! ansatz `u = I^{3/2}[v] + a w` with `w` in the kernel of the derivative.
//!
//! The Riemann-Liouville kernel of `D^{3/2}` under `u(-1) = 0` is spanned by
//! `sqrt(1 + x)`, so the default ansatz uses `w = sqrt(1 + x)` and leaves a
//! second-kind equation for a bounded `v`. The linear choice `w = 1 + x` is
//! kept as [`AiryAnsatz::Linear`]; there `v` has to mimic a non-integrable
//! `1 / (1 + x)` and the coefficients grow without bound.

use num_complex::Complex64;

use super::{max_diff, not_converged, ConvergenceRecord, EvalGrid, OperatorBank, Solution, TruncationPolicy, CAUCHY_POINTS};
use crate::chebcore::ChebSeries;
use crate::error::{Error, Result};
use crate::fio::Side;
use crate::kernel::AcaOptions;
use crate::opalgebra::{boundary_row, mult_operator, solve_bordered, BorderedSystem, CoeffOperator};
use crate::special::gamma;
use crate::transform::{select_omega, tcp_expand, tcp_expand_auto, SingularityInfo, TcpPoint, VariableTransform};

const ORDER: f64 = 1.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum AiryAnsatz {
    #[default]
    SquareRoot,
    Linear,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AiryOptions {
    pub epsilon: f64,
    pub ansatz: AiryAnsatz,
    pub policy: TruncationPolicy,
    /// Defaults to the value selected for a square-root singularity.
    pub omega: Option<f64>,
    pub aca: Option<AcaOptions>,
}

impl AiryOptions {
    pub fn new(epsilon: f64) -> Self {
        Self {
            epsilon,
            ansatz: AiryAnsatz::SquareRoot,
            policy: TruncationPolicy {
                n_start: 64,
                n_max: 2048,
                tol: 1e-10,
                exhaust: false,
            },
            omega: None,
            aca: None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct AirySolution {
    /// Coefficients of `u`.
    pub solution: Solution<Complex64>,
    pub v: ChebSeries<Complex64>,
    pub a: Complex64,
    /// `|u(-1)|` and `|u(1) - 1|`.
    pub boundary_residuals: [f64; 2],
}

/// Principal branch of `i^{3/2}`.
pub fn i_three_halves() -> Complex64 {
    Complex64::new(0.0, 1.0).powf(1.5)
}

pub fn solve_fde_airy(opts: &AiryOptions) -> Result<AirySolution> {
    let eps = opts.epsilon;
    if !(eps > 0.0 && eps.is_finite()) {
        return Err(Error::Domain {
            name: "epsilon",
            value: eps,
            reason: "must be positive",
        });
    }
    opts.policy.validate()?;
    let omega = match opts.omega {
        Some(w) => w,
        None => select_omega(&SingularityInfo::new(0.5, 1.0)?)?,
    };
    let tr = VariableTransform::double_exp(omega)?;
    let bank = OperatorBank::new(tr, opts.aca);
    let s = i_three_halves() * eps;
    let inv_g_half = 1.0 / gamma(0.5)?;
    let (m1, m2): (Option<ChebSeries<f64>>, ChebSeries<f64>) = match opts.ansatz {
        AiryAnsatz::SquareRoot => (None, tcp_expand_auto(&tr, |p: &TcpPoint| p.x, 1e-16, 8192)?),
        AiryAnsatz::Linear => (
            Some(tcp_expand_auto(&tr, |p: &TcpPoint| p.pow_1px(0.5), 1e-16, 8192)?),
            tcp_expand_auto(&tr, |p: &TcpPoint| p.x * p.pow_1px(0.5), 1e-16, 8192)?,
        ),
    };
    let (w_at_one, w_pow) = match opts.ansatz {
        AiryAnsatz::SquareRoot => (std::f64::consts::SQRT_2, 0.5),
        AiryAnsatz::Linear => (2.0, 1.0),
    };
    let grid = EvalGrid::new(&tr, CAUCHY_POINTS)?;
    let mut history = Vec::new();
    let mut prev: Option<Vec<Complex64>> = None;
    let mut best = None;
    let mut converged = false;
    for n in opts.policy.sizes() {
        let a_op = CoeffOperator::from_fio(&bank.fio(ORDER, Side::Left, n)?).to_complex();
        let lead = match &m1 {
            Some(m1) => mult_operator(&m1.to_complex(), n),
            None => CoeffOperator::identity(n),
        };
        let core = lead.scale(s).sub(&mult_operator(&m2.to_complex(), n).compose(&a_op)?)?;
        let g: ChebSeries<Complex64> = match opts.ansatz {
            AiryAnsatz::SquareRoot => tcp_expand(&tr, |p: &TcpPoint| Complex64::from(-p.x * p.pow_1px(0.5)), n - 1)?,
            AiryAnsatz::Linear => tcp_expand(
                &tr,
                |p: &TcpPoint| s * inv_g_half - Complex64::from(p.x * p.pow_1px(1.5)),
                n - 1,
            )?,
        };
        let plus = boundary_row(1.0, n)?;
        let system = BorderedSystem {
            core,
            border_cols: vec![g.into_coeffs()],
            border_rows: vec![plus.compose(&a_op)?],
            corner: vec![vec![Complex64::from(w_at_one)]],
            rhs: vec![Complex64::from(0.0); n],
            rhs_border: vec![Complex64::from(1.0)],
        };
        let sol = solve_bordered(&system)?;
        let a = sol.border[0];
        let w: ChebSeries<f64> = tcp_expand(&tr, |p: &TcpPoint| p.pow_1px(w_pow), n - 1)?;
        let mut u = a_op.apply(sol.coeffs.coeffs())?;
        for (ui, &wi) in u.iter_mut().zip(w.coeffs()) {
            *ui += a * wi;
        }
        let u = ChebSeries::from_t(u);
        let left = boundary_row(-1.0, n)?.apply(u.coeffs()).norm();
        let right = (plus.apply(u.coeffs()) - 1.0).norm();
        let vals = grid.values(&u);
        let cauchy = prev.as_ref().map(|p| max_diff(p, &vals));
        log::info!(
            "Airy eps={eps} N={n}: Cauchy {cauchy:?}, residual {:.2e}, |u(-1)| {left:.2e}, |u(1)-1| {right:.2e}",
            sol.residual
        );
        history.push(ConvergenceRecord {
            n,
            cauchy,
            residual: sol.residual,
            condition: sol.condition,
        });
        prev = Some(vals);
        if !converged || opts.policy.exhaust {
            best = Some(AirySolution {
                solution: Solution {
                    coeffs: u,
                    transform: tr,
                    n_final: n,
                    history: Vec::new(),
                    residual: sol.residual,
                    condition: sol.condition,
                },
                v: sol.coeffs,
                a,
                boundary_residuals: [left, right],
            });
        }
        converged |= cauchy.is_some_and(|c| c <= opts.policy.tol);
        if converged && !opts.policy.exhaust {
            break;
        }
    }
    match best {
        Some(mut s) if converged => {
            s.solution.history = history;
            Ok(s)
        }
        _ => Err(not_converged(opts.policy.n_max, &history)),
    }
}
