//! Job documents (JSON or TOML). Unknown keys are rejected.

use std::path::{Path, PathBuf};

use anyhow::Context;
use fracspec::solver::{real_fn, GridSpec, ProblemSpec, RealFn, Term, TransformSpec, TruncationPolicy};
use fracspec::kernel::table_parameters;
use fracspec::{AcaOptions, Side, TcpPoint};
use serde::Deserialize;

use crate::Invalid;

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Job {
    pub preset: Option<String>,
    /// Order for the `abel` and `pseudospectra` presets.
    pub mu: Option<f64>,
    /// Airy parameter.
    pub epsilon: Option<f64>,
    pub problem: Option<ProblemDoc>,
    pub eigen: Option<EigenDoc>,
    pub grid: Option<GridDoc>,
    pub policy: Option<PolicyDoc>,
    pub transform: Option<TransformDoc>,
    pub kernel: Option<KernelDoc>,
    /// Equispaced sample count for the solution CSV.
    pub samples: Option<usize>,
    pub out: Option<PathBuf>,
}

/// `c (1 + x)^a (1 - x)^b`.
#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PowerFn {
    #[serde(default = "one")]
    pub c: f64,
    #[serde(default)]
    pub a: f64,
    #[serde(default)]
    pub b: f64,
}

fn one() -> f64 {
    1.0
}

impl PowerFn {
    fn check(&self) -> Result<(), Invalid> {
        if self.c.is_finite() && self.a.is_finite() && self.b.is_finite() && self.a >= 0.0 && self.b >= 0.0 {
            Ok(())
        } else {
            Err(Invalid(format!("power function needs finite c and a, b >= 0, got {self:?}")))
        }
    }

    fn value(&self, p: &TcpPoint) -> f64 {
        let mut v = self.c;
        if self.a != 0.0 {
            v *= p.pow_1px(self.a);
        }
        if self.b != 0.0 {
            v *= p.pow_1mx(self.b);
        }
        v
    }
}

fn sum_fn(parts: &[PowerFn]) -> Result<RealFn, Invalid> {
    for p in parts {
        p.check()?;
    }
    let parts = parts.to_vec();
    Ok(real_fn(move |p: &TcpPoint| parts.iter().map(|f| f.value(p)).sum()))
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TermDoc {
    /// Zero for the identity.
    pub order: f64,
    #[serde(default = "left")]
    pub side: String,
    pub coeff: Option<PowerFn>,
    pub inner: Option<PowerFn>,
}

fn left() -> String {
    "left".into()
}

/// `sum_l a_l I^{mu_l}[b_l u] = f` with power-type data.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemDoc {
    pub terms: Vec<TermDoc>,
    pub rhs: Vec<PowerFn>,
    /// Closed-form solution, if known, to report the error.
    pub exact: Option<Vec<PowerFn>>,
    #[serde(default)]
    pub gammas: Vec<f64>,
}

impl ProblemDoc {
    pub fn to_spec(&self) -> Result<(ProblemSpec, Option<RealFn>), Invalid> {
        if self.terms.is_empty() {
            return Err(Invalid("problem needs at least one term".into()));
        }
        let mut terms = Vec::with_capacity(self.terms.len());
        for t in &self.terms {
            if !(t.order >= 0.0 && t.order.is_finite()) {
                return Err(Invalid(format!("term order must be finite and >= 0, got {}", t.order)));
            }
            let mut term = if t.order == 0.0 {
                Term::identity()
            } else {
                Term::fio(t.order, Side::parse(&t.side).map_err(|e| Invalid(e.to_string()))?)
            };
            if let Some(c) = &t.coeff {
                term = term.with_coeff(sum_fn(std::slice::from_ref(c))?);
            }
            if let Some(b) = &t.inner {
                term = term.with_inner(sum_fn(std::slice::from_ref(b))?);
            }
            terms.push(term);
        }
        let mut spec = ProblemSpec::new(terms, sum_fn(&self.rhs)?);
        spec.gammas = self.gammas.clone();
        let exact = self.exact.as_deref().map(sum_fn).transpose()?;
        Ok((spec, exact))
    }
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EigenDoc {
    pub mu1: f64,
    pub mu2: f64,
    pub k: usize,
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridDoc {
    pub x_lo: f64,
    pub x_hi: f64,
    pub y_lo: f64,
    pub y_hi: f64,
    pub nx: usize,
    pub ny: usize,
}

impl From<GridDoc> for GridSpec {
    fn from(g: GridDoc) -> Self {
        GridSpec {
            x_lo: g.x_lo,
            x_hi: g.x_hi,
            y_lo: g.y_lo,
            y_hi: g.y_hi,
            nx: g.nx,
            ny: g.ny,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PolicyDoc {
    pub n_start: Option<usize>,
    pub n_max: Option<usize>,
    pub tol: Option<f64>,
    pub exhaust: Option<bool>,
}

impl PolicyDoc {
    pub fn apply(&self, p: &mut TruncationPolicy) {
        if let Some(v) = self.n_start {
            p.n_start = v;
        }
        if let Some(v) = self.n_max {
            p.n_max = v;
        }
        if let Some(v) = self.tol {
            p.tol = v;
        }
        if let Some(v) = self.exhaust {
            p.exhaust = v;
        }
    }
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields, tag = "kind", rename_all = "lowercase")]
pub enum TransformDoc {
    Auto,
    De { omega: f64 },
    Algebraic { beta: f64 },
}

impl From<TransformDoc> for TransformSpec {
    fn from(t: TransformDoc) -> Self {
        match t {
            TransformDoc::Auto => TransformSpec::Auto,
            TransformDoc::De { omega } => TransformSpec::DoubleExp { omega },
            TransformDoc::Algebraic { beta } => TransformSpec::Algebraic { beta },
        }
    }
}

impl TransformDoc {
    /// `omega` for solvers that only take a double-exponential map.
    pub fn omega(&self) -> Result<Option<f64>, Invalid> {
        match *self {
            TransformDoc::Auto => Ok(None),
            TransformDoc::De { omega } => Ok(Some(omega)),
            TransformDoc::Algebraic { .. } => Err(Invalid("this solver needs the double-exponential transform".into())),
        }
    }
}

/// Cross approximation on a `K = L = k` grid.
#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KernelDoc {
    pub k: usize,
    pub rank: Option<usize>,
    pub tol: Option<f64>,
}

impl KernelDoc {
    pub fn options(&self, mu: f64) -> AcaOptions {
        kernel_options(mu, self.k, self.rank, self.tol)
    }
}

/// Fixed `rank` if given; adaptive to `tol` if only that is given; otherwise
/// the tabulated rank for `mu`.
pub fn kernel_options(mu: f64, k: usize, rank: Option<usize>, tol: Option<f64>) -> AcaOptions {
    match (rank, tol) {
        (Some(r), _) => {
            let mut o = AcaOptions::fixed(r, k);
            if let Some(t) = tol {
                o.tol = t;
            }
            o
        }
        (None, Some(t)) => {
            let mut o = AcaOptions::for_order(mu);
            o.k = k;
            o.l = k;
            o.tol = t;
            o
        }
        (None, None) => AcaOptions::fixed(table_parameters(mu).0, k),
    }
}

pub fn load(path: &Path) -> anyhow::Result<Job> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading job file {}", path.display()))?;
    let is_toml = path.extension().is_some_and(|e| e.eq_ignore_ascii_case("toml"));
    let job = if is_toml {
        toml::from_str(&text).map_err(|e| Invalid(format!("{}: {e}", path.display())))?
    } else {
        serde_json::from_str(&text).map_err(|e| Invalid(format!("{}: {e}", path.display())))?
    };
    Ok(job)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_unknown_keys() {
        assert!(serde_json::from_str::<Job>(r#"{"preset": "abel", "bogus": 1}"#).is_err());
        assert!(toml::from_str::<Job>("preset = 'abel'\n[policy]\nn_max = 128\nfoo = 2\n").is_err());
    }

    #[test]
    fn custom_problem_roundtrip() {
        let job: Job = toml::from_str(
            r#"
            [problem]
            terms = [{ order = 0 }, { order = 0.5, side = "left" }]
            rhs = [{ a = 0.5 }, { c = 0.886226925452758, a = 1.0 }]
            exact = [{ a = 0.5 }]
            [transform]
            kind = "de"
            omega = 4.0
            "#,
        )
        .unwrap();
        let (spec, exact) = job.problem.unwrap().to_spec().unwrap();
        assert_eq!(spec.terms.len(), 2);
        let p = TcpPoint::from_x(0.0);
        assert!(((spec.rhs)(&p) - 1.886226925452758).abs() < 1e-15);
        assert_eq!(exact.unwrap()(&p), 1.0);
        assert!(matches!(job.transform, Some(TransformDoc::De { omega }) if omega == 4.0));
    }

    #[test]
    fn rejects_negative_powers() {
        let doc = ProblemDoc {
            terms: vec![TermDoc {
                order: 0.0,
                side: left(),
                coeff: None,
                inner: None,
            }],
            rhs: vec![PowerFn { c: 1.0, a: -0.5, b: 0.0 }],
            exact: None,
            gammas: vec![],
        };
        assert!(doc.to_spec().is_err());
    }
}
