use std::path::{Path, PathBuf};

use anyhow::Context;
use fracspec::fio::{build_fio, FioOptions};
use fracspec::io::save_operator;
use fracspec::presets;
use fracspec::solver::{
    pseudospectra, solve_eigen, solve_fde_airy, solve_fie, AiryOptions, ConvergenceRecord, EigenOptions,
    PseudoOptions, RealFn, TruncationPolicy,
};
use fracspec::transform::select_omega;
use fracspec::{Error, Side, SingularityInfo, TcpPoint, VariableTransform};
use num_complex::Complex64;
use serde::Serialize;

use crate::job::{kernel_options, Job};
use crate::output::{num, opt_num, write_csv, write_json};
use crate::{BuildArgs, Common, Invalid};

const DEFAULT_SAMPLES: usize = 1001;

/// Job from `--job` or `--preset`, with command-line overrides applied.
pub fn resolve_job(c: &Common) -> anyhow::Result<Job> {
    let mut job = match (&c.job, &c.preset) {
        (Some(path), None) => crate::job::load(path)?,
        (None, Some(name)) => Job {
            preset: Some(name.clone()),
            ..Job::default()
        },
        (Some(path), Some(name)) => {
            let mut j = crate::job::load(path)?;
            j.preset = Some(name.clone());
            j
        }
        (None, None) => return Err(Invalid("one of --preset or --job is required".into()).into()),
    };
    if let Some(p) = job.preset.as_deref() {
        if !presets::NAMES.contains(&p) {
            return Err(Invalid(format!("unknown preset '{p}', expected one of {:?}", presets::NAMES)).into());
        }
    }
    let mut policy = job.policy.unwrap_or_default();
    if c.n_max.is_some() {
        policy.n_max = c.n_max;
    }
    if c.tol.is_some() {
        policy.tol = c.tol;
    }
    job.policy = Some(policy);
    Ok(job)
}

pub fn out_dir(c: &Common, job: &Job) -> anyhow::Result<PathBuf> {
    let dir = c.out.clone().or_else(|| job.out.clone()).unwrap_or_else(|| PathBuf::from("."));
    std::fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
    Ok(dir)
}

fn apply_policy(job: &Job, p: &mut TruncationPolicy) {
    if let Some(d) = &job.policy {
        d.apply(p);
    }
}

#[derive(Serialize)]
struct OperatorMeta {
    mu: f64,
    side: &'static str,
    transform: &'static str,
    parameter: f64,
    n: usize,
    band_lower: usize,
    band_upper: usize,
    kernel_rank: usize,
    kernel_k: usize,
    kernel_l: usize,
    binary: String,
}

pub fn build(a: &BuildArgs) -> anyhow::Result<()> {
    if !(a.mu > 0.0 && a.mu.is_finite()) {
        return Err(Invalid(format!("--mu must be positive and finite, got {}", a.mu)).into());
    }
    if a.n == 0 {
        return Err(Invalid("--n must be positive".into()).into());
    }
    let side = Side::parse(&a.side).map_err(|e| Invalid(e.to_string()))?;
    let tr = match a.transform.as_str() {
        "de" => {
            let omega = match a.omega {
                Some(w) => w,
                None => select_omega(&SingularityInfo::new(a.mu, 1.0)?)?,
            };
            VariableTransform::double_exp(omega).map_err(|e| Invalid(e.to_string()))?
        }
        "algebraic" => {
            let beta = a.beta.ok_or_else(|| Invalid("--beta is required for the algebraic transform".into()))?;
            VariableTransform::algebraic(beta).map_err(|e| Invalid(e.to_string()))?
        }
        other => return Err(Invalid(format!("unknown transform '{other}', expected de or algebraic")).into()),
    };
    let aca = a.k.map(|k| kernel_options(a.mu, k, a.rank, a.aca_tol));
    let op = build_fio(&tr, a.mu, side, a.n, &FioOptions { aca })?;
    if let Some(dir) = a.out.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    save_operator(&a.out, &op)?;
    let band = op.band_profile();
    let (k, l) = op.kernel_degrees();
    let meta = OperatorMeta {
        mu: a.mu,
        side: side.name(),
        transform: tr.kind_name(),
        parameter: tr.parameter(),
        n: a.n,
        band_lower: band.lower,
        band_upper: band.upper,
        kernel_rank: op.kernel_rank(),
        kernel_k: k,
        kernel_l: l,
        binary: a.out.file_name().map(|f| f.to_string_lossy().into_owned()).unwrap_or_default(),
    };
    write_json(&a.out.with_extension("json"), &meta)?;
    log::info!("wrote {} (rank {}, band {band:?})", a.out.display(), op.kernel_rank());
    Ok(())
}

#[derive(Serialize)]
struct SolutionDoc {
    problem: String,
    transform: &'static str,
    parameter: f64,
    n_final: usize,
    residual: f64,
    condition: f64,
    /// Max error against the closed form over the samples.
    max_error: Option<f64>,
    /// `[re, im]` pairs.
    coefficients: Vec<[f64; 2]>,
    #[serde(skip_serializing_if = "Option::is_none")]
    airy: Option<AiryExtra>,
}

#[derive(Serialize)]
struct AiryExtra {
    epsilon: f64,
    a: [f64; 2],
    boundary_residuals: [f64; 2],
    v_coefficients: Vec<[f64; 2]>,
}

fn pairs(c: &[Complex64]) -> Vec<[f64; 2]> {
    c.iter().map(|z| [z.re, z.im]).collect()
}

fn write_history(dir: &Path, h: &[ConvergenceRecord]) -> anyhow::Result<()> {
    write_csv(
        &dir.join("convergence.csv"),
        &["N", "cauchy_error", "residual"],
        h.iter().map(|r| vec![r.n.to_string(), opt_num(r.cauchy), num(r.residual)]),
    )
}

/// On failure the Cauchy history carried by the error is still written.
fn write_failed_history(dir: &Path, e: &anyhow::Error) -> anyhow::Result<()> {
    if let Some(Error::NotConverged { history, .. }) = e.downcast_ref::<Error>() {
        write_csv(
            &dir.join("convergence.csv"),
            &["N", "cauchy_error", "residual"],
            history.iter().map(|&(n, c)| vec![n.to_string(), num(c), String::new()]),
        )?;
    }
    Ok(())
}

fn samples(job: &Job) -> anyhow::Result<Vec<f64>> {
    let m = job.samples.unwrap_or(DEFAULT_SAMPLES);
    if m < 2 {
        return Err(Invalid("samples must be at least 2".into()).into());
    }
    Ok((0..m).map(|i| -1.0 + 2.0 * i as f64 / (m - 1) as f64).collect())
}

pub fn solve(c: &Common) -> anyhow::Result<()> {
    let job = resolve_job(c)?;
    let dir = out_dir(c, &job)?;
    let res = match job.preset.as_deref() {
        Some("airy") => solve_airy(&job, &dir),
        Some("abel" | "riesz" | "mixed") | None => solve_integral(&job, &dir),
        Some(p) => Err(Invalid(format!("preset '{p}' is not an equation; use the '{p}' command")).into()),
    };
    if let Err(e) = &res {
        write_failed_history(&dir, e)?;
    }
    res
}

fn solve_integral(job: &Job, dir: &Path) -> anyhow::Result<()> {
    let (name, mut spec, exact): (String, _, Option<RealFn>) = match (job.preset.as_deref(), &job.problem) {
        (Some(_), Some(_)) => return Err(Invalid("give either a preset or a problem, not both".into()).into()),
        (None, Some(doc)) => {
            let (s, e) = doc.to_spec()?;
            ("custom".into(), s, e)
        }
        (None, None) => return Err(Invalid("solve needs a preset or a [problem] section".into()).into()),
        (Some(p), None) => {
            let preset = match p {
                "abel" => presets::abel(job.mu.unwrap_or(0.5)).map_err(|e| Invalid(e.to_string()))?,
                "riesz" => presets::riesz()?,
                _ => presets::mixed(),
            };
            (preset.name.to_string(), preset.spec, preset.exact)
        }
    };
    if let Some(t) = job.transform {
        spec.transform = t.into();
    }
    if let Some(k) = &job.kernel {
        let mu = spec.terms.iter().map(|t| t.order).filter(|&m| m > 0.0).fold(1.0, f64::min);
        spec.aca = Some(k.options(mu));
    }
    apply_policy(job, &mut spec.policy);
    spec.validate().map_err(|e| Invalid(e.to_string()))?;
    let sol = solve_fie(&spec)?;
    write_history(dir, &sol.history)?;
    let xs = samples(job)?;
    let mut max_error: Option<f64> = None;
    let mut rows = Vec::with_capacity(xs.len());
    for &x in &xs {
        let u = sol.eval(x)?;
        if let Some(f) = &exact {
            let e = (u - f(&TcpPoint::from_x(x))).abs();
            max_error = Some(max_error.map_or(e, |m: f64| m.max(e)));
        }
        rows.push(vec![num(x), num(u), num(0.0)]);
    }
    write_csv(&dir.join("samples.csv"), &["x", "re_u", "im_u"], rows)?;
    let coeffs: Vec<Complex64> = sol.coeffs.coeffs().iter().map(|&v| Complex64::from(v)).collect();
    write_json(
        &dir.join("solution.json"),
        &SolutionDoc {
            problem: name.clone(),
            transform: sol.transform.kind_name(),
            parameter: sol.transform.parameter(),
            n_final: sol.n_final,
            residual: sol.residual,
            condition: sol.condition,
            max_error,
            coefficients: pairs(&coeffs),
            airy: None,
        },
    )?;
    match max_error {
        Some(e) => println!("{name}: N = {}, max error {e:.3e}", sol.n_final),
        None => println!("{name}: N = {}", sol.n_final),
    }
    Ok(())
}

fn solve_airy(job: &Job, dir: &Path) -> anyhow::Result<()> {
    let mut o = presets::airy();
    if let Some(e) = job.epsilon {
        o = AiryOptions { epsilon: e, ..o };
    }
    if let Some(t) = &job.transform {
        o.omega = t.omega()?;
    }
    if let Some(k) = &job.kernel {
        o.aca = Some(k.options(1.5));
    }
    apply_policy(job, &mut o.policy);
    o.policy.validate().map_err(|e| Invalid(e.to_string()))?;
    if !(o.epsilon > 0.0 && o.epsilon.is_finite()) {
        return Err(Invalid(format!("epsilon must be positive, got {}", o.epsilon)).into());
    }
    let s = solve_fde_airy(&o)?;
    let sol = &s.solution;
    write_history(dir, &sol.history)?;
    let mut rows = Vec::new();
    for x in samples(job)? {
        let u = sol.eval(x)?;
        rows.push(vec![num(x), num(u.re), num(u.im)]);
    }
    write_csv(&dir.join("samples.csv"), &["x", "re_u", "im_u"], rows)?;
    write_json(
        &dir.join("solution.json"),
        &SolutionDoc {
            problem: "airy".into(),
            transform: sol.transform.kind_name(),
            parameter: sol.transform.parameter(),
            n_final: sol.n_final,
            residual: sol.residual,
            condition: sol.condition,
            max_error: None,
            coefficients: pairs(sol.coeffs.coeffs()),
            airy: Some(AiryExtra {
                epsilon: o.epsilon,
                a: [s.a.re, s.a.im],
                boundary_residuals: s.boundary_residuals,
                v_coefficients: pairs(s.v.coeffs()),
            }),
        },
    )?;
    println!(
        "airy eps = {}: N = {}, boundary residuals {:.2e} {:.2e}",
        o.epsilon, sol.n_final, s.boundary_residuals[0], s.boundary_residuals[1]
    );
    Ok(())
}

#[derive(Serialize)]
struct EigenVectorDoc {
    index: usize,
    lambda: [f64; 2],
    coefficients: Vec<[f64; 2]>,
}

#[derive(Serialize)]
struct EigenDoc {
    mu1: f64,
    mu2: f64,
    theta: f64,
    transform: &'static str,
    parameter: f64,
    n_final: usize,
    vectors: Vec<EigenVectorDoc>,
}

pub fn eig(c: &Common) -> anyhow::Result<()> {
    let job = resolve_job(c)?;
    let dir = out_dir(c, &job)?;
    let mut o = match (job.preset.as_deref(), &job.eigen) {
        (Some("eig"), None) => presets::eig(),
        (None, Some(d)) => EigenOptions::new(d.mu1, d.mu2, d.k),
        (Some("eig"), Some(d)) => {
            let mut o = presets::eig();
            o.mu1 = d.mu1;
            o.mu2 = d.mu2;
            o.k = d.k;
            o
        }
        (Some(p), _) => return Err(Invalid(format!("preset '{p}' is not an eigenproblem")).into()),
        (None, None) => return Err(Invalid("eig needs the eig preset or an [eigen] section".into()).into()),
    };
    if o.k == 0 {
        return Err(Invalid("k must be at least 1".into()).into());
    }
    if let Some(t) = &job.transform {
        o.omega = t.omega()?;
    }
    if let Some(k) = &job.kernel {
        o.aca = Some(k.options(o.mu1.min(1.0)));
    }
    apply_policy(&job, &mut o.policy);
    let res = match solve_eigen(&o) {
        Ok(r) => r,
        Err(e @ (Error::InvalidParameter(_) | Error::Domain { .. })) => return Err(Invalid(e.to_string()).into()),
        Err(e) => return Err(e.into()),
    };
    write_csv(
        &dir.join("eigenvalues.csv"),
        &["index", "re_lambda", "im_lambda", "conjugate_pair", "residual"],
        res.pairs.iter().enumerate().map(|(i, p)| {
            vec![
                i.to_string(),
                num(p.lambda.re),
                // avoid a signed zero on real eigenvalues
                num(p.lambda.im + 0.0),
                if p.is_pair() { "±" } else { "" }.to_string(),
                num(p.residual),
            ]
        }),
    )?;
    write_csv(
        &dir.join("convergence.csv"),
        &["N", "relative_change"],
        res.history.iter().map(|&(n, d)| vec![n.to_string(), num(d)]),
    )?;
    write_json(
        &dir.join("eigenvectors.json"),
        &EigenDoc {
            mu1: o.mu1,
            mu2: o.mu2,
            theta: res.theta,
            transform: res.transform.kind_name(),
            parameter: res.transform.parameter(),
            n_final: res.n_final,
            vectors: res
                .pairs
                .iter()
                .enumerate()
                .map(|(i, p)| EigenVectorDoc {
                    index: i,
                    lambda: [p.lambda.re, p.lambda.im],
                    coefficients: pairs(p.vector.coeffs()),
                })
                .collect(),
        },
    )?;
    for p in &res.pairs {
        if p.is_pair() {
            println!("{:.15} ±{:.15}i", p.lambda.re, p.lambda.im);
        } else {
            println!("{:.15}", p.lambda.re);
        }
    }
    Ok(())
}

#[derive(Serialize)]
struct PseudoMeta {
    mu: f64,
    x_lo: f64,
    x_hi: f64,
    y_lo: f64,
    y_hi: f64,
    nx: usize,
    ny: usize,
    n_start: usize,
    n_max: usize,
    tol: f64,
    points: usize,
    converged: usize,
    flagged: usize,
}

pub fn pseudo(c: &Common) -> anyhow::Result<()> {
    let job = resolve_job(c)?;
    let dir = out_dir(c, &job)?;
    let mut o = match job.preset.as_deref() {
        Some("pseudospectra") => presets::pseudospectra(),
        None => PseudoOptions::default(),
        Some(p) => return Err(Invalid(format!("preset '{p}' is not a pseudospectra job")).into()),
    };
    if let Some(mu) = job.mu {
        o.mu = mu;
    }
    if let Some(g) = job.grid {
        o.grid = g.into();
    }
    if let Some(t) = &job.transform {
        o.omega = t.omega()?;
    }
    if let Some(k) = &job.kernel {
        o.aca = Some(k.options(o.mu));
    }
    apply_policy(&job, &mut o.policy);
    let pts = match pseudospectra(&o) {
        Ok(p) => p,
        Err(e @ (Error::InvalidParameter(_) | Error::Domain { .. })) => return Err(Invalid(e.to_string()).into()),
        Err(e) => return Err(e.into()),
    };
    write_csv(
        &dir.join("pseudospectra.csv"),
        &["re_z", "im_z", "value", "n", "converged", "flagged"],
        pts.iter().map(|p| {
            vec![
                num(p.z.re),
                num(p.z.im),
                num(p.value),
                p.n.to_string(),
                p.converged.to_string(),
                p.flagged.to_string(),
            ]
        }),
    )?;
    let flagged = pts.iter().filter(|p| p.flagged).count();
    let converged = pts.iter().filter(|p| p.converged).count();
    let g = o.grid;
    write_json(
        &dir.join("pseudospectra.json"),
        &PseudoMeta {
            mu: o.mu,
            x_lo: g.x_lo,
            x_hi: g.x_hi,
            y_lo: g.y_lo,
            y_hi: g.y_hi,
            nx: g.nx,
            ny: g.ny,
            n_start: o.policy.n_start,
            n_max: o.policy.n_max,
            tol: o.policy.tol,
            points: pts.len(),
            converged,
            flagged,
        },
    )?;
    println!("{} points, {converged} converged, {flagged} flagged", pts.len());
    Ok(())
}
