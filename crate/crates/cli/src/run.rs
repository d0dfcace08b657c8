//! Problem assembly and task execution.

use std::fmt;

use paramop_core::families::{
    make_disc, make_polar_disc, registry_build, Family, LinearFamily, NonlinearFamily, ParameterDisc,
    Params, RhsFamily,
};
use paramop_core::fredholm::{
    as_linear_family, fredholm_sensitivity, fredholm_solve, hs_continuity, kernel_build, resolve_sign, KernelFamily,
    SourceFamily, SIGN_RESOLUTION_NOTE,
};
use paramop_core::linear::{
    blowup_probe, check_assumptions_a1, continuity_modulus, linear_sensitivity, solve_at, ContinuitySweep,
    ModulusSample,
};
use paramop_core::nonlinear::{
    check_assumptions_nonlinear, newton_solve, nonlinear_continuity, sensitivity_continuity, solve_with_fallback,
    NewtonOptions, SensitivityOptions, StartKind,
};
use paramop_core::quadrature::{gauss_legendre, Quadrature};
use paramop_core::semilinear::{
    assemble, g_build, m_bound, selfmap_check, semilinear_solve, transformed_rhs, yukawa_radial_operator,
    NonlinearityG, RadialOperator, SemilinearMethod,
};
use paramop_core::verdict::{Verdict, VerdictOptions};
use paramop_core::{c, Error, Vector, C64};

use crate::config::{RunConfig, Task};
use crate::report::{fmt_c, fmt_num, fmt_opt, verdict_token};

/// Operational failure: the run could not be carried out.
#[derive(Debug)]
pub enum RunError {
    Core(Error),
    Io(std::io::Error),
    Csv(csv::Error),
}

impl fmt::Display for RunError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RunError::Core(e) => write!(f, "{e}"),
            RunError::Io(e) => write!(f, "i/o error: {e}"),
            RunError::Csv(e) => write!(f, "csv error: {e}"),
        }
    }
}

impl std::error::Error for RunError {}

impl From<Error> for RunError {
    fn from(e: Error) -> Self {
        RunError::Core(e)
    }
}

impl From<std::io::Error> for RunError {
    fn from(e: std::io::Error) -> Self {
        RunError::Io(e)
    }
}

impl From<csv::Error> for RunError {
    fn from(e: csv::Error) -> Self {
        RunError::Csv(e)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolutionRow {
    pub k: C64,
    pub node: usize,
    pub u: C64,
    pub udot: Option<C64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ContinuityRow {
    pub k: C64,
    pub h: f64,
    pub omega: f64,
    pub proxy: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct RunResults {
    pub problem: String,
    pub family: String,
    pub grid: Vec<C64>,
    pub tasks: Vec<Task>,
    pub solutions: Vec<SolutionRow>,
    pub continuity: Vec<ContinuityRow>,
    /// Report sections in task order: heading and lines.
    pub sections: Vec<(String, Vec<String>)>,
    /// Body of `assumptions.txt`, when that task ran.
    pub assumptions: Option<String>,
    /// Violations of the solvability assumptions found by the run.
    pub findings: Vec<String>,
}

impl RunResults {
    pub fn exit_code(&self) -> i32 {
        if self.findings.is_empty() {
            0
        } else {
            2
        }
    }

    fn section(&mut self, task: Task, lines: Vec<String>) {
        self.sections.push((task.name().to_string(), lines));
    }
}

pub enum Problem {
    Linear {
        fam: LinearFamily,
        rhs: RhsFamily,
        /// `g` for the remark12 counterexample.
        g: Option<Vector>,
        /// Known singular parameter, for the blowup probe.
        pole: Option<C64>,
    },
    Nonlinear {
        nf: NonlinearFamily,
        rhs: RhsFamily,
    },
    Fredholm {
        kf: KernelFamily,
        src: SourceFamily,
        q: Quadrature,
        fam: LinearFamily,
        rhs: RhsFamily,
    },
    Semilinear {
        g: NonlinearityG,
        op: RadialOperator,
        f1: RhsFamily,
    },
}

impl Problem {
    pub fn label(&self) -> String {
        match self {
            Problem::Linear { fam, .. } => fam.label.clone(),
            Problem::Nonlinear { nf, .. } => nf.label.clone(),
            Problem::Fredholm { fam, .. } => fam.label.clone(),
            Problem::Semilinear { g, op, .. } => format!(
                "semilinear(g={}, kappa={}, a={}, nodes={})",
                g.label,
                op.kappa,
                op.a,
                op.dim()
            ),
        }
    }
}

fn split(params: &Params, keys: &[&str]) -> (Params, Params) {
    let (a, b) = params.0.clone().into_iter().partition(|(k, _)| keys.contains(&k.as_str()));
    (Params(a), Params(b))
}

fn registry_rhs(params: &Params, dim: usize, default: &[f64]) -> Result<RhsFamily, Error> {
    let f = params.list_or("f", default)?;
    if f.len() != dim {
        return Err(Error::InvalidInput(format!("rhs 'f' has length {}, family dimension is {dim}", f.len())));
    }
    match params.get("f_slope") {
        None => Ok(RhsFamily::constant(Vector::from_real(&f))),
        Some(_) => {
            let slope = params.list_or("f_slope", &[])?;
            if slope.len() != dim {
                return Err(Error::InvalidInput(format!("'f_slope' has length {}, expected {dim}", slope.len())));
            }
            Ok(RhsFamily::affine(Vector::from_real(&f), Vector::from_real(&slope), c(1.0)))
        }
    }
}

/// Assemble the configured problem. The config seed feeds any seeded constructor
/// whose own `seed` parameter is absent.
pub fn build_problem(cfg: &RunConfig) -> Result<Problem, Error> {
    let params = cfg.problem.params();
    match cfg.problem.name.as_str() {
        "fredholm" => {
            let (kparams, rest) = split(&params, &["lambda", "lo", "hi"]);
            let kf = kernel_build(&rest.text_or("kernel", "separable-xy")?, &kparams)?;
            let src = match rest.text_or("source", "linear")?.as_str() {
                "linear" => SourceFamily::linear(),
                "one" => SourceFamily::new("1", |_, _| c(1.0)).with_deriv_k(|_, _| c(0.0)),
                other => return Err(Error::InvalidInput(format!("unknown source '{other}'"))),
            };
            let q = gauss_legendre(rest.count_or("nodes", 8)?, kf.lo, kf.hi)?;
            let fam = as_linear_family(&kf, &q)?;
            let rhs = src.on_nodes(&q);
            Ok(Problem::Fredholm { kf, src, q, fam, rhs })
        }
        "semilinear" => {
            let g = g_build(&params.text_or("g", "cubic")?)?;
            let op = yukawa_radial_operator(
                params.number_or("kappa", 1.0)?,
                params.number_or("a", 1.0)?,
                params.count_or("nodes", 16)?,
            )?;
            let n = op.dim();
            let f0 = Vector::from_real(&vec![params.number_or("f1", 1.0)?; n]);
            let f1 = match params.get("f1_slope") {
                None => RhsFamily::constant(f0),
                Some(_) => {
                    let s = Vector::from_real(&vec![params.number_or("f1_slope", 0.0)?; n]);
                    RhsFamily::affine(f0, s, c(1.0))
                }
            };
            Ok(Problem::Semilinear { g, op, f1 })
        }
        name => {
            let (rhs_params, mut fam_params) = split(&params, crate::config::RHS_KEYS);
            let seeded = name == "affine-matrix"
                || (name == "linear-wrapped" && fam_params.text_or("inner", "diag-shift")? == "affine-matrix");
            if seeded && fam_params.get("seed").is_none() {
                fam_params = fam_params.num("seed", cfg.seed as f64);
            }
            match registry_build(name, &fam_params)? {
                Family::Linear(fam) => {
                    let (g, default_f) = if name == "remark12" {
                        let g = fam_params.list_or("g", &[1.0, 0.0])?;
                        (Some(Vector::from_real(&g)), g)
                    } else {
                        (None, vec![1.0; fam.dim])
                    };
                    let rhs = registry_rhs(&rhs_params, fam.dim, &default_f)?;
                    let pole = match name {
                        "diag-near-singular" => Some(fam_params.complex_or("k_star", c(0.0))?),
                        _ => None,
                    };
                    Ok(Problem::Linear { fam, rhs, g, pole })
                }
                Family::Nonlinear(nf) => {
                    let rhs = registry_rhs(&rhs_params, nf.dim, &vec![1.0; nf.dim])?;
                    Ok(Problem::Nonlinear { nf, rhs })
                }
            }
        }
    }
}

pub fn build_disc(cfg: &RunConfig) -> Result<ParameterDisc, Error> {
    let d = &cfg.disc;
    let center = C64::new(d.center[0], d.center[1]);
    let disc = match d.polar {
        Some(p) => make_polar_disc(center, d.radius, p.rings, p.spokes)?,
        None => make_disc(center, d.radius, d.samples)?,
    };
    disc.with_h_sequence(d.h_sequence.clone())
}

struct Ctx<'a> {
    cfg: &'a RunConfig,
    disc: ParameterDisc,
    verdict: VerdictOptions,
    newton: NewtonOptions,
    sens: SensitivityOptions,
}

/// `Ok(Some)` on success, `Ok(None)` after recording a violation, `Err` on operational failure.
fn classify<T>(r: Result<T, Error>, what: &str, k: C64, findings: &mut Vec<String>) -> Result<Option<T>, RunError> {
    match r {
        Ok(v) => Ok(Some(v)),
        Err(e) if e.is_violation() => {
            findings.push(format!("{what} at k = {}: {e}", fmt_c(k)));
            Ok(None)
        }
        Err(e) => Err(e.into()),
    }
}

fn solution_rows(k: C64, u: &Vector, udot: Option<&Vector>) -> Vec<SolutionRow> {
    (0..u.len())
        .map(|i| SolutionRow {
            k,
            node: i,
            u: u[i],
            udot: udot.map(|d| d[i]),
        })
        .collect()
}

fn sweep_lines(sweep: &ContinuitySweep, out: &mut Vec<String>, findings: &mut Vec<String>, what: &str) {
    out.push(format!(
        "k = {}: {} slope = {}",
        fmt_c(sweep.k),
        verdict_token(sweep.converged()),
        fmt_opt(sweep.verdict.slope)
    ));
    for (h, reason) in &sweep.failures {
        out.push(format!("  failed at h = {}: {reason}", fmt_num(*h)));
    }
    if !sweep.converged() {
        findings.push(format!("{what} at k = {}: modulus does not tend to zero", fmt_c(sweep.k)));
    }
}

fn continuity_rows(sweep: &ContinuitySweep) -> Vec<ContinuityRow> {
    sweep
        .records
        .iter()
        .map(|r| ContinuityRow {
            k: r.k,
            h: r.h,
            omega: r.omega,
            proxy: r.proxy,
        })
        .collect()
}

fn modulus_table(out: &mut String, samples: &[ModulusSample], verdict: &Verdict) {
    out.push_str("modulus_c:\n  h sup_norm\n");
    for s in samples {
        out.push_str(&format!("  {} {}\n", fmt_num(s.h), fmt_num(s.sup_norm)));
    }
    out.push_str(&format!(
        "modulus_c verdict: {} slope = {}\n",
        verdict_token(verdict.converged),
        fmt_opt(verdict.slope)
    ));
}

fn failure_lines(out: &mut String, failures: &[(C64, String)]) {
    for (k, reason) in failures {
        out.push_str(&format!("  unsolvable at k = {}: {reason}\n", fmt_c(*k)));
    }
}

fn yes_no(b: bool) -> &'static str {
    if b {
        "yes"
    } else {
        "no"
    }
}

/// Execute all configured tasks. Violations are collected as findings; only operational
/// failures return an error.
pub fn run_sweep(cfg: &RunConfig) -> Result<RunResults, RunError> {
    let problem = build_problem(cfg)?;
    let t = &cfg.tolerances;
    let verdict = VerdictOptions {
        slope_threshold: t.slope_threshold,
        tail: t.verdict_tail,
        zero_tol: t.zero_tol,
    };
    let newton = NewtonOptions {
        tol: t.newton_tol,
        max_iter: t.newton_max_iter,
        max_halvings: t.newton_max_halvings,
    };
    let ctx = Ctx {
        cfg,
        disc: build_disc(cfg)?,
        verdict,
        newton,
        sens: SensitivityOptions {
            newton,
            verdict,
            fd_step: t.fd_step,
        },
    };
    let mut tasks = cfg.tasks.clone();
    tasks.sort();
    tasks.dedup();
    let mut res = RunResults {
        problem: cfg.problem.name.clone(),
        family: problem.label(),
        grid: ctx.disc.grid.clone(),
        tasks: tasks.clone(),
        ..Default::default()
    };
    match &problem {
        Problem::Linear { fam, rhs, g, pole } => run_linear(&ctx, &mut res, fam, rhs, g.as_ref(), *pole)?,
        Problem::Nonlinear { nf, rhs } => run_nonlinear(&ctx, &mut res, nf, rhs, None)?,
        Problem::Fredholm { kf, src, q, fam, rhs } => run_fredholm(&ctx, &mut res, kf, src, q, fam, rhs)?,
        Problem::Semilinear { g, op, f1 } => run_semilinear(&ctx, &mut res, g, op, f1)?,
    }
    Ok(res)
}

fn assumptions_header(res: &RunResults) -> String {
    format!("problem: {}\nfamily: {}\n", res.problem, res.family)
}

fn run_linear(
    ctx: &Ctx,
    res: &mut RunResults,
    fam: &LinearFamily,
    rhs: &RhsFamily,
    g: Option<&Vector>,
    pole: Option<C64>,
) -> Result<(), RunError> {
    let hs = &ctx.disc.h_sequence;
    for task in res.tasks.clone() {
        let mut lines = Vec::new();
        match task {
            Task::Solve | Task::Sensitivity => {
                if task == Task::Solve && ctx.cfg.uses_sensitivity() {
                    continue;
                }
                for &k in &ctx.disc.grid {
                    let Some(u) = classify(solve_at(fam, rhs, k), "solve", k, &mut res.findings)? else {
                        lines.push(format!("k = {}: SINGULAR", fmt_c(k)));
                        continue;
                    };
                    let udot = if task == Task::Sensitivity {
                        Some(linear_sensitivity(fam, rhs, k)?)
                    } else {
                        None
                    };
                    lines.push(format!("k = {}: |u| = {}", fmt_c(k), fmt_num(u.norm())));
                    if let Some(d) = &udot {
                        lines.push(format!("  |udot| = {}", fmt_num(d.norm())));
                    }
                    res.solutions.extend(solution_rows(k, &u, udot.as_ref()));
                }
            }
            Task::Continuity => {
                for &k in &ctx.disc.grid {
                    let r = continuity_modulus(fam, rhs, k, hs, &ctx.verdict);
                    if let Some(sweep) = classify(r, "continuity", k, &mut res.findings)? {
                        sweep_lines(&sweep, &mut lines, &mut res.findings, "continuity");
                        res.continuity.extend(continuity_rows(&sweep));
                    } else {
                        lines.push(format!("k = {}: NOT_CONVERGING (unsolvable at k)", fmt_c(k)));
                    }
                }
            }
            Task::Assumptions => {
                let rep = check_assumptions_a1(fam, rhs, &ctx.disc, ctx.cfg.tolerances.ball_radius, &ctx.verdict)?;
                let mut text = assumptions_header(res);
                text.push_str(&format!(
                    "c0: {}\nc1: {}\nc2: {}\nc3: n/a\n",
                    fmt_num(rep.c0),
                    fmt_num(rep.c1),
                    fmt_num(rep.c2)
                ));
                modulus_table(&mut text, &rep.modulus_c, &rep.modulus_verdict);
                text.push_str(&format!("solvable everywhere: {}\n", yes_no(rep.solvable_everywhere)));
                failure_lines(&mut text, &rep.failures);
                text.push_str(&format!("verdict: {}\n", if rep.passes() { "PASS" } else { "FAIL" }));
                if !rep.passes() {
                    res.findings.push("assumptions: linear solvability assumptions fail on the disc".into());
                }
                lines.push(format!("verdict: {}", if rep.passes() { "PASS" } else { "FAIL" }));
                res.assumptions = Some(text);
            }
            Task::Blowup => {
                let ks: Vec<C64> = match pole {
                    Some(p) => (1..=8).map(|j| p + ctx.disc.radius / j as f64).collect(),
                    None => ctx.disc.grid.clone(),
                };
                let rep = blowup_probe(fam, &ks, pole);
                for e in &rep.entries {
                    lines.push(format!("k = {}: growth = {}", fmt_c(e.k), fmt_num(e.growth)));
                }
                lines.push(format!("exponent: {}", fmt_opt(rep.exponent)));
                if let (Some(p), Some(x)) = (pole, rep.exponent) {
                    if x > 0.5 {
                        res.findings.push(format!(
                            "blowup: |A^-1(k)| grows like |k - {}|^-{} near the pole",
                            fmt_c(p),
                            fmt_num(x)
                        ));
                    }
                }
            }
            Task::Counterexample => {
                let g = g.expect("counterexample validated for remark12");
                let k0 = fam_k0(ctx)?;
                let sweep = continuity_modulus(fam, &RhsFamily::constant(g.clone()), k0, hs, &ctx.verdict)?;
                let half = g.norm() / 2.0;
                lines.push(format!("jump ‖g‖/2 = {}", fmt_num(half)));
                for r in &sweep.records {
                    lines.push(format!("  h = {}: jump = {}", fmt_num(r.h), fmt_num(r.omega)));
                }
                lines.push(format!("continuity at k0: {}", verdict_token(sweep.converged())));
                res.continuity.extend(continuity_rows(&sweep));
                res.findings.push(format!(
                    "counterexample: |u(k0 + h) - u(k0)| = ‖g‖/2 = {} for every h",
                    fmt_num(half)
                ));
            }
        }
        res.section(task, lines);
    }
    Ok(())
}

fn fam_k0(ctx: &Ctx) -> Result<C64, Error> {
    ctx.cfg.problem.params().complex_or("k0", c(0.0))
}

/// Appends problem-specific lines to the assumption report and findings.
type ExtraAssumptions<'a> = dyn FnMut(&mut String, &mut Vec<String>) -> Result<(), RunError> + 'a;

/// Shared by registry nonlinear families and the assembled semilinear family.
fn run_nonlinear(
    ctx: &Ctx,
    res: &mut RunResults,
    nf: &NonlinearFamily,
    rhs: &RhsFamily,
    mut extra_assumptions: Option<&mut ExtraAssumptions>,
) -> Result<(), RunError> {
    let hs = &ctx.disc.h_sequence;
    for task in res.tasks.clone() {
        let mut lines = Vec::new();
        match task {
            Task::Solve => {
                if ctx.cfg.uses_sensitivity() {
                    continue;
                }
                let mut warm = Vector::zeros(nf.dim);
                for &k in &ctx.disc.grid {
                    let r = solve_with_fallback(nf, rhs, k, &warm, &ctx.newton);
                    let Some((out, start)) = classify(r, "solve", k, &mut res.findings)? else {
                        lines.push(format!("k = {}: FAILED", fmt_c(k)));
                        continue;
                    };
                    lines.push(format!(
                        "k = {}: |u| = {} iterations = {} start = {}",
                        fmt_c(k),
                        fmt_num(out.u.norm()),
                        out.iterations,
                        start_name(start)
                    ));
                    res.solutions.extend(solution_rows(k, &out.u, None));
                    warm = out.u;
                }
            }
            Task::Sensitivity => {
                let r = sensitivity_continuity(nf, rhs, &ctx.disc, &ctx.sens);
                if let Some(sweep) = classify(r, "sensitivity", ctx.disc.center, &mut res.findings)? {
                    for (rec, m) in sweep.records.iter().zip(&sweep.moduli) {
                        lines.push(format!(
                            "k = {}: rel_gap = {} linearization_residual = {} udot modulus {} slope = {}",
                            fmt_c(rec.k),
                            fmt_num(rec.rel_gap),
                            fmt_num(rec.linearization_residual),
                            verdict_token(m.verdict.converged),
                            fmt_opt(m.verdict.slope)
                        ));
                        res.solutions.extend(solution_rows(rec.k, &rec.u, Some(&rec.udot)));
                        if rec.linearization_residual > 1e-9 {
                            res.findings.push(format!(
                                "sensitivity at k = {}: linearization residual {}",
                                fmt_c(rec.k),
                                fmt_num(rec.linearization_residual)
                            ));
                        }
                        if !m.verdict.converged {
                            res.findings
                                .push(format!("sensitivity at k = {}: udot is not continuous", fmt_c(rec.k)));
                        }
                    }
                }
            }
            Task::Continuity => {
                for &k in &ctx.disc.grid {
                    let r = nonlinear_continuity(nf, rhs, k, hs, &ctx.newton, &ctx.verdict);
                    if let Some(s) = classify(r, "continuity", k, &mut res.findings)? {
                        sweep_lines(&s.sweep, &mut lines, &mut res.findings, "continuity");
                        let cold = s.starts.iter().filter(|&&st| st == StartKind::Cold).count();
                        lines.push(format!("  warm starts = {} cold starts = {}", s.starts.len() - cold, cold));
                        res.continuity.extend(continuity_rows(&s.sweep));
                    } else {
                        lines.push(format!("k = {}: NOT_CONVERGING (unsolvable at k)", fmt_c(k)));
                    }
                }
            }
            Task::Assumptions => {
                let rep = check_assumptions_nonlinear(
                    nf,
                    rhs,
                    &ctx.disc,
                    ctx.cfg.tolerances.ball_radius,
                    &ctx.newton,
                    &ctx.verdict,
                )?;
                let mut text = assumptions_header(res);
                text.push_str(&format!(
                    "c0: {}\nc1: n/a\nc2: {}\nc3: {}\n",
                    fmt_num(rep.c0),
                    fmt_num(rep.c2),
                    fmt_opt(rep.c3())
                ));
                modulus_table(&mut text, &rep.modulus_c, &rep.modulus_verdict);
                text.push_str(&format!(
                    "solvable everywhere (homeomorphism proxy: Newton converges, A' nonsingular): {}\n",
                    yes_no(rep.solvable_everywhere)
                ));
                failure_lines(&mut text, &rep.failures);
                if !rep.jacobian.flagged.is_empty() {
                    text.push_str(&format!(
                        "jacobian probes flagged (singular or |A'^-1| > 1e12): {}\n",
                        rep.jacobian.flagged.len()
                    ));
                }
                let mut passes = rep.passes();
                if let Some(extra) = extra_assumptions.as_mut() {
                    let before = res.findings.len();
                    extra(&mut text, &mut res.findings)?;
                    passes &= res.findings.len() == before;
                }
                text.push_str(&format!("verdict: {}\n", if passes { "PASS" } else { "FAIL" }));
                if !rep.passes() {
                    res.findings.push("assumptions: nonlinear solvability assumptions fail on the disc".into());
                }
                lines.push(format!("verdict: {}", if passes { "PASS" } else { "FAIL" }));
                res.assumptions = Some(text);
            }
            Task::Blowup | Task::Counterexample => unreachable!("rejected by config validation"),
        }
        res.section(task, lines);
    }
    Ok(())
}

fn start_name(s: StartKind) -> &'static str {
    match s {
        StartKind::Warm => "warm",
        StartKind::Cold => "cold",
    }
}

fn run_fredholm(
    ctx: &Ctx,
    res: &mut RunResults,
    kf: &KernelFamily,
    src: &SourceFamily,
    q: &Quadrature,
    fam: &LinearFamily,
    rhs: &RhsFamily,
) -> Result<(), RunError> {
    let hs = &ctx.disc.h_sequence;
    for task in res.tasks.clone() {
        let mut lines = Vec::new();
        match task {
            Task::Solve | Task::Sensitivity => {
                if task == Task::Solve && ctx.cfg.uses_sensitivity() {
                    continue;
                }
                for &k in &ctx.disc.grid {
                    let Some(u) = classify(fredholm_solve(kf, src, q, k), "solve", k, &mut res.findings)? else {
                        lines.push(format!("k = {}: CHARACTERISTIC VALUE", fmt_c(k)));
                        continue;
                    };
                    let udot = if task == Task::Sensitivity {
                        let d = fredholm_sensitivity(kf, src, q, k)?;
                        let sr = resolve_sign(kf, src, q, k, ctx.cfg.tolerances.fd_step)?;
                        lines.push(format!(
                            "k = {}: |u| = {} |udot| = {} fd gap (+) = {} fd gap (-) = {}",
                            fmt_c(k),
                            fmt_num(u.norm()),
                            fmt_num(d.norm()),
                            fmt_num(sr.plus_gap),
                            fmt_num(sr.minus_gap)
                        ));
                        Some(d)
                    } else {
                        lines.push(format!("k = {}: |u| = {}", fmt_c(k), fmt_num(u.norm())));
                        None
                    };
                    res.solutions.extend(solution_rows(k, &u, udot.as_ref()));
                }
            }
            Task::Continuity => {
                for &k in &ctx.disc.grid {
                    let r = continuity_modulus(fam, rhs, k, hs, &ctx.verdict);
                    match classify(r, "continuity", k, &mut res.findings)? {
                        Some(sweep) => {
                            sweep_lines(&sweep, &mut lines, &mut res.findings, "continuity");
                            res.continuity.extend(continuity_rows(&sweep));
                        }
                        None => lines.push(format!("k = {}: NOT_CONVERGING (characteristic value)", fmt_c(k))),
                    }
                }
            }
            Task::Assumptions => {
                let rep = check_assumptions_a1(fam, rhs, &ctx.disc, ctx.cfg.tolerances.ball_radius, &ctx.verdict)?;
                let mut text = assumptions_header(res);
                text.push_str(&format!(
                    "c0: {}\nc1: {}\nc2: {}\nc3: n/a\n",
                    fmt_num(rep.c0),
                    fmt_num(rep.c1),
                    fmt_num(rep.c2)
                ));
                modulus_table(&mut text, &rep.modulus_c, &rep.modulus_verdict);
                text.push_str(&format!("solvable everywhere: {}\n", yes_no(rep.solvable_everywhere)));
                failure_lines(&mut text, &rep.failures);
                let hsr = hs_continuity(kf, q, ctx.disc.center, hs, &ctx.verdict)?;
                text.push_str(&format!("hilbert-schmidt kernel modulus at k = {}:\n  h hs_norm\n", fmt_c(ctx.disc.center)));
                for (h, v) in &hsr.samples {
                    text.push_str(&format!("  {} {}\n", fmt_num(*h), fmt_num(*v)));
                }
                text.push_str(&format!(
                    "hilbert-schmidt verdict: {} slope = {}\n",
                    verdict_token(hsr.verdict.converged),
                    fmt_opt(hsr.verdict.slope)
                ));
                text.push_str(&format!("sign resolution: {SIGN_RESOLUTION_NOTE}\n"));
                match resolve_sign(kf, src, q, ctx.disc.center, ctx.cfg.tolerances.fd_step) {
                    Ok(sr) => text.push_str(&format!(
                        "sign check at k = {}: fd gap (+) = {} fd gap (-) = {} chosen = {:?}\n",
                        fmt_c(sr.k),
                        fmt_num(sr.plus_gap),
                        fmt_num(sr.minus_gap),
                        sr.chosen
                    )),
                    Err(e) if e.is_violation() => text.push_str(&format!("sign check skipped: {e}\n")),
                    Err(e) => return Err(e.into()),
                }
                let passes = rep.passes() && hsr.verdict.converged;
                text.push_str(&format!("verdict: {}\n", if passes { "PASS" } else { "FAIL" }));
                if !passes {
                    res.findings.push("assumptions: fredholm solvability assumptions fail on the disc".into());
                }
                lines.push(format!("verdict: {}", if passes { "PASS" } else { "FAIL" }));
                res.assumptions = Some(text);
            }
            Task::Blowup => {
                let rep = blowup_probe(fam, &ctx.disc.grid, None);
                for e in &rep.entries {
                    lines.push(format!("k = {}: growth = {}", fmt_c(e.k), fmt_num(e.growth)));
                }
            }
            Task::Counterexample => unreachable!("rejected by config validation"),
        }
        res.section(task, lines);
    }
    Ok(())
}

fn run_semilinear(
    ctx: &Ctx,
    res: &mut RunResults,
    g: &NonlinearityG,
    op: &RadialOperator,
    f1: &RhsFamily,
) -> Result<(), RunError> {
    let nf = assemble(g, &op.matrix);
    let rhs = transformed_rhs(&op.matrix, f1);
    if res.tasks.contains(&Task::Solve) && !ctx.cfg.uses_sensitivity() {
        let mut lines = Vec::new();
        for &k in &ctx.disc.grid {
            let r = semilinear_solve(g, &op.matrix, &f1.at(k), k, &ctx.newton);
            let Some(sol) = classify(r, "solve", k, &mut res.findings)? else {
                lines.push(format!("k = {}: FAILED", fmt_c(k)));
                continue;
            };
            lines.push(format!(
                "k = {}: |u| = {} method = {} iterations = {} contraction = {}",
                fmt_c(k),
                fmt_num(sol.u.norm_inf()),
                match sol.method {
                    SemilinearMethod::Newton => "newton",
                    SemilinearMethod::Picard => "picard",
                },
                sol.iterations,
                fmt_num(sol.contraction)
            ));
            res.solutions.extend(solution_rows(k, &sol.u, None));
        }
        res.section(Task::Solve, lines);
    }
    let rest: Vec<Task> = res.tasks.iter().copied().filter(|&t| t != Task::Solve).collect();
    let saved = std::mem::replace(&mut res.tasks, rest);

    let grid = ctx.disc.grid.clone();
    let newton = ctx.newton;
    let mut extra = |text: &mut String, findings: &mut Vec<String>| -> Result<(), RunError> {
        let m = m_bound(op.kappa, op.a)?;
        text.push_str(&format!("m_bound: {}\n", fmt_num(m)));
        text.push_str(&format!(
            "operator norms: l2 = {} raw = {} sup = {}\n",
            fmt_num(op.operator_norm()),
            fmt_num(op.raw_spectral_norm()),
            fmt_num(op.sup_norm())
        ));
        let f_inf = grid
            .iter()
            .map(|&k| op.matrix.mul_vec(&f1.at(k)).norm_inf())
            .fold(0.0, f64::max);
        let r_grid: Vec<f64> = (0..=60).map(|i| 10f64.powf(-3.0 + 0.1 * i as f64)).collect();
        let sm = selfmap_check(g, m, &r_grid, &grid, f_inf)?;
        text.push_str(&format!(
            "self-map: min g(R)/R = {} 1/m = {} literal condition = {}\n",
            fmt_num(sm.min_ratio),
            fmt_num(sm.inverse_m),
            yes_no(sm.literal_condition)
        ));
        text.push_str(&format!(
            "invariant ball (m g(R) + |f|_inf <= R): {}\n",
            sm.invariant_ball.map(fmt_num).unwrap_or_else(|| "none on grid".into())
        ));
        text.push_str(&format!("g' > 0 on grid: {}\n", yes_no(sm.uniqueness)));
        let mut worst: f64 = 0.0;
        for &k in &grid {
            let f = RhsFamily::constant(op.matrix.mul_vec(&f1.at(k)));
            let a = newton_solve(&nf, &f, k, &Vector::zeros(nf.dim), &newton);
            let b = newton_solve(&nf, &f, k, &f.at(k), &newton);
            match (a, b) {
                (Ok(a), Ok(b)) => worst = worst.max((&a.u - &b.u).norm()),
                (Err(e), _) | (_, Err(e)) if e.is_violation() => {
                    findings.push(format!("uniqueness shadow at k = {}: {e}", fmt_c(k)))
                }
                (Err(e), _) | (_, Err(e)) => return Err(e.into()),
            }
        }
        text.push_str(&format!("uniqueness shadow (starts 0 and Linv f1): max gap = {}\n", fmt_num(worst)));
        if sm.uniqueness && worst > 1e-9 {
            findings.push(format!("uniqueness shadow: two starts differ by {}", fmt_num(worst)));
        }
        Ok(())
    };
    let r = run_nonlinear(ctx, res, &nf, &rhs, Some(&mut extra));
    res.tasks = saved;
    r
}
