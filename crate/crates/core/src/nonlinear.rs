//! Nonlinear families `A(u, k) = f(k)`: damped Newton solves, implicit sensitivities,
//! bounds on the inverse Fréchet derivative and continuity sweeps along the parameter.

use crate::error::{Error, Result};
use crate::families::{NonlinearFamily, ParameterDisc, RhsFamily};
use crate::linalg::{c, operator_norm, Lu, Matrix, Vector, C64};
use crate::linear::{ContinuityRecord, ContinuitySweep};
use crate::verdict::{tends_to_zero, Verdict, VerdictOptions};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NewtonOptions {
    /// Absolute tolerance on `|A(u, k) - f(k)|`.
    pub tol: f64,
    pub max_iter: usize,
    /// Step halvings allowed per iteration in the residual line search.
    pub max_halvings: usize,
}

impl Default for NewtonOptions {
    fn default() -> Self {
        NewtonOptions {
            tol: 1e-12,
            max_iter: 50,
            max_halvings: 30,
        }
    }
}

impl NewtonOptions {
    pub fn validate(&self) -> Result<()> {
        if !(self.tol > 0.0) {
            return Err(Error::invalid("newton tol must be positive"));
        }
        if self.max_iter == 0 {
            return Err(Error::invalid("newton max_iter must be at least 1"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NewtonOutcome {
    pub u: Vector,
    pub iterations: usize,
    /// Residual norm before each iteration and after the last one.
    pub residual_history: Vec<f64>,
    /// Set when the Jacobian came from finite differences.
    pub fd_jacobian: bool,
}

/// Column-wise central-difference Jacobian with step `1e-6 (1 + |u|)`.
pub fn fd_jacobian(nf: &NonlinearFamily, u: &Vector, k: C64) -> Matrix {
    let n = u.len();
    let h = 1e-6 * (1.0 + u.norm());
    let cols: Vec<Vector> = (0..n)
        .map(|j| {
            let e = Vector::basis(n, j);
            let plus = nf.apply(&u.axpy(c(h), &e), k);
            let minus = nf.apply(&u.axpy(c(-h), &e), k);
            (&plus - &minus).scale(c(0.5 / h))
        })
        .collect();
    Matrix::from_columns(&cols)
}

fn jacobian(nf: &NonlinearFamily, u: &Vector, k: C64) -> (Matrix, bool) {
    match nf.frechet(u, k) {
        Ok(j) => (j, false),
        Err(_) => (fd_jacobian(nf, u, k), true),
    }
}

fn factor_jacobian(j: &Matrix, u: &Vector, k: C64) -> Result<Lu> {
    Lu::factor(j).map_err(|e| match e {
        Error::Singular { .. } => Error::SingularJacobian { k, iterate: u.clone() },
        other => other,
    })
}

/// Solve `A(u, k) = f(k)` by Newton's method with step halving on the residual norm.
pub fn newton_solve(
    nf: &NonlinearFamily,
    rhs: &RhsFamily,
    k: C64,
    u0: &Vector,
    opts: &NewtonOptions,
) -> Result<NewtonOutcome> {
    opts.validate()?;
    if u0.len() != nf.dim || rhs.dim != nf.dim {
        return Err(Error::invalid("initial guess and right-hand side must match the family dimension"));
    }
    let f = rhs.at(k);
    let residual = |u: &Vector| &nf.apply(u, k) - &f;

    let mut u = u0.clone();
    let mut r = residual(&u);
    let mut res = r.norm();
    let mut history = vec![res];
    let mut used_fd = false;

    for it in 0..opts.max_iter {
        if res <= opts.tol {
            return Ok(NewtonOutcome {
                u,
                iterations: it,
                residual_history: history,
                fd_jacobian: used_fd,
            });
        }
        let (jac, fd) = jacobian(nf, &u, k);
        used_fd |= fd;
        let delta = factor_jacobian(&jac, &u, k)?.solve(&r).scale(c(-1.0));

        let mut t = 1.0;
        let mut accepted = None;
        for _ in 0..=opts.max_halvings {
            let trial = u.axpy(c(t), &delta);
            let r_trial = residual(&trial);
            let res_trial = r_trial.norm();
            if res_trial.is_finite() && res_trial < res {
                accepted = Some((trial, r_trial, res_trial));
                break;
            }
            t *= 0.5;
        }
        match accepted {
            Some((nu, nr, nres)) => {
                u = nu;
                r = nr;
                res = nres;
                history.push(res);
            }
            None => {
                return Err(Error::NonConvergence {
                    iterations: it + 1,
                    best_residual: res,
                    history,
                })
            }
        }
    }
    if res <= opts.tol {
        return Ok(NewtonOutcome {
            u,
            iterations: opts.max_iter,
            residual_history: history,
            fd_jacobian: used_fd,
        });
    }
    Err(Error::NonConvergence {
        iterations: opts.max_iter,
        best_residual: history.iter().copied().fold(f64::INFINITY, f64::min),
        history,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct SensitivityOutcome {
    pub udot: Vector,
    /// `|Adot(u, k) + A'(u, k) udot - fdot|` after the solve.
    pub linearization_residual: f64,
}

/// `udot = [A'(u, k)]^-1 (fdot - Adot(u, k))`, computed with a single linear solve.
pub fn nonlinear_sensitivity(nf: &NonlinearFamily, rhs: &RhsFamily, k: C64, u: &Vector) -> Result<SensitivityOutcome> {
    let jac = nf.frechet(u, k)?;
    let adot = nf.partial_k(u, k)?;
    let fdot = rhs.derivative(k)?;
    let combined = &fdot - &adot;
    let udot = factor_jacobian(&jac, u, k)?.solve(&combined);
    let residual = (&(&adot + &jac.mul_vec(&udot)) - &fdot).norm();
    Ok(SensitivityOutcome {
        udot,
        linearization_residual: residual,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct JacobianProbe {
    pub k: C64,
    pub u_norm: f64,
    /// `|[A'(u, k)]^-1|`, `None` when singular.
    pub inverse_norm: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct JacobianReport {
    /// Estimate of `sup |[A'(u, k)]^-1|`; `None` when any probe is singular or exceeds the growth limit.
    pub c3: Option<f64>,
    pub probes: Vec<JacobianProbe>,
    pub flagged: Vec<usize>,
}

/// Probes whose inverse norm exceeds this are treated as a blow-up.
pub const JACOBIAN_GROWTH_LIMIT: f64 = 1e12;

pub fn check_assumption_j(nf: &NonlinearFamily, probes: &[(Vector, C64)]) -> Result<JacobianReport> {
    let mut out = Vec::with_capacity(probes.len());
    let mut flagged = Vec::new();
    let mut c3: f64 = 0.0;
    for (i, (u, k)) in probes.iter().enumerate() {
        let jac = nf.frechet(u, *k)?;
        let inverse_norm = match jac.inverse() {
            Ok(inv) => Some(operator_norm(&inv)?),
            Err(_) => None,
        };
        match inverse_norm {
            Some(n) if n <= JACOBIAN_GROWTH_LIMIT => c3 = c3.max(n),
            _ => flagged.push(i),
        }
        out.push(JacobianProbe {
            k: *k,
            u_norm: u.norm(),
            inverse_norm,
        });
    }
    Ok(JacobianReport {
        c3: flagged.is_empty().then_some(c3),
        probes: out,
        flagged,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StartKind {
    Warm,
    Cold,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NonlinearSweep {
    pub sweep: ContinuitySweep,
    /// How each step's solve was started, aligned with `sweep.records`.
    pub starts: Vec<StartKind>,
}

/// Solve from `warm`, falling back to the zero vector.
pub fn solve_with_fallback(
    nf: &NonlinearFamily,
    rhs: &RhsFamily,
    k: C64,
    warm: &Vector,
    opts: &NewtonOptions,
) -> Result<(NewtonOutcome, StartKind)> {
    match newton_solve(nf, rhs, k, warm, opts) {
        Ok(out) => Ok((out, StartKind::Warm)),
        Err(warm_err) => match newton_solve(nf, rhs, k, &Vector::zeros(nf.dim), opts) {
            Ok(out) => Ok((out, StartKind::Cold)),
            Err(_) => Err(warm_err),
        },
    }
}

/// `omega(h) = |u(k + h e) - u(k)|`, each shifted solve warm-started from `u(k)`, together
/// with the proxy `|A(u(k+h), k) - A(u(k), k)|`.
pub fn nonlinear_continuity(
    nf: &NonlinearFamily,
    rhs: &RhsFamily,
    k: C64,
    h_seq: &[f64],
    opts: &NewtonOptions,
    verdict_opts: &VerdictOptions,
) -> Result<NonlinearSweep> {
    let (base, _) = solve_with_fallback(nf, rhs, k, &Vector::zeros(nf.dim), opts)?;
    let u = base.u;
    let a_u = nf.apply(&u, k);
    let mut records = Vec::with_capacity(h_seq.len());
    let mut starts = Vec::with_capacity(h_seq.len());
    let mut failures = Vec::new();
    for &h in h_seq {
        match solve_with_fallback(nf, rhs, nf.step(k, h), &u, opts) {
            Ok((out, start)) => {
                let proxy = (&nf.apply(&out.u, k) - &a_u).norm();
                records.push(ContinuityRecord {
                    k,
                    h,
                    omega: (&out.u - &u).norm(),
                    proxy: Some(proxy),
                });
                starts.push(start);
            }
            Err(e) => failures.push((h, e.to_string())),
        }
    }
    Ok(NonlinearSweep {
        sweep: ContinuitySweep::from_records(k, records, failures, verdict_opts),
        starts,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct SensitivityRecord {
    pub k: C64,
    pub u: Vector,
    pub udot: Vector,
    /// Central difference of the solved path.
    pub fd_udot: Vector,
    pub rel_gap: f64,
    pub linearization_residual: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SensitivityModulus {
    pub k: C64,
    /// `(h, |udot(k + h e) - udot(k)|)`
    pub samples: Vec<(f64, f64)>,
    pub verdict: Verdict,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SensitivitySweep {
    pub records: Vec<SensitivityRecord>,
    pub moduli: Vec<SensitivityModulus>,
}

impl SensitivitySweep {
    pub fn max_rel_gap(&self) -> f64 {
        self.records.iter().map(|r| r.rel_gap).fold(0.0, f64::max)
    }

    pub fn max_linearization_residual(&self) -> f64 {
        self.records
            .iter()
            .map(|r| r.linearization_residual)
            .fold(0.0, f64::max)
    }

    pub fn all_converged(&self) -> bool {
        self.moduli.iter().all(|m| m.verdict.converged)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SensitivityOptions {
    pub newton: NewtonOptions,
    pub verdict: VerdictOptions,
    /// Step of the finite-difference oracle for `udot`.
    pub fd_step: f64,
}

impl Default for SensitivityOptions {
    fn default() -> Self {
        SensitivityOptions {
            newton: NewtonOptions::default(),
            verdict: VerdictOptions::default(),
            fd_step: 1e-4,
        }
    }
}

/// Central difference of the solved path `t -> u(k + t e)`, both solves warm-started from `warm`.
pub fn fd_path_derivative(
    nf: &NonlinearFamily,
    rhs: &RhsFamily,
    k: C64,
    warm: &Vector,
    h: f64,
    opts: &NewtonOptions,
) -> Result<Vector> {
    let plus = solve_with_fallback(nf, rhs, nf.step(k, h), warm, opts)?.0.u;
    let minus = solve_with_fallback(nf, rhs, nf.step(k, -h), warm, opts)?.0.u;
    Ok((&plus - &minus).scale(c(0.5 / h)))
}

/// `udot` along the disc grid (warm-started sequentially), each checked against the
/// finite-difference oracle, plus `|udot(k + h e) - udot(k)|` over the disc's steps.
pub fn sensitivity_continuity(
    nf: &NonlinearFamily,
    rhs: &RhsFamily,
    disc: &ParameterDisc,
    opts: &SensitivityOptions,
) -> Result<SensitivitySweep> {
    let mut records = Vec::with_capacity(disc.grid.len());
    let mut moduli = Vec::with_capacity(disc.grid.len());
    let mut warm = Vector::zeros(nf.dim);
    for &k in &disc.grid {
        let (out, _) = solve_with_fallback(nf, rhs, k, &warm, &opts.newton)?;
        let u = out.u;
        let sens = nonlinear_sensitivity(nf, rhs, k, &u)?;
        let fd = fd_path_derivative(nf, rhs, k, &u, opts.fd_step, &opts.newton)?;
        let rel_gap = (&sens.udot - &fd).norm() / (fd.norm() + 1e-14);

        let mut samples = Vec::with_capacity(disc.h_sequence.len());
        for &h in &disc.h_sequence {
            let kh = nf.step(k, h);
            let (shifted, _) = solve_with_fallback(nf, rhs, kh, &u, &opts.newton)?;
            let udot_h = nonlinear_sensitivity(nf, rhs, kh, &shifted.u)?.udot;
            samples.push((h, (&udot_h - &sens.udot).norm()));
        }
        let (hs, diffs): (Vec<f64>, Vec<f64>) = samples.iter().copied().unzip();
        moduli.push(SensitivityModulus {
            k,
            verdict: tends_to_zero(&hs, &diffs, &opts.verdict),
            samples,
        });
        records.push(SensitivityRecord {
            k,
            u: u.clone(),
            udot: sens.udot,
            fd_udot: fd,
            rel_gap,
            linearization_residual: sens.linearization_residual,
        });
        warm = u;
    }
    Ok(SensitivitySweep { records, moduli })
}

/// Grid estimates for the nonlinear solvability assumptions. Bounded sets are realized by
/// probes: the origin, `±R (1, ..., 1) / sqrt(n)`, `R e_i`, and the solutions along the grid.
#[derive(Debug, Clone, PartialEq)]
pub struct NonlinearAssumptionReport {
    /// `max |f(k)|` over the grid.
    pub c0: f64,
    /// `max |A'(u, k)|` over the probes (diagnostic only).
    pub c2: f64,
    pub jacobian: JacobianReport,
    /// Per step: `max |A(u, k + h e) - A(u, k)|` over the grid and probes.
    pub modulus_c: Vec<crate::linear::ModulusSample>,
    pub modulus_verdict: Verdict,
    /// Newton converged at every grid point (the computable homeomorphism proxy).
    pub solvable_everywhere: bool,
    pub failures: Vec<(C64, String)>,
}

impl NonlinearAssumptionReport {
    pub fn c3(&self) -> Option<f64> {
        self.jacobian.c3
    }

    pub fn passes(&self) -> bool {
        self.solvable_everywhere && self.modulus_verdict.converged && self.jacobian.c3.is_some()
    }
}

pub fn check_assumptions_nonlinear(
    nf: &NonlinearFamily,
    rhs: &RhsFamily,
    disc: &ParameterDisc,
    ball_radius: f64,
    newton: &NewtonOptions,
    verdict: &VerdictOptions,
) -> Result<NonlinearAssumptionReport> {
    if disc.grid.is_empty() {
        return Err(Error::invalid("parameter grid is empty"));
    }
    if !(ball_radius > 0.0) {
        return Err(Error::invalid("ball radius must be positive"));
    }
    let n = nf.dim;
    let mut ball = vec![Vector::zeros(n)];
    let diag = Vector::from_real(&vec![ball_radius / (n as f64).sqrt(); n]);
    ball.push(diag.scale(c(-1.0)));
    ball.push(diag);
    ball.extend((0..n).map(|i| Vector::basis(n, i).scale(c(ball_radius))));

    let mut c0: f64 = 0.0;
    let mut failures = Vec::new();
    let mut probes = Vec::new();
    let mut warm = Vector::zeros(n);
    for &k in &disc.grid {
        c0 = c0.max(rhs.at(k).norm());
        match solve_with_fallback(nf, rhs, k, &warm, newton) {
            Ok((out, _)) => {
                probes.push((out.u.clone(), k));
                warm = out.u;
            }
            Err(e) => failures.push((k, e.at_k(k).to_string())),
        }
        probes.extend(ball.iter().map(|u| (u.clone(), k)));
    }

    let mut c2: f64 = 0.0;
    for (u, k) in &probes {
        c2 = c2.max(operator_norm(&nf.frechet(u, *k)?)?);
    }
    let jacobian = check_assumption_j(nf, &probes)?;

    let mut modulus_c = Vec::with_capacity(disc.h_sequence.len());
    for &h in &disc.h_sequence {
        let sup = probes
            .iter()
            .map(|(u, k)| (&nf.apply(u, nf.step(*k, h)) - &nf.apply(u, *k)).norm())
            .fold(0.0, f64::max);
        modulus_c.push(crate::linear::ModulusSample { h, sup_norm: sup });
    }
    let values: Vec<f64> = modulus_c.iter().map(|m| m.sup_norm).collect();
    let modulus_verdict = tends_to_zero(&disc.h_sequence, &values, verdict);

    Ok(NonlinearAssumptionReport {
        c0,
        c2,
        jacobian,
        modulus_c,
        modulus_verdict,
        solvable_everywhere: failures.is_empty(),
        failures,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::families::{cubic_pointwise, diag_shift, make_disc, remark12, LinearFamily, DEFAULT_H_SEQUENCE};
    use crate::linear::solve_at;

    fn two() -> RhsFamily {
        RhsFamily::constant(Vector::from_real(&[2.0]))
    }

    /// Root of `u + k u^3 = f` for real `k >= 0` by bisection.
    fn cubic_root(k: f64, f: f64) -> f64 {
        let (mut lo, mut hi) = (0.0, f.max(1.0));
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid + k * mid.powi(3) < f {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    }

    #[test]
    fn newton_on_identity_slice() {
        let out = newton_solve(&cubic_pointwise(1), &two(), c(0.0), &Vector::zeros(1), &NewtonOptions::default()).unwrap();
        assert!((out.u[0] - 2.0).norm() < 1e-12);
    }

    #[test]
    fn newton_matches_bisection() {
        let out = newton_solve(&cubic_pointwise(1), &two(), c(0.1), &Vector::zeros(1), &NewtonOptions::default()).unwrap();
        let oracle = cubic_root(0.1, 2.0);
        assert!((out.u[0].re - oracle).abs() < 1e-10);
        assert!((oracle - 1.594_562_116_6).abs() < 1e-9);
    }

    #[test]
    fn newton_on_wrapped_linear_matches_direct_solve() {
        let lin = crate::families::affine_matrix(6, 11, 1.0);
        let nf = NonlinearFamily::wrap_linear(&lin);
        let rhs = RhsFamily::constant(Vector::from_fn(6, |i| c(i as f64 - 1.5)));
        let k = C64::new(0.3, 0.1);
        let out = newton_solve(&nf, &rhs, k, &Vector::zeros(6), &NewtonOptions::default()).unwrap();
        let direct = solve_at(&lin, &rhs, k).unwrap();
        assert!(out.iterations <= 2);
        assert!((&out.u - &direct).norm() <= 1e-10);
    }

    #[test]
    fn newton_converges_quadratically() {
        let nf = cubic_pointwise(3);
        let rhs = RhsFamily::constant(Vector::from_real(&[2.0, -1.0, 0.5]));
        let out = newton_solve(&nf, &rhs, c(0.7), &Vector::zeros(3), &NewtonOptions::default()).unwrap();
        let h = &out.residual_history;
        // Ratios r_{n+1} / r_n^2 stay bounded once in the asymptotic regime.
        let ratios: Vec<f64> = h.windows(2).rev().skip(1).take(3).map(|w| w[1] / (w[0] * w[0])).collect();
        assert!(ratios.iter().all(|&r| r < 10.0), "{ratios:?} from {h:?}");
    }

    #[test]
    fn fd_jacobian_fallback_is_used_and_flagged() {
        let bare = NonlinearFamily::new("bare-cubic", 1, |u: &Vector, k| u.map(|x| x + k * x * x * x));
        let out = newton_solve(&bare, &two(), c(0.1), &Vector::zeros(1), &NewtonOptions::default()).unwrap();
        assert!(out.fd_jacobian);
        assert!((out.u[0].re - cubic_root(0.1, 2.0)).abs() < 1e-10);
    }

    #[test]
    fn singular_jacobian_is_reported() {
        // A(u) = u^2 has A'(0) = 0.
        let nf = NonlinearFamily::new("square", 1, |u: &Vector, _| u.map(|x| x * x))
            .with_frechet(|u, _| Matrix::from_diag(&[2.0 * u[0]]));
        let err = newton_solve(&nf, &RhsFamily::constant(Vector::from_real(&[1.0])), c(0.0), &Vector::zeros(1), &NewtonOptions::default())
            .unwrap_err();
        assert!(matches!(err, Error::SingularJacobian { .. }));
    }

    #[test]
    fn non_convergence_carries_best_residual() {
        let nf = cubic_pointwise(1);
        let opts = NewtonOptions {
            max_iter: 1,
            ..Default::default()
        };
        let rhs = RhsFamily::constant(Vector::from_real(&[3.0]));
        let err = newton_solve(&nf, &rhs, c(1.0), &Vector::zeros(1), &opts).unwrap_err();
        match err {
            Error::NonConvergence { best_residual, history, .. } => {
                assert!(best_residual > 0.0);
                assert!(!history.is_empty());
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn sensitivity_of_cubic_at_zero() {
        let nf = cubic_pointwise(1);
        let u = Vector::from_real(&[2.0]);
        let s = nonlinear_sensitivity(&nf, &two(), c(0.0), &u).unwrap();
        assert!((s.udot[0] - c(-8.0)).norm() < 1e-12);
        assert!(s.linearization_residual <= 1e-12);
    }

    #[test]
    fn sensitivity_of_constant_family_vanishes() {
        let nf = NonlinearFamily::wrap_linear(&LinearFamily::constant("c", Matrix::identity(2)));
        let rhs = RhsFamily::constant(Vector::from_real(&[1.0, 1.0]));
        let s = nonlinear_sensitivity(&nf, &rhs, c(0.3), &Vector::from_real(&[1.0, 1.0])).unwrap();
        assert_eq!(s.udot.norm(), 0.0);
    }

    #[test]
    fn assumption_j_examples() {
        let id = NonlinearFamily::wrap_linear(&LinearFamily::constant("id", Matrix::identity(2)));
        let probes: Vec<(Vector, C64)> = (0..4).map(|i| (Vector::from_real(&[i as f64, 1.0]), c(0.25 * i as f64))).collect();
        let rep = check_assumption_j(&id, &probes).unwrap();
        assert!((rep.c3.unwrap() - 1.0).abs() < 1e-14);

        let cubic = cubic_pointwise(1);
        let probes: Vec<(Vector, C64)> = [0.0, 0.5, 1.0, 3.0]
            .iter()
            .flat_map(|&u| [0.0, 0.2, 1.0].map(|k| (Vector::from_real(&[u]), c(k))))
            .collect();
        assert!(check_assumption_j(&cubic, &probes).unwrap().c3.unwrap() <= 1.0 + 1e-15);

        let degenerate = NonlinearFamily::new("diag(1,k)", 2, |u: &Vector, k| Vector::new(vec![u[0], k * u[1]]))
            .with_frechet(|_, k| Matrix::from_diag(&[c(1.0), k]));
        let mut probes: Vec<(Vector, C64)> = (0..8).map(|j| (Vector::zeros(2), c(10f64.powi(-2 * j)))).collect();
        probes.push((Vector::zeros(2), c(0.0)));
        let rep = check_assumption_j(&degenerate, &probes).unwrap();
        assert!(rep.c3.is_none());
        assert!(rep.flagged.contains(&8));
        let norms: Vec<f64> = rep.probes.iter().filter_map(|p| p.inverse_norm).collect();
        assert!(norms.windows(2).all(|w| w[1] >= w[0]));
    }

    #[test]
    fn cubic_continuity_converges_with_unit_slope() {
        let sweep = nonlinear_continuity(&cubic_pointwise(1), &two(), c(0.0), &DEFAULT_H_SEQUENCE, &NewtonOptions::default(), &VerdictOptions::default())
            .unwrap();
        assert!(sweep.sweep.converged());
        assert!((sweep.sweep.verdict.slope.unwrap() - 1.0).abs() < 0.05);
        for r in &sweep.sweep.records {
            let oracle = (cubic_root(r.h, 2.0) - 2.0).abs();
            assert!((r.omega - oracle).abs() < 1e-10);
        }
        assert!(sweep.starts.iter().all(|&s| s == StartKind::Warm));
    }

    #[test]
    fn wrapped_remark12_jumps_through_the_nonlinear_path() {
        let nf = NonlinearFamily::wrap_linear(&remark12(2, c(0.0)));
        let rhs = RhsFamily::constant(Vector::from_real(&[3.0, 4.0]));
        let sweep = nonlinear_continuity(&nf, &rhs, c(0.0), &DEFAULT_H_SEQUENCE, &NewtonOptions::default(), &VerdictOptions::default())
            .unwrap();
        assert!(!sweep.sweep.converged());
        assert!(sweep.sweep.records.iter().all(|r| (r.omega - 2.5).abs() < 1e-12));
    }

    #[test]
    fn constant_family_has_zero_modulus() {
        let nf = NonlinearFamily::new("const", 2, |u: &Vector, _| u.map(|x| x + x * x * x))
            .with_frechet(|u, _| Matrix::from_diag(&u.map(|x| 1.0 + 3.0 * x * x).into_inner()));
        let rhs = RhsFamily::constant(Vector::from_real(&[1.0, -2.0]));
        let sweep = nonlinear_continuity(&nf, &rhs, c(0.5), &DEFAULT_H_SEQUENCE, &NewtonOptions::default(), &VerdictOptions::default())
            .unwrap();
        assert!(sweep.sweep.records.iter().all(|r| r.omega == 0.0));
        assert!(sweep.sweep.converged());
    }

    #[test]
    fn sensitivity_sweep_on_wrapped_shift() {
        let nf = NonlinearFamily::wrap_linear(&diag_shift(2));
        let rhs = RhsFamily::constant(Vector::from_real(&[1.0, 1.0]));
        let disc = make_disc(c(0.5), 0.5, 3).unwrap();
        let sweep = sensitivity_continuity(&nf, &rhs, &disc, &SensitivityOptions::default()).unwrap();
        for r in &sweep.records {
            let exact = -1.0 / (1.0 + r.k.re).powi(2);
            assert!((r.udot[1].re - exact).abs() < 1e-12);
            assert!(r.udot[0].norm() < 1e-15);
            assert!(r.rel_gap <= 1e-6, "rel gap {}", r.rel_gap);
        }
        assert!(sweep.all_converged());
    }

    #[test]
    fn cubic_sensitivity_increases_toward_zero() {
        let nf = cubic_pointwise(1);
        let disc = ParameterDisc {
            center: c(0.05),
            radius: 0.05,
            grid: vec![c(0.0), c(0.05), c(0.1)],
            h_sequence: DEFAULT_H_SEQUENCE.to_vec(),
        };
        let sweep = sensitivity_continuity(&nf, &two(), &disc, &SensitivityOptions::default()).unwrap();
        let udots: Vec<f64> = sweep.records.iter().map(|r| r.udot[0].re).collect();
        assert!(udots.windows(2).all(|w| w[0] < w[1]) && udots[2] < 0.0, "{udots:?}");
        for r in &sweep.records {
            let u = cubic_root(r.k.re, 2.0);
            let exact = -u.powi(3) / (1.0 + 3.0 * r.k.re * u * u);
            assert!((r.udot[0].re - exact).abs() < 1e-9);
        }
        assert!(sweep.all_converged());
    }

    #[test]
    fn nonlinear_assumptions_for_cubic() {
        let nf = cubic_pointwise(2);
        let rhs = RhsFamily::constant(Vector::from_real(&[2.0, 1.0]));
        let disc = make_disc(c(0.5), 0.4, 5).unwrap();
        let rep = check_assumptions_nonlinear(&nf, &rhs, &disc, 1.0, &NewtonOptions::default(), &VerdictOptions::default()).unwrap();
        assert!(rep.passes());
        assert!((rep.c0 - 5f64.sqrt()).abs() < 1e-15);
        // A' = diag(1 + 3 k u^2) >= 1, so |A'^-1| <= 1.
        assert!(rep.c3().unwrap() <= 1.0 + 1e-12);
        // |A(u, k+h) - A(u, k)| = h |u^3|, largest at the probe with the biggest cube.
        assert!(rep.modulus_c.windows(2).all(|w| w[1].sup_norm < w[0].sup_norm));
    }

    #[test]
    fn nonlinear_assumptions_flag_singular_points() {
        let nf = NonlinearFamily::wrap_linear(&crate::families::diag_near_singular(2, c(0.0)));
        let rhs = RhsFamily::constant(Vector::from_real(&[1.0, 1.0]));
        let disc = make_disc(c(0.0), 0.5, 5).unwrap();
        let rep = check_assumptions_nonlinear(&nf, &rhs, &disc, 1.0, &NewtonOptions::default(), &VerdictOptions::default()).unwrap();
        assert!(!rep.solvable_everywhere && !rep.passes());
        assert!(rep.c3().is_none());
    }
}
