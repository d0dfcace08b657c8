//! Linear families: solves, the resolvent-difference identity, inverse derivatives,
//! sensitivities, continuity sweeps, assumption checks and necessity probes.

use crate::diff::loglog_slope;
use crate::error::{Error, Result};
use crate::families::{remark12, LinearFamily, ParameterDisc, RhsFamily, DEFAULT_H_SEQUENCE};
use crate::linalg::{c, operator_norm, Lu, Matrix, Vector, C64};
use crate::verdict::{tends_to_zero, Verdict, VerdictOptions};

/// One sample of the continuity modulus `omega(h) = |u(k + h e) - u(k)|`.
#[derive(Debug, Clone, PartialEq)]
pub struct ContinuityRecord {
    pub k: C64,
    pub h: f64,
    pub omega: f64,
    /// `|A(u(k+h), k) - A(u(k), k)|`, reported by nonlinear sweeps only.
    pub proxy: Option<f64>,
}

/// Continuity modulus at one `k`, records ordered by decreasing `h`.
#[derive(Debug, Clone, PartialEq)]
pub struct ContinuitySweep {
    pub k: C64,
    pub records: Vec<ContinuityRecord>,
    pub verdict: Verdict,
    /// Steps at which the solve failed, with the reason.
    pub failures: Vec<(f64, String)>,
}

impl ContinuitySweep {
    pub fn converged(&self) -> bool {
        self.verdict.converged && self.failures.is_empty()
    }

    pub(crate) fn from_records(
        k: C64,
        records: Vec<ContinuityRecord>,
        failures: Vec<(f64, String)>,
        opts: &VerdictOptions,
    ) -> Self {
        let hs: Vec<f64> = records.iter().map(|r| r.h).collect();
        let omegas: Vec<f64> = records.iter().map(|r| r.omega).collect();
        let verdict = if failures.is_empty() {
            tends_to_zero(&hs, &omegas, opts)
        } else {
            Verdict {
                slope: loglog_slope(&hs, &omegas),
                converged: false,
            }
        };
        ContinuitySweep {
            k,
            records,
            verdict,
            failures,
        }
    }
}

fn factor_at(fam: &LinearFamily, k: C64) -> Result<Lu> {
    Lu::factor(&fam.at(k)).map_err(|e| e.at_k(k))
}

fn check_dims(fam: &LinearFamily, rhs: &RhsFamily) -> Result<()> {
    if fam.dim != rhs.dim {
        return Err(Error::invalid(format!(
            "family dimension {} does not match right-hand side dimension {}",
            fam.dim, rhs.dim
        )));
    }
    Ok(())
}

/// Solve `A(k) u = f(k)`.
pub fn solve_at(fam: &LinearFamily, rhs: &RhsFamily, k: C64) -> Result<Vector> {
    check_dims(fam, rhs)?;
    Ok(factor_at(fam, k)?.solve(&rhs.at(k)))
}

/// Explicit inverse at `k`, assembled column by column.
pub fn inverse_at(fam: &LinearFamily, k: C64) -> Result<Matrix> {
    fam.at(k).inverse().map_err(|e| e.at_k(k))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IdentityCheck {
    /// `|[A^-1(k+h) - A^-1(k)] + A^-1(k+h) [A(k+h) - A(k)] A^-1(k)|`
    pub residual: f64,
    /// `|A^-1(k+h) - A^-1(k)|`
    pub difference_norm: f64,
    /// `|A^-1(k+h) [A(k+h) - A(k)] A^-1(k)|`
    pub product_norm: f64,
    /// `|A^-1(k+h)| |A(k+h) - A(k)| |A^-1(k)|`
    pub bound: f64,
}

/// Evaluate both sides of `A^-1(k+h) - A^-1(k) = -A^-1(k+h) [A(k+h) - A(k)] A^-1(k)`.
pub fn inverse_difference_identity(fam: &LinearFamily, k: C64, h: f64) -> Result<IdentityCheck> {
    let kh = fam.step(k, h);
    let (inv_k, lo_k) = fam.at(k).inverse_split().map_err(|e| e.at_k(k))?;
    let (inv_kh, lo_kh) = fam.at(kh).inverse_split().map_err(|e| e.at_k(kh))?;
    let delta = &fam.at(kh) - &fam.at(k);
    let difference = &(&inv_kh - &inv_k) + &(&lo_kh - &lo_k);
    let product = inv_kh.mul_mat(&delta).mul_mat(&inv_k);
    let residual = &difference + &product;
    Ok(IdentityCheck {
        residual: operator_norm(&residual)?,
        difference_norm: operator_norm(&difference)?,
        product_norm: operator_norm(&product)?,
        bound: operator_norm(&inv_kh)? * operator_norm(&delta)? * operator_norm(&inv_k)?,
    })
}

/// `d/dk A^-1(k) = -A^-1(k) Adot(k) A^-1(k)`, with the derivative taken along the family's direction.
pub fn inverse_derivative(fam: &LinearFamily, k: C64) -> Result<Matrix> {
    let adot = fam.derivative(k)?;
    let lu = factor_at(fam, k)?;
    // A^-1 Adot A^-1 = A^-1 (Adot A^-1); build A^-1 first, then one solve per column.
    let inv = Matrix::from_columns(&(0..fam.dim).map(|j| lu.solve(&Vector::basis(fam.dim, j))).collect::<Vec<_>>());
    let middle = adot.mul_mat(&inv);
    let cols: Vec<Vector> = (0..fam.dim)
        .map(|j| {
            let col = Vector::from_fn(fam.dim, |i| middle[(i, j)]);
            lu.solve(&col).scale(c(-1.0))
        })
        .collect();
    Ok(Matrix::from_columns(&cols))
}

/// `udot(k) = (d/dk A^-1(k)) f(k) + A^-1(k) fdot(k)`.
pub fn linear_sensitivity(fam: &LinearFamily, rhs: &RhsFamily, k: C64) -> Result<Vector> {
    check_dims(fam, rhs)?;
    let fdot = rhs.derivative(k)?;
    let dinv = inverse_derivative(fam, k)?;
    let lu = factor_at(fam, k)?;
    Ok(&dinv.mul_vec(&rhs.at(k)) + &lu.solve(&fdot))
}

/// `omega(h) = |u(k + h e) - u(k)|` for each step, with a convergence verdict.
pub fn continuity_modulus(
    fam: &LinearFamily,
    rhs: &RhsFamily,
    k: C64,
    h_seq: &[f64],
    opts: &VerdictOptions,
) -> Result<ContinuitySweep> {
    let u = solve_at(fam, rhs, k)?;
    let mut records = Vec::with_capacity(h_seq.len());
    let mut failures = Vec::new();
    for &h in h_seq {
        match solve_at(fam, rhs, fam.step(k, h)) {
            Ok(uh) => records.push(ContinuityRecord {
                k,
                h,
                omega: (&uh - &u).norm(),
                proxy: None,
            }),
            Err(e) => failures.push((h, e.to_string())),
        }
    }
    Ok(ContinuitySweep::from_records(k, records, failures, opts))
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModulusSample {
    pub h: f64,
    pub sup_norm: f64,
}

/// Grid estimates of the constants in the linear solvability assumptions.
#[derive(Debug, Clone, PartialEq)]
pub struct AssumptionReport {
    /// `max |f(k)|` over the grid.
    pub c0: f64,
    /// `max |A^-1(k)|` over the grid; infinite when some `A(k)` is singular.
    pub c1: f64,
    /// `max |A(k)|` over the grid (diagnostic only).
    pub c2: f64,
    /// Per step: `R * max_k |A(k + h e) - A(k)|`.
    pub modulus_c: Vec<ModulusSample>,
    pub modulus_verdict: Verdict,
    pub solvable_everywhere: bool,
    pub failures: Vec<(C64, String)>,
}

impl AssumptionReport {
    pub fn passes(&self) -> bool {
        self.solvable_everywhere && self.modulus_verdict.converged && self.c1.is_finite()
    }
}

pub fn check_assumptions_a1(
    fam: &LinearFamily,
    rhs: &RhsFamily,
    disc: &ParameterDisc,
    ball_radius: f64,
    opts: &VerdictOptions,
) -> Result<AssumptionReport> {
    check_dims(fam, rhs)?;
    if disc.grid.is_empty() {
        return Err(Error::invalid("parameter grid is empty"));
    }
    let mut grid = disc.grid.clone();
    grid.sort_by(|a, b| a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im)));

    let mut c0: f64 = 0.0;
    let mut c1: f64 = 0.0;
    let mut c2: f64 = 0.0;
    let mut failures = Vec::new();
    for &k in &grid {
        c0 = c0.max(rhs.at(k).norm());
        let a = fam.at(k);
        c2 = c2.max(operator_norm(&a)?);
        match a.inverse() {
            Ok(inv) => c1 = c1.max(operator_norm(&inv)?),
            Err(e) => {
                c1 = f64::INFINITY;
                failures.push((k, e.at_k(k).to_string()));
            }
        }
    }

    let mut modulus_c = Vec::with_capacity(disc.h_sequence.len());
    for &h in &disc.h_sequence {
        let mut sup: f64 = 0.0;
        for &k in &grid {
            let delta = &fam.at(fam.step(k, h)) - &fam.at(k);
            sup = sup.max(operator_norm(&delta)?);
        }
        modulus_c.push(ModulusSample {
            h,
            sup_norm: ball_radius * sup,
        });
    }
    let values: Vec<f64> = modulus_c.iter().map(|m| m.sup_norm).collect();
    let modulus_verdict = tends_to_zero(&disc.h_sequence, &values, opts);

    Ok(AssumptionReport {
        c0,
        c1,
        c2,
        modulus_c,
        modulus_verdict,
        solvable_everywhere: failures.is_empty(),
        failures,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct BlowupEntry {
    pub k: C64,
    /// Unit right-hand side maximizing `|A^-1(k) f|`; `None` when `A(k)` is singular.
    pub worst_rhs: Option<Vector>,
    /// `|A^-1(k) f|` for the worst `f`, i.e. `1 / sigma_min(A(k))`.
    pub growth: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BlowupReport {
    pub entries: Vec<BlowupEntry>,
    /// Fitted `p` in `growth ~ C |k - k_star|^-p`, when a pole was supplied.
    pub exponent: Option<f64>,
}

/// Dominant right singular direction of `A^-1` by inverse power iteration on `A A^H`.
fn worst_direction(lu: &Lu) -> (Vector, f64) {
    let n = lu.dim();
    let mut x = Vector::from_fn(n, |i| c(1.0 + i as f64 / n as f64)).normalized();
    let mut growth = lu.solve(&x).norm();
    for _ in 0..2000 {
        let y = lu.solve(&x);
        let z = lu.solve_adjoint(&y);
        let znorm = z.norm();
        if znorm == 0.0 || !znorm.is_finite() {
            break;
        }
        x = z.scale(c(1.0 / znorm));
        let next = lu.solve(&x).norm();
        let settled = (next - growth).abs() <= 1e-15 * next;
        growth = next;
        if settled {
            break;
        }
    }
    (x, growth)
}

/// Worst-case unit right-hand side at each `k` and the growth of the solution it produces.
pub fn blowup_probe(fam: &LinearFamily, k_seq: &[C64], pole: Option<C64>) -> BlowupReport {
    let entries: Vec<BlowupEntry> = k_seq
        .iter()
        .map(|&k| match Lu::factor(&fam.at(k)) {
            Ok(lu) => {
                let (f, growth) = worst_direction(&lu);
                BlowupEntry {
                    k,
                    worst_rhs: Some(f),
                    growth,
                }
            }
            Err(_) => BlowupEntry {
                k,
                worst_rhs: None,
                growth: f64::INFINITY,
            },
        })
        .collect();
    let exponent = pole.and_then(|k_star| {
        let (dist, growth): (Vec<f64>, Vec<f64>) = entries
            .iter()
            .filter(|e| e.growth.is_finite())
            .map(|e| ((e.k - k_star).norm(), e.growth))
            .unzip();
        loglog_slope(&dist, &growth).map(|s| -s)
    });
    BlowupReport { entries, exponent }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Counterexample {
    pub g_norm: f64,
    /// `(h, |u(k0 + h) - u(k0)|)` for each step.
    pub jumps: Vec<(f64, f64)>,
    pub sweep: ContinuitySweep,
}

impl Counterexample {
    pub fn half_norm(&self) -> f64 {
        self.g_norm / 2.0
    }

    /// Every jump equals `|g| / 2` exactly.
    pub fn matches_half_norm(&self) -> bool {
        self.jumps.iter().all(|&(_, j)| j == self.half_norm())
    }
}

/// Solve `A(k) u = g` for the family with `A(k0) = I` and `A(k) = 2I` off `k0`, and
/// measure the jump of the solution over the default steps.
pub fn remark12_counterexample(g: &Vector) -> Result<Counterexample> {
    if g.is_empty() || g.norm() == 0.0 {
        return Err(Error::invalid("g must be a nonzero vector"));
    }
    let k0 = c(0.0);
    let fam = remark12(g.len(), k0);
    let rhs = RhsFamily::constant(g.clone());
    let sweep = continuity_modulus(&fam, &rhs, k0, &DEFAULT_H_SEQUENCE, &VerdictOptions::default())?;
    let jumps = sweep.records.iter().map(|r| (r.h, r.omega)).collect();
    Ok(Counterexample {
        g_norm: g.norm(),
        jumps,
        sweep,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::families::{diag_near_singular, diag_shift, make_disc};

    fn ones(n: usize) -> RhsFamily {
        RhsFamily::constant(Vector::from_real(&vec![1.0; n]))
    }

    #[test]
    fn solve_examples() {
        let id = LinearFamily::constant("id", Matrix::identity(2));
        let f = Vector::from_real(&[1.0, 2.0]);
        assert_eq!(solve_at(&id, &RhsFamily::constant(f.clone()), c(0.3)).unwrap(), f);

        let u = solve_at(&diag_shift(2), &ones(2), c(1.0)).unwrap();
        assert_eq!(u, Vector::from_real(&[1.0, 0.5]));

        let err = solve_at(&diag_near_singular(2, c(0.25)), &ones(2), c(0.25)).unwrap_err();
        assert!(matches!(err, Error::Singular { k: Some(k), .. } if k == c(0.25)));
    }

    #[test]
    fn identity_constant_family_has_zero_residual() {
        let fam = LinearFamily::constant("const", Matrix::from_real_rows(&[&[2.0, 1.0], &[0.0, 3.0]]).unwrap());
        let chk = inverse_difference_identity(&fam, c(0.1), 0.5).unwrap();
        assert_eq!(chk.residual, 0.0);
        assert_eq!(chk.difference_norm, 0.0);
    }

    #[test]
    fn identity_on_diagonal_family() {
        let fam = diag_shift(2);
        let chk = inverse_difference_identity(&fam, c(0.0), 0.5).unwrap();
        // A^-1(0.5) - A^-1(0) = diag(0, 1/1.5 - 1) = diag(0, -1/3)
        assert!((chk.difference_norm - 1.0 / 3.0).abs() < 1e-15);
        assert!((chk.product_norm - 1.0 / 3.0).abs() < 1e-15);
        assert!(chk.residual <= 1e-14);
    }

    #[test]
    fn inverse_derivative_examples() {
        let cst = LinearFamily::constant("c", Matrix::from_real_rows(&[&[2.0, 1.0], &[1.0, 3.0]]).unwrap());
        assert_eq!(inverse_derivative(&cst, c(0.4)).unwrap().frobenius_norm(), 0.0);

        let d = inverse_derivative(&diag_shift(2), c(0.0)).unwrap();
        assert!(d.max_abs_diff(&Matrix::from_diag(&[c(0.0), c(-1.0)])) < 1e-15);

        let bare = LinearFamily::new("bare", 1, |_| Matrix::identity(1));
        assert!(matches!(inverse_derivative(&bare, c(0.0)), Err(Error::MissingCapability(_))));
    }

    #[test]
    fn sensitivity_examples() {
        let cst = LinearFamily::constant("c", Matrix::identity(2));
        assert_eq!(linear_sensitivity(&cst, &ones(2), c(0.0)).unwrap().norm(), 0.0);

        let s = linear_sensitivity(&diag_shift(2), &ones(2), c(0.0)).unwrap();
        assert!((&s - &Vector::from_real(&[0.0, -1.0])).norm() < 1e-15);

        let rhs = RhsFamily::new("poly", 2, |k| Vector::new(vec![k, k * k]))
            .with_derivative(|k| Vector::new(vec![c(1.0), 2.0 * k]));
        let s = linear_sensitivity(&cst, &rhs, c(2.0)).unwrap();
        assert_eq!(s, Vector::from_real(&[1.0, 4.0]));
    }

    #[test]
    fn continuity_examples() {
        let opts = VerdictOptions::default();
        let id = LinearFamily::constant("id", Matrix::identity(2));
        let rhs = RhsFamily::affine(Vector::zeros(2), Vector::from_real(&[1.0, 0.0]), c(1.0));
        let sweep = continuity_modulus(&id, &rhs, c(0.0), &DEFAULT_H_SEQUENCE, &opts).unwrap();
        for r in &sweep.records {
            assert_eq!(r.omega, r.h);
        }
        assert!(sweep.converged());
        assert!((sweep.verdict.slope.unwrap() - 1.0).abs() < 1e-12);

        let sweep = continuity_modulus(&diag_shift(2), &ones(2), c(0.0), &DEFAULT_H_SEQUENCE, &opts).unwrap();
        for r in &sweep.records {
            let exact = (1.0 / (1.0 + r.h) - 1.0).abs();
            assert!((r.omega - exact).abs() <= 1e-15);
        }
        assert!(sweep.converged());
    }

    #[test]
    fn remark12_sweep_does_not_converge() {
        let fam = remark12(2, c(0.0));
        let rhs = RhsFamily::constant(Vector::from_real(&[1.0, 0.0]));
        let sweep = continuity_modulus(&fam, &rhs, c(0.0), &DEFAULT_H_SEQUENCE, &VerdictOptions::default()).unwrap();
        assert!(sweep.records.iter().all(|r| r.omega == 0.5));
        assert!(!sweep.converged());
    }

    #[test]
    fn assumptions_on_identity() {
        let id = LinearFamily::constant("id", Matrix::identity(2));
        let disc = make_disc(c(0.0), 1.0, 5).unwrap();
        let rhs = RhsFamily::constant(Vector::from_real(&[1.0, 0.0]));
        let rep = check_assumptions_a1(&id, &rhs, &disc, 1.0, &VerdictOptions::default()).unwrap();
        assert_eq!(rep.c0, 1.0);
        assert!((rep.c1 - 1.0).abs() < 1e-14);
        assert!(rep.modulus_c.iter().all(|m| m.sup_norm == 0.0));
        assert!(rep.solvable_everywhere && rep.passes());
    }

    #[test]
    fn assumptions_detect_singular_grid_point() {
        let fam = diag_near_singular(2, c(0.0));
        let disc = make_disc(c(0.0), 1.0, 3).unwrap();
        let rep = check_assumptions_a1(&fam, &ones(2), &disc, 1.0, &VerdictOptions::default()).unwrap();
        assert!(!rep.solvable_everywhere);
        assert_eq!(rep.failures.len(), 1);
        assert_eq!(rep.failures[0].0, c(0.0));
        assert!(rep.c1.is_infinite());
        assert!(!rep.passes());
    }

    #[test]
    fn assumptions_c1_on_diagonal_shift() {
        let disc = ParameterDisc {
            center: c(0.5),
            radius: 0.5,
            grid: vec![c(0.0), c(0.5), c(1.0)],
            h_sequence: DEFAULT_H_SEQUENCE.to_vec(),
        };
        let rep = check_assumptions_a1(&diag_shift(2), &ones(2), &disc, 1.0, &VerdictOptions::default()).unwrap();
        assert!((rep.c1 - 1.0).abs() < 1e-14);
        assert!(rep.passes());
        // |A(k+h) - A(k)| = h exactly for the shift family.
        for m in &rep.modulus_c {
            assert!((m.sup_norm - m.h).abs() < 1e-15);
        }
    }

    #[test]
    fn remark12_fails_modulus_condition() {
        let disc = make_disc(c(0.0), 0.5, 1).unwrap();
        let rhs = RhsFamily::constant(Vector::from_real(&[1.0, 0.0]));
        let rep = check_assumptions_a1(&remark12(2, c(0.0)), &rhs, &disc, 1.0, &VerdictOptions::default()).unwrap();
        assert!(rep.modulus_c.iter().all(|m| m.sup_norm == 1.0));
        assert!(!rep.modulus_verdict.converged);
    }

    #[test]
    fn blowup_on_identity_and_diagonal() {
        let id = LinearFamily::constant("id", Matrix::identity(3));
        let rep = blowup_probe(&id, &[c(0.0), c(1.0)], None);
        for e in &rep.entries {
            assert!((e.growth - 1.0).abs() < 1e-14);
            assert!((e.worst_rhs.as_ref().unwrap().norm() - 1.0).abs() < 1e-14);
        }

        let fam = LinearFamily::new("diag(1,k)", 2, |k| Matrix::from_diag(&[c(1.0), k]));
        let ks: Vec<C64> = (1..=6).map(|j| c(1.0 / j as f64)).collect();
        let rep = blowup_probe(&fam, &ks, Some(c(0.0)));
        for (j, e) in (1..=6).zip(&rep.entries) {
            assert!((e.growth - j as f64).abs() <= 1e-10 * j as f64, "j={j} growth {}", e.growth);
            if j > 1 {
                let f = e.worst_rhs.as_ref().unwrap();
                assert!((f[1].norm() - 1.0).abs() < 1e-10);
            }
        }
        assert!((rep.exponent.unwrap() - 1.0).abs() < 1e-8);
    }

    #[test]
    fn blowup_double_pole() {
        let k_star = c(0.5);
        let fam = LinearFamily::new("diag(1,(k-k*)^2)", 2, move |k| Matrix::from_diag(&[c(1.0), (k - k_star) * (k - k_star)]));
        let ks: Vec<C64> = (1..=6).map(|j| k_star + 0.5 / j as f64).collect();
        let rep = blowup_probe(&fam, &ks, Some(k_star));
        assert!((rep.exponent.unwrap() - 2.0).abs() < 0.05);
    }

    #[test]
    fn blowup_records_singularity() {
        let rep = blowup_probe(&diag_near_singular(2, c(0.0)), &[c(0.0)], None);
        assert!(rep.entries[0].growth.is_infinite());
        assert!(rep.entries[0].worst_rhs.is_none());
    }

    #[test]
    fn counterexample_values() {
        let ce = remark12_counterexample(&Vector::from_real(&[1.0, 0.0])).unwrap();
        assert_eq!(ce.half_norm(), 0.5);
        assert!(ce.matches_half_norm());
        let ce = remark12_counterexample(&Vector::from_real(&[3.0, 4.0])).unwrap();
        assert!(ce.jumps.iter().all(|&(_, j)| j == 2.5));
        assert!(!ce.sweep.converged());
        assert!(matches!(
            remark12_counterexample(&Vector::from_real(&[0.0, 0.0])),
            Err(Error::InvalidInput(_))
        ));
    }
}
