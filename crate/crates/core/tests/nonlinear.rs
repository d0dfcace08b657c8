mod common;

use common::{cubic_root, error_slope, H_ORDER};
use paramop_core::diff::central_diff;
use paramop_core::families::{
    affine_matrix, cubic_pointwise, diag_shift, frechet_check, make_disc, NonlinearFamily, RhsFamily,
    DEFAULT_H_SEQUENCE,
};
use paramop_core::linear::solve_at;
use paramop_core::nonlinear::{
    check_assumption_j, newton_solve, nonlinear_continuity, nonlinear_sensitivity, sensitivity_continuity,
    NewtonOptions, SensitivityOptions,
};
use paramop_core::verdict::VerdictOptions;
use paramop_core::{c, Vector, C64};
use proptest::prelude::*;

fn constant(v: &[f64]) -> RhsFamily {
    RhsFamily::constant(Vector::from_real(v))
}

#[test]
fn cubic_sensitivity_at_zero_is_minus_eight() {
    let nf = cubic_pointwise(1);
    let rhs = constant(&[2.0]);
    let out = newton_solve(&nf, &rhs, c(0.0), &Vector::zeros(1), &NewtonOptions::default()).unwrap();
    let sens = nonlinear_sensitivity(&nf, &rhs, c(0.0), &out.u).unwrap();
    assert!((sens.udot[0] - c(-8.0)).norm() <= 1e-9);
    assert!(sens.linearization_residual <= 1e-9);
}

#[test]
fn cubic_sensitivity_matches_fd_with_second_order() {
    let nf = cubic_pointwise(1);
    let rhs = constant(&[2.0]);
    let opts = NewtonOptions::default();
    for k in [0.2, 0.3, 0.5, 1.0] {
        let k = c(k);
        let solve = |kk: C64| newton_solve(&nf, &rhs, kk, &Vector::from_real(&[1.0]), &opts).map(|o| o.u);
        let u = solve(k).unwrap();
        let sens = nonlinear_sensitivity(&nf, &rhs, k, &u).unwrap();
        assert!(sens.linearization_residual <= 1e-9);
        let slope = error_slope(&H_ORDER, |h| (&central_diff(|t| solve(k + t), 0.0, h).unwrap() - &sens.udot).norm());
        assert!((slope - 2.0).abs() <= 0.1, "k={k}: slope {slope}");
        // Independent closed form udot = -u^3 / (1 + 3 k u^2) at the bisection root.
        let r = cubic_root(k.re, 2.0);
        assert!((sens.udot[0].re + r.powi(3) / (1.0 + 3.0 * k.re * r * r)).abs() < 1e-9);
    }
}

#[test]
fn cubic_udot_increases_toward_zero_on_grid() {
    let nf = cubic_pointwise(1);
    let rhs = constant(&[2.0]);
    let mut disc = make_disc(c(0.05), 0.05, 3).unwrap();
    disc.grid = vec![c(0.0), c(0.05), c(0.1)];
    let sweep = sensitivity_continuity(&nf, &rhs, &disc, &SensitivityOptions::default()).unwrap();
    let udots: Vec<f64> = sweep.records.iter().map(|r| r.udot[0].re).collect();
    assert!(udots.windows(2).all(|w| w[0] < w[1] && w[1] < 0.0), "{udots:?}");
    assert!(sweep.max_linearization_residual() <= 1e-9);
}

#[test]
fn wrapped_diag_shift_sensitivity_closed_form() {
    let nf = NonlinearFamily::wrap_linear(&diag_shift(2));
    let rhs = constant(&[1.0, 1.0]);
    let disc = make_disc(c(0.0), 0.5, 5).unwrap();
    let sweep = sensitivity_continuity(&nf, &rhs, &disc, &SensitivityOptions::default()).unwrap();
    for rec in &sweep.records {
        let expect = -1.0 / (1.0 + rec.k.re).powi(2);
        assert!(rec.udot[0].norm() < 1e-14);
        assert!((rec.udot[1] - c(expect)).norm() < 1e-12);
    }
    assert!(sweep.max_rel_gap() <= 1e-6);
    assert!(sweep.all_converged());
}

#[test]
fn constant_family_has_zero_sensitivity() {
    let nf = NonlinearFamily::wrap_linear(&paramop_core::families::LinearFamily::constant(
        "const",
        paramop_core::Matrix::from_real_rows(&[&[2.0, 1.0], &[0.0, 3.0]]).unwrap(),
    ));
    let out = nonlinear_sensitivity(&nf, &constant(&[1.0, 2.0]), c(0.4), &Vector::from_real(&[0.0, 0.0])).unwrap();
    assert_eq!(out.udot.norm(), 0.0);
}

proptest! {
    #[test]
    fn newton_on_linear_wrapped_matches_direct_solve(seed in 0u64..500, re in -0.5..0.5f64) {
        let fam = affine_matrix(4, seed, 1.0);
        let nf = NonlinearFamily::wrap_linear(&fam);
        let rhs = constant(&[1.0, -2.0, 0.5, 3.0]);
        let k = c(re);
        let out = newton_solve(&nf, &rhs, k, &Vector::zeros(4), &NewtonOptions::default()).unwrap();
        prop_assert!(out.iterations <= 2);
        let direct = solve_at(&fam, &rhs, k).unwrap();
        prop_assert!((&out.u - &direct).norm() <= 1e-10);
    }

    #[test]
    fn frechet_of_cubic_is_consistent(u0 in -2.0..2.0f64, k in 0.0..2.0f64, d in 0.05..1.0f64) {
        let nf = cubic_pointwise(1);
        let errs: Vec<f64> = H_ORDER
            .iter()
            .map(|&h| frechet_check(&nf, &Vector::from_real(&[u0]), c(k), &[Vector::from_real(&[d])], h).unwrap())
            .collect();
        // Absolute stencil error is k |d|^3 h^2 plus rounding; the check divides by |(1 + 3 k u^2) d| >= |d|.
        for (h, e) in H_ORDER.iter().zip(&errs) {
            prop_assert!(*e <= k * d * d * h * h * 1.0001 + 1e-15 * (1.0 + u0.abs()).powi(3) / (h * d.abs()));
        }
    }
}

#[test]
fn newton_converges_quadratically() {
    let nf = cubic_pointwise(1);
    let out = newton_solve(&nf, &constant(&[2.0]), c(1.0), &Vector::from_real(&[1.5]), &NewtonOptions::default()).unwrap();
    let ratios: Vec<f64> = out
        .residual_history
        .windows(2)
        .filter(|w| w[1] > 1e-14)
        .map(|w| w[1] / (w[0] * w[0]))
        .collect();
    assert!(ratios.len() >= 2, "{:?}", out.residual_history);
    assert!(ratios.iter().all(|&r| r < 10.0), "{ratios:?}");
}

#[test]
fn jacobian_bound_and_continuity_for_cubic() {
    let nf = cubic_pointwise(2);
    let rhs = constant(&[2.0, 1.0]);
    let disc = make_disc(c(0.5), 0.4, 5).unwrap();
    let probes: Vec<(Vector, C64)> = disc
        .grid
        .iter()
        .flat_map(|&k| [-1.0, 0.0, 1.0].map(|s| (Vector::from_real(&[s, 2.0 * s]), k)))
        .collect();
    let report = check_assumption_j(&nf, &probes).unwrap();
    assert!(report.flagged.is_empty() && report.c3.unwrap() <= 1.0 + 1e-12);
    for &k in &disc.grid {
        let sweep = nonlinear_continuity(&nf, &rhs, k, &DEFAULT_H_SEQUENCE, &NewtonOptions::default(), &VerdictOptions::default()).unwrap();
        assert!(sweep.sweep.converged(), "k={k}");
    }
}
