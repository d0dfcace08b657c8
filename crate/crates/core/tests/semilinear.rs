mod common;

use common::{error_slope, H_ORDER};
use paramop_core::diff::central_diff;
use paramop_core::families::{make_disc, RhsFamily};
use paramop_core::nonlinear::{newton_solve, nonlinear_sensitivity, NewtonOptions, SensitivityOptions};
use paramop_core::semilinear::{
    assemble, g_build, m_bound, semilinear_continuity, semilinear_solve, transformed_rhs, yukawa_radial_operator,
    NonlinearityG, G_REGISTRY,
};
use paramop_core::{c, Matrix, Vector, C64};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::f64::consts::PI;

/// Composite Simpson rule for `∫_0^{ka} s e^{-s} ds / k^2`, truncated where the tail is below 1e-20.
fn m_bound_simpson(k: f64, a: f64) -> f64 {
    let upper = (k * a).min(60.0);
    let n = 200_000;
    let h = upper / n as f64;
    let f = |s: f64| s * (-s).exp();
    let mut acc = f(0.0) + f(upper);
    for i in 1..n {
        acc += if i % 2 == 1 { 4.0 } else { 2.0 } * f(i as f64 * h);
    }
    acc * h / 3.0 / (k * k)
}

#[test]
fn m_bound_matches_direct_quadrature_on_log_grid() {
    for k in [1e-3, 1e-2, 1e-1, 1.0, 10.0, 100.0] {
        for a in [1e-2, 1e-1, 1.0, 10.0] {
            let closed = m_bound(k, a).unwrap();
            let numeric = m_bound_simpson(k, a);
            assert!((closed - numeric).abs() <= 1e-10 * numeric, "k={k} a={a}: {closed} vs {numeric}");
        }
    }
}

#[test]
fn radial_operator_norms_respect_m_bound() {
    for (kappa, a) in [(1.0, 1.0), (0.5, 2.0), (3.0, 0.7), (0.1, 1.0)] {
        let m = m_bound(kappa, a).unwrap();
        for n in [16, 24, 40] {
            let op = yukawa_radial_operator(kappa, a, n).unwrap();
            assert!(op.operator_norm() <= m * (1.0 + 1e-6), "kappa={kappa} a={a} n={n}");
            assert!(op.sup_norm() <= m * (1.0 + 1e-3), "kappa={kappa} a={a} n={n}: {} vs {m}", op.sup_norm());
        }
    }
}

#[test]
fn radial_reduction_matches_three_dimensional_grid() {
    let (kappa, a, r) = (1.0, 1.0, 0.5);
    let op = yukawa_radial_operator(kappa, a, 32).unwrap();
    let radial = op.apply_at(r, &Vector::from_real(&[1.0; 32])).unwrap().re;

    let n = 60;
    let cell = 2.0 * a / n as f64;
    let mut brute = 0.0;
    for i in 0..n {
        let x = -a + (i as f64 + 0.5) * cell;
        for j in 0..n {
            let y = -a + (j as f64 + 0.5) * cell;
            for l in 0..n {
                let z = -a + (l as f64 + 0.5) * cell;
                if x * x + y * y + z * z > a * a {
                    continue;
                }
                let d = ((x - r).powi(2) + y * y + z * z).sqrt();
                brute += (-kappa * d).exp() / (4.0 * PI * d);
            }
        }
    }
    brute *= cell.powi(3);
    assert!((radial - brute).abs() <= 1e-3, "{radial} vs {brute}");
}

#[test]
fn kernel_entries_are_nonnegative() {
    for (kappa, a, n) in [(1.0, 1.0, 16), (5.0, 0.3, 20), (0.01, 3.0, 18)] {
        let op = yukawa_radial_operator(kappa, a, n).unwrap();
        for i in 0..n {
            for j in 0..n {
                assert!(op.matrix[(i, j)].re >= 0.0);
            }
        }
    }
}

#[test]
fn builtin_nonlinearities_are_consistent() {
    let ks = [c(0.5), c(1.0), c(1.5)];
    for name in G_REGISTRY {
        let g = g_build(name).unwrap();
        for &k in &ks {
            for u in [-1.0, 0.3, 1.2] {
                let fd = central_diff(|t| Ok::<_, ()>(g.at(c(u + t), k)), 0.0, 1e-5).unwrap();
                assert!((fd - g.du(c(u), k)).norm() <= 1e-8, "{name}");
                let fdk = central_diff(|t| Ok::<_, ()>(g.at(c(u), k + t)), 0.0, 1e-5).unwrap();
                assert!((fdk - g.dk(c(u), k).unwrap()).norm() <= 1e-8, "{name}");
            }
        }
        let env: Vec<f64> = [0.1, 0.5, 1.0, 2.0].iter().map(|&r| g.envelope(r, &ks)).collect();
        assert!(env.iter().all(|&e| e >= 0.0));
        if *name != "zero" {
            assert!(env.windows(2).all(|w| w[0] <= w[1]), "{name}");
        }
    }
}

#[test]
fn scalar_surrogate_sensitivity_closed_form() {
    let (m, cst) = (0.4, 3.0);
    let linv = Matrix::identity(3).scale(c(m));
    let f1 = RhsFamily::constant(Vector::from_real(&[cst; 3]));
    let disc = make_disc(c(1.0), 0.5, 5).unwrap();
    let out = semilinear_continuity(&NonlinearityG::linear(), &linv, &f1, &disc, &SensitivityOptions::default()).unwrap();
    for rec in &out.sensitivity.records {
        let k = rec.k.re;
        assert!((rec.u[0].re - m * cst / (1.0 + m * k)).abs() <= 1e-12);
        assert!((rec.udot[0].re + m * m * cst / (1.0 + m * k).powi(2)).abs() <= 1e-12);
        assert!(rec.rel_gap <= 1e-6);
    }
}

#[test]
fn zero_nonlinearity_has_zero_modulus() {
    let op = yukawa_radial_operator(1.0, 1.0, 16).unwrap();
    let f1 = RhsFamily::constant(Vector::from_real(&[1.0; 16]));
    let disc = make_disc(c(1.0), 0.5, 3).unwrap();
    let out = semilinear_continuity(&NonlinearityG::zero(), &op.matrix, &f1, &disc, &SensitivityOptions::default()).unwrap();
    for sweep in &out.continuity {
        assert!(sweep.sweep.records.iter().all(|r| r.omega == 0.0));
        assert!(sweep.sweep.converged());
    }
}

#[test]
fn cubic_on_yukawa_is_continuous_with_second_order_sensitivity() {
    let op = yukawa_radial_operator(1.0, 1.0, 16).unwrap();
    let f1 = RhsFamily::constant(Vector::from_real(&[2.0; 16]));
    let g = NonlinearityG::cubic();
    let disc = make_disc(c(1.0), 0.5, 5).unwrap();
    let opts = SensitivityOptions::default();
    let out = semilinear_continuity(&g, &op.matrix, &f1, &disc, &opts).unwrap();
    assert!(out.continuity.iter().all(|s| s.sweep.converged()));
    assert!(out.sensitivity.all_converged());
    assert!(out.sensitivity.max_linearization_residual() <= 1e-9);

    let nf = assemble(&g, &op.matrix);
    let rhs = transformed_rhs(&op.matrix, &f1);
    for &k in &disc.grid {
        let solve = |kk: C64| newton_solve(&nf, &rhs, kk, &Vector::zeros(16), &opts.newton).map(|o| o.u);
        let u = solve(k).unwrap();
        let udot = nonlinear_sensitivity(&nf, &rhs, k, &u).unwrap().udot;
        let slope = error_slope(&H_ORDER, |h| (&central_diff(|t| solve(k + t), 0.0, h).unwrap() - &udot).norm());
        assert!((slope - 2.0).abs() <= 0.1, "k={k}: slope {slope}");
    }
}

#[test]
fn newton_agrees_with_plain_fixed_point_iteration() {
    let op = yukawa_radial_operator(2.0, 1.0, 16).unwrap();
    let f1 = Vector::from_fn(16, |i| c(1.0 + 0.1 * i as f64));
    let g = NonlinearityG::exp();
    let k = c(0.5);
    let sol = semilinear_solve(&g, &op.matrix, &f1, k, &NewtonOptions::default()).unwrap();
    assert!(sol.contraction < 1.0);

    let base = op.matrix.mul_vec(&f1);
    let mut u = Vector::zeros(16);
    for _ in 0..500 {
        let gu = Vector::from_fn(16, |i| 0.5 * (u[i].exp() - 1.0));
        u = &base - &op.matrix.mul_vec(&gu);
    }
    assert!((&u - &sol.u).norm_inf() <= 1e-10);
}

#[test]
fn two_starts_reach_the_same_solution() {
    let g = NonlinearityG::cubic();
    for seed in 0..5u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let kappa = rng.random_range(0.5..2.0);
        let a = rng.random_range(0.5..2.0);
        let k = c(rng.random_range(0.5..1.5));
        let op = yukawa_radial_operator(kappa, a, 16).unwrap();
        let f1 = Vector::from_fn(16, |_| c(rng.random_range(0.5..2.0)));
        let nf = assemble(&g, &op.matrix);
        let rhs = RhsFamily::constant(op.matrix.mul_vec(&f1));
        let opts = NewtonOptions::default();
        let from_zero = newton_solve(&nf, &rhs, k, &Vector::zeros(16), &opts).unwrap().u;
        let from_linear = newton_solve(&nf, &rhs, k, &op.matrix.mul_vec(&f1), &opts).unwrap().u;
        assert!((&from_zero - &from_linear).norm() <= 1e-9, "seed {seed}");
    }
}
