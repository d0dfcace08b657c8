#![allow(dead_code)]

use paramop_core::diff::loglog_slope;

pub const H_ORDER: [f64; 4] = [1e-1, 1e-2, 1e-3, 1e-4];
pub const H_INVERSE: [f64; 4] = [1e-2, 1e-3, 1e-4, 1e-5];

/// Log-log slope of `err(h)` over `hs`.
pub fn error_slope(hs: &[f64], mut err: impl FnMut(f64) -> f64) -> f64 {
    let errs: Vec<f64> = hs.iter().map(|&h| err(h)).collect();
    loglog_slope(hs, &errs).expect("positive errors")
}

/// Bisection root of the increasing map `u + k u^3 - f` on `[0, f]`.
pub fn cubic_root(k: f64, f: f64) -> f64 {
    let (mut lo, mut hi) = (0.0_f64, f);
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
