//! Empirical "tends to zero" verdicts for sequences sampled along decreasing steps.

use crate::diff::loglog_slope;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VerdictOptions {
    /// Minimum log-log slope over the tail.
    pub slope_threshold: f64,
    /// Number of trailing samples that must decrease strictly.
    pub tail: usize,
    /// Values at or below this are treated as exact zeros.
    pub zero_tol: f64,
}

impl Default for VerdictOptions {
    fn default() -> Self {
        VerdictOptions {
            slope_threshold: 0.9,
            tail: 3,
            zero_tol: 1e-13,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Verdict {
    pub slope: Option<f64>,
    pub converged: bool,
}

/// Decide whether `values[i]`, sampled at strictly decreasing `steps[i]`, tends to zero.
///
/// A tail that is identically zero (up to `zero_tol`) converges trivially. Otherwise the
/// last `tail` values must decrease strictly and their log-log slope must reach the
/// threshold.
pub fn tends_to_zero(steps: &[f64], values: &[f64], opts: &VerdictOptions) -> Verdict {
    let n = steps.len().min(values.len());
    if n == 0 {
        return Verdict {
            slope: None,
            converged: false,
        };
    }
    let tail = opts.tail.clamp(2, n.max(2)).min(n);
    let xs = &steps[n - tail..n];
    let ys = &values[n - tail..n];
    if ys.iter().any(|v| !v.is_finite()) {
        return Verdict {
            slope: None,
            converged: false,
        };
    }
    if ys.iter().all(|&v| v <= opts.zero_tol) {
        return Verdict {
            slope: None,
            converged: true,
        };
    }
    let slope = loglog_slope(xs, ys);
    let monotone = tail >= 2 && ys.windows(2).all(|w| w[1] < w[0]);
    Verdict {
        slope,
        converged: monotone && slope.is_some_and(|s| s >= opts.slope_threshold),
    }
}
