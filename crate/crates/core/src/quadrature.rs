//! Gauss–Legendre rules on intervals.

use std::f64::consts::PI;

use crate::error::{Error, Result};

/// Region a quadrature rule integrates over.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Region {
    Interval { lo: f64, hi: f64 },
    /// Radial rule on `[0, radius]` for a ball of that radius.
    Ball { radius: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Quadrature {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
    pub region: Region,
}

impl Quadrature {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Endpoints of the 1-D parameter interval the nodes live in.
    pub fn bounds(&self) -> (f64, f64) {
        match self.region {
            Region::Interval { lo, hi } => (lo, hi),
            Region::Ball { radius } => (0.0, radius),
        }
    }

    pub fn integrate(&self, f: impl Fn(f64) -> f64) -> f64 {
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(&x, &w)| w * f(x))
            .sum()
    }

    /// Reinterpret an interval rule on `[0, a]` as a radial rule for the ball of radius `a`.
    pub fn into_radial(mut self) -> Result<Self> {
        match self.region {
            Region::Interval { lo: 0.0, hi } => {
                self.region = Region::Ball { radius: hi };
                Ok(self)
            }
            _ => Err(Error::invalid("radial rules must start at 0")),
        }
    }
}

/// Legendre polynomial P_n and its derivative at `x`.
fn legendre(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if n == 0 {
        return (1.0, 0.0);
    }
    for j in 2..=n {
        let j = j as f64;
        let p2 = ((2.0 * j - 1.0) * x * p1 - (j - 1.0) * p0) / j;
        p0 = p1;
        p1 = p2;
    }
    let n = n as f64;
    let dp = n * (x * p1 - p0) / (x * x - 1.0);
    (p1, dp)
}

/// n-point Gauss–Legendre rule on `[lo, hi]`, exact for polynomials of degree `2n - 1`.
pub fn gauss_legendre(n: usize, lo: f64, hi: f64) -> Result<Quadrature> {
    if n == 0 {
        return Err(Error::invalid("quadrature needs at least one node"));
    }
    if !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
        return Err(Error::invalid(format!("invalid interval [{lo}, {hi}]")));
    }
    let mut ref_nodes = vec![0.0; n];
    let mut ref_weights = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        for _ in 0..100 {
            let (p, dp) = legendre(n, x);
            let dx = p / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, dp) = legendre(n, x);
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        ref_nodes[i] = -x;
        ref_nodes[n - 1 - i] = x;
        ref_weights[i] = w;
        ref_weights[n - 1 - i] = w;
    }
    if n % 2 == 1 {
        ref_nodes[n / 2] = 0.0;
    }

    let half = 0.5 * (hi - lo);
    let mid = 0.5 * (hi + lo);
    Ok(Quadrature {
        nodes: ref_nodes.iter().map(|&t| mid + half * t).collect(),
        weights: ref_weights.iter().map(|&w| half * w).collect(),
        region: Region::Interval { lo, hi },
    })
}
