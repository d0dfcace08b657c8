//! Parameter discs, operator families and the built-in family registry.
//!
//! Derivatives with respect to `k` are directional: each family carries a unit
//! direction `e` and its derivative callbacks return `d/dt F(k + t e)` at `t = 0`.
//! Built-ins use the real axis, `e = 1`.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::linalg::{c, Matrix, Vector, C64};

pub type MatrixFn = Arc<dyn Fn(C64) -> Matrix + Send + Sync>;
pub type VectorFn = Arc<dyn Fn(C64) -> Vector + Send + Sync>;
pub type MapFn = Arc<dyn Fn(&Vector, C64) -> Vector + Send + Sync>;
pub type JacobianFn = Arc<dyn Fn(&Vector, C64) -> Matrix + Send + Sync>;

pub const DEFAULT_H_SEQUENCE: [f64; 6] = [1e-1, 1e-2, 1e-3, 1e-4, 1e-5, 1e-6];

/// The closed disc `{k : |k - center| <= radius}` together with its sample points.
#[derive(Debug, Clone, PartialEq)]
pub struct ParameterDisc {
    pub center: C64,
    pub radius: f64,
    pub grid: Vec<C64>,
    pub h_sequence: Vec<f64>,
}

impl ParameterDisc {
    pub fn contains(&self, k: C64) -> bool {
        (k - self.center).norm() <= self.radius
    }

    pub fn with_h_sequence(mut self, h_sequence: Vec<f64>) -> Result<Self> {
        validate_h_sequence(&h_sequence)?;
        self.h_sequence = h_sequence;
        Ok(self)
    }
}

pub fn validate_h_sequence(hs: &[f64]) -> Result<()> {
    if hs.is_empty() {
        return Err(Error::invalid("h_sequence must be nonempty"));
    }
    if hs.iter().any(|&h| !(h > 0.0) || !h.is_finite()) {
        return Err(Error::invalid("h_sequence entries must be positive"));
    }
    if hs.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::invalid("h_sequence must be strictly decreasing"));
    }
    Ok(())
}

/// Disc sampled uniformly along the real chord `[center - r, center + r]`.
pub fn make_disc(center: C64, radius: f64, n_samples: usize) -> Result<ParameterDisc> {
    check_radius(radius)?;
    if n_samples == 0 {
        return Err(Error::invalid("n_samples must be at least 1"));
    }
    let grid = if n_samples == 1 {
        vec![center]
    } else {
        let last = (n_samples - 1) as f64;
        (0..n_samples)
            .map(|i| center + radius * (2.0 * i as f64 / last - 1.0))
            .collect()
    };
    Ok(ParameterDisc {
        center,
        radius,
        grid,
        h_sequence: DEFAULT_H_SEQUENCE.to_vec(),
    })
}

/// Disc sampled on `rings` concentric circles with `spokes` points each, plus the center.
pub fn make_polar_disc(center: C64, radius: f64, rings: usize, spokes: usize) -> Result<ParameterDisc> {
    check_radius(radius)?;
    if spokes == 0 {
        return Err(Error::invalid("spokes must be at least 1"));
    }
    let mut grid = vec![center];
    for ring in 1..=rings {
        let rho = radius * ring as f64 / rings as f64;
        for s in 0..spokes {
            let theta = std::f64::consts::TAU * s as f64 / spokes as f64;
            grid.push(center + C64::from_polar(rho, theta));
        }
    }
    // The last ring can land a hair outside the disc after rounding.
    for k in grid.iter_mut() {
        let d = *k - center;
        if d.norm() > radius {
            *k = center + d * (radius / d.norm());
        }
    }
    Ok(ParameterDisc {
        center,
        radius,
        grid,
        h_sequence: DEFAULT_H_SEQUENCE.to_vec(),
    })
}

fn check_radius(radius: f64) -> Result<()> {
    if !(radius > 0.0) || !radius.is_finite() {
        return Err(Error::invalid(format!("disc radius must be positive, got {radius}")));
    }
    Ok(())
}

/// A map `k -> A(k)` into square matrices.
#[derive(Clone)]
pub struct LinearFamily {
    pub label: String,
    pub dim: usize,
    pub direction: C64,
    eval: MatrixFn,
    deriv: Option<MatrixFn>,
}

impl LinearFamily {
    pub fn new(
        label: impl Into<String>,
        dim: usize,
        eval: impl Fn(C64) -> Matrix + Send + Sync + 'static,
    ) -> Self {
        LinearFamily {
            label: label.into(),
            dim,
            direction: c(1.0),
            eval: Arc::new(eval),
            deriv: None,
        }
    }

    /// Attach the directional derivative along `self.direction`.
    pub fn with_derivative(mut self, deriv: impl Fn(C64) -> Matrix + Send + Sync + 'static) -> Self {
        self.deriv = Some(Arc::new(deriv));
        self
    }

    /// Set the (normalized) differentiation direction. Any derivative attached must agree with it.
    pub fn with_direction(mut self, e: C64) -> Self {
        self.direction = e / e.norm();
        self
    }

    pub fn constant(label: impl Into<String>, a: Matrix) -> Self {
        let n = a.dim();
        LinearFamily::new(label, n, move |_| a.clone()).with_derivative(move |_| Matrix::zeros(n))
    }

    pub fn at(&self, k: C64) -> Matrix {
        (self.eval)(k)
    }

    pub fn has_derivative(&self) -> bool {
        self.deriv.is_some()
    }

    pub fn derivative(&self, k: C64) -> Result<Matrix> {
        self.deriv
            .as_ref()
            .map(|d| d(k))
            .ok_or(Error::MissingCapability("linear family has no k-derivative"))
    }

    /// `k + h e`
    pub fn step(&self, k: C64, h: f64) -> C64 {
        k + self.direction * h
    }
}

impl fmt::Debug for LinearFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("LinearFamily")
            .field("label", &self.label)
            .field("dim", &self.dim)
            .field("direction", &self.direction)
            .field("has_derivative", &self.deriv.is_some())
            .finish()
    }
}

/// A right-hand side `k -> f(k)`.
#[derive(Clone)]
pub struct RhsFamily {
    pub label: String,
    pub dim: usize,
    eval: VectorFn,
    deriv: Option<VectorFn>,
}

impl RhsFamily {
    pub fn new(
        label: impl Into<String>,
        dim: usize,
        eval: impl Fn(C64) -> Vector + Send + Sync + 'static,
    ) -> Self {
        RhsFamily {
            label: label.into(),
            dim,
            eval: Arc::new(eval),
            deriv: None,
        }
    }

    pub fn with_derivative(mut self, deriv: impl Fn(C64) -> Vector + Send + Sync + 'static) -> Self {
        self.deriv = Some(Arc::new(deriv));
        self
    }

    pub fn constant(f: Vector) -> Self {
        let n = f.len();
        RhsFamily::new("constant", n, move |_| f.clone()).with_derivative(move |_| Vector::zeros(n))
    }

    /// `f(k) = f0 + k f1`, differentiated along `direction`.
    pub fn affine(f0: Vector, f1: Vector, direction: C64) -> Self {
        let n = f0.len();
        let g1 = f1.clone();
        RhsFamily::new("affine", n, move |k| f0.axpy(k, &f1))
            .with_derivative(move |_| g1.scale(direction))
    }

    pub fn at(&self, k: C64) -> Vector {
        (self.eval)(k)
    }

    pub fn has_derivative(&self) -> bool {
        self.deriv.is_some()
    }

    pub fn derivative(&self, k: C64) -> Result<Vector> {
        self.deriv
            .as_ref()
            .map(|d| d(k))
            .ok_or(Error::MissingCapability("right-hand side has no k-derivative"))
    }
}

impl fmt::Debug for RhsFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("RhsFamily")
            .field("label", &self.label)
            .field("dim", &self.dim)
            .field("has_derivative", &self.deriv.is_some())
            .finish()
    }
}

/// A map `(u, k) -> A(u, k)` with optional Fréchet derivative in `u` and partial in `k`.
#[derive(Clone)]
pub struct NonlinearFamily {
    pub label: String,
    pub dim: usize,
    pub direction: C64,
    eval: MapFn,
    frechet: Option<JacobianFn>,
    partial_k: Option<MapFn>,
}

impl NonlinearFamily {
    pub fn new(
        label: impl Into<String>,
        dim: usize,
        eval: impl Fn(&Vector, C64) -> Vector + Send + Sync + 'static,
    ) -> Self {
        NonlinearFamily {
            label: label.into(),
            dim,
            direction: c(1.0),
            eval: Arc::new(eval),
            frechet: None,
            partial_k: None,
        }
    }

    pub fn with_frechet(mut self, d: impl Fn(&Vector, C64) -> Matrix + Send + Sync + 'static) -> Self {
        self.frechet = Some(Arc::new(d));
        self
    }

    pub fn with_partial_k(mut self, d: impl Fn(&Vector, C64) -> Vector + Send + Sync + 'static) -> Self {
        self.partial_k = Some(Arc::new(d));
        self
    }

    pub fn with_direction(mut self, e: C64) -> Self {
        self.direction = e / e.norm();
        self
    }

    /// `A(u, k) = A(k) u`.
    pub fn wrap_linear(fam: &LinearFamily) -> Self {
        let eval = fam.clone();
        let jac = fam.clone();
        let mut out = NonlinearFamily::new(format!("linear-wrapped({})", fam.label), fam.dim, move |u, k| {
            eval.at(k).mul_vec(u)
        })
        .with_frechet(move |_, k| jac.at(k))
        .with_direction(fam.direction);
        if fam.has_derivative() {
            let part = fam.clone();
            out = out.with_partial_k(move |u, k| {
                part.derivative(k)
                    .expect("derivative presence checked at construction")
                    .mul_vec(u)
            });
        }
        out
    }

    pub fn apply(&self, u: &Vector, k: C64) -> Vector {
        (self.eval)(u, k)
    }

    pub fn has_frechet(&self) -> bool {
        self.frechet.is_some()
    }

    pub fn has_partial_k(&self) -> bool {
        self.partial_k.is_some()
    }

    pub fn frechet(&self, u: &Vector, k: C64) -> Result<Matrix> {
        self.frechet
            .as_ref()
            .map(|d| d(u, k))
            .ok_or(Error::MissingCapability("nonlinear family has no Frechet derivative"))
    }

    pub fn partial_k(&self, u: &Vector, k: C64) -> Result<Vector> {
        self.partial_k
            .as_ref()
            .map(|d| d(u, k))
            .ok_or(Error::MissingCapability("nonlinear family has no k-partial derivative"))
    }

    pub fn step(&self, k: C64, h: f64) -> C64 {
        k + self.direction * h
    }
}

impl fmt::Debug for NonlinearFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("NonlinearFamily")
            .field("label", &self.label)
            .field("dim", &self.dim)
            .field("direction", &self.direction)
            .field("has_frechet", &self.frechet.is_some())
            .field("has_partial_k", &self.partial_k.is_some())
            .finish()
    }
}

/// Largest relative gap between the Fréchet derivative applied to each direction and
/// the central difference of the map along it.
pub fn frechet_check(nf: &NonlinearFamily, u: &Vector, k: C64, directions: &[Vector], h: f64) -> Result<f64> {
    if !(h > 0.0) {
        return Err(Error::invalid("step h must be positive"));
    }
    let jac = nf.frechet(u, k)?;
    let mut worst: f64 = 0.0;
    for d in directions {
        if d.len() != nf.dim || u.len() != nf.dim {
            return Err(Error::invalid("direction dimension does not match the family"));
        }
        let plus = nf.apply(&u.axpy(c(h), d), k);
        let minus = nf.apply(&u.axpy(c(-h), d), k);
        let fd = (&plus - &minus).scale(c(0.5 / h));
        let exact = jac.mul_vec(d);
        let gap = (&fd - &exact).norm() / (exact.norm() + 1e-14);
        worst = worst.max(gap);
    }
    Ok(worst)
}

#[derive(Debug, Clone, PartialEq)]
pub enum ParamValue {
    Number(f64),
    List(Vec<f64>),
    Text(String),
}

/// Named numeric parameters for registry constructors.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Params(pub BTreeMap<String, ParamValue>);

impl Params {
    pub fn new() -> Self {
        Params(BTreeMap::new())
    }

    pub fn with(mut self, key: &str, value: ParamValue) -> Self {
        self.0.insert(key.to_string(), value);
        self
    }

    pub fn num(self, key: &str, x: f64) -> Self {
        self.with(key, ParamValue::Number(x))
    }

    pub fn list(self, key: &str, xs: &[f64]) -> Self {
        self.with(key, ParamValue::List(xs.to_vec()))
    }

    pub fn text(self, key: &str, s: &str) -> Self {
        self.with(key, ParamValue::Text(s.to_string()))
    }

    pub fn get(&self, key: &str) -> Option<&ParamValue> {
        self.0.get(key)
    }

    pub fn number_or(&self, key: &str, default: f64) -> Result<f64> {
        match self.0.get(key) {
            None => Ok(default),
            Some(ParamValue::Number(x)) => Ok(*x),
            Some(_) => Err(Error::invalid(format!("parameter '{key}' must be a number"))),
        }
    }

    pub fn count_or(&self, key: &str, default: usize) -> Result<usize> {
        let x = self.number_or(key, default as f64)?;
        if x < 0.0 || x.fract() != 0.0 || !x.is_finite() {
            return Err(Error::invalid(format!("parameter '{key}' must be a nonnegative integer")));
        }
        Ok(x as usize)
    }

    /// A complex value given either as a number or as `[re, im]`.
    pub fn complex_or(&self, key: &str, default: C64) -> Result<C64> {
        match self.0.get(key) {
            None => Ok(default),
            Some(ParamValue::Number(x)) => Ok(c(*x)),
            Some(ParamValue::List(v)) if v.len() == 2 => Ok(C64::new(v[0], v[1])),
            Some(_) => Err(Error::invalid(format!(
                "parameter '{key}' must be a number or a [re, im] pair"
            ))),
        }
    }

    pub fn list_or(&self, key: &str, default: &[f64]) -> Result<Vec<f64>> {
        match self.0.get(key) {
            None => Ok(default.to_vec()),
            Some(ParamValue::List(v)) => Ok(v.clone()),
            Some(ParamValue::Number(x)) => Ok(vec![*x]),
            Some(_) => Err(Error::invalid(format!("parameter '{key}' must be a list of numbers"))),
        }
    }

    pub fn text_or(&self, key: &str, default: &str) -> Result<String> {
        match self.0.get(key) {
            None => Ok(default.to_string()),
            Some(ParamValue::Text(s)) => Ok(s.clone()),
            Some(_) => Err(Error::invalid(format!("parameter '{key}' must be a string"))),
        }
    }

    /// Reject keys outside `allowed`.
    pub fn expect_keys(&self, owner: &str, allowed: &[&str]) -> Result<()> {
        for key in self.0.keys() {
            if !allowed.contains(&key.as_str()) {
                return Err(Error::invalid(format!(
                    "unknown parameter '{key}' for '{owner}' (allowed: {})",
                    allowed.join(", ")
                )));
            }
        }
        Ok(())
    }

    fn without(&self, key: &str) -> Params {
        let mut p = self.clone();
        p.0.remove(key);
        p
    }
}

#[derive(Debug, Clone)]
pub enum Family {
    Linear(LinearFamily),
    Nonlinear(NonlinearFamily),
}

impl Family {
    pub fn dim(&self) -> usize {
        match self {
            Family::Linear(f) => f.dim,
            Family::Nonlinear(f) => f.dim,
        }
    }

    pub fn label(&self) -> &str {
        match self {
            Family::Linear(f) => &f.label,
            Family::Nonlinear(f) => &f.label,
        }
    }
}

/// Built-in family names with their parameter keys.
pub const REGISTRY: &[(&str, &[&str])] = &[
    ("identity", &["dim"]),
    ("diag-shift", &["dim"]),
    ("affine-matrix", &["dim", "seed", "rate"]),
    ("diag-near-singular", &["dim", "k_star"]),
    ("remark12", &["dim", "g", "k0"]),
    ("cubic-pointwise", &["dim"]),
    ("linear-wrapped", &["inner", "dim", "seed", "rate", "k_star", "g", "k0"]),
];

pub fn registry_names() -> Vec<String> {
    REGISTRY.iter().map(|(n, _)| n.to_string()).collect()
}

fn allowed_keys(name: &str) -> &'static [&'static str] {
    REGISTRY
        .iter()
        .find(|(n, _)| *n == name)
        .map(|(_, keys)| *keys)
        .unwrap_or(&[])
}

/// Build a registered family. Construction is deterministic in `(name, params)`.
pub fn registry_build(name: &str, params: &Params) -> Result<Family> {
    if !REGISTRY.iter().any(|(n, _)| *n == name) {
        return Err(Error::NotFound {
            kind: "family",
            name: name.to_string(),
            available: registry_names(),
        });
    }
    params.expect_keys(name, allowed_keys(name))?;
    let dim_param = |default: usize| -> Result<usize> {
        let n = params.count_or("dim", default)?;
        if n == 0 {
            return Err(Error::invalid("dim must be at least 1"));
        }
        Ok(n)
    };

    let family = match name {
        "identity" => {
            let n = dim_param(2)?;
            Family::Linear(LinearFamily::constant("identity", Matrix::identity(n)))
        }
        "diag-shift" => Family::Linear(diag_shift(dim_param(2)?)),
        "affine-matrix" => {
            let n = dim_param(4)?;
            let seed = params.count_or("seed", 0)? as u64;
            let rate = params.number_or("rate", 1.0)?;
            Family::Linear(affine_matrix(n, seed, rate))
        }
        "diag-near-singular" => {
            let n = dim_param(2)?;
            let k_star = params.complex_or("k_star", c(0.0))?;
            Family::Linear(diag_near_singular(n, k_star))
        }
        "remark12" => {
            let g = params.list_or("g", &[1.0, 0.0])?;
            let n = dim_param(g.len())?;
            if n != g.len() {
                return Err(Error::invalid("remark12: dim must match the length of g"));
            }
            let k0 = params.complex_or("k0", c(0.0))?;
            Family::Linear(remark12(n, k0))
        }
        "cubic-pointwise" => Family::Nonlinear(cubic_pointwise(dim_param(1)?)),
        "linear-wrapped" => {
            let inner = params.text_or("inner", "diag-shift")?;
            let inner_params = params.without("inner");
            match registry_build(&inner, &inner_params)? {
                Family::Linear(f) => Family::Nonlinear(NonlinearFamily::wrap_linear(&f)),
                Family::Nonlinear(_) => {
                    return Err(Error::invalid(format!("linear-wrapped: '{inner}' is not a linear family")))
                }
            }
        }
        _ => unreachable!("name checked against the registry"),
    };
    Ok(family)
}

/// `diag(1, ..., 1, 1 + k)`
pub fn diag_shift(n: usize) -> LinearFamily {
    LinearFamily::new("diag-shift", n, move |k| {
        let mut d = vec![c(1.0); n];
        d[n - 1] = 1.0 + k;
        Matrix::from_diag(&d)
    })
    .with_derivative(move |_| {
        let mut d = vec![c(0.0); n];
        d[n - 1] = c(1.0);
        Matrix::from_diag(&d)
    })
}

/// `diag(1, ..., 1, k - k_star)`: singular exactly at `k_star`.
pub fn diag_near_singular(n: usize, k_star: C64) -> LinearFamily {
    LinearFamily::new("diag-near-singular", n, move |k| {
        let mut d = vec![c(1.0); n];
        d[n - 1] = k - k_star;
        Matrix::from_diag(&d)
    })
    .with_derivative(move |_| {
        let mut d = vec![c(0.0); n];
        d[n - 1] = c(1.0);
        Matrix::from_diag(&d)
    })
}

/// `A(k0) = I` and `A(k) = 2I` everywhere else. Discontinuous at `k0`, so no derivative.
pub fn remark12(n: usize, k0: C64) -> LinearFamily {
    LinearFamily::new("remark12", n, move |k| {
        if k == k0 {
            Matrix::identity(n)
        } else {
            Matrix::identity(n).scale(c(2.0))
        }
    })
}

/// `A(k) = A0 + (s k) A1 + (s k)^2 A2` with seeded random coefficients and rate `s`.
///
/// `A0 = 4I + R0` and `A1 = R1`, `A2 = R2 / 2`, where each `R` has i.i.d. entries uniform
/// on `[-1, 1] / sqrt(n)`, which keeps `A(k)` comfortably invertible for `|s k| <= 1`.
pub fn affine_matrix(n: usize, seed: u64, rate: f64) -> LinearFamily {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let scale = 1.0 / (n as f64).sqrt();
    let mut random = |mult: f64| Matrix::from_fn(n, |_, _| c(mult * scale * rng.random_range(-1.0..=1.0)));
    let a0 = &Matrix::identity(n).scale(c(4.0)) + &random(1.0);
    let a1 = random(1.0);
    let a2 = random(0.5);
    let (b1, b2) = (a1.clone(), a2.clone());
    LinearFamily::new(format!("affine-matrix(seed={seed})"), n, move |k| {
        let t = k * rate;
        a0.axpy(t, &a1).axpy(t * t, &a2)
    })
    .with_derivative(move |k| {
        let t = k * rate;
        b1.axpy(2.0 * t, &b2).scale(c(rate))
    })
}

/// `A(u, k) = u + k u^3` componentwise.
pub fn cubic_pointwise(n: usize) -> NonlinearFamily {
    NonlinearFamily::new("cubic-pointwise", n, |u, k| u.map(|x| x + k * x * x * x))
        .with_frechet(|u, k| Matrix::from_diag(&u.map(|x| 1.0 + 3.0 * k * x * x).into_inner()))
        .with_partial_k(|u, _| u.map(|x| x * x * x))
}
