//! Semilinear problems `L u + g(u, k) = f1(k)` rewritten as `u + L^-1 g(u, k) = L^-1 f1(k)`,
//! with `L^-1` realized by the free-space Yukawa kernel `exp(-κ|x-y|) / (4π|x-y|)` on a
//! ball, reduced to radial data.

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::families::{NonlinearFamily, ParameterDisc, Params, RhsFamily};
use crate::linalg::{c, operator_norm, Matrix, Vector, C64};
use crate::nonlinear::{
    newton_solve, nonlinear_continuity, sensitivity_continuity, NewtonOptions, NonlinearSweep, SensitivityOptions,
    SensitivitySweep,
};
use crate::quadrature::{gauss_legendre, Quadrature};

/// `∫_0^{ka} s e^{-s} ds / k^2 = (1 - (1 + ka) e^{-ka}) / k^2`.
pub fn m_bound(k: f64, a: f64) -> Result<f64> {
    if !(k > 0.0) || !(a > 0.0) || !k.is_finite() || !a.is_finite() {
        return Err(Error::invalid(format!("m_bound needs k > 0 and a > 0, got k={k}, a={a}")));
    }
    let x = k * a;
    let integral = if x < 0.5 {
        // 1 - (1 + x) e^{-x} = Σ_{n>=2} (-1)^n (n - 1) x^n / n!, free of cancellation.
        let mut term = x * x / 2.0;
        let mut sum = term;
        for n in 3..40 {
            let nf = n as f64;
            term *= -x / nf;
            let add = term * (nf - 1.0);
            sum += add;
            if add.abs() < 1e-18 * sum.abs() {
                break;
            }
        }
        sum
    } else {
        1.0 - (1.0 + x) * (-x).exp()
    };
    Ok(integral / (k * k))
}

/// Angular average over the sphere `|y| = s` of `exp(-κ|x-y|) / (4π|x-y|)` with `|x| = r`.
pub fn radial_kernel(kappa: f64, r: f64, s: f64) -> f64 {
    let (lo, hi) = if r < s { (r, s) } else { (s, r) };
    if lo == 0.0 {
        return if hi == 0.0 { f64::INFINITY } else { (-kappa * hi).exp() / hi };
    }
    (-kappa * hi).exp() * (kappa * lo).sinh() / (kappa * r * s)
}

/// Discretized `v(s) -> ∫_ball exp(-κ|x-y|)/(4π|x-y|) v(|y|) dy` at Gauss radial nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct RadialOperator {
    pub a: f64,
    pub kappa: f64,
    pub quadrature: Quadrature,
    /// `M[i][j] = w_j s_j^2 κ(r_i, s_j)`
    pub matrix: Matrix,
}

impl RadialOperator {
    pub fn dim(&self) -> usize {
        self.quadrature.len()
    }

    /// Operator norm on radial functions in `L^2(ball)`: the spectral norm of
    /// `D^{1/2} M D^{-1/2}` with `D = diag(w_i r_i^2)`.
    pub fn operator_norm(&self) -> f64 {
        let q = &self.quadrature;
        let d: Vec<f64> = q.nodes.iter().zip(&q.weights).map(|(r, w)| (w * r * r).sqrt()).collect();
        let sym = Matrix::from_fn(self.dim(), |i, j| self.matrix[(i, j)] * (d[i] / d[j]));
        operator_norm(&sym).expect("finite radial matrix")
    }

    /// Euclidean spectral norm of the raw node matrix.
    pub fn raw_spectral_norm(&self) -> f64 {
        operator_norm(&self.matrix).expect("finite radial matrix")
    }

    /// Maximum row sum, the discrete sup-norm operator bound.
    pub fn sup_norm(&self) -> f64 {
        self.matrix.norm_inf()
    }

    /// Evaluate `(L^-1 v)(r)` at any radius in `[0, a]`, including the center.
    pub fn apply_at(&self, r: f64, v: &Vector) -> Result<C64> {
        if !(0.0..=self.a).contains(&r) {
            return Err(Error::Domain { x: r, lo: 0.0, hi: self.a });
        }
        let q = &self.quadrature;
        Ok((0..q.len())
            .map(|j| {
                let s = q.nodes[j];
                v[j] * (q.weights[j] * s * s * radial_kernel(self.kappa, r, s))
            })
            .sum())
    }
}

pub fn yukawa_radial_operator(kappa: f64, a: f64, n_nodes: usize) -> Result<RadialOperator> {
    if !(kappa > 0.0) || !(a > 0.0) {
        return Err(Error::invalid(format!("need kappa > 0 and a > 0, got {kappa}, {a}")));
    }
    if n_nodes < 2 {
        return Err(Error::invalid("radial operator needs at least 2 nodes"));
    }
    let q = gauss_legendre(n_nodes, 0.0, a)?.into_radial()?;
    let matrix = Matrix::from_fn(n_nodes, |i, j| {
        let s = q.nodes[j];
        c(q.weights[j] * s * s * radial_kernel(kappa, q.nodes[i], s))
    });
    Ok(RadialOperator {
        a,
        kappa,
        quadrature: q,
        matrix,
    })
}

pub type ScalarFn = Arc<dyn Fn(C64, C64) -> C64 + Send + Sync>;

/// Pointwise nonlinearity `g(u, k)` with its partial derivatives.
#[derive(Clone)]
pub struct NonlinearityG {
    pub label: String,
    eval: ScalarFn,
    du: ScalarFn,
    dk: Option<ScalarFn>,
}

impl NonlinearityG {
    pub fn new(
        label: impl Into<String>,
        eval: impl Fn(C64, C64) -> C64 + Send + Sync + 'static,
        du: impl Fn(C64, C64) -> C64 + Send + Sync + 'static,
    ) -> Self {
        NonlinearityG {
            label: label.into(),
            eval: Arc::new(eval),
            du: Arc::new(du),
            dk: None,
        }
    }

    pub fn with_dk(mut self, dk: impl Fn(C64, C64) -> C64 + Send + Sync + 'static) -> Self {
        self.dk = Some(Arc::new(dk));
        self
    }

    pub fn zero() -> Self {
        NonlinearityG::new("zero", |_, _| c(0.0), |_, _| c(0.0)).with_dk(|_, _| c(0.0))
    }

    /// `g = k u`
    pub fn linear() -> Self {
        NonlinearityG::new("linear", |u, k| k * u, |_, k| k).with_dk(|u, _| u)
    }

    /// `g = k u^3`
    pub fn cubic() -> Self {
        NonlinearityG::new("cubic", |u, k| k * u * u * u, |u, k| 3.0 * k * u * u).with_dk(|u, _| u * u * u)
    }

    /// `g = k (e^u - 1)`
    pub fn exp() -> Self {
        NonlinearityG::new("exp", |u, k| k * (u.exp() - 1.0), |u, k| k * u.exp()).with_dk(|u, _| u.exp() - 1.0)
    }

    pub fn at(&self, u: C64, k: C64) -> C64 {
        (self.eval)(u, k)
    }

    pub fn du(&self, u: C64, k: C64) -> C64 {
        (self.du)(u, k)
    }

    pub fn dk(&self, u: C64, k: C64) -> Result<C64> {
        self.dk
            .as_ref()
            .map(|d| d(u, k))
            .ok_or(Error::MissingCapability("nonlinearity has no k-derivative"))
    }

    /// `max_k |g(R, k)|` over the sample grid.
    pub fn envelope(&self, r: f64, k_grid: &[C64]) -> f64 {
        k_grid.iter().map(|&k| self.at(c(r), k).norm()).fold(0.0, f64::max)
    }
}

impl fmt::Debug for NonlinearityG {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("NonlinearityG").field("label", &self.label).finish()
    }
}

pub const G_REGISTRY: &[&str] = &["zero", "linear", "cubic", "exp"];

pub fn g_build(name: &str) -> Result<NonlinearityG> {
    match name {
        "zero" => Ok(NonlinearityG::zero()),
        "linear" => Ok(NonlinearityG::linear()),
        "cubic" => Ok(NonlinearityG::cubic()),
        "exp" => Ok(NonlinearityG::exp()),
        _ => Err(Error::NotFound {
            kind: "nonlinearity",
            name: name.to_string(),
            available: G_REGISTRY.iter().map(|s| s.to_string()).collect(),
        }),
    }
}

/// Parameters for [`yukawa_radial_operator`] from a parameter set (`kappa`, `a`, `nodes`).
pub fn radial_operator_from_params(params: &Params) -> Result<RadialOperator> {
    yukawa_radial_operator(
        params.number_or("kappa", 1.0)?,
        params.number_or("a", 1.0)?,
        params.count_or("nodes", 16)?,
    )
}

#[derive(Debug, Clone, PartialEq)]
pub struct SelfMapReport {
    /// `min_R g(R) / R` over the grid.
    pub min_ratio: f64,
    pub inverse_m: f64,
    /// `min_R g(R) / R <= 1 / m`.
    pub literal_condition: bool,
    /// Smallest grid `R` with `m g(R) + |f|_inf <= R`, if any.
    pub invariant_ball: Option<f64>,
    /// `g_u(u, k) > 0` at every sampled `u > 0` and grid `k`.
    pub uniqueness: bool,
}

/// Check the self-map and uniqueness conditions for the fixed-point form.
///
/// `r_grid` must be increasing and positive; `k_grid` supplies the envelope and the
/// uniqueness probes; `f_inf` is `|L^-1 f1|_inf`.
pub fn selfmap_check(g: &NonlinearityG, m: f64, r_grid: &[f64], k_grid: &[C64], f_inf: f64) -> Result<SelfMapReport> {
    if r_grid.is_empty() || k_grid.is_empty() {
        return Err(Error::invalid("R and k grids must be nonempty"));
    }
    if r_grid.iter().any(|&r| !(r > 0.0)) || r_grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::invalid("R grid must be positive and increasing"));
    }
    let inverse_m = if m > 0.0 { 1.0 / m } else { f64::INFINITY };
    let min_ratio = r_grid
        .iter()
        .map(|&r| g.envelope(r, k_grid) / r)
        .fold(f64::INFINITY, f64::min);
    let invariant_ball = r_grid
        .iter()
        .copied()
        .find(|&r| m * g.envelope(r, k_grid) + f_inf <= r);
    let uniqueness = r_grid
        .iter()
        .all(|&u| k_grid.iter().all(|&k| g.du(c(u), k).re > 0.0));
    Ok(SelfMapReport {
        min_ratio,
        inverse_m,
        literal_condition: min_ratio <= inverse_m,
        invariant_ball,
        uniqueness,
    })
}

/// `A(u, k) = u + L^-1 g(u, k)` with `A' = I + L^-1 diag(g_u)` and `Adot = L^-1 g_k`.
pub fn assemble(g: &NonlinearityG, linv: &Matrix) -> NonlinearFamily {
    let n = linv.dim();
    let (g1, l1) = (g.clone(), linv.clone());
    let mut nf = NonlinearFamily::new(format!("semilinear({})", g.label), n, move |u, k| {
        let gu = u.map(|x| g1.at(x, k));
        u + &l1.mul_vec(&gu)
    });
    let (g2, l2) = (g.clone(), linv.clone());
    nf = nf.with_frechet(move |u, k| {
        let d = Matrix::from_diag(&u.map(|x| g2.du(x, k)).into_inner());
        &Matrix::identity(n) + &l2.mul_mat(&d)
    });
    if g.dk.is_some() {
        let (g3, l3) = (g.clone(), linv.clone());
        nf = nf.with_partial_k(move |u, k| {
            let gk = u.map(|x| g3.dk(x, k).expect("dk presence checked"));
            l3.mul_vec(&gk)
        });
    }
    nf
}

/// `f(k) = L^-1 f1(k)` as a right-hand side on the nodes.
pub fn transformed_rhs(linv: &Matrix, f1: &RhsFamily) -> RhsFamily {
    let (l1, r1) = (linv.clone(), f1.clone());
    let mut rhs = RhsFamily::new(format!("Linv*{}", f1.label), f1.dim, move |k| l1.mul_vec(&r1.at(k)));
    if f1.has_derivative() {
        let (l2, r2) = (linv.clone(), f1.clone());
        rhs = rhs.with_derivative(move |k| l2.mul_vec(&r2.derivative(k).expect("derivative presence checked")));
    }
    rhs
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SemilinearMethod {
    Newton,
    Picard,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SemilinearSolution {
    pub u: Vector,
    pub method: SemilinearMethod,
    pub iterations: usize,
    /// `|L^-1|_inf * sup |g_u|` over the ball of radius `2 |L^-1 f1|_inf`; below 1 certifies Picard.
    pub contraction: f64,
}

/// `|L^-1|_inf sup_{|u| <= R} |g_u(u, k)|`, with the sup sampled on the real segment `[-R, R]`.
pub fn contraction_factor(g: &NonlinearityG, linv: &Matrix, k: C64, radius: f64) -> f64 {
    let sup = (0..=64)
        .map(|i| -radius + 2.0 * radius * i as f64 / 64.0)
        .map(|u| g.du(c(u), k).norm())
        .fold(0.0, f64::max);
    linv.norm_inf() * sup
}

/// Fixed-point iteration `u <- L^-1 f1 - L^-1 g(u, k)` from `u0`.
pub fn picard_solve(
    g: &NonlinearityG,
    linv: &Matrix,
    f1: &Vector,
    k: C64,
    u0: &Vector,
    tol: f64,
    max_iter: usize,
) -> Result<(Vector, usize)> {
    let base = linv.mul_vec(f1);
    let mut u = u0.clone();
    let mut history = Vec::new();
    for it in 1..=max_iter {
        let next = &base - &linv.mul_vec(&u.map(|x| g.at(x, k)));
        let step = (&next - &u).norm();
        history.push(step);
        u = next;
        if step <= tol {
            return Ok((u, it));
        }
        if !step.is_finite() {
            break;
        }
    }
    Err(Error::NonConvergence {
        iterations: history.len(),
        best_residual: history.iter().copied().fold(f64::INFINITY, f64::min),
        history,
    })
}

/// Solve `u + L^-1 g(u, k) = L^-1 f1` at the nodes. Newton runs first; Picard iteration
/// takes over when Newton fails and the contraction factor is below one.
pub fn semilinear_solve(
    g: &NonlinearityG,
    linv: &Matrix,
    f1: &Vector,
    k: C64,
    opts: &NewtonOptions,
) -> Result<SemilinearSolution> {
    if f1.len() != linv.dim() {
        return Err(Error::invalid("f1 does not match the operator dimension"));
    }
    let nf = assemble(g, linv);
    let rhs = RhsFamily::constant(linv.mul_vec(f1));
    let radius = 2.0 * linv.mul_vec(f1).norm_inf();
    let contraction = contraction_factor(g, linv, k, radius.max(1e-300));
    match newton_solve(&nf, &rhs, k, &Vector::zeros(linv.dim()), opts) {
        Ok(out) => Ok(SemilinearSolution {
            u: out.u,
            method: SemilinearMethod::Newton,
            iterations: out.iterations,
            contraction,
        }),
        Err(newton_err) if contraction < 1.0 => {
            let (u, iterations) = picard_solve(g, linv, f1, k, &Vector::zeros(linv.dim()), opts.tol, 100 * opts.max_iter)
                .map_err(|_| newton_err)?;
            Ok(SemilinearSolution {
                u,
                method: SemilinearMethod::Picard,
                iterations,
                contraction,
            })
        }
        Err(e) => Err(e),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SemilinearContinuity {
    pub continuity: Vec<NonlinearSweep>,
    pub sensitivity: SensitivitySweep,
}

/// Continuity and sensitivity sweeps over the disc for the assembled semilinear family.
pub fn semilinear_continuity(
    g: &NonlinearityG,
    linv: &Matrix,
    f1: &RhsFamily,
    disc: &ParameterDisc,
    opts: &SensitivityOptions,
) -> Result<SemilinearContinuity> {
    let nf = assemble(g, linv);
    let rhs = transformed_rhs(linv, f1);
    let continuity = disc
        .grid
        .iter()
        .map(|&k| nonlinear_continuity(&nf, &rhs, k, &disc.h_sequence, &opts.newton, &opts.verdict))
        .collect::<Result<Vec<_>>>()?;
    let sensitivity = sensitivity_continuity(&nf, &rhs, disc, opts)?;
    Ok(SemilinearContinuity {
        continuity,
        sensitivity,
    })
}
