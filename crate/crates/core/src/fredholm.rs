//! Second-kind Fredholm equations `u(x) - ∫_D b(x, y, k) u(y) dy = f(x, k)` on an
//! interval, discretized by the Nyström method.

use std::fmt;
use std::sync::Arc;

use crate::diff::central_diff;
use crate::error::{Error, Result};
use crate::families::{LinearFamily, Params, RhsFamily};
use crate::linalg::{c, Lu, Matrix, Vector, C64};
use crate::quadrature::Quadrature;
use crate::verdict::{tends_to_zero, Verdict, VerdictOptions};

pub type KernelFn = Arc<dyn Fn(f64, f64, C64) -> C64 + Send + Sync>;
pub type SourceFn = Arc<dyn Fn(f64, C64) -> C64 + Send + Sync>;

/// Kernel `b(x, y, k)` on `[lo, hi]^2` with optional `∂b/∂k` (along the real axis).
#[derive(Clone)]
pub struct KernelFamily {
    pub label: String,
    pub lo: f64,
    pub hi: f64,
    eval: KernelFn,
    deriv_k: Option<KernelFn>,
}

impl KernelFamily {
    pub fn new(
        label: impl Into<String>,
        lo: f64,
        hi: f64,
        eval: impl Fn(f64, f64, C64) -> C64 + Send + Sync + 'static,
    ) -> Self {
        KernelFamily {
            label: label.into(),
            lo,
            hi,
            eval: Arc::new(eval),
            deriv_k: None,
        }
    }

    pub fn with_deriv_k(mut self, d: impl Fn(f64, f64, C64) -> C64 + Send + Sync + 'static) -> Self {
        self.deriv_k = Some(Arc::new(d));
        self
    }

    pub fn at(&self, x: f64, y: f64, k: C64) -> Result<C64> {
        let v = (self.eval)(x, y, k);
        if v.is_finite() {
            Ok(v)
        } else {
            Err(Error::InvalidKernel { x, y, k })
        }
    }

    pub fn deriv_at(&self, x: f64, y: f64, k: C64) -> Result<C64> {
        let d = self
            .deriv_k
            .as_ref()
            .ok_or(Error::MissingCapability("kernel has no k-derivative"))?;
        let v = d(x, y, k);
        if v.is_finite() {
            Ok(v)
        } else {
            Err(Error::InvalidKernel { x, y, k })
        }
    }

    pub fn has_deriv_k(&self) -> bool {
        self.deriv_k.is_some()
    }

    fn contains(&self, x: f64) -> bool {
        x >= self.lo && x <= self.hi
    }
}

impl fmt::Debug for KernelFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("KernelFamily")
            .field("label", &self.label)
            .field("domain", &(self.lo, self.hi))
            .field("has_deriv_k", &self.deriv_k.is_some())
            .finish()
    }
}

/// Right-hand side `f(x, k)` as a function on the domain.
#[derive(Clone)]
pub struct SourceFamily {
    pub label: String,
    eval: SourceFn,
    deriv_k: Option<SourceFn>,
}

impl SourceFamily {
    pub fn new(label: impl Into<String>, eval: impl Fn(f64, C64) -> C64 + Send + Sync + 'static) -> Self {
        SourceFamily {
            label: label.into(),
            eval: Arc::new(eval),
            deriv_k: None,
        }
    }

    pub fn with_deriv_k(mut self, d: impl Fn(f64, C64) -> C64 + Send + Sync + 'static) -> Self {
        self.deriv_k = Some(Arc::new(d));
        self
    }

    /// `f(x, k) = x`
    pub fn linear() -> Self {
        SourceFamily::new("x", |x, _| c(x)).with_deriv_k(|_, _| c(0.0))
    }

    pub fn at(&self, x: f64, k: C64) -> C64 {
        (self.eval)(x, k)
    }

    pub fn deriv_at(&self, x: f64, k: C64) -> Result<C64> {
        self.deriv_k
            .as_ref()
            .map(|d| d(x, k))
            .ok_or(Error::MissingCapability("source has no k-derivative"))
    }

    /// Restriction to the quadrature nodes.
    pub fn on_nodes(&self, q: &Quadrature) -> RhsFamily {
        let nodes = q.nodes.clone();
        let src = self.clone();
        let mut rhs = RhsFamily::new(self.label.clone(), nodes.len(), move |k| {
            Vector::from_fn(nodes.len(), |i| src.at(nodes[i], k))
        });
        if let Some(d) = self.deriv_k.clone() {
            let nodes = q.nodes.clone();
            rhs = rhs.with_derivative(move |k| Vector::from_fn(nodes.len(), |i| d(nodes[i], k)));
        }
        rhs
    }
}

impl fmt::Debug for SourceFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SourceFamily")
            .field("label", &self.label)
            .field("has_deriv_k", &self.deriv_k.is_some())
            .finish()
    }
}

pub const KERNEL_REGISTRY: &[(&str, &[&str])] = &[
    ("separable-xy", &["lo", "hi"]),
    ("gaussian", &["lo", "hi"]),
    ("exp-screened", &["lo", "hi", "lambda"]),
];

pub fn kernel_names() -> Vec<String> {
    KERNEL_REGISTRY.iter().map(|(n, _)| n.to_string()).collect()
}

/// Built-in kernels:
/// * `separable-xy`: `b = k x y`
/// * `gaussian`: `b = k exp(-(x - y)^2)`
/// * `exp-screened`: `b = lambda exp(-k |x - y|)`
///
/// All default to the domain `[0, 1]`.
pub fn kernel_build(name: &str, params: &Params) -> Result<KernelFamily> {
    let Some((_, keys)) = KERNEL_REGISTRY.iter().find(|(n, _)| *n == name) else {
        return Err(Error::NotFound {
            kind: "kernel",
            name: name.to_string(),
            available: kernel_names(),
        });
    };
    params.expect_keys(name, keys)?;
    let lo = params.number_or("lo", 0.0)?;
    let hi = params.number_or("hi", 1.0)?;
    if !(lo < hi) {
        return Err(Error::invalid(format!("kernel domain [{lo}, {hi}] is empty")));
    }
    Ok(match name {
        "separable-xy" => separable_xy(lo, hi),
        "gaussian" => gaussian(lo, hi),
        "exp-screened" => exp_screened(lo, hi, params.number_or("lambda", 0.5)?),
        _ => unreachable!("name checked against the registry"),
    })
}

pub fn separable_xy(lo: f64, hi: f64) -> KernelFamily {
    KernelFamily::new("separable-xy", lo, hi, |x, y, k| k * x * y).with_deriv_k(|x, y, _| c(x * y))
}

pub fn gaussian(lo: f64, hi: f64) -> KernelFamily {
    KernelFamily::new("gaussian", lo, hi, |x, y, k| k * (-(x - y) * (x - y)).exp())
        .with_deriv_k(|x, y, _| c((-(x - y) * (x - y)).exp()))
}

pub fn exp_screened(lo: f64, hi: f64, lambda: f64) -> KernelFamily {
    KernelFamily::new("exp-screened", lo, hi, move |x, y, k| lambda * (-k * (x - y).abs()).exp())
        .with_deriv_k(move |x, y, k| {
            let d = (x - y).abs();
            -lambda * d * (-k * d).exp()
        })
}

#[derive(Debug, Clone, PartialEq)]
pub struct NystromSystem {
    pub quadrature: Quadrature,
    pub k: C64,
    /// `B[i][j] = w_j b(x_i, x_j, k)`
    pub b: Matrix,
    /// `I - B`
    pub system: Matrix,
}

fn check_rule(kf: &KernelFamily, q: &Quadrature) -> Result<()> {
    let (lo, hi) = q.bounds();
    let tol = 1e-12 * (1.0 + lo.abs().max(hi.abs()));
    if (lo - kf.lo).abs() > tol || (hi - kf.hi).abs() > tol {
        return Err(Error::invalid(format!(
            "quadrature on [{lo}, {hi}] does not match kernel domain [{}, {}]",
            kf.lo, kf.hi
        )));
    }
    Ok(())
}

fn weighted_kernel_matrix(
    q: &Quadrature,
    k: C64,
    f: impl Fn(f64, f64, C64) -> Result<C64>,
) -> Result<Matrix> {
    let n = q.len();
    let mut m = Matrix::zeros(n);
    for i in 0..n {
        for j in 0..n {
            m[(i, j)] = q.weights[j] * f(q.nodes[i], q.nodes[j], k)?;
        }
    }
    Ok(m)
}

pub fn nystrom_build(kf: &KernelFamily, q: &Quadrature, k: C64) -> Result<NystromSystem> {
    check_rule(kf, q)?;
    let b = weighted_kernel_matrix(q, k, |x, y, k| kf.at(x, y, k))?;
    let system = &Matrix::identity(q.len()) - &b;
    Ok(NystromSystem {
        quadrature: q.clone(),
        k,
        b,
        system,
    })
}

/// `Bdot[i][j] = w_j ∂b/∂k(x_i, x_j, k)`
pub fn nystrom_derivative(kf: &KernelFamily, q: &Quadrature, k: C64) -> Result<Matrix> {
    check_rule(kf, q)?;
    weighted_kernel_matrix(q, k, |x, y, k| kf.deriv_at(x, y, k))
}

#[derive(Debug, Clone, PartialEq)]
pub struct HsReport {
    /// `(h, (∫∫ |b(x,y,k+h) - b(x,y,k)|^2)^{1/2})` by the tensor-product rule.
    pub samples: Vec<(f64, f64)>,
    pub verdict: Verdict,
}

/// Hilbert–Schmidt norm of `b(·,·,k+h) - b(·,·,k)` for each step, by the tensor rule of `q`.
pub fn hs_continuity(
    kf: &KernelFamily,
    q: &Quadrature,
    k: C64,
    h_seq: &[f64],
    opts: &VerdictOptions,
) -> Result<HsReport> {
    check_rule(kf, q)?;
    let mut samples = Vec::with_capacity(h_seq.len());
    for &h in h_seq {
        let kh = k + h;
        let mut acc = 0.0;
        for (i, &x) in q.nodes.iter().enumerate() {
            for (j, &y) in q.nodes.iter().enumerate() {
                let d = kf.at(x, y, kh)? - kf.at(x, y, k)?;
                acc += q.weights[i] * q.weights[j] * d.norm_sqr();
            }
        }
        samples.push((h, acc.sqrt()));
    }
    let (hs, vals): (Vec<f64>, Vec<f64>) = samples.iter().copied().unzip();
    Ok(HsReport {
        verdict: tends_to_zero(&hs, &vals, opts),
        samples,
    })
}

fn factor_system(sys: &NystromSystem) -> Result<Lu> {
    Lu::factor(&sys.system).map_err(|e| match e {
        Error::Singular { .. } => Error::CharacteristicValue { k: sys.k },
        other => other,
    })
}

fn source_on_nodes(src: &SourceFamily, q: &Quadrature, k: C64) -> Vector {
    Vector::from_fn(q.len(), |i| src.at(q.nodes[i], k))
}

/// Node values of the solution of `(I - B(k)) u = f(k)`.
pub fn fredholm_solve(kf: &KernelFamily, src: &SourceFamily, q: &Quadrature, k: C64) -> Result<Vector> {
    let sys = nystrom_build(kf, q, k)?;
    Ok(factor_system(&sys)?.solve(&source_on_nodes(src, q, k)))
}

/// Sign of the `Bdot u` term in the sensitivity formula.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SensitivitySign {
    /// `udot = (I - B)^-1 (fdot + Bdot u)`
    Plus,
    /// `udot = (I - B)^-1 (fdot - Bdot u)`
    Minus,
}

impl SensitivitySign {
    fn factor(self) -> f64 {
        match self {
            SensitivitySign::Plus => 1.0,
            SensitivitySign::Minus => -1.0,
        }
    }
}

/// Differentiating `(I - B(k)) u = f` gives `(I - B) udot = fdot + Bdot u`; the
/// finite-difference checks in this module pin it.
pub const SHIPPED_SIGN: SensitivitySign = SensitivitySign::Plus;

pub const SIGN_RESOLUTION_NOTE: &str = "fredholm sensitivity: udot = (I - B(k))^-1 (fdot + Bdot(k) u), \
obtained by differentiating (I - B(k)) u = f(k); the variant with fdot - Bdot(k) u disagrees with \
central differences of the solved path and is rejected";

pub fn fredholm_sensitivity(kf: &KernelFamily, src: &SourceFamily, q: &Quadrature, k: C64) -> Result<Vector> {
    fredholm_sensitivity_with_sign(kf, src, q, k, SHIPPED_SIGN)
}

pub fn fredholm_sensitivity_with_sign(
    kf: &KernelFamily,
    src: &SourceFamily,
    q: &Quadrature,
    k: C64,
    sign: SensitivitySign,
) -> Result<Vector> {
    let sys = nystrom_build(kf, q, k)?;
    let lu = factor_system(&sys)?;
    let u = lu.solve(&source_on_nodes(src, q, k));
    let bdot = nystrom_derivative(kf, q, k)?;
    let fdot = Vector::from_fn(q.len(), |i| src.deriv_at(q.nodes[i], k).unwrap_or(c(f64::NAN)));
    if !fdot.is_finite() {
        return Err(Error::MissingCapability("source has no k-derivative"));
    }
    let rhs = fdot.axpy(c(sign.factor()), &bdot.mul_vec(&u));
    Ok(lu.solve(&rhs))
}

#[derive(Debug, Clone, PartialEq)]
pub struct SignResolution {
    pub k: C64,
    pub fd_step: f64,
    /// Relative gap to the finite-difference derivative with the `+` sign.
    pub plus_gap: f64,
    pub minus_gap: f64,
    pub chosen: SensitivitySign,
}

/// Compare both signs against a central difference of the solved path at `k`.
pub fn resolve_sign(
    kf: &KernelFamily,
    src: &SourceFamily,
    q: &Quadrature,
    k: C64,
    fd_step: f64,
) -> Result<SignResolution> {
    let fd = central_diff(|t| fredholm_solve(kf, src, q, k + t), 0.0, fd_step)?;
    let gap = |sign| -> Result<f64> {
        let s = fredholm_sensitivity_with_sign(kf, src, q, k, sign)?;
        Ok((&s - &fd).norm() / (fd.norm() + 1e-14))
    };
    let plus_gap = gap(SensitivitySign::Plus)?;
    let minus_gap = gap(SensitivitySign::Minus)?;
    Ok(SignResolution {
        k,
        fd_step,
        plus_gap,
        minus_gap,
        chosen: if plus_gap <= minus_gap {
            SensitivitySign::Plus
        } else {
            SensitivitySign::Minus
        },
    })
}

/// Natural Nyström interpolant `u(x) = f(x, k) + Σ_j w_j b(x, x_j, k) u_j`.
pub fn nystrom_interpolate(
    sys: &NystromSystem,
    kf: &KernelFamily,
    src: &SourceFamily,
    u_nodes: &Vector,
    x: f64,
) -> Result<C64> {
    if !kf.contains(x) {
        return Err(Error::Domain { x, lo: kf.lo, hi: kf.hi });
    }
    let q = &sys.quadrature;
    if u_nodes.len() != q.len() {
        return Err(Error::invalid("node values do not match the quadrature"));
    }
    let mut acc = src.at(x, sys.k);
    for j in 0..q.len() {
        acc += q.weights[j] * kf.at(x, q.nodes[j], sys.k)? * u_nodes[j];
    }
    Ok(acc)
}

/// The Nyström system viewed as a linear family `k -> I - B(k)` on the nodes.
pub fn as_linear_family(kf: &KernelFamily, q: &Quadrature) -> Result<LinearFamily> {
    check_rule(kf, q)?;
    let n = q.len();
    let (k1, q1) = (kf.clone(), q.clone());
    let mut fam = LinearFamily::new(format!("fredholm({})", kf.label), n, move |k| {
        nystrom_build(&k1, &q1, k)
            .map(|s| s.system)
            .unwrap_or_else(|_| Matrix::from_fn(n, |_, _| c(f64::NAN)))
    });
    if kf.has_deriv_k() {
        let (k2, q2) = (kf.clone(), q.clone());
        fam = fam.with_derivative(move |k| {
            nystrom_derivative(&k2, &q2, k)
                .map(|d| d.scale(c(-1.0)))
                .unwrap_or_else(|_| Matrix::from_fn(n, |_, _| c(f64::NAN)))
        });
    }
    Ok(fam)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::families::DEFAULT_H_SEQUENCE;
    use crate::quadrature::gauss_legendre;

    fn rule(n: usize) -> Quadrature {
        gauss_legendre(n, 0.0, 1.0).unwrap()
    }

    #[test]
    fn zero_kernel_gives_identity() {
        let zero = KernelFamily::new("zero", 0.0, 1.0, |_, _, _| c(0.0));
        let sys = nystrom_build(&zero, &rule(4), c(0.7)).unwrap();
        assert_eq!(sys.system, Matrix::identity(4));
    }

    #[test]
    fn separable_matrix_entries() {
        let sys = nystrom_build(&separable_xy(0.0, 1.0), &rule(2), c(1.0)).unwrap();
        let s = 0.5 / 3f64.sqrt();
        let x = [0.5 - s, 0.5 + s];
        for i in 0..2 {
            for j in 0..2 {
                assert!((sys.b[(i, j)] - c(0.5 * x[i] * x[j])).norm() < 1e-15);
            }
        }
    }

    #[test]
    fn separable_matrix_has_rank_one() {
        let sys = nystrom_build(&separable_xy(0.0, 1.0), &rule(9), c(1.3)).unwrap();
        let sv = sys.b.singular_values().unwrap();
        assert!(sv[1] <= 1e-12 * sv[0].max(1.0), "{sv:?}");
    }

    #[test]
    fn kernel_failure_is_reported_with_location() {
        let bad = KernelFamily::new("bad", 0.0, 1.0, |x, _, _| c(1.0 / (x - x)));
        assert!(matches!(nystrom_build(&bad, &rule(2), c(0.0)), Err(Error::InvalidKernel { .. })));
    }

    #[test]
    fn mismatched_rule_is_rejected() {
        let q = gauss_legendre(3, 0.0, 2.0).unwrap();
        assert!(matches!(nystrom_build(&separable_xy(0.0, 1.0), &q, c(1.0)), Err(Error::InvalidInput(_))));
    }

    #[test]
    fn hs_examples() {
        let opts = VerdictOptions::default();
        let fixed = KernelFamily::new("fixed", 0.0, 1.0, |x, y, _| c((x - y).cos()));
        let rep = hs_continuity(&fixed, &rule(5), c(1.0), &DEFAULT_H_SEQUENCE, &opts).unwrap();
        assert!(rep.samples.iter().all(|&(_, v)| v == 0.0));
        assert!(rep.verdict.converged);

        let rep = hs_continuity(&separable_xy(0.0, 1.0), &rule(3), c(1.0), &DEFAULT_H_SEQUENCE, &opts).unwrap();
        for &(h, v) in &rep.samples {
            assert!((v - h / 3.0).abs() <= 1e-12 * (1.0 + h), "h={h} v={v}");
        }
        assert!(rep.verdict.converged);

        let expk = KernelFamily::new("exp-k-xy", 0.0, 1.0, |x, y, k| k.exp() * x * y);
        let k = c(0.4);
        let rep = hs_continuity(&expk, &rule(3), k, &DEFAULT_H_SEQUENCE, &opts).unwrap();
        for &(h, v) in &rep.samples {
            let exact = ((k + h).exp() - k.exp()).norm() / 3.0;
            assert!((v - exact).abs() <= 1e-9 * exact, "h={h}");
        }
    }

    #[test]
    fn solve_examples() {
        let zero = KernelFamily::new("zero", 0.0, 1.0, |_, _, _| c(0.0));
        let q = rule(5);
        let u = fredholm_solve(&zero, &SourceFamily::linear(), &q, c(0.0)).unwrap();
        for (i, &x) in q.nodes.iter().enumerate() {
            assert_eq!(u[i], c(x));
        }

        // Rank-one reduction: u = x + k x c with c = ∫ y u = 1 / (3 - k), so u = 3x / (3 - k).
        let u = fredholm_solve(&separable_xy(0.0, 1.0), &SourceFamily::linear(), &q, c(1.0)).unwrap();
        for (i, &x) in q.nodes.iter().enumerate() {
            assert!((u[i] - c(1.5 * x)).norm() < 1e-12);
        }

        let err = fredholm_solve(&separable_xy(0.0, 1.0), &SourceFamily::linear(), &rule(2), c(3.0)).unwrap_err();
        assert!(matches!(err, Error::CharacteristicValue { .. }), "{err:?}");
    }

    #[test]
    fn sensitivity_examples() {
        let fixed = KernelFamily::new("fixed", 0.0, 1.0, |x, y, _| c(0.3 * x * y)).with_deriv_k(|_, _, _| c(0.0));
        let q = rule(4);
        let s = fredholm_sensitivity(&fixed, &SourceFamily::linear(), &q, c(0.5)).unwrap();
        assert_eq!(s.norm(), 0.0);

        let s = fredholm_sensitivity(&separable_xy(0.0, 1.0), &SourceFamily::linear(), &q, c(1.0)).unwrap();
        for (i, &x) in q.nodes.iter().enumerate() {
            assert!((s[i] - c(0.75 * x)).norm() < 1e-12);
        }
    }

    #[test]
    fn sign_resolution_prefers_plus() {
        let res = resolve_sign(&separable_xy(0.0, 1.0), &SourceFamily::linear(), &rule(6), c(1.0), 1e-4).unwrap();
        assert_eq!(res.chosen, SHIPPED_SIGN);
        assert!(res.plus_gap < 1e-7);
        assert!(res.minus_gap > 0.1);
    }

    #[test]
    fn interpolation_examples() {
        let q = rule(6);
        let kf = separable_xy(0.0, 1.0);
        let src = SourceFamily::linear();
        let sys = nystrom_build(&kf, &q, c(1.0)).unwrap();
        let u = fredholm_solve(&kf, &src, &q, c(1.0)).unwrap();
        let at_node = nystrom_interpolate(&sys, &kf, &src, &u, q.nodes[0]).unwrap();
        assert!((at_node - u[0]).norm() < 1e-15);
        assert!((nystrom_interpolate(&sys, &kf, &src, &u, 0.3).unwrap() - c(0.45)).norm() < 1e-12);
        assert!(matches!(
            nystrom_interpolate(&sys, &kf, &src, &u, 1.5),
            Err(Error::Domain { .. })
        ));

        let zero = KernelFamily::new("zero", 0.0, 1.0, |_, _, _| c(0.0));
        let sys = nystrom_build(&zero, &q, c(0.0)).unwrap();
        let u = fredholm_solve(&zero, &src, &q, c(0.0)).unwrap();
        assert_eq!(nystrom_interpolate(&sys, &zero, &src, &u, 0.77).unwrap(), c(0.77));
    }

    #[test]
    fn registry() {
        let kf = kernel_build("exp-screened", &Params::new().num("lambda", 0.25)).unwrap();
        assert!((kf.at(0.0, 1.0, c(2.0)).unwrap() - c(0.25 * (-2f64).exp())).norm() < 1e-15);
        assert!(matches!(kernel_build("nope", &Params::new()), Err(Error::NotFound { .. })));
        assert!(kernel_build("gaussian", &Params::new().num("lo", 1.0).num("hi", 0.0)).is_err());
    }
}
