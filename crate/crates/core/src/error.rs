use num_complex::Complex64;
use thiserror::Error;

use crate::linalg::Vector;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// A(k) failed the pivot test; this is a violation of unique solvability at `k`.
    #[error("singular operator{} (pivot {pivot:.3e} below threshold {threshold:.3e})", fmt_k(.k))]
    Singular {
        k: Option<Complex64>,
        pivot: f64,
        threshold: f64,
    },

    /// The Fréchet derivative A'(u,k) is singular at a Newton iterate or sensitivity point.
    #[error("singular Frechet derivative at k = {k}")]
    SingularJacobian { k: Complex64, iterate: Vector },

    /// 1 is (to tolerance) an eigenvalue of the discretized integral operator B(k).
    #[error("characteristic value: I - B(k) is singular at k = {k}")]
    CharacteristicValue { k: Complex64 },

    #[error("no convergence after {iterations} iterations (best residual {best_residual:.3e})")]
    NonConvergence {
        iterations: usize,
        best_residual: f64,
        history: Vec<f64>,
    },

    #[error("missing capability: {0}")]
    MissingCapability(&'static str),

    #[error("unknown {kind} '{name}'; available: {}", .available.join(", "))]
    NotFound {
        kind: &'static str,
        name: String,
        available: Vec<String>,
    },

    #[error("kernel evaluation failed at (x={x}, y={y}, k={k})")]
    InvalidKernel { x: f64, y: f64, k: Complex64 },

    #[error("point {x} outside the domain [{lo}, {hi}]")]
    Domain { x: f64, lo: f64, hi: f64 },
}

fn fmt_k(k: &Option<Complex64>) -> String {
    match k {
        Some(k) => format!(" at k = {k}"),
        None => String::new(),
    }
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    /// Attach a parameter value to a singular-operator error.
    pub fn at_k(self, k: Complex64) -> Self {
        match self {
            Error::Singular {
                pivot, threshold, ..
            } => Error::Singular {
                k: Some(k),
                pivot,
                threshold,
            },
            other => other,
        }
    }

    /// True for errors that signal a mathematical violation rather than misuse.
    pub fn is_violation(&self) -> bool {
        matches!(
            self,
            Error::Singular { .. }
                | Error::SingularJacobian { .. }
                | Error::CharacteristicValue { .. }
                | Error::NonConvergence { .. }
        )
    }
}
