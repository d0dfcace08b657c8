//! Dense complex vectors and square matrices.
//!
//! Storage is row-major. Everything here is small-dimension desk arithmetic:
//! LU with partial pivoting for solves, an SVD for spectral norms.

use std::fmt;
use std::ops::{Add, Index, IndexMut, Mul, Neg, Sub};

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type C64 = Complex64;

/// Relative pivot threshold used to declare a matrix singular.
pub const SINGULAR_PIVOT_TOL: f64 = 1e-14;

#[inline]
pub fn c(re: f64) -> C64 {
    C64::new(re, 0.0)
}

#[derive(Clone, PartialEq, Default)]
pub struct Vector(Vec<C64>);

impl Vector {
    pub fn new(entries: Vec<C64>) -> Self {
        Vector(entries)
    }

    pub fn zeros(n: usize) -> Self {
        Vector(vec![C64::new(0.0, 0.0); n])
    }

    pub fn from_real(entries: &[f64]) -> Self {
        Vector(entries.iter().map(|&x| c(x)).collect())
    }

    pub fn basis(n: usize, i: usize) -> Self {
        let mut v = Self::zeros(n);
        v.0[i] = c(1.0);
        v
    }

    pub fn from_fn(n: usize, f: impl FnMut(usize) -> C64) -> Self {
        Vector((0..n).map(f).collect())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[C64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<C64> {
        self.0
    }

    pub fn iter(&self) -> std::slice::Iter<'_, C64> {
        self.0.iter()
    }

    /// Euclidean norm.
    pub fn norm(&self) -> f64 {
        self.0.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn norm_inf(&self) -> f64 {
        self.0.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|z| z.is_finite())
    }

    pub fn scale(&self, alpha: C64) -> Vector {
        Vector(self.0.iter().map(|z| z * alpha).collect())
    }

    pub fn map(&self, f: impl Fn(C64) -> C64) -> Vector {
        Vector(self.0.iter().map(|&z| f(z)).collect())
    }

    /// `self + alpha * other`
    pub fn axpy(&self, alpha: C64, other: &Vector) -> Vector {
        assert_eq!(self.len(), other.len(), "dimension mismatch");
        Vector(
            self.0
                .iter()
                .zip(&other.0)
                .map(|(a, b)| a + alpha * b)
                .collect(),
        )
    }

    pub fn dot_conj(&self, other: &Vector) -> C64 {
        self.0.iter().zip(&other.0).map(|(a, b)| a.conj() * b).sum()
    }

    pub fn hadamard(&self, other: &Vector) -> Vector {
        Vector(self.0.iter().zip(&other.0).map(|(a, b)| a * b).collect())
    }

    pub fn normalized(&self) -> Vector {
        let n = self.norm();
        self.scale(c(1.0 / n))
    }
}

impl fmt::Debug for Vector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_list().entries(self.0.iter()).finish()
    }
}

impl Index<usize> for Vector {
    type Output = C64;
    fn index(&self, i: usize) -> &C64 {
        &self.0[i]
    }
}

impl IndexMut<usize> for Vector {
    fn index_mut(&mut self, i: usize) -> &mut C64 {
        &mut self.0[i]
    }
}

impl From<Vec<C64>> for Vector {
    fn from(v: Vec<C64>) -> Self {
        Vector(v)
    }
}

impl<'a> Add<&'a Vector> for &'a Vector {
    type Output = Vector;
    fn add(self, rhs: &Vector) -> Vector {
        self.axpy(c(1.0), rhs)
    }
}

impl<'a> Sub<&'a Vector> for &'a Vector {
    type Output = Vector;
    fn sub(self, rhs: &Vector) -> Vector {
        self.axpy(c(-1.0), rhs)
    }
}

impl Neg for &Vector {
    type Output = Vector;
    fn neg(self) -> Vector {
        self.scale(c(-1.0))
    }
}

/// Dense square complex matrix.
#[derive(Clone, PartialEq)]
pub struct Matrix {
    n: usize,
    data: Vec<C64>,
}

impl Matrix {
    pub fn zeros(n: usize) -> Self {
        Matrix {
            n,
            data: vec![C64::new(0.0, 0.0); n * n],
        }
    }

    pub fn identity(n: usize) -> Self {
        Self::from_diag(&vec![c(1.0); n])
    }

    pub fn from_diag(d: &[C64]) -> Self {
        let mut m = Self::zeros(d.len());
        for (i, &x) in d.iter().enumerate() {
            m[(i, i)] = x;
        }
        m
    }

    pub fn from_fn(n: usize, mut f: impl FnMut(usize, usize) -> C64) -> Self {
        let mut data = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                data.push(f(i, j));
            }
        }
        Matrix { n, data }
    }

    /// Build from rows; fails unless the rows form a square array.
    pub fn from_rows(rows: &[Vec<C64>]) -> Result<Self> {
        let n = rows.len();
        if n == 0 {
            return Err(Error::invalid("matrix must have at least one row"));
        }
        if rows.iter().any(|r| r.len() != n) {
            return Err(Error::invalid("matrix must be square"));
        }
        Ok(Matrix {
            n,
            data: rows.iter().flatten().copied().collect(),
        })
    }

    pub fn from_real_rows(rows: &[&[f64]]) -> Result<Self> {
        let rows: Vec<Vec<C64>> = rows
            .iter()
            .map(|r| r.iter().map(|&x| c(x)).collect())
            .collect();
        Self::from_rows(&rows)
    }

    pub fn from_columns(cols: &[Vector]) -> Self {
        let n = cols.len();
        Self::from_fn(n, |i, j| cols[j][i])
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn row(&self, i: usize) -> &[C64] {
        &self.data[i * self.n..(i + 1) * self.n]
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|z| z.is_finite())
    }

    pub fn mul_vec(&self, v: &Vector) -> Vector {
        assert_eq!(self.n, v.len(), "dimension mismatch");
        Vector::from_fn(self.n, |i| {
            self.row(i)
                .iter()
                .zip(v.iter())
                .map(|(a, b)| a * b)
                .sum()
        })
    }

    pub fn mul_mat(&self, other: &Matrix) -> Matrix {
        assert_eq!(self.n, other.n, "dimension mismatch");
        let n = self.n;
        let mut out = Matrix::zeros(n);
        for i in 0..n {
            for l in 0..n {
                let a = self.data[i * n + l];
                if a == C64::new(0.0, 0.0) {
                    continue;
                }
                for j in 0..n {
                    out.data[i * n + j] += a * other.data[l * n + j];
                }
            }
        }
        out
    }

    pub fn scale(&self, alpha: C64) -> Matrix {
        Matrix {
            n: self.n,
            data: self.data.iter().map(|z| z * alpha).collect(),
        }
    }

    /// `self + alpha * other`
    pub fn axpy(&self, alpha: C64, other: &Matrix) -> Matrix {
        assert_eq!(self.n, other.n, "dimension mismatch");
        Matrix {
            n: self.n,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(a, b)| a + alpha * b)
                .collect(),
        }
    }

    pub fn adjoint(&self) -> Matrix {
        Matrix::from_fn(self.n, |i, j| self[(j, i)].conj())
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    /// Maximum absolute row sum (the induced infinity norm).
    pub fn norm_inf(&self) -> f64 {
        (0..self.n)
            .map(|i| self.row(i).iter().map(|z| z.norm()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    /// Maximum absolute column sum (the induced 1-norm).
    pub fn norm_one(&self) -> f64 {
        (0..self.n)
            .map(|j| (0..self.n).map(|i| self[(i, j)].norm()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    pub fn max_abs_diff(&self, other: &Matrix) -> f64 {
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    /// Singular values in decreasing order.
    pub fn singular_values(&self) -> Result<Vec<f64>> {
        if !self.is_finite() {
            return Err(Error::invalid("matrix has non-finite entries"));
        }
        let m = DMatrix::from_row_slice(self.n, self.n, &self.data);
        let mut sv: Vec<f64> = m.singular_values().iter().copied().collect();
        sv.sort_by(|a, b| b.total_cmp(a));
        Ok(sv)
    }

    pub fn inverse(&self) -> Result<Matrix> {
        let lu = Lu::factor(self)?;
        let cols: Vec<Vector> = (0..self.n)
            .map(|j| lu.solve(&Vector::basis(self.n, j)))
            .collect();
        Ok(Matrix::from_columns(&cols))
    }

    /// Inverse as an unevaluated sum `hi + lo` carrying roughly twice the working precision.
    ///
    /// `lo = hi (I - self hi)`, with the residual accumulated exactly through fused multiply-adds.
    pub fn inverse_split(&self) -> Result<(Matrix, Matrix)> {
        let hi = self.inverse()?;
        let n = self.n;
        let resid = Matrix::from_fn(n, |i, j| {
            let mut acc = DotAcc::default();
            if i == j {
                acc.add(C64::new(1.0, 0.0));
            }
            for l in 0..n {
                acc.sub_prod(self[(i, l)], hi[(l, j)]);
            }
            acc.value()
        });
        let lo = hi.mul_mat(&resid);
        Ok((hi, lo))
    }
}

/// Compensated complex accumulator for sums of products.
#[derive(Default)]
struct DotAcc {
    re: (f64, f64),
    im: (f64, f64),
}

fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let bb = s - a;
    (s, (a - (s - bb)) + (b - bb))
}

fn acc_push(acc: &mut (f64, f64), x: f64) {
    let (s, e) = two_sum(acc.0, x);
    acc.0 = s;
    acc.1 += e;
}

fn acc_push_prod(acc: &mut (f64, f64), a: f64, b: f64) {
    let p = a * b;
    let e = a.mul_add(b, -p);
    acc_push(acc, p);
    acc.1 += e;
}

impl DotAcc {
    fn add(&mut self, z: C64) {
        acc_push(&mut self.re, z.re);
        acc_push(&mut self.im, z.im);
    }

    fn sub_prod(&mut self, a: C64, b: C64) {
        acc_push_prod(&mut self.re, -a.re, b.re);
        acc_push_prod(&mut self.re, a.im, b.im);
        acc_push_prod(&mut self.im, -a.re, b.im);
        acc_push_prod(&mut self.im, -a.im, b.re);
    }

    fn value(&self) -> C64 {
        C64::new(self.re.0 + self.re.1, self.im.0 + self.im.1)
    }
}

impl fmt::Debug for Matrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let rows: Vec<&[C64]> = (0..self.n).map(|i| self.row(i)).collect();
        f.debug_list().entries(rows).finish()
    }
}

impl Index<(usize, usize)> for Matrix {
    type Output = C64;
    fn index(&self, (i, j): (usize, usize)) -> &C64 {
        &self.data[i * self.n + j]
    }
}

impl IndexMut<(usize, usize)> for Matrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut C64 {
        &mut self.data[i * self.n + j]
    }
}

impl<'a> Add<&'a Matrix> for &'a Matrix {
    type Output = Matrix;
    fn add(self, rhs: &Matrix) -> Matrix {
        self.axpy(c(1.0), rhs)
    }
}

impl<'a> Sub<&'a Matrix> for &'a Matrix {
    type Output = Matrix;
    fn sub(self, rhs: &Matrix) -> Matrix {
        self.axpy(c(-1.0), rhs)
    }
}

impl<'a> Mul<&'a Vector> for &'a Matrix {
    type Output = Vector;
    fn mul(self, rhs: &Vector) -> Vector {
        self.mul_vec(rhs)
    }
}

impl<'a> Mul<&'a Matrix> for &'a Matrix {
    type Output = Matrix;
    fn mul(self, rhs: &Matrix) -> Matrix {
        self.mul_mat(rhs)
    }
}

/// LU factorization with partial pivoting, `P A = L U`.
#[derive(Clone, Debug)]
pub struct Lu {
    n: usize,
    lu: Vec<C64>,
    perm: Vec<usize>,
}

impl Lu {
    /// Factor `m`. A pivot smaller than `1e-14 * |m|` is reported as singular,
    /// where `|m| = sqrt(|m|_1 |m|_inf)` bounds the spectral norm from above.
    pub fn factor(m: &Matrix) -> Result<Lu> {
        if !m.is_finite() {
            return Err(Error::invalid("matrix has non-finite entries"));
        }
        let n = m.n;
        let scale = (m.norm_one() * m.norm_inf()).sqrt();
        let threshold = SINGULAR_PIVOT_TOL * scale;
        let mut lu = m.data.clone();
        let mut perm: Vec<usize> = (0..n).collect();

        for col in 0..n {
            let (p, pmag) = (col..n)
                .map(|r| (r, lu[r * n + col].norm()))
                .fold((col, -1.0), |best, cur| if cur.1 > best.1 { cur } else { best });
            if pmag <= threshold || scale == 0.0 {
                return Err(Error::Singular {
                    k: None,
                    pivot: pmag,
                    threshold,
                });
            }
            if p != col {
                for j in 0..n {
                    lu.swap(p * n + j, col * n + j);
                }
                perm.swap(p, col);
            }
            let pivot = lu[col * n + col];
            for r in col + 1..n {
                let factor = lu[r * n + col] / pivot;
                lu[r * n + col] = factor;
                if factor == C64::new(0.0, 0.0) {
                    continue;
                }
                for j in col + 1..n {
                    let u = lu[col * n + j];
                    lu[r * n + j] -= factor * u;
                }
            }
        }
        Ok(Lu { n, lu, perm })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn solve(&self, b: &Vector) -> Vector {
        let n = self.n;
        assert_eq!(b.len(), n, "dimension mismatch");
        let mut x: Vec<C64> = self.perm.iter().map(|&p| b[p]).collect();
        for i in 0..n {
            let mut s = x[i];
            for j in 0..i {
                s -= self.lu[i * n + j] * x[j];
            }
            x[i] = s;
        }
        for i in (0..n).rev() {
            let mut s = x[i];
            for j in i + 1..n {
                s -= self.lu[i * n + j] * x[j];
            }
            x[i] = s / self.lu[i * n + i];
        }
        Vector(x)
    }

    /// Solve `A^H x = b` with the same factorization.
    pub fn solve_adjoint(&self, b: &Vector) -> Vector {
        let n = self.n;
        assert_eq!(b.len(), n, "dimension mismatch");
        // A^H = U^H L^H P, so solve U^H y = b, then L^H z = y, then x = P^T z.
        let mut y = b.clone().into_inner();
        for i in 0..n {
            let mut s = y[i];
            for j in 0..i {
                s -= self.lu[j * n + i].conj() * y[j];
            }
            y[i] = s / self.lu[i * n + i].conj();
        }
        for i in (0..n).rev() {
            let mut s = y[i];
            for j in i + 1..n {
                s -= self.lu[j * n + i].conj() * y[j];
            }
            y[i] = s;
        }
        let mut x = vec![C64::new(0.0, 0.0); n];
        for (i, &p) in self.perm.iter().enumerate() {
            x[p] = y[i];
        }
        Vector(x)
    }
}

/// Spectral (2-)norm, computed exactly from the singular values.
pub fn operator_norm(m: &Matrix) -> Result<f64> {
    Ok(m.singular_values()?.first().copied().unwrap_or(0.0))
}

/// Solve `m x = b` by LU with partial pivoting.
pub fn solve_dense(m: &Matrix, b: &Vector) -> Result<Vector> {
    if m.dim() != b.len() {
        return Err(Error::invalid(format!(
            "dimension mismatch: matrix {}x{}, rhs {}",
            m.dim(),
            m.dim(),
            b.len()
        )));
    }
    if !b.is_finite() {
        return Err(Error::invalid("right-hand side has non-finite entries"));
    }
    Ok(Lu::factor(m)?.solve(b))
}
