/*
Copyright 2026 The sadmm Authors

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
*/

//! Dense vectors, symmetric matrices and a regularized symmetric solver.
//!
//! Every Newton, predictor and corrector step in the crate goes through
//! [`solve_sym`]. It factorizes with Cholesky and, when the matrix is not
//! numerically positive definite, retries with a growing diagonal shift.

use std::ops::{Deref, DerefMut};

use thiserror::Error;

/// Symmetry tolerance enforced by [`SymMatrix`] constructors.
pub const SYMMETRY_TOL: f64 = 1e-10;

const SHIFT_START: f64 = 1e-8;
const SHIFT_LIMIT: f64 = 1e6;
const RESIDUAL_TOL: f64 = 1e-8;
const REFINEMENT_STEPS: usize = 2;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LinalgError {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("non-finite entry in {0}")]
    NonFinite(&'static str),
    #[error("matrix is not symmetric (max asymmetry {0:e})")]
    NotSymmetric(f64),
    #[error("system is singular: diagonal shift exceeded {limit:e}")]
    Singular { limit: f64 },
}

/// A dense real vector.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Vector(Vec<f64>);

impl Vector {
    pub fn zeros(dim: usize) -> Self {
        Vector(vec![0.0; dim])
    }

    pub fn from_vec(data: Vec<f64>) -> Self {
        Vector(data)
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|v| v.is_finite())
    }

    pub fn dot(&self, other: &Vector) -> f64 {
        debug_assert_eq!(self.dim(), other.dim());
        self.0.iter().zip(&other.0).map(|(a, b)| a * b).sum()
    }

    pub fn norm2(&self) -> f64 {
        self.dot(self).sqrt()
    }

    pub fn norm_inf(&self) -> f64 {
        self.0.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// `self + alpha * other`
    pub fn axpy(&self, alpha: f64, other: &Vector) -> Vector {
        debug_assert_eq!(self.dim(), other.dim());
        Vector(self.0.iter().zip(&other.0).map(|(a, b)| a + alpha * b).collect())
    }

    pub fn sub(&self, other: &Vector) -> Vector {
        self.axpy(-1.0, other)
    }

    pub fn add(&self, other: &Vector) -> Vector {
        self.axpy(1.0, other)
    }

    pub fn scale(&self, c: f64) -> Vector {
        Vector(self.0.iter().map(|a| c * a).collect())
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Vector {
        Vector(self.0.iter().map(|&a| f(a)).collect())
    }
}

impl Deref for Vector {
    type Target = [f64];
    fn deref(&self) -> &[f64] {
        &self.0
    }
}

impl DerefMut for Vector {
    fn deref_mut(&mut self) -> &mut [f64] {
        &mut self.0
    }
}

impl From<Vec<f64>> for Vector {
    fn from(v: Vec<f64>) -> Self {
        Vector(v)
    }
}

impl From<&[f64]> for Vector {
    fn from(v: &[f64]) -> Self {
        Vector(v.to_vec())
    }
}

/// Euclidean and max-abs norms of `v`.
pub fn norms(v: &[f64]) -> (f64, f64) {
    let two = v.iter().map(|a| a * a).sum::<f64>().sqrt();
    let inf = v.iter().fold(0.0_f64, |m, a| m.max(a.abs()));
    (two, inf)
}

/// Dense symmetric matrix stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct SymMatrix {
    n: usize,
    data: Vec<f64>,
}

impl SymMatrix {
    pub fn zeros(n: usize) -> Self {
        SymMatrix { n, data: vec![0.0; n * n] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            m.data[i * n + i] = 1.0;
        }
        m
    }

    pub fn from_diagonal(d: &[f64]) -> Self {
        let mut m = Self::zeros(d.len());
        for (i, v) in d.iter().enumerate() {
            m.data[i * d.len() + i] = *v;
        }
        m
    }

    /// Builds from row-major data, rejecting matrices asymmetric beyond
    /// [`SYMMETRY_TOL`]. The stored matrix is the exact symmetric part.
    pub fn from_row_major(n: usize, data: Vec<f64>) -> Result<Self, LinalgError> {
        if data.len() != n * n {
            return Err(LinalgError::DimensionMismatch { expected: n * n, got: data.len() });
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(LinalgError::NonFinite("matrix"));
        }
        let mut worst = 0.0_f64;
        for i in 0..n {
            for j in (i + 1)..n {
                worst = worst.max((data[i * n + j] - data[j * n + i]).abs());
            }
        }
        if worst > SYMMETRY_TOL {
            return Err(LinalgError::NotSymmetric(worst));
        }
        Ok(Self::symmetrized(n, data))
    }

    /// `(A + Aᵀ) / 2` of an arbitrary square matrix; the result is bitwise symmetric.
    pub fn symmetrized(n: usize, mut data: Vec<f64>) -> Self {
        assert_eq!(data.len(), n * n, "square matrix expected");
        for i in 0..n {
            for j in (i + 1)..n {
                let avg = 0.5 * (data[i * n + j] + data[j * n + i]);
                data[i * n + j] = avg;
                data[j * n + i] = avg;
            }
        }
        SymMatrix { n, data }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    /// Adds `c` to both `(i, j)` and `(j, i)` (once on the diagonal).
    pub fn add_sym(&mut self, i: usize, j: usize, c: f64) {
        self.data[i * self.n + j] += c;
        if i != j {
            self.data[j * self.n + i] += c;
        }
    }

    pub fn add_diagonal(&self, c: f64) -> SymMatrix {
        let mut out = self.clone();
        for i in 0..self.n {
            out.data[i * self.n + i] += c;
        }
        out
    }

    pub fn scale(&self, c: f64) -> SymMatrix {
        SymMatrix { n: self.n, data: self.data.iter().map(|v| c * v).collect() }
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vector {
        assert_eq!(x.len(), self.n);
        Vector(
            self.data
                .chunks_exact(self.n)
                .map(|row| row.iter().zip(x).map(|(a, b)| a * b).sum())
                .collect(),
        )
    }

    /// Induced infinity norm (max absolute row sum).
    pub fn norm_inf(&self) -> f64 {
        self.data
            .chunks_exact(self.n.max(1))
            .map(|row| row.iter().map(|v| v.abs()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// Eigenvalues in ascending order.
    pub fn eigenvalues(&self) -> Vec<f64> {
        let m = nalgebra::DMatrix::from_row_slice(self.n, self.n, &self.data);
        let mut ev: Vec<f64> = m.symmetric_eigenvalues().iter().copied().collect();
        ev.sort_by(|a, b| a.total_cmp(b));
        ev
    }
}

/// Result of [`solve_sym`]: the solution and the diagonal shift that was
/// needed to factorize (zero when `A` itself was factorized).
#[derive(Debug, Clone, PartialEq)]
pub struct SymSolve {
    pub x: Vector,
    pub shift: f64,
}

/// Solves `A x = b` for symmetric `A`.
///
/// If `A` cannot be Cholesky-factorized to the residual tolerance, `A + τI` is
/// tried with `τ` starting at `1e-8·(1+‖A‖∞)` and doubling. The returned
/// solution satisfies `‖(A+τI)x − b‖∞ ≤ 1e-8·(1+‖b‖∞)` for the reported `τ`.
pub fn solve_sym(a: &SymMatrix, b: &[f64]) -> Result<SymSolve, LinalgError> {
    if a.n != b.len() {
        return Err(LinalgError::DimensionMismatch { expected: a.n, got: b.len() });
    }
    if !a.is_finite() {
        return Err(LinalgError::NonFinite("matrix"));
    }
    if b.iter().any(|v| !v.is_finite()) {
        return Err(LinalgError::NonFinite("right-hand side"));
    }
    let scale = 1.0 + a.norm_inf();
    let limit = SHIFT_LIMIT * scale;
    let tol = RESIDUAL_TOL * (1.0 + norms(b).1);

    if let Some(x) = try_solve(a, 0.0, b, tol) {
        return Ok(SymSolve { x, shift: 0.0 });
    }
    let mut shift = SHIFT_START * scale;
    while shift <= limit && shift.is_finite() {
        if let Some(x) = try_solve(a, shift, b, tol) {
            return Ok(SymSolve { x, shift });
        }
        shift *= 2.0;
    }
    Err(LinalgError::Singular { limit })
}

fn try_solve(a: &SymMatrix, shift: f64, b: &[f64], tol: f64) -> Option<Vector> {
    let shifted = if shift == 0.0 { a.clone() } else { a.add_diagonal(shift) };
    let factor = cholesky(&shifted)?;
    let mut x = factor.solve(b);
    for _ in 0..REFINEMENT_STEPS {
        let r = residual(&shifted, &x, b);
        if norms(&r).1 <= tol {
            return Some(x);
        }
        let dx = factor.solve(&r);
        x = x.add(&dx);
    }
    let r = residual(&shifted, &x, b);
    (x.is_finite() && norms(&r).1 <= tol).then_some(x)
}

fn residual(a: &SymMatrix, x: &[f64], b: &[f64]) -> Vector {
    let ax = a.mul_vec(x);
    Vector(b.iter().zip(ax.iter()).map(|(bi, ai)| bi - ai).collect())
}

struct Cholesky {
    n: usize,
    // lower triangle, row-major
    l: Vec<f64>,
}

fn cholesky(a: &SymMatrix) -> Option<Cholesky> {
    let n = a.n;
    let mut l = vec![0.0; n * n];
    for j in 0..n {
        let mut d = a.get(j, j);
        for k in 0..j {
            d -= l[j * n + k] * l[j * n + k];
        }
        if !(d > 0.0) || !d.is_finite() {
            return None;
        }
        let djj = d.sqrt();
        l[j * n + j] = djj;
        for i in (j + 1)..n {
            let mut s = a.get(i, j);
            for k in 0..j {
                s -= l[i * n + k] * l[j * n + k];
            }
            l[i * n + j] = s / djj;
        }
    }
    Some(Cholesky { n, l })
}

impl Cholesky {
    fn solve(&self, b: &[f64]) -> Vector {
        let n = self.n;
        let mut y = b.to_vec();
        for i in 0..n {
            let mut s = y[i];
            for k in 0..i {
                s -= self.l[i * n + k] * y[k];
            }
            y[i] = s / self.l[i * n + i];
        }
        for i in (0..n).rev() {
            let mut s = y[i];
            for k in (i + 1)..n {
                s -= self.l[k * n + i] * y[k];
            }
            y[i] = s / self.l[i * n + i];
        }
        Vector(y)
    }
}
