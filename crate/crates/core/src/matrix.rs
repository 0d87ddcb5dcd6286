//! Square real matrices with the row-sum norms, irreducibility test and
//! Perron-Frobenius eigenpair used throughout the urn analysis.

use std::fmt;

use crate::error::{Error, Result};
use crate::scalar::{l1, l1_distance, Scalar};

pub const DEFAULT_TOL: f64 = 1e-10;
pub const DEFAULT_MAX_ITER: usize = 100_000;

/// Dense `K x K` matrix stored row-major.
///
/// Replacement matrices, generating matrices and the limit matrix are all
/// nonnegative; differences such as `H̃ - H` are allowed to carry signed
/// entries. Entries are always finite.
#[derive(Clone, PartialEq)]
pub struct NonnegMatrix<T> {
    dim: usize,
    data: Vec<T>,
}

impl<T: Scalar> NonnegMatrix<T> {
    pub fn new(dim: usize, data: Vec<T>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::EmptyMatrix);
        }
        if data.len() != dim * dim {
            return Err(Error::Shape { dim, expected: dim * dim, got: data.len() });
        }
        let m = Self { dim, data };
        m.check_finite()?;
        Ok(m)
    }

    pub fn from_rows<R: AsRef<[T]>>(rows: &[R]) -> Result<Self> {
        let dim = rows.len();
        if dim == 0 {
            return Err(Error::EmptyMatrix);
        }
        let mut data = Vec::with_capacity(dim * dim);
        for (i, row) in rows.iter().enumerate() {
            let row = row.as_ref();
            if row.len() != dim {
                return Err(Error::RaggedRow { row: i, expected: dim, got: row.len() });
            }
            data.extend_from_slice(row);
        }
        Self::new(dim, data)
    }

    /// Builds a nonnegative matrix, rejecting negative entries.
    pub fn nonneg_from_rows<R: AsRef<[T]>>(rows: &[R]) -> Result<Self> {
        let m = Self::from_rows(rows)?;
        m.check_nonnegative()?;
        Ok(m)
    }

    pub fn zeros(dim: usize) -> Self {
        assert!(dim > 0, "matrix dimension must be positive");
        Self { dim, data: vec![T::zero(); dim * dim] }
    }

    pub fn identity(dim: usize) -> Self {
        let mut m = Self::zeros(dim);
        for i in 0..dim {
            m.data[i * dim + i] = T::one();
        }
        m
    }

    /// Constructs without validation; callers must ensure `data.len() == dim²`.
    pub(crate) fn from_raw(dim: usize, data: Vec<T>) -> Self {
        debug_assert_eq!(data.len(), dim * dim);
        Self { dim, data }
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> T {
        self.data[i * self.dim + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, value: T) {
        self.data[i * self.dim + j] = value;
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[T] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[T]> {
        self.data.chunks_exact(self.dim)
    }

    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    pub fn to_rows(&self) -> Vec<Vec<T>> {
        self.rows().map(|r| r.to_vec()).collect()
    }

    pub fn check_finite(&self) -> Result<()> {
        match self.data.iter().position(|x| !x.is_finite()) {
            Some(k) => Err(Error::NonFinite { row: k / self.dim, col: k % self.dim }),
            None => Ok(()),
        }
    }

    pub fn check_nonnegative(&self) -> Result<()> {
        match self.data.iter().position(|x| *x < T::zero()) {
            Some(k) => Err(Error::Negative {
                row: k / self.dim,
                col: k % self.dim,
                value: self.data[k].as_f64(),
            }),
            None => Ok(()),
        }
    }

    pub fn is_nonnegative(&self) -> bool {
        self.data.iter().all(|x| *x >= T::zero())
    }

    pub fn map(&self, mut f: impl FnMut(T) -> T) -> Self {
        Self::from_raw(self.dim, self.data.iter().map(|x| f(*x)).collect())
    }

    pub fn scale(&self, c: T) -> Self {
        self.map(|x| x * c)
    }

    /// Entrywise `max(x, 0)`.
    pub fn clip_nonnegative(&self) -> Self {
        self.map(|x| x.max(T::zero()))
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.zip_with(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.zip_with(other, |a, b| a - b)
    }

    fn zip_with(&self, other: &Self, f: impl Fn(T, T) -> T) -> Result<Self> {
        if self.dim != other.dim {
            return Err(Error::DimensionMismatch { expected: self.dim, got: other.dim });
        }
        let data = self.data.iter().zip(&other.data).map(|(a, b)| f(*a, *b)).collect();
        Ok(Self::from_raw(self.dim, data))
    }

    pub fn matmul(&self, other: &Self) -> Result<Self> {
        if self.dim != other.dim {
            return Err(Error::DimensionMismatch { expected: self.dim, got: other.dim });
        }
        let k = self.dim;
        let mut out = vec![T::zero(); k * k];
        for i in 0..k {
            for l in 0..k {
                let a = self.data[i * k + l];
                if a == T::zero() {
                    continue;
                }
                for j in 0..k {
                    out[i * k + j] += a * other.data[l * k + j];
                }
            }
        }
        Ok(Self::from_raw(k, out))
    }

    /// Row vector times matrix, `x A`.
    pub fn left_mul(&self, x: &[T]) -> Result<Vec<T>> {
        if x.len() != self.dim {
            return Err(Error::DimensionMismatch { expected: self.dim, got: x.len() });
        }
        let mut out = vec![T::zero(); self.dim];
        self.left_mul_into(x, &mut out);
        Ok(out)
    }

    pub(crate) fn left_mul_into(&self, x: &[T], out: &mut [T]) {
        out.iter_mut().for_each(|o| *o = T::zero());
        for (xi, row) in x.iter().zip(self.rows()) {
            if *xi == T::zero() {
                continue;
            }
            for (o, a) in out.iter_mut().zip(row) {
                *o += *xi * *a;
            }
        }
    }

    pub fn row_sums(&self) -> Vec<T> {
        self.rows().map(|r| r.iter().copied().sum()).collect()
    }

    fn abs_row_sums(&self) -> impl Iterator<Item = T> + '_ {
        self.rows().map(l1)
    }

    /// Maximum absolute row sum, `‖A‖ = max_i Σ_j |A_ij|`.
    pub fn op_norm(&self) -> T {
        self.abs_row_sums().fold(T::zero(), T::max)
    }

    /// Minimum absolute row sum, `σ(A) = min_i Σ_j |A_ij|`.
    pub fn sigma(&self) -> T {
        self.abs_row_sums().fold(T::infinity(), T::min)
    }

    /// Strong connectivity of the positivity digraph (edge `i -> j` iff
    /// `A_ij > 0`). A `1 x 1` matrix is irreducible iff its entry is positive.
    pub fn is_irreducible(&self) -> Result<bool> {
        self.check_nonnegative()?;
        let k = self.dim;
        if k == 1 {
            return Ok(self.data[0] > T::zero());
        }
        let forward = self.reaches_all(|i, j| self.get(i, j) > T::zero());
        let backward = self.reaches_all(|i, j| self.get(j, i) > T::zero());
        Ok(forward && backward)
    }

    fn reaches_all(&self, edge: impl Fn(usize, usize) -> bool) -> bool {
        let k = self.dim;
        let mut seen = vec![false; k];
        let mut stack = vec![0usize];
        seen[0] = true;
        let mut count = 1;
        while let Some(i) = stack.pop() {
            for j in 0..k {
                if !seen[j] && edge(i, j) {
                    seen[j] = true;
                    count += 1;
                    stack.push(j);
                }
            }
        }
        count == k
    }

    /// Dominant eigenvalue and left Perron vector with default tolerances.
    pub fn spectrum(&self) -> Result<Spectrum<T>> {
        self.perron_frobenius(T::of(DEFAULT_TOL), DEFAULT_MAX_ITER)
    }

    /// Power iteration for the dominant eigenvalue and the left Perron vector
    /// normalized to a probability vector.
    ///
    /// Iterates `x ↦ x B / (x B 1ᵀ)` with `B = (A/‖A‖ + I)/2`, which is
    /// primitive whenever `A` is irreducible, so periodic matrices such as
    /// `[[0,1],[1,0]]` converge too. Eigenvectors of `B` and `A` coincide and
    /// the eigenvalue is recovered as `λ = (x A) 1ᵀ`.
    pub fn perron_frobenius(&self, tol: T, max_iter: usize) -> Result<Spectrum<T>> {
        if !(tol > T::zero()) {
            return Err(Error::InvalidParameter(format!("tolerance must be positive, got {tol}")));
        }
        if !self.is_irreducible()? {
            return Err(Error::NotIrreducible);
        }
        let k = self.dim;
        if k == 1 {
            return Ok(Spectrum {
                lambda: self.data[0],
                pi: vec![T::one()],
                iterations: 0,
                residual: T::zero(),
            });
        }

        let norm = self.op_norm();
        let half = T::of(0.5);
        let mut shifted = self.scale(half / norm);
        for i in 0..k {
            let d = shifted.get(i, i);
            shifted.set(i, i, d + half);
        }

        let mut x = vec![T::one() / T::of(k as f64); k];
        let mut next = vec![T::zero(); k];
        let mut image = vec![T::zero(); k];
        for iteration in 1..=max_iter {
            shifted.left_mul_into(&x, &mut next);
            let mass: T = next.iter().copied().sum();
            next.iter_mut().for_each(|v| *v /= mass);
            let change = l1_distance(&x, &next);
            std::mem::swap(&mut x, &mut next);
            if change < tol {
                let total: T = x.iter().copied().sum();
                x.iter_mut().for_each(|v| *v /= total);
                self.left_mul_into(&x, &mut image);
                let lambda: T = image.iter().copied().sum();
                let residual: T =
                    image.iter().zip(&x).map(|(ax, xi)| (*ax - lambda * *xi).abs()).sum();
                if residual <= tol * lambda.max(T::one()) {
                    return Ok(Spectrum { lambda, pi: x, iterations: iteration, residual });
                }
            }
        }
        Err(Error::NoConvergence(max_iter))
    }
}

impl<T: fmt::Debug> fmt::Debug for NonnegMatrix<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let width = self.dim.max(1);
        f.debug_list().entries(self.data.chunks(width)).finish()
    }
}

/// Dominant eigenvalue `λ_H` with its left eigenvector `π_H` (a probability
/// vector with strictly positive entries).
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum<T> {
    pub lambda: T,
    pub pi: Vec<T>,
    pub iterations: usize,
    /// `‖π A − λ π‖₁` at termination.
    pub residual: T,
}
