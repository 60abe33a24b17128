//! Small dense linear algebra over [`Real`] scalars.
//!
//! The systems solved here are per-stratum kernels of a handful of cells, so
//! everything is row-major `Vec` storage with textbook algorithms: partial
//! pivoting LU for inverses and one-sided Jacobi SVD for minimum-norm least
//! squares.

use std::ops::{Index, IndexMut};

use crate::scalar::Real;

#[derive(Debug, Clone, PartialEq)]
pub struct Matrix<T> {
    rows: usize,
    cols: usize,
    data: Vec<T>,
}

impl<T: Real> Matrix<T> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![T::zero(); rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = T::one();
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> T) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for c in 0..cols {
                data.push(f(r, c));
            }
        }
        Self { rows, cols, data }
    }

    /// Builds from row vectors. Panics on ragged input.
    pub fn from_rows(rows: &[Vec<T>]) -> Self {
        let r = rows.len();
        let c = rows.first().map_or(0, Vec::len);
        assert!(rows.iter().all(|row| row.len() == c), "ragged rows");
        Self { rows: r, cols: c, data: rows.concat() }
    }

    /// `u vᵀ`
    pub fn outer(u: &[T], v: &[T]) -> Self {
        Self::from_fn(u.len(), v.len(), |r, c| u[r] * v[c])
    }

    pub fn diag(d: &[T]) -> Self {
        let mut m = Self::zeros(d.len(), d.len());
        for (i, &x) in d.iter().enumerate() {
            m[(i, i)] = x;
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, r: usize) -> &[T] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn to_rows(&self) -> Vec<Vec<T>> {
        (0..self.rows).map(|r| self.row(r).to_vec()).collect()
    }

    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |r, c| self[(c, r)])
    }

    pub fn matmul(&self, rhs: &Self) -> Self {
        assert_eq!(self.cols, rhs.rows, "inner dimensions differ");
        let mut out = Self::zeros(self.rows, rhs.cols);
        for r in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(r, k)];
                if a == T::zero() {
                    continue;
                }
                for c in 0..rhs.cols {
                    out[(r, c)] = out[(r, c)] + a * rhs[(k, c)];
                }
            }
        }
        out
    }

    pub fn matvec(&self, v: &[T]) -> Vec<T> {
        assert_eq!(self.cols, v.len(), "dimension mismatch");
        (0..self.rows).map(|r| dot(self.row(r), v)).collect()
    }

    /// `selfᵀ v`
    pub fn tr_matvec(&self, v: &[T]) -> Vec<T> {
        assert_eq!(self.rows, v.len(), "dimension mismatch");
        let mut out = vec![T::zero(); self.cols];
        for r in 0..self.rows {
            for (c, o) in out.iter_mut().enumerate() {
                *o = *o + self[(r, c)] * v[r];
            }
        }
        out
    }

    pub fn add(&self, rhs: &Self) -> Self {
        assert_eq!((self.rows, self.cols), (rhs.rows, rhs.cols));
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&rhs.data).map(|(&a, &b)| a + b).collect(),
        }
    }

    pub fn scale(&self, s: T) -> Self {
        Self { rows: self.rows, cols: self.cols, data: self.data.iter().map(|&a| a * s).collect() }
    }

    pub fn frobenius(&self) -> T {
        self.data.iter().map(|&a| a * a).sum::<T>().sqrt()
    }

    pub fn max_abs_diff(&self, rhs: &Self) -> T {
        assert_eq!((self.rows, self.cols), (rhs.rows, rhs.cols));
        self.data
            .iter()
            .zip(&rhs.data)
            .map(|(&a, &b)| (a - b).abs())
            .fold(T::zero(), T::max)
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }

    pub fn cast<U: Real>(&self) -> Matrix<U> {
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|x| U::lit(x.to_f64_lossy())).collect(),
        }
    }

    /// Inverse by LU with partial pivoting. `None` when a pivot vanishes.
    pub fn lu_inverse(&self) -> Option<Self> {
        assert_eq!(self.rows, self.cols, "inverse of non-square matrix");
        let n = self.rows;
        let mut a = self.clone();
        let mut inv = Self::identity(n);
        for col in 0..n {
            let pivot = (col..n)
                .max_by(|&i, &j| a[(i, col)].abs().partial_cmp(&a[(j, col)].abs()).unwrap())?;
            if a[(pivot, col)] == T::zero() || !a[(pivot, col)].is_finite() {
                return None;
            }
            a.swap_rows(col, pivot);
            inv.swap_rows(col, pivot);
            let p = a[(col, col)];
            for c in 0..n {
                a[(col, c)] = a[(col, c)] / p;
                inv[(col, c)] = inv[(col, c)] / p;
            }
            for r in 0..n {
                if r == col {
                    continue;
                }
                let f = a[(r, col)];
                if f == T::zero() {
                    continue;
                }
                for c in 0..n {
                    a[(r, c)] = a[(r, c)] - f * a[(col, c)];
                    inv[(r, c)] = inv[(r, c)] - f * inv[(col, c)];
                }
            }
        }
        Some(inv)
    }

    fn swap_rows(&mut self, a: usize, b: usize) {
        if a == b {
            return;
        }
        for c in 0..self.cols {
            self.data.swap(a * self.cols + c, b * self.cols + c);
        }
    }
}

impl<T> Index<(usize, usize)> for Matrix<T> {
    type Output = T;
    fn index(&self, (r, c): (usize, usize)) -> &T {
        &self.data[r * self.cols + c]
    }
}

impl<T> IndexMut<(usize, usize)> for Matrix<T> {
    fn index_mut(&mut self, (r, c): (usize, usize)) -> &mut T {
        &mut self.data[r * self.cols + c]
    }
}

pub fn dot<T: Real>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).map(|(&x, &y)| x * y).sum()
}

pub fn norm<T: Real>(a: &[T]) -> T {
    dot(a, a).sqrt()
}

/// Thin singular value decomposition `A = U diag(s) Vᵀ`.
#[derive(Debug, Clone)]
pub struct Svd<T> {
    /// `rows × r` with orthonormal columns where `s > 0`.
    pub u: Matrix<T>,
    pub s: Vec<T>,
    /// `cols × r`
    pub v: Matrix<T>,
}

impl<T: Real> Svd<T> {
    /// One-sided Jacobi. For `rows < cols` the transpose is decomposed.
    pub fn new(a: &Matrix<T>) -> Self {
        if a.rows() < a.cols() {
            let t = Self::new(&a.transpose());
            return Self { u: t.v, s: t.s, v: t.u };
        }
        let (m, n) = (a.rows(), a.cols());
        let mut w = a.clone();
        let mut v = Matrix::<T>::identity(n);
        let eps = T::epsilon();
        for _sweep in 0..100 {
            let mut rotated = false;
            for p in 0..n {
                for q in (p + 1)..n {
                    let (mut alpha, mut beta, mut gamma) = (T::zero(), T::zero(), T::zero());
                    for i in 0..m {
                        let (x, y) = (w[(i, p)], w[(i, q)]);
                        alpha = alpha + x * x;
                        beta = beta + y * y;
                        gamma = gamma + x * y;
                    }
                    if gamma == T::zero() || gamma.abs() <= eps * (alpha * beta).sqrt() {
                        continue;
                    }
                    rotated = true;
                    let two = T::lit(2.0);
                    let zeta = (beta - alpha) / (two * gamma);
                    let t = zeta.signum() / (zeta.abs() + (T::one() + zeta * zeta).sqrt());
                    let c = T::one() / (T::one() + t * t).sqrt();
                    let s = c * t;
                    for i in 0..m {
                        let (x, y) = (w[(i, p)], w[(i, q)]);
                        w[(i, p)] = c * x - s * y;
                        w[(i, q)] = s * x + c * y;
                    }
                    for i in 0..n {
                        let (x, y) = (v[(i, p)], v[(i, q)]);
                        v[(i, p)] = c * x - s * y;
                        v[(i, q)] = s * x + c * y;
                    }
                }
            }
            if !rotated {
                break;
            }
        }
        let mut s = vec![T::zero(); n];
        let mut u = Matrix::zeros(m, n);
        for (j, sj) in s.iter_mut().enumerate() {
            let col_norm = (0..m).map(|i| w[(i, j)] * w[(i, j)]).sum::<T>().sqrt();
            *sj = col_norm;
            if col_norm > T::zero() {
                for i in 0..m {
                    u[(i, j)] = w[(i, j)] / col_norm;
                }
            }
        }
        Self { u, s, v }
    }

    pub fn max_singular(&self) -> T {
        self.s.iter().copied().fold(T::zero(), T::max)
    }

    /// Singular values at or below this are treated as zero.
    pub fn cutoff(&self) -> T {
        let dim = T::from_usize_lossy(self.u.rows().max(self.v.rows()));
        dim * T::epsilon() * self.max_singular() * T::lit(8.0)
    }

    pub fn rank(&self) -> usize {
        let cut = self.cutoff();
        self.s.iter().filter(|&&x| x > cut).count()
    }

    /// Columns of `V` spanning the numerical kernel.
    pub fn kernel_basis(&self) -> Vec<Vec<T>> {
        let cut = self.cutoff();
        let n = self.v.rows();
        let mut basis: Vec<Vec<T>> = self
            .s
            .iter()
            .enumerate()
            .filter(|(_, &x)| x <= cut)
            .map(|(j, _)| (0..n).map(|i| self.v[(i, j)]).collect())
            .collect();
        // Transposed decompositions of wide matrices leave kernel directions
        // outside V; complete them by Gram-Schmidt against the range of V.
        if self.v.cols() < n {
            let kept: Vec<Vec<T>> = self
                .s
                .iter()
                .enumerate()
                .filter(|(_, &x)| x > cut)
                .map(|(j, _)| (0..n).map(|i| self.v[(i, j)]).collect())
                .collect();
            for e in 0..n {
                let mut x = vec![T::zero(); n];
                x[e] = T::one();
                for b in kept.iter().chain(basis.iter()) {
                    let p = dot(&x, b);
                    for (xi, &bi) in x.iter_mut().zip(b) {
                        *xi = *xi - p * bi;
                    }
                }
                let nx = norm(&x);
                if nx > T::lit(1e-6) {
                    basis.push(x.into_iter().map(|xi| xi / nx).collect());
                }
                if basis.len() + kept.len() == n {
                    break;
                }
            }
        }
        basis
    }

    /// Minimum-norm least-squares solution of `A x = b`.
    pub fn solve_min_norm(&self, b: &[T]) -> Vec<T> {
        let cut = self.cutoff();
        let n = self.v.rows();
        let mut x = vec![T::zero(); n];
        for (j, &sj) in self.s.iter().enumerate() {
            if sj <= cut {
                continue;
            }
            let coef = (0..self.u.rows()).map(|i| self.u[(i, j)] * b[i]).sum::<T>() / sj;
            for (i, xi) in x.iter_mut().enumerate() {
                *xi = *xi + coef * self.v[(i, j)];
            }
        }
        x
    }
}

/// Outcome of a minimum-norm least-squares solve.
#[derive(Debug, Clone)]
pub struct LstsqSolution<T> {
    pub x: Vec<T>,
    pub residual: T,
    pub rank: usize,
}

/// Solves `A x = b` in the minimum-norm least-squares sense and reports the
/// Euclidean residual `‖A x − b‖`.
pub fn lstsq_min_norm<T: Real>(a: &Matrix<T>, b: &[T]) -> LstsqSolution<T> {
    assert_eq!(a.rows(), b.len(), "dimension mismatch");
    let svd = Svd::new(a);
    let x = svd.solve_min_norm(b);
    let ax = a.matvec(&x);
    let residual = ax.iter().zip(b).map(|(&p, &q)| (p - q) * (p - q)).sum::<T>().sqrt();
    LstsqSolution { x, residual, rank: svd.rank() }
}
