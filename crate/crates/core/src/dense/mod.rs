//! Column-major dense matrices, borrowed views and the recursive task-parallel
//! kernels built on them.
//!
//! Every kernel takes a [`Par`] budget. Work is split recursively and the two
//! halves run through `rayon::join` while `depth < max_depth`; past that the
//! recursion continues (or bottoms out) sequentially. Splits only ever hand
//! disjoint output views to the two tasks, so there is no locking anywhere.

mod gemm;
mod id;
mod lu;
mod qr;
mod triangular;

use std::fmt;
use std::marker::PhantomData;
use std::ops::{Index, IndexMut};

use thiserror::Error;

use crate::scalar::Scalar;

pub use gemm::{gemm, gemm_flops, matmul, GEMM_THRESHOLD};
pub use id::{interpolative_decomposition, InterpolativeDecomposition};
pub(crate) use id::interpolative_decomposition_capped;
pub use lu::{lu_partial_pivot, LuFactors};
pub use qr::{householder_qr, lq, rrqr_tolerance, HouseholderQr, Rrqr};
pub use triangular::{laswp, trmm, trsm, Diag, Side, Uplo};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DenseError {
    #[error("shape mismatch in {op}: {detail}")]
    Shape { op: &'static str, detail: String },
    #[error("matrix is singular: zero pivot in column {column}")]
    Singular { column: usize },
}

pub(crate) fn shape_err(op: &'static str, detail: impl Into<String>) -> DenseError {
    DenseError::Shape {
        op,
        detail: detail.into(),
    }
}

/// Recursion depth budget for task spawning.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Par {
    pub depth: usize,
    pub max_depth: usize,
}

impl Par {
    /// Never spawns.
    pub const SEQ: Par = Par {
        depth: 0,
        max_depth: 0,
    };

    /// `ceil(log2(threads)) + 3`.
    pub fn for_threads(threads: usize) -> Par {
        let threads = threads.max(1);
        let log = usize::BITS as usize - (threads - 1).leading_zeros() as usize;
        let log = if threads == 1 { 0 } else { log };
        Par {
            depth: 0,
            max_depth: log + 3,
        }
    }

    /// Budget sized for the rayon pool the caller is running in.
    pub fn current() -> Par {
        Par::for_threads(rayon::current_num_threads())
    }

    #[inline]
    pub fn can_spawn(self) -> bool {
        self.depth < self.max_depth
    }

    #[inline]
    pub fn child(self) -> Par {
        Par {
            depth: self.depth + 1,
            max_depth: self.max_depth,
        }
    }

    /// Runs both closures, in parallel when the budget allows.
    pub fn join<A, B, RA, RB>(self, a: A, b: B) -> (RA, RB)
    where
        A: FnOnce(Par) -> RA + Send,
        B: FnOnce(Par) -> RB + Send,
        RA: Send,
        RB: Send,
    {
        let next = self.child();
        if self.can_spawn() {
            rayon::join(|| a(next), || b(next))
        } else {
            (a(next), b(next))
        }
    }
}

/// Owned column-major matrix with leading dimension equal to `rows`.
#[derive(Clone, PartialEq)]
pub struct DenseMatrix<T> {
    rows: usize,
    cols: usize,
    data: Vec<T>,
}

impl<T: Scalar> DenseMatrix<T> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        DenseMatrix {
            rows,
            cols,
            data: vec![T::zero(); rows * cols],
        }
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
        for j in 0..cols {
            for i in 0..rows {
                data.push(f(i, j));
            }
        }
        DenseMatrix { rows, cols, data }
    }

    /// Builds from row-major nested slices; handy in tests.
    pub fn from_rows(rows: &[&[T]]) -> Self {
        let m = rows.len();
        let n = rows.first().map_or(0, |r| r.len());
        assert!(rows.iter().all(|r| r.len() == n), "ragged rows");
        Self::from_fn(m, n, |i, j| rows[i][j])
    }

    /// Wraps column-major storage.
    pub fn from_col_major(rows: usize, cols: usize, data: Vec<T>) -> Self {
        assert_eq!(data.len(), rows * cols);
        DenseMatrix { rows, cols, data }
    }

    pub fn from_diag(d: &[T]) -> Self {
        let mut m = Self::zeros(d.len(), d.len());
        for (i, &v) in d.iter().enumerate() {
            m[(i, i)] = v;
        }
        m
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.rows == 0 || self.cols == 0
    }

    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<T> {
        self.data
    }

    #[inline]
    pub fn col(&self, j: usize) -> &[T] {
        &self.data[j * self.rows..(j + 1) * self.rows]
    }

    #[inline]
    pub fn col_mut(&mut self, j: usize) -> &mut [T] {
        &mut self.data[j * self.rows..(j + 1) * self.rows]
    }

    pub fn as_ref(&self) -> MatRef<'_, T> {
        MatRef {
            ptr: self.data.as_ptr(),
            rows: self.rows,
            cols: self.cols,
            ld: self.rows.max(1),
            _marker: PhantomData,
        }
    }

    pub fn as_mut(&mut self) -> MatMut<'_, T> {
        MatMut {
            ptr: self.data.as_mut_ptr(),
            rows: self.rows,
            cols: self.cols,
            ld: self.rows.max(1),
            _marker: PhantomData,
        }
    }

    /// Conjugate transpose.
    pub fn adjoint(&self) -> Self {
        self.as_ref().adjoint()
    }

    pub fn frobenius_norm(&self) -> f64 {
        crate::scalar::norm2(&self.data)
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|v| v.abs()).fold(0.0, f64::max)
    }

    /// Copies rows `rows` and columns `cols` (arbitrary index lists).
    pub fn select(&self, rows: &[usize], cols: &[usize]) -> Self {
        Self::from_fn(rows.len(), cols.len(), |i, j| self[(rows[i], cols[j])])
    }

    pub fn select_rows(&self, rows: &[usize]) -> Self {
        Self::from_fn(rows.len(), self.cols, |i, j| self[(rows[i], j)])
    }

    pub fn select_cols(&self, cols: &[usize]) -> Self {
        let mut data = Vec::with_capacity(self.rows * cols.len());
        for &c in cols {
            data.extend_from_slice(self.col(c));
        }
        DenseMatrix {
            rows: self.rows,
            cols: cols.len(),
            data,
        }
    }

    pub fn block(&self, r0: usize, c0: usize, nr: usize, nc: usize) -> Self {
        self.as_ref().sub(r0, c0, nr, nc).to_owned()
    }

    /// Appends the columns of `other` (same row count).
    pub fn append_cols(&mut self, other: &DenseMatrix<T>) {
        assert_eq!(self.rows, other.rows, "append_cols row mismatch");
        self.data.extend_from_slice(&other.data);
        self.cols += other.cols;
    }

    /// `[self; other]`.
    pub fn vstack(&self, other: &DenseMatrix<T>) -> Self {
        assert_eq!(self.cols, other.cols, "vstack column mismatch");
        let m = self.rows + other.rows;
        Self::from_fn(m, self.cols, |i, j| {
            if i < self.rows {
                self[(i, j)]
            } else {
                other[(i - self.rows, j)]
            }
        })
    }

    pub fn block_diag(a: &DenseMatrix<T>, b: &DenseMatrix<T>) -> Self {
        let mut m = Self::zeros(a.rows + b.rows, a.cols + b.cols);
        m.as_mut().sub(0, 0, a.rows, a.cols).copy_from(a.as_ref());
        m.as_mut()
            .sub(a.rows, a.cols, b.rows, b.cols)
            .copy_from(b.as_ref());
        m
    }

    pub fn scale_in_place(&mut self, alpha: T) {
        for v in &mut self.data {
            *v *= alpha;
        }
    }

    /// `self += alpha * other`.
    pub fn axpy(&mut self, alpha: T, other: &DenseMatrix<T>) {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += alpha * *b;
        }
    }

    pub fn sub_matrix(&self, other: &DenseMatrix<T>) -> Self {
        let mut out = self.clone();
        out.axpy(-T::one(), other);
        out
    }

    /// Truncates to the leading `cols` columns.
    pub fn truncate_cols(&mut self, cols: usize) {
        assert!(cols <= self.cols);
        self.data.truncate(self.rows * cols);
        self.cols = cols;
    }

    pub fn bytes(&self) -> usize {
        self.data.len() * T::BYTES
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }
}

impl<T: Scalar> Index<(usize, usize)> for DenseMatrix<T> {
    type Output = T;
    #[inline(always)]
    fn index(&self, (i, j): (usize, usize)) -> &T {
        debug_assert!(i < self.rows && j < self.cols);
        &self.data[i + j * self.rows]
    }
}

impl<T: Scalar> IndexMut<(usize, usize)> for DenseMatrix<T> {
    #[inline(always)]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut T {
        debug_assert!(i < self.rows && j < self.cols);
        &mut self.data[i + j * self.rows]
    }
}

impl<T: fmt::Debug> fmt::Debug for DenseMatrix<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "DenseMatrix {}x{} [", self.rows, self.cols)?;
        for i in 0..self.rows.min(12) {
            write!(f, "  ")?;
            for j in 0..self.cols.min(12) {
                write!(f, "{:?} ", self.data[i + j * self.rows])?;
            }
            writeln!(f)?;
        }
        write!(f, "]")
    }
}

/// Immutable strided view.
#[derive(Clone, Copy)]
pub struct MatRef<'a, T> {
    ptr: *const T,
    rows: usize,
    cols: usize,
    ld: usize,
    _marker: PhantomData<&'a T>,
}

// SAFETY: a MatRef is a shared borrow of `T` values.
unsafe impl<T: Sync> Send for MatRef<'_, T> {}
unsafe impl<T: Sync> Sync for MatRef<'_, T> {}

impl<'a, T: Scalar> MatRef<'a, T> {
    pub fn from_slice(data: &'a [T], rows: usize, cols: usize) -> Self {
        assert_eq!(data.len(), rows * cols);
        MatRef {
            ptr: data.as_ptr(),
            rows,
            cols,
            ld: rows.max(1),
            _marker: PhantomData,
        }
    }

    #[inline(always)]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline(always)]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline(always)]
    pub fn get(&self, i: usize, j: usize) -> T {
        debug_assert!(i < self.rows && j < self.cols);
        // SAFETY: in bounds per the view's shape.
        unsafe { *self.ptr.add(i + j * self.ld) }
    }

    #[inline(always)]
    pub fn col(&self, j: usize) -> &'a [T] {
        debug_assert!(j < self.cols);
        // SAFETY: a column of a column-major view is contiguous.
        unsafe { std::slice::from_raw_parts(self.ptr.add(j * self.ld), self.rows) }
    }

    pub fn sub(&self, r0: usize, c0: usize, nr: usize, nc: usize) -> MatRef<'a, T> {
        assert!(r0 + nr <= self.rows && c0 + nc <= self.cols, "sub view out of range");
        MatRef {
            // SAFETY: offset stays inside the parent allocation (or one past it when empty).
            ptr: if nr == 0 || nc == 0 {
                self.ptr
            } else {
                unsafe { self.ptr.add(r0 + c0 * self.ld) }
            },
            rows: nr,
            cols: nc,
            ld: self.ld,
            _marker: PhantomData,
        }
    }

    pub fn split_rows(&self, k: usize) -> (MatRef<'a, T>, MatRef<'a, T>) {
        (
            self.sub(0, 0, k, self.cols),
            self.sub(k, 0, self.rows - k, self.cols),
        )
    }

    pub fn split_cols(&self, k: usize) -> (MatRef<'a, T>, MatRef<'a, T>) {
        (
            self.sub(0, 0, self.rows, k),
            self.sub(0, k, self.rows, self.cols - k),
        )
    }

    pub fn to_owned(&self) -> DenseMatrix<T> {
        DenseMatrix::from_fn(self.rows, self.cols, |i, j| self.get(i, j))
    }

    pub fn adjoint(&self) -> DenseMatrix<T> {
        DenseMatrix::from_fn(self.cols, self.rows, |i, j| self.get(j, i).conj())
    }
}

/// Mutable strided view. Splitting yields disjoint views.
pub struct MatMut<'a, T> {
    ptr: *mut T,
    rows: usize,
    cols: usize,
    ld: usize,
    _marker: PhantomData<&'a mut T>,
}

// SAFETY: a MatMut is an exclusive borrow of its entries.
unsafe impl<T: Send> Send for MatMut<'_, T> {}
unsafe impl<T: Sync> Sync for MatMut<'_, T> {}

impl<'a, T: Scalar> MatMut<'a, T> {
    pub fn from_slice(data: &'a mut [T], rows: usize, cols: usize) -> Self {
        assert_eq!(data.len(), rows * cols);
        MatMut {
            ptr: data.as_mut_ptr(),
            rows,
            cols,
            ld: rows.max(1),
            _marker: PhantomData,
        }
    }

    #[inline(always)]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline(always)]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline(always)]
    pub fn get(&self, i: usize, j: usize) -> T {
        debug_assert!(i < self.rows && j < self.cols);
        // SAFETY: in bounds.
        unsafe { *self.ptr.add(i + j * self.ld) }
    }

    #[inline(always)]
    pub fn set(&mut self, i: usize, j: usize, v: T) {
        debug_assert!(i < self.rows && j < self.cols);
        // SAFETY: in bounds and exclusively borrowed.
        unsafe { *self.ptr.add(i + j * self.ld) = v }
    }

    #[inline(always)]
    pub fn at(&mut self, i: usize, j: usize) -> &mut T {
        debug_assert!(i < self.rows && j < self.cols);
        // SAFETY: in bounds and exclusively borrowed.
        unsafe { &mut *self.ptr.add(i + j * self.ld) }
    }

    #[inline(always)]
    pub fn col_mut(&mut self, j: usize) -> &mut [T] {
        debug_assert!(j < self.cols);
        // SAFETY: contiguous column, exclusively borrowed.
        unsafe { std::slice::from_raw_parts_mut(self.ptr.add(j * self.ld), self.rows) }
    }

    #[inline(always)]
    pub fn col(&self, j: usize) -> &[T] {
        // SAFETY: contiguous column.
        unsafe { std::slice::from_raw_parts(self.ptr.add(j * self.ld), self.rows) }
    }

    pub fn rb(&self) -> MatRef<'_, T> {
        MatRef {
            ptr: self.ptr,
            rows: self.rows,
            cols: self.cols,
            ld: self.ld,
            _marker: PhantomData,
        }
    }

    pub fn rb_mut(&mut self) -> MatMut<'_, T> {
        MatMut {
            ptr: self.ptr,
            rows: self.rows,
            cols: self.cols,
            ld: self.ld,
            _marker: PhantomData,
        }
    }

    pub fn sub(self, r0: usize, c0: usize, nr: usize, nc: usize) -> MatMut<'a, T> {
        assert!(r0 + nr <= self.rows && c0 + nc <= self.cols, "sub view out of range");
        MatMut {
            ptr: if nr == 0 || nc == 0 {
                self.ptr
            } else {
                // SAFETY: stays within the parent view.
                unsafe { self.ptr.add(r0 + c0 * self.ld) }
            },
            rows: nr,
            cols: nc,
            ld: self.ld,
            _marker: PhantomData,
        }
    }

    pub fn split_rows(self, k: usize) -> (MatMut<'a, T>, MatMut<'a, T>) {
        assert!(k <= self.rows);
        let (rows, cols, ld, ptr) = (self.rows, self.cols, self.ld, self.ptr);
        let top = MatMut {
            ptr,
            rows: k,
            cols,
            ld,
            _marker: PhantomData,
        };
        let bottom = MatMut {
            ptr: if k == rows || cols == 0 {
                ptr
            } else {
                // SAFETY: row offset inside the view.
                unsafe { ptr.add(k) }
            },
            rows: rows - k,
            cols,
            ld,
            _marker: PhantomData,
        };
        (top, bottom)
    }

    pub fn split_cols(self, k: usize) -> (MatMut<'a, T>, MatMut<'a, T>) {
        assert!(k <= self.cols);
        let (rows, cols, ld, ptr) = (self.rows, self.cols, self.ld, self.ptr);
        let left = MatMut {
            ptr,
            rows,
            cols: k,
            ld,
            _marker: PhantomData,
        };
        let right = MatMut {
            ptr: if k == cols || rows == 0 {
                ptr
            } else {
                // SAFETY: column offset inside the view.
                unsafe { ptr.add(k * ld) }
            },
            rows,
            cols: cols - k,
            ld,
            _marker: PhantomData,
        };
        (left, right)
    }

    pub fn copy_from(&mut self, src: MatRef<'_, T>) {
        assert_eq!((self.rows, self.cols), (src.rows(), src.cols()));
        for j in 0..self.cols {
            self.col_mut(j).copy_from_slice(src.col(j));
        }
    }

    pub fn fill(&mut self, v: T) {
        for j in 0..self.cols {
            self.col_mut(j).fill(v);
        }
    }

    pub fn swap_rows(&mut self, a: usize, b: usize) {
        if a == b {
            return;
        }
        for j in 0..self.cols {
            let col = self.col_mut(j);
            col.swap(a, b);
        }
    }
}
