//! Compressed sparse row storage, Matrix Market I/O, grid test problems and
//! the equilibration/matching pre-pass.

mod grid;
mod mm;
mod scaling;

use thiserror::Error;

use crate::dense::DenseMatrix;
use crate::scalar::Scalar;

pub use grid::{generate_grid_problem, GridKind, GridProblem};
pub use mm::{read_matrix_market, read_matrix_market_from, write_matrix_market, write_matrix_market_to, MmError};
pub use scaling::{apply_scaling, equilibrate_and_permute, undo_scaling, ScalingState, VectorSide};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SparseError {
    #[error("invalid CSR structure: {0}")]
    Structure(String),
    #[error("entry ({row}, {col}) is outside a {n}x{n} matrix")]
    IndexOutOfRange { row: usize, col: usize, n: usize },
    #[error("vector has length {got}, expected {expected}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("matrix is structurally singular: {0}")]
    StructurallySingular(String),
    #[error("invalid grid problem: {0}")]
    InvalidGrid(String),
}

/// Square sparse matrix in CSR form. Column indices are strictly increasing
/// within each row.
#[derive(Clone, Debug, PartialEq)]
pub struct SparseMatrix<T> {
    n: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<T>,
}

impl<T: Scalar> SparseMatrix<T> {
    /// Validates the CSR arrays.
    pub fn new(n: usize, row_ptr: Vec<usize>, col_idx: Vec<usize>, values: Vec<T>) -> Result<Self, SparseError> {
        if row_ptr.len() != n + 1 {
            return Err(SparseError::Structure(format!(
                "row_ptr has length {}, expected {}",
                row_ptr.len(),
                n + 1
            )));
        }
        if row_ptr[0] != 0 || row_ptr[n] != col_idx.len() || col_idx.len() != values.len() {
            return Err(SparseError::Structure("row_ptr does not span col_idx/values".into()));
        }
        for i in 0..n {
            if row_ptr[i] > row_ptr[i + 1] {
                return Err(SparseError::Structure(format!("row_ptr decreases at row {i}")));
            }
            let cols = &col_idx[row_ptr[i]..row_ptr[i + 1]];
            for (k, &c) in cols.iter().enumerate() {
                if c >= n {
                    return Err(SparseError::IndexOutOfRange { row: i, col: c, n });
                }
                if k > 0 && cols[k - 1] >= c {
                    return Err(SparseError::Structure(format!("row {i} columns not strictly increasing")));
                }
            }
        }
        Ok(SparseMatrix {
            n,
            row_ptr,
            col_idx,
            values,
        })
    }

    /// Builds from coordinate triplets, summing duplicates.
    pub fn from_triplets(n: usize, triplets: &[(usize, usize, T)]) -> Result<Self, SparseError> {
        let mut counts = vec![0usize; n + 1];
        for &(r, c, _) in triplets {
            if r >= n || c >= n {
                return Err(SparseError::IndexOutOfRange { row: r, col: c, n });
            }
            counts[r + 1] += 1;
        }
        for i in 0..n {
            counts[i + 1] += counts[i];
        }
        let mut next = counts.clone();
        let mut cols = vec![0usize; triplets.len()];
        let mut vals = vec![T::zero(); triplets.len()];
        for &(r, c, v) in triplets {
            cols[next[r]] = c;
            vals[next[r]] = v;
            next[r] += 1;
        }
        let mut row_ptr = Vec::with_capacity(n + 1);
        let mut col_idx = Vec::with_capacity(triplets.len());
        let mut values = Vec::with_capacity(triplets.len());
        row_ptr.push(0);
        let mut order: Vec<usize> = Vec::new();
        for i in 0..n {
            order.clear();
            order.extend(counts[i]..counts[i + 1]);
            order.sort_by_key(|&k| cols[k]);
            for &k in &order {
                if col_idx.len() > row_ptr[i] && *col_idx.last().unwrap() == cols[k] {
                    *values.last_mut().unwrap() += vals[k];
                } else {
                    col_idx.push(cols[k]);
                    values.push(vals[k]);
                }
            }
            row_ptr.push(col_idx.len());
        }
        Ok(SparseMatrix {
            n,
            row_ptr,
            col_idx,
            values,
        })
    }

    pub fn identity(n: usize) -> Self {
        SparseMatrix {
            n,
            row_ptr: (0..=n).collect(),
            col_idx: (0..n).collect(),
            values: vec![T::one(); n],
        }
    }

    pub fn from_dense(a: &DenseMatrix<T>) -> Self {
        assert_eq!(a.rows(), a.cols(), "from_dense needs a square matrix");
        let n = a.rows();
        let mut t = Vec::new();
        for i in 0..n {
            for j in 0..n {
                if a[(i, j)] != T::zero() {
                    t.push((i, j, a[(i, j)]));
                }
            }
        }
        Self::from_triplets(n, &t).expect("indices in range")
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.col_idx.len()
    }

    pub fn row_ptr(&self) -> &[usize] {
        &self.row_ptr
    }

    pub fn col_idx(&self) -> &[usize] {
        &self.col_idx
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    #[inline]
    pub fn row(&self, i: usize) -> (&[usize], &[T]) {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        (&self.col_idx[r.clone()], &self.values[r])
    }

    /// `A(i, j)`, zero when not stored.
    pub fn get(&self, i: usize, j: usize) -> T {
        let (cols, vals) = self.row(i);
        match cols.binary_search(&j) {
            Ok(k) => vals[k],
            Err(_) => T::zero(),
        }
    }

    /// `y <- A x`.
    pub fn matvec(&self, x: &[T], y: &mut [T]) {
        assert_eq!(x.len(), self.n);
        assert_eq!(y.len(), self.n);
        for (i, yi) in y.iter_mut().enumerate() {
            let (cols, vals) = self.row(i);
            *yi = cols.iter().zip(vals).map(|(&c, &v)| v * x[c]).sum();
        }
    }

    pub fn mul_vec(&self, x: &[T]) -> Vec<T> {
        let mut y = vec![T::zero(); self.n];
        self.matvec(x, &mut y);
        y
    }

    /// Conjugate transpose.
    pub fn adjoint(&self) -> Self {
        let n = self.n;
        let mut counts = vec![0usize; n + 1];
        for &c in &self.col_idx {
            counts[c + 1] += 1;
        }
        for i in 0..n {
            counts[i + 1] += counts[i];
        }
        let mut next = counts.clone();
        let mut col_idx = vec![0; self.nnz()];
        let mut values = vec![T::zero(); self.nnz()];
        for i in 0..n {
            let (cols, vals) = self.row(i);
            for (&c, &v) in cols.iter().zip(vals) {
                col_idx[next[c]] = i;
                values[next[c]] = v.conj();
                next[c] += 1;
            }
        }
        SparseMatrix {
            n,
            row_ptr: counts,
            col_idx,
            values,
        }
    }

    /// `B(perm[i], perm[j]) = A(i, j)` where `perm` maps old to new indices.
    pub fn permute_symmetric(&self, perm: &[usize]) -> Self {
        self.permute(perm, perm)
    }

    /// `B(row_perm[i], col_perm[j]) = A(i, j)`.
    pub fn permute(&self, row_perm: &[usize], col_perm: &[usize]) -> Self {
        let n = self.n;
        assert_eq!(row_perm.len(), n);
        assert_eq!(col_perm.len(), n);
        let mut inv = vec![0; n];
        for (old, &new) in row_perm.iter().enumerate() {
            inv[new] = old;
        }
        let mut row_ptr = Vec::with_capacity(n + 1);
        let mut col_idx = Vec::with_capacity(self.nnz());
        let mut values = Vec::with_capacity(self.nnz());
        row_ptr.push(0);
        let mut buf: Vec<(usize, T)> = Vec::new();
        for &old in &inv {
            let (cols, vals) = self.row(old);
            buf.clear();
            buf.extend(cols.iter().zip(vals).map(|(&c, &v)| (col_perm[c], v)));
            buf.sort_by_key(|e| e.0);
            for &(c, v) in &buf {
                col_idx.push(c);
                values.push(v);
            }
            row_ptr.push(col_idx.len());
        }
        SparseMatrix {
            n,
            row_ptr,
            col_idx,
            values,
        }
    }

    pub fn to_dense(&self) -> DenseMatrix<T> {
        let mut d = DenseMatrix::zeros(self.n, self.n);
        for i in 0..self.n {
            let (cols, vals) = self.row(i);
            for (&c, &v) in cols.iter().zip(vals) {
                d[(i, c)] += v;
            }
        }
        d
    }

    /// Adjacency of `A + A^T` without self loops.
    pub fn symmetric_graph(&self) -> Graph {
        let n = self.n;
        let mut deg = vec![0usize; n];
        for i in 0..n {
            for &c in self.row(i).0 {
                if c != i {
                    deg[i] += 1;
                    deg[c] += 1;
                }
            }
        }
        let mut xadj = vec![0usize; n + 1];
        for i in 0..n {
            xadj[i + 1] = xadj[i] + deg[i];
        }
        let mut next = xadj.clone();
        let mut adj = vec![0usize; xadj[n]];
        for i in 0..n {
            for &c in self.row(i).0 {
                if c != i {
                    adj[next[i]] = c;
                    next[i] += 1;
                    adj[next[c]] = i;
                    next[c] += 1;
                }
            }
        }
        let mut out_x = Vec::with_capacity(n + 1);
        let mut out = Vec::with_capacity(adj.len());
        out_x.push(0);
        for i in 0..n {
            let nb = &mut adj[xadj[i]..xadj[i + 1]];
            nb.sort_unstable();
            let mut last = usize::MAX;
            for &v in nb.iter() {
                if v != last {
                    out.push(v);
                    last = v;
                }
            }
            out_x.push(out.len());
        }
        Graph { xadj: out_x, adj: out }
    }

    /// Largest absolute row sum.
    pub fn norm_inf(&self) -> f64 {
        (0..self.n)
            .map(|i| self.row(i).1.iter().map(|v| v.abs()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    pub fn bytes(&self) -> usize {
        self.values.len() * T::BYTES + (self.col_idx.len() + self.row_ptr.len()) * std::mem::size_of::<usize>()
    }

    pub(crate) fn values_mut(&mut self) -> &mut [T] {
        &mut self.values
    }
}

/// Undirected graph in compressed adjacency form, neighbours sorted.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Graph {
    pub xadj: Vec<usize>,
    pub adj: Vec<usize>,
}

impl Graph {
    pub fn n(&self) -> usize {
        self.xadj.len() - 1
    }

    #[inline]
    pub fn neighbors(&self, v: usize) -> &[usize] {
        &self.adj[self.xadj[v]..self.xadj[v + 1]]
    }

    /// Relabels vertex `v` as `perm[v]`.
    pub fn permute(&self, perm: &[usize]) -> Graph {
        let n = self.n();
        let mut inv = vec![0; n];
        for (old, &new) in perm.iter().enumerate() {
            inv[new] = old;
        }
        let mut xadj = Vec::with_capacity(n + 1);
        let mut adj = Vec::with_capacity(self.adj.len());
        xadj.push(0);
        for &old in &inv {
            let start = adj.len();
            adj.extend(self.neighbors(old).iter().map(|&w| perm[w]));
            adj[start..].sort_unstable();
            xadj.push(adj.len());
        }
        Graph { xadj, adj }
    }

    pub fn from_edges(n: usize, edges: &[(usize, usize)]) -> Graph {
        let t: Vec<(usize, usize, f64)> = edges
            .iter()
            .flat_map(|&(u, v)| [(u, v, 1.0), (v, u, 1.0)])
            .collect();
        SparseMatrix::from_triplets(n, &t).expect("edge endpoints in range").symmetric_graph()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn triplets_sum_duplicates_and_sort() {
        let a = SparseMatrix::from_triplets(3, &[(0, 2, 1.0), (0, 0, 2.0), (0, 2, 0.5), (2, 1, -1.0)]).unwrap();
        assert_eq!(a.row_ptr(), &[0, 2, 2, 3]);
        assert_eq!(a.col_idx(), &[0, 2, 1]);
        assert_eq!(a.values(), &[2.0, 1.5, -1.0]);
        assert_eq!(a.get(0, 2), 1.5);
        assert_eq!(a.get(1, 1), 0.0);
    }

    #[test]
    fn new_rejects_bad_structure() {
        assert!(SparseMatrix::<f64>::new(2, vec![0, 1, 2], vec![1, 0], vec![1.0, 1.0]).is_ok());
        assert!(matches!(
            SparseMatrix::<f64>::new(2, vec![0, 2, 2], vec![1, 0], vec![1.0, 1.0]),
            Err(SparseError::Structure(_))
        ));
        assert!(matches!(
            SparseMatrix::<f64>::new(2, vec![0, 1, 2], vec![1, 5], vec![1.0, 1.0]),
            Err(SparseError::IndexOutOfRange { .. })
        ));
    }

    #[test]
    fn permute_and_adjoint_match_dense() {
        let a = SparseMatrix::from_triplets(3, &[(0, 1, 2.0), (1, 2, 3.0), (2, 0, 4.0), (1, 1, 5.0)]).unwrap();
        let p = [2, 0, 1];
        let b = a.permute_symmetric(&p);
        for i in 0..3 {
            for j in 0..3 {
                assert_eq!(b.get(p[i], p[j]), a.get(i, j));
                assert_eq!(a.adjoint().get(j, i), a.get(i, j));
            }
        }
    }

    #[test]
    fn symmetric_graph_drops_diagonal() {
        let a = SparseMatrix::from_triplets(3, &[(0, 1, 2.0), (0, 0, 1.0), (2, 0, 1.0)]).unwrap();
        let g = a.symmetric_graph();
        assert_eq!(g.neighbors(0), &[1, 2]);
        assert_eq!(g.neighbors(1), &[0]);
        assert_eq!(g.neighbors(2), &[0]);
    }
}
