use std::ops::Range;

use crate::dense::{DenseMatrix, Par};
use crate::hss::{HssNode, HssSource, PartialUlv};
use crate::order::FrontNode;
use crate::random::SeededRowSampler;
use crate::scalar::Scalar;
use crate::sparse::SparseMatrix;

/// Entries of `A` that belong to a front: rows or columns in the separator.
/// Stored per local row, sorted by local column.
#[derive(Clone, Debug)]
pub(crate) struct FrontEntries<T> {
    pub rows: Vec<Vec<(usize, T)>>,
}

impl<T: Scalar> FrontEntries<T> {
    pub fn nnz(&self) -> usize {
        self.rows.iter().map(|r| r.len()).sum()
    }

    pub fn get(&self, r: usize, c: usize) -> T {
        let row = &self.rows[r];
        match row.binary_search_by_key(&c, |e| e.0) {
            Ok(p) => row[p].1,
            Err(_) => T::zero(),
        }
    }
}

pub(crate) fn local_index(idx: &[usize], g: usize) -> usize {
    idx.binary_search(&g).expect("index belongs to the front")
}

/// `at` is the adjoint of `a`, used for column access.
pub(crate) fn front_entries<T: Scalar>(
    a: &SparseMatrix<T>,
    at: &SparseMatrix<T>,
    node: &FrontNode,
    idx: &[usize],
) -> FrontEntries<T> {
    let mut rows: Vec<Vec<(usize, T)>> = vec![Vec::new(); idx.len()];
    let sep = node.sep.clone();
    for r in sep.clone() {
        let lr = r - sep.start;
        let (cols, vals) = a.row(r);
        for (&c, &v) in cols.iter().zip(vals) {
            if c >= sep.start {
                rows[lr].push((local_index(idx, c), v));
            }
        }
    }
    for c in sep.clone() {
        let lc = c - sep.start;
        let (rs, vals) = at.row(c);
        for (&r, &v) in rs.iter().zip(vals) {
            if r >= sep.end {
                rows[local_index(idx, r)].push((lc, v.conj()));
            }
        }
    }
    for row in &mut rows {
        row.sort_unstable_by_key(|e| e.0);
    }
    FrontEntries { rows }
}

/// A child's update matrix as seen by its parent.
pub(crate) enum UpdateOp<'a, T> {
    Empty,
    Dense(&'a DenseMatrix<T>),
    Hss { f22: &'a HssNode<T>, part: &'a PartialUlv<T> },
}

impl<T: Scalar> UpdateOp<'_, T> {
    pub fn apply(&self, x: &DenseMatrix<T>, adjoint: bool, par: Par) -> DenseMatrix<T> {
        match self {
            UpdateOp::Empty => DenseMatrix::zeros(0, x.cols()),
            UpdateOp::Dense(u) => {
                if adjoint {
                    crate::hss::adj_mul(u, x.as_ref(), par)
                } else {
                    crate::hss::mul(u.as_ref(), x.as_ref(), par)
                }
            }
            UpdateOp::Hss { f22, part } => part.apply_update(f22, x, adjoint, par).expect("update shape matches"),
        }
    }

    /// Sorted child-local indices.
    pub fn entries(&self, rows: &[usize], cols: &[usize]) -> DenseMatrix<T> {
        match self {
            UpdateOp::Empty => DenseMatrix::zeros(rows.len(), cols.len()),
            UpdateOp::Dense(u) => u.select(rows, cols),
            UpdateOp::Hss { f22, part } => part.update_entries(f22, rows, cols).expect("indices inside the update"),
        }
    }

    /// Approximate cost of one product with a single vector.
    pub fn matvec_flops(&self, n: usize) -> u64 {
        match self {
            UpdateOp::Empty => 0,
            UpdateOp::Dense(_) => 2 * (n * n) as u64,
            UpdateOp::Hss { f22, part } => {
                (2 * f22.bytes() / std::mem::size_of::<T>().max(1)) as u64 + 4 * (n * part.schur.rank()) as u64
            }
        }
    }
}

pub(crate) struct ChildContribution<'a, T> {
    /// Child border, global indices.
    pub upd: &'a [usize],
    /// Child border position to parent local index.
    pub map: Vec<usize>,
    pub op: UpdateOp<'a, T>,
    /// Random rows the child used for its border, if it was compressed.
    pub r: Option<&'a DenseMatrix<T>>,
}

/// Random rows another front already holds.
#[derive(Clone, Copy, Debug)]
pub struct ChildSample<'a, T> {
    /// Global indices of the rows, sorted.
    pub rows: &'a [usize],
    pub r: &'a DenseMatrix<T>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SampleOrigin {
    Child(usize),
    Generated,
}

#[derive(Clone, Debug)]
pub struct RandomBlock<T> {
    pub r: DenseMatrix<T>,
    /// Column-major, same shape as `r`.
    pub origin: Vec<SampleOrigin>,
}

/// Random block for a front with global row indices `rows`, columns `cols`.
/// Entries a child already holds are copied from the first such child; the
/// rest come from the seeded row streams. Both give the same values.
pub fn build_random_block<T: Scalar>(rows: &[usize], children: &[ChildSample<'_, T>], cols: Range<usize>) -> RandomBlock<T> {
    let (m, nc) = (rows.len(), cols.len());
    let mut r = DenseMatrix::zeros(m, nc);
    let mut origin = vec![SampleOrigin::Generated; m * nc];
    let mut buf = vec![0.0; nc];
    for (i, &g) in rows.iter().enumerate() {
        let hits: Vec<(usize, usize)> = children
            .iter()
            .enumerate()
            .filter_map(|(k, ch)| ch.rows.binary_search(&g).ok().map(|p| (k, p)))
            .collect();
        let covered = hits.iter().map(|&(k, _)| children[k].r.cols()).max().unwrap_or(0);
        if covered < cols.end {
            SeededRowSampler::fill_row(g, cols.clone(), &mut buf);
        }
        for (jj, c) in cols.clone().enumerate() {
            match hits.iter().find(|&&(k, _)| c < children[k].r.cols()) {
                Some(&(k, p)) => {
                    r[(i, jj)] = children[k].r[(p, c)];
                    origin[jj * m + i] = SampleOrigin::Child(k);
                }
                None => r[(i, jj)] = T::from_f64(buf[jj]),
            }
        }
    }
    RandomBlock { r, origin }
}

/// The front `F = A_i + extend-add of child updates` as an operator.
pub(crate) struct FrontSource<'a, T> {
    pub idx: &'a [usize],
    pub entries: &'a FrontEntries<T>,
    pub children: &'a [ChildContribution<'a, T>],
}

impl<T: Scalar> FrontSource<'_, T> {
    /// `(F R, F^* R)` from sparse products and the children's update operators.
    pub fn skinny_sample(&self, r: &DenseMatrix<T>, par: Par) -> (DenseMatrix<T>, DenseMatrix<T>) {
        let (n, d) = (self.idx.len(), r.cols());
        let mut sr = DenseMatrix::zeros(n, d);
        let mut sc = DenseMatrix::zeros(n, d);
        for j in 0..d {
            let rj = r.col(j);
            let srj = sr.col_mut(j);
            for (lr, row) in self.entries.rows.iter().enumerate() {
                let mut acc = T::zero();
                for &(lc, v) in row {
                    acc += v * rj[lc];
                }
                srj[lr] += acc;
            }
            let scj = sc.col_mut(j);
            for (lr, row) in self.entries.rows.iter().enumerate() {
                let x = rj[lr];
                for &(lc, v) in row {
                    scj[lc] += v.conj() * x;
                }
            }
        }
        for ch in self.children {
            if ch.map.is_empty() {
                continue;
            }
            let x = r.select_rows(&ch.map);
            let y = ch.op.apply(&x, false, par);
            let yc = ch.op.apply(&x, true, par);
            for j in 0..d {
                for (p, &l) in ch.map.iter().enumerate() {
                    sr[(l, j)] += y[(p, j)];
                    sc[(l, j)] += yc[(p, j)];
                }
            }
        }
        (sr, sc)
    }

    pub fn sample_flops(&self, d: usize) -> u64 {
        let mut f = 4 * (self.entries.nnz() * d) as u64;
        for ch in self.children {
            f += 2 * ch.op.matvec_flops(ch.map.len()) * d as u64;
        }
        f
    }

    /// `F(rows, cols)` for arbitrary local indices.
    pub fn element_block(&self, rows: &[usize], cols: &[usize]) -> DenseMatrix<T> {
        let mut out = DenseMatrix::zeros(rows.len(), cols.len());
        for (jj, &c) in cols.iter().enumerate() {
            for (ii, &r) in rows.iter().enumerate() {
                out[(ii, jj)] = self.entries.get(r, c);
            }
        }
        for ch in self.children {
            let pick = |want: &[usize]| {
                let mut v: Vec<(usize, usize)> = want
                    .iter()
                    .enumerate()
                    .filter_map(|(pos, &l)| ch.upd.binary_search(&self.idx[l]).ok().map(|cp| (cp, pos)))
                    .collect();
                v.sort_unstable();
                v
            };
            let (rs, cs) = (pick(rows), pick(cols));
            if rs.is_empty() || cs.is_empty() {
                continue;
            }
            let cr: Vec<usize> = rs.iter().map(|e| e.0).collect();
            let cc: Vec<usize> = cs.iter().map(|e| e.0).collect();
            let blk = ch.op.entries(&cr, &cc);
            for (b, &(_, jj)) in cs.iter().enumerate() {
                for (a, &(_, ii)) in rs.iter().enumerate() {
                    out[(ii, jj)] += blk[(a, b)];
                }
            }
        }
        out
    }

    /// Explicit front by extend-add.
    pub fn assemble_dense(&self) -> DenseMatrix<T> {
        let n = self.idx.len();
        let mut f = DenseMatrix::zeros(n, n);
        for (lr, row) in self.entries.rows.iter().enumerate() {
            for &(lc, v) in row {
                f[(lr, lc)] += v;
            }
        }
        for ch in self.children {
            let m = ch.map.len();
            if m == 0 {
                continue;
            }
            let all: Vec<usize> = (0..m).collect();
            let u = ch.op.entries(&all, &all);
            for (b, &pb) in ch.map.iter().enumerate() {
                for (a, &pa) in ch.map.iter().enumerate() {
                    f[(pa, pb)] += u[(a, b)];
                }
            }
        }
        f
    }

    fn child_samples(&self) -> Vec<ChildSample<'_, T>> {
        self.children
            .iter()
            .filter_map(|ch| ch.r.map(|r| ChildSample { rows: ch.upd, r }))
            .collect()
    }
}

impl<T: Scalar> HssSource<T> for FrontSource<'_, T> {
    fn dim(&self) -> usize {
        self.idx.len()
    }

    fn random(&self, cols: Range<usize>) -> DenseMatrix<T> {
        build_random_block(self.idx, &self.child_samples(), cols).r
    }

    fn sample(&self, r: &DenseMatrix<T>, par: Par) -> (DenseMatrix<T>, DenseMatrix<T>) {
        self.skinny_sample(r, par)
    }

    fn extract(&self, rows: &[usize], cols: &[usize]) -> DenseMatrix<T> {
        self.element_block(rows, cols)
    }
}
