use std::ops::Range;

use super::{adj_mul, mul, ClusterTree, HssError};
use crate::dense::{DenseMatrix, MatMut, MatRef, Par};
use crate::scalar::Scalar;

/// Interpolative generator: `basis` is `m x k` with `basis(sel[i], :) = e_i`.
#[derive(Clone, Debug)]
pub struct Generator<T> {
    pub basis: DenseMatrix<T>,
    pub sel: Vec<usize>,
}

impl<T: Scalar> Generator<T> {
    pub fn empty(rows: usize) -> Self {
        Generator { basis: DenseMatrix::zeros(rows, 0), sel: Vec::new() }
    }

    pub fn rank(&self) -> usize {
        self.basis.cols()
    }

    /// Rows not in `sel`, ascending.
    pub fn nonsel(&self) -> Vec<usize> {
        let mut mark = vec![false; self.basis.rows()];
        for &s in &self.sel {
            mark[s] = true;
        }
        (0..mark.len()).filter(|&i| !mark[i]).collect()
    }

    /// The interpolation block `E = basis(nonsel, :)`.
    pub fn e(&self) -> DenseMatrix<T> {
        self.basis.select_rows(&self.nonsel())
    }
}

/// One node of an HSS tree. Leaves carry `d`; inner nodes carry the coupling
/// blocks `b12`, `b21` and exactly two children. `u`/`v` of the node that is
/// used as the top of a computation are ignored.
#[derive(Clone, Debug)]
pub struct HssNode<T> {
    /// Postorder number within the whole tree.
    pub id: usize,
    pub offset: usize,
    pub size: usize,
    pub children: Vec<HssNode<T>>,
    pub d: DenseMatrix<T>,
    pub b12: DenseMatrix<T>,
    pub b21: DenseMatrix<T>,
    pub u: Generator<T>,
    pub v: Generator<T>,
    /// Matrix indices of the rows kept by the row ID.
    pub row_idx: Vec<usize>,
    /// Matrix indices of the columns kept by the column ID.
    pub col_idx: Vec<usize>,
}

impl<T: Scalar> HssNode<T> {
    /// Empty node tree shaped like `cluster`, numbered in postorder from `next_id`.
    pub(crate) fn skeleton(cluster: &ClusterTree, offset: usize, next_id: &mut usize) -> Self {
        let mut children = Vec::new();
        let mut off = offset;
        for c in &cluster.children {
            children.push(HssNode::skeleton(c, off, next_id));
            off += c.size;
        }
        let id = *next_id;
        *next_id += 1;
        HssNode {
            id,
            offset,
            size: cluster.size,
            children,
            d: DenseMatrix::zeros(0, 0),
            b12: DenseMatrix::zeros(0, 0),
            b21: DenseMatrix::zeros(0, 0),
            u: Generator::empty(0),
            v: Generator::empty(0),
            row_idx: Vec::new(),
            col_idx: Vec::new(),
        }
    }

    pub fn is_leaf(&self) -> bool {
        self.children.is_empty()
    }

    pub fn range(&self) -> Range<usize> {
        self.offset..self.offset + self.size
    }

    pub fn node_count(&self) -> usize {
        1 + self.children.iter().map(|c| c.node_count()).sum::<usize>()
    }

    pub fn leaf_count(&self) -> usize {
        if self.is_leaf() {
            1
        } else {
            self.children.iter().map(|c| c.leaf_count()).sum()
        }
    }

    /// Largest generator rank in the subtree, not counting this node's own.
    pub fn max_rank(&self) -> usize {
        self.children
            .iter()
            .map(|c| c.u.rank().max(c.v.rank()).max(c.max_rank()))
            .max()
            .unwrap_or(0)
    }

    /// Stored bytes of the subtree, ignoring this node's generators.
    pub fn bytes(&self) -> usize {
        self.d.bytes()
            + self.b12.bytes()
            + self.b21.bytes()
            + self.children.iter().map(|c| c.u.basis.bytes() + c.v.basis.bytes() + c.bytes()).sum::<usize>()
    }

    pub fn visit<'a>(&'a self, f: &mut impl FnMut(&'a HssNode<T>)) {
        for c in &self.children {
            c.visit(f);
        }
        f(self);
    }

    /// Explicit row basis `U^big` of this subtree (`size x k_r`).
    pub fn big_u(&self) -> DenseMatrix<T> {
        self.big(false)
    }

    /// Explicit column basis `V^big` of this subtree (`size x k_c`).
    pub fn big_v(&self) -> DenseMatrix<T> {
        self.big(true)
    }

    fn big(&self, col: bool) -> DenseMatrix<T> {
        let g = if col { &self.v } else { &self.u };
        if self.is_leaf() {
            return g.basis.clone();
        }
        let (c0, c1) = (&self.children[0], &self.children[1]);
        let k0 = if col { c0.v.rank() } else { c0.u.rank() };
        let top = g.basis.block(0, 0, k0, g.rank());
        let bot = g.basis.block(k0, 0, g.basis.rows() - k0, g.rank());
        mul(c0.big(col).as_ref(), top.as_ref(), Par::SEQ).vstack(&mul(c1.big(col).as_ref(), bot.as_ref(), Par::SEQ))
    }

    /// `A x` (or `A^* x`) treating this node as the top of the tree.
    pub fn matvec(&self, x: &DenseMatrix<T>, adjoint: bool, par: Par) -> Result<DenseMatrix<T>, HssError> {
        if x.rows() != self.size {
            return Err(HssError::Shape(format!("matvec: x has {} rows, matrix is {}", x.rows(), self.size)));
        }
        let mut y = DenseMatrix::zeros(self.size, x.cols());
        let up = upward(self, x.as_ref(), adjoint, true, par);
        downward(self, None, &up, x.as_ref(), y.as_mut(), adjoint, par);
        Ok(y)
    }

    /// `A(rows, cols)` with the subtree pruned to the branches that meet the
    /// requested indices. Indices are relative to this node and sorted.
    pub fn extract(&self, rows: &[usize], cols: &[usize]) -> Result<Extracted<T>, HssError> {
        for idx in [rows, cols] {
            if let Some(&bad) = idx.iter().find(|&&i| i >= self.size) {
                return Err(HssError::IndexOutOfRange { index: bad, n: self.size });
            }
            if idx.windows(2).any(|w| w[0] >= w[1]) {
                return Err(HssError::Shape("extract: indices must be strictly increasing".into()));
            }
        }
        let base = self.offset;
        let mut visited = Vec::new();
        let up = extract_up(self, cols, 0, base, true, &mut visited);
        let mut out = DenseMatrix::zeros(rows.len(), cols.len());
        extract_down(self, None, up.as_ref(), rows, 0, cols, base, out.as_mut(), &mut visited);
        visited.sort_unstable();
        visited.dedup();
        Ok(Extracted { block: out, leaves_visited: visited.len() })
    }

    /// Dense matrix represented by the subtree.
    pub fn to_dense(&self) -> DenseMatrix<T> {
        let all: Vec<usize> = (0..self.size).collect();
        self.extract(&all, &all).expect("full index set is valid").block
    }
}

/// Result of a pruned extraction.
#[derive(Clone, Debug)]
pub struct Extracted<T> {
    pub block: DenseMatrix<T>,
    /// Distinct leaves touched by either sweep.
    pub leaves_visited: usize,
}

struct Up<T> {
    w: DenseMatrix<T>,
    children: Vec<Up<T>>,
}

/// `w = V^* x` (or `U^* x` in adjoint mode), nested through the tree.
fn upward<T: Scalar>(node: &HssNode<T>, x: MatRef<'_, T>, adj: bool, top: bool, par: Par) -> Up<T> {
    let basis = if adj { &node.u.basis } else { &node.v.basis };
    if node.is_leaf() {
        let w = if top { DenseMatrix::zeros(0, x.cols()) } else { adj_mul(basis, x, par) };
        return Up { w, children: Vec::new() };
    }
    let (x0, x1) = x.split_rows(node.children[0].size);
    let (c0, c1) = (&node.children[0], &node.children[1]);
    let (u0, u1) = par.join(|p| upward(c0, x0, adj, false, p), |p| upward(c1, x1, adj, false, p));
    let w = if top {
        DenseMatrix::zeros(0, x.cols())
    } else {
        adj_mul(basis, u0.w.vstack(&u1.w).as_ref(), par)
    };
    Up { w, children: vec![u0, u1] }
}

fn downward<T: Scalar>(
    node: &HssNode<T>,
    g: Option<&DenseMatrix<T>>,
    up: &Up<T>,
    x: MatRef<'_, T>,
    mut y: MatMut<'_, T>,
    adj: bool,
    par: Par,
) {
    let basis = if adj { &node.v.basis } else { &node.u.basis };
    let t = g.map(|g| mul(basis.as_ref(), g.as_ref(), par));
    if node.is_leaf() {
        let dx = if adj { adj_mul(&node.d, x, par) } else { mul(node.d.as_ref(), x, par) };
        y.copy_from(dx.as_ref());
        if let Some(t) = t {
            for j in 0..t.cols() {
                for (yi, ti) in y.col_mut(j).iter_mut().zip(t.col(j)) {
                    *yi += *ti;
                }
            }
        }
        return;
    }
    let (c0, c1) = (&node.children[0], &node.children[1]);
    let (w0, w1) = (&up.children[0].w, &up.children[1].w);
    let (mut g0, mut g1) = if adj {
        (adj_mul(&node.b21, w1.as_ref(), par), adj_mul(&node.b12, w0.as_ref(), par))
    } else {
        (mul(node.b12.as_ref(), w1.as_ref(), par), mul(node.b21.as_ref(), w0.as_ref(), par))
    };
    if let Some(t) = t {
        let k0 = g0.rows();
        g0.axpy(T::one(), &t.block(0, 0, k0, t.cols()));
        g1.axpy(T::one(), &t.block(k0, 0, t.rows() - k0, t.cols()));
    }
    let (x0, x1) = x.split_rows(c0.size);
    let (y0, y1) = y.split_rows(c0.size);
    let (upc0, upc1) = (&up.children[0], &up.children[1]);
    par.join(
        |p| downward(c0, Some(&g0), upc0, x0, y0, adj, p),
        |p| downward(c1, Some(&g1), upc1, x1, y1, adj, p),
    );
}

/// Column-side state of an extraction: `w` is `k_c x |J_tau|` where `J_tau`
/// occupies positions `j0..j1` of the requested columns.
struct UpJ<T> {
    w: DenseMatrix<T>,
    j0: usize,
    j1: usize,
    children: Vec<Option<UpJ<T>>>,
}

fn span(idx: &[usize], lo: usize, hi: usize) -> (usize, usize) {
    (idx.partition_point(|&i| i < lo), idx.partition_point(|&i| i < hi))
}

fn extract_up<T: Scalar>(
    node: &HssNode<T>,
    cols: &[usize],
    pos0: usize,
    base: usize,
    top: bool,
    visited: &mut Vec<usize>,
) -> Option<UpJ<T>> {
    let lo = node.offset - base;
    let (a, b) = span(cols, lo, lo + node.size);
    if a == b {
        return None;
    }
    let (j0, j1) = (pos0 + a, pos0 + b);
    if node.is_leaf() {
        visited.push(node.id);
        let w = if top {
            DenseMatrix::zeros(0, b - a)
        } else {
            let local: Vec<usize> = cols[a..b].iter().map(|&c| c - lo).collect();
            node.v.basis.select_rows(&local).adjoint()
        };
        return Some(UpJ { w, j0, j1, children: Vec::new() });
    }
    let sub = &cols[a..b];
    let u0 = extract_up(&node.children[0], sub, j0, base, false, visited);
    let u1 = extract_up(&node.children[1], sub, j0, base, false, visited);
    let w = if top {
        DenseMatrix::zeros(0, b - a)
    } else {
        let k0 = node.children[0].v.rank();
        let vb = &node.v.basis;
        let mut w = DenseMatrix::zeros(vb.cols(), b - a);
        for (child, top_rows) in [(&u0, true), (&u1, false)] {
            if let Some(c) = child {
                let part = if top_rows {
                    vb.block(0, 0, k0, vb.cols())
                } else {
                    vb.block(k0, 0, vb.rows() - k0, vb.cols())
                };
                let prod = adj_mul(&part, c.w.as_ref(), Par::SEQ);
                w.as_mut().sub(0, c.j0 - j0, prod.rows(), prod.cols()).copy_from(prod.as_ref());
            }
        }
        w
    };
    Some(UpJ { w, j0, j1, children: vec![u0, u1] })
}

/// `g` is `k_r x |cols|`; `out` holds the rows of `rows` that fall in `node`.
#[allow(clippy::too_many_arguments)]
fn extract_down<T: Scalar>(
    node: &HssNode<T>,
    g: Option<&DenseMatrix<T>>,
    up: Option<&UpJ<T>>,
    rows: &[usize],
    row_pos0: usize,
    cols: &[usize],
    base: usize,
    mut out: MatMut<'_, T>,
    visited: &mut Vec<usize>,
) {
    let lo = node.offset - base;
    let (a, b) = span(rows, lo, lo + node.size);
    if a == b {
        return;
    }
    let t = g.map(|g| mul(node.u.basis.as_ref(), g.as_ref(), Par::SEQ));
    if node.is_leaf() {
        visited.push(node.id);
        let local: Vec<usize> = rows[a..b].iter().map(|&r| r - lo).collect();
        if let Some(u) = up {
            let lc: Vec<usize> = cols[u.j0..u.j1].iter().map(|&c| c - lo).collect();
            let dblk = node.d.select(&local, &lc);
            for (jj, j) in (u.j0..u.j1).enumerate() {
                for (ii, i) in (a..b).enumerate() {
                    *out.at(row_pos0 + i, j) += dblk[(ii, jj)];
                }
            }
        }
        if let Some(t) = t {
            for j in 0..t.cols() {
                for (ii, &r) in local.iter().enumerate() {
                    *out.at(row_pos0 + a + ii, j) += t[(r, j)];
                }
            }
        }
        return;
    }
    let ncols = cols.len();
    let k0 = node.children[0].u.rank();
    let kids = up.map(|u| &u.children);
    let child_up = |i: usize| kids.and_then(|k| k[i].as_ref());
    for (ci, child) in node.children.iter().enumerate() {
        let (bmat, other) = if ci == 0 { (&node.b12, child_up(1)) } else { (&node.b21, child_up(0)) };
        let mut gc: Option<DenseMatrix<T>> = None;
        if let Some(o) = other {
            let prod = mul(bmat.as_ref(), o.w.as_ref(), Par::SEQ);
            let mut full = DenseMatrix::zeros(bmat.rows(), ncols);
            full.as_mut().sub(0, o.j0, prod.rows(), prod.cols()).copy_from(prod.as_ref());
            gc = Some(full);
        }
        if let Some(t) = &t {
            let (r0, nr) = if ci == 0 { (0, k0) } else { (k0, t.rows() - k0) };
            let part = t.block(r0, 0, nr, ncols);
            match &mut gc {
                Some(m) => m.axpy(T::one(), &part),
                None => gc = Some(part),
            }
        }
        extract_down(
            child,
            gc.as_ref(),
            child_up(ci),
            &rows[a..b],
            row_pos0 + a,
            cols,
            base,
            out.rb_mut(),
            visited,
        );
    }
}

/// A compressed HSS matrix.
#[derive(Clone, Debug)]
pub struct HssMatrix<T> {
    pub root: HssNode<T>,
}

impl<T: Scalar> HssMatrix<T> {
    pub fn n(&self) -> usize {
        self.root.size
    }

    /// Largest row or column generator rank.
    pub fn hss_rank(&self) -> usize {
        self.root.max_rank()
    }

    pub fn bytes(&self) -> usize {
        self.root.bytes()
    }

    pub fn matvec(&self, x: &DenseMatrix<T>, par: Par) -> Result<DenseMatrix<T>, HssError> {
        self.root.matvec(x, false, par)
    }

    pub fn matvec_adjoint(&self, x: &DenseMatrix<T>, par: Par) -> Result<DenseMatrix<T>, HssError> {
        self.root.matvec(x, true, par)
    }

    pub fn extract(&self, rows: &[usize], cols: &[usize]) -> Result<Extracted<T>, HssError> {
        self.root.extract(rows, cols)
    }

    pub fn to_dense(&self) -> DenseMatrix<T> {
        self.root.to_dense()
    }
}
