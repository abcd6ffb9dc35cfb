use std::ops::Range;
use std::sync::atomic::{AtomicU64, Ordering};

use super::matrix::{Generator, HssMatrix, HssNode};
use super::{adj_mul, checksum, mul, ClusterTree, HssError};
use crate::dense::{gemm_flops, interpolative_decomposition_capped, DenseMatrix, Par};
use crate::random::SeededRowSampler;
use crate::scalar::Scalar;

/// Operator access needed by the compression: random blocks, products with
/// `A` and `A^*`, and arbitrary submatrices.
pub trait HssSource<T: Scalar>: Sync {
    fn dim(&self) -> usize;
    /// `dim() x cols.len()` random block, columns `cols` of the full block.
    fn random(&self, cols: Range<usize>) -> DenseMatrix<T>;
    /// `(A R, A^* R)`.
    fn sample(&self, r: &DenseMatrix<T>, par: Par) -> (DenseMatrix<T>, DenseMatrix<T>);
    /// `A(rows, cols)`.
    fn extract(&self, rows: &[usize], cols: &[usize]) -> DenseMatrix<T>;
}

/// An explicit dense matrix as a source. Row `i` of the random block comes
/// from the seeded stream `i`.
pub struct DenseSource<'a, T> {
    pub a: &'a DenseMatrix<T>,
}

impl<T: Scalar> HssSource<T> for DenseSource<'_, T> {
    fn dim(&self) -> usize {
        self.a.rows()
    }

    fn random(&self, cols: Range<usize>) -> DenseMatrix<T> {
        let rows: Vec<usize> = (0..self.a.rows()).collect();
        SeededRowSampler::block(&rows, cols)
    }

    fn sample(&self, r: &DenseMatrix<T>, par: Par) -> (DenseMatrix<T>, DenseMatrix<T>) {
        (mul(self.a.as_ref(), r.as_ref(), par), adj_mul(self.a, r.as_ref(), par))
    }

    fn extract(&self, rows: &[usize], cols: &[usize]) -> DenseMatrix<T> {
        self.a.select(rows, cols)
    }
}

#[derive(Clone, Copy, Debug)]
pub struct CompressOptions {
    /// Relative tolerance of the interpolative decompositions.
    pub eps: f64,
    /// Initial number of random columns.
    pub d0: usize,
    /// Columns added per adaptation round.
    pub dd: usize,
    /// Oversampling.
    pub p: usize,
    /// Rank guard; `None` means `min(N/2, 5000)`.
    pub max_rank: Option<usize>,
}

impl Default for CompressOptions {
    fn default() -> Self {
        CompressOptions { eps: 1e-6, d0: 128, dd: 128, p: 10, max_rank: None }
    }
}

impl CompressOptions {
    pub fn max_rank_for(&self, n: usize) -> usize {
        self.max_rank.unwrap_or((n / 2).min(5000)).max(1)
    }
}

/// Per-round record of the adaptive compression.
#[derive(Clone, Debug, Default)]
pub struct CompressLog {
    /// Sample count used in each round.
    pub d_history: Vec<usize>,
    /// Round in which each node (by id) completed.
    pub node_round: Vec<usize>,
    /// After each round, `(node id, checksum of D or B12|B21)` of every completed node.
    pub checksums: Vec<Vec<(usize, u64)>>,
}

impl CompressLog {
    pub fn rounds(&self) -> usize {
        self.d_history.len()
    }

    pub fn adaptations(&self) -> usize {
        self.d_history.len().saturating_sub(1)
    }

    /// True when no completed node's blocks changed in a later round.
    pub fn checksums_stable(&self) -> bool {
        self.checksums.windows(2).all(|w| {
            w[0].iter().all(|(id, c)| w[1].iter().any(|(id2, c2)| id2 == id && c2 == c))
        })
    }
}

#[derive(Clone, Debug)]
pub struct Compressed<T> {
    pub hss: HssMatrix<T>,
    /// The random block the final round used (`N x d`).
    pub r: DenseMatrix<T>,
    pub log: CompressLog,
    pub flops: u64,
}

struct Work<T> {
    done: bool,
    extracted: bool,
    round: usize,
    /// Reduced samples `S^r_tau`, `S^c_tau`.
    sr: DenseMatrix<T>,
    sc: DenseMatrix<T>,
    /// `V_tau^* R(I_tau)` and `U_tau^* R(I_tau)` in nested form.
    rr: DenseMatrix<T>,
    rc: DenseMatrix<T>,
    children: Vec<Work<T>>,
}

impl<T: Scalar> Work<T> {
    fn new(node: &HssNode<T>) -> Self {
        Work {
            done: false,
            extracted: false,
            round: 0,
            sr: DenseMatrix::zeros(0, 0),
            sc: DenseMatrix::zeros(0, 0),
            rr: DenseMatrix::zeros(0, 0),
            rc: DenseMatrix::zeros(0, 0),
            children: node.children.iter().map(Work::new).collect(),
        }
    }
}

struct Ctx<'a, T, S> {
    src: &'a S,
    r: &'a DenseMatrix<T>,
    sr: &'a DenseMatrix<T>,
    sc: &'a DenseMatrix<T>,
    d_old: usize,
    d: usize,
    round: usize,
    opts: CompressOptions,
    flops: AtomicU64,
}

impl<T: Scalar, S> Ctx<'_, T, S> {
    fn count(&self, m: usize, n: usize, k: usize) {
        self.flops.fetch_add(gemm_flops(m, n, k), Ordering::Relaxed);
    }
}

/// Randomized compression with adaptive sample count. Each round runs the
/// bottom-up pass; a node whose IDs cannot be certified with the current `d`
/// (rank above `d - p` while short of full rank) blocks its ancestors. The
/// next round appends `dd` columns; completed nodes only process the new
/// columns and keep their extracted blocks.
pub fn compress<T: Scalar, S: HssSource<T>>(
    src: &S,
    cluster: &ClusterTree,
    opts: &CompressOptions,
    par: Par,
) -> Result<Compressed<T>, HssError> {
    let n = src.dim();
    if cluster.size != n {
        return Err(HssError::Shape(format!("cluster tree covers {} indices, matrix has {n}", cluster.size)));
    }
    let max_rank = opts.max_rank_for(n);
    let mut next = 0;
    let mut root = HssNode::skeleton(cluster, 0, &mut next);
    let mut work = Work::new(&root);
    let mut log = CompressLog { node_round: vec![0; next], ..Default::default() };
    let mut r = DenseMatrix::zeros(n, 0);
    let mut sr = DenseMatrix::zeros(n, 0);
    let mut sc = DenseMatrix::zeros(n, 0);
    let mut d_old = 0;
    let mut d = opts.d0.max(1);
    let mut flops = 0u64;
    let mut round = 0;
    loop {
        let rn = src.random(d_old..d);
        let (srn, scn) = src.sample(&rn, par);
        r.append_cols(&rn);
        sr.append_cols(&srn);
        sc.append_cols(&scn);
        let ctx = Ctx { src, r: &r, sr: &sr, sc: &sc, d_old, d, round, opts: *opts, flops: AtomicU64::new(0) };
        let done = pass(&mut root, &mut work, &ctx, true, par);
        flops += ctx.flops.load(Ordering::Relaxed);
        log.d_history.push(d);
        let mut sums = Vec::new();
        record(&root, &work, &mut sums, &mut log.node_round);
        sums.sort_unstable();
        log.checksums.push(sums);
        if done {
            break;
        }
        if d.saturating_sub(opts.p) >= max_rank {
            return Err(HssError::RankExplosion { d, max_rank });
        }
        d_old = d;
        d += opts.dd.max(1);
        round += 1;
    }
    Ok(Compressed { hss: HssMatrix { root }, r, log, flops })
}

fn record<T: Scalar>(node: &HssNode<T>, w: &Work<T>, out: &mut Vec<(usize, u64)>, rounds: &mut [usize]) {
    for (c, cw) in node.children.iter().zip(&w.children) {
        record(c, cw, out, rounds);
    }
    if w.done {
        rounds[node.id] = w.round;
        let sum = if node.is_leaf() {
            checksum(&node.d)
        } else {
            checksum(&node.b12) ^ checksum(&node.b21).rotate_left(17)
        };
        out.push((node.id, sum));
    }
}

fn split_pair<X>(v: &mut [X]) -> (&mut X, &mut X) {
    let (a, b) = v.split_at_mut(1);
    (&mut a[0], &mut b[0])
}

fn pass<T: Scalar, S: HssSource<T>>(
    node: &mut HssNode<T>,
    w: &mut Work<T>,
    ctx: &Ctx<'_, T, S>,
    top: bool,
    par: Par,
) -> bool {
    if w.done {
        if !top {
            update_new(node, w, ctx, par);
        }
        return true;
    }
    let d = ctx.d;
    let (s_r, s_c, r_in, cand_r, cand_c) = if node.is_leaf() {
        let range: Vec<usize> = node.range().collect();
        if !w.extracted {
            node.d = ctx.src.extract(&range, &range);
            w.extracted = true;
        }
        let ri = ctx.r.block(node.offset, 0, node.size, d);
        let mut s_r = ctx.sr.block(node.offset, 0, node.size, d);
        s_r.axpy(-T::one(), &mul(node.d.as_ref(), ri.as_ref(), par));
        let mut s_c = ctx.sc.block(node.offset, 0, node.size, d);
        s_c.axpy(-T::one(), &adj_mul(&node.d, ri.as_ref(), par));
        ctx.count(node.size, d, 2 * node.size);
        (s_r, s_c, (ri.clone(), ri), range.clone(), range)
    } else {
        let (c0, c1) = split_pair(&mut node.children);
        let (w0, w1) = split_pair(&mut w.children);
        let (ok0, ok1) = par.join(|p| pass(c0, w0, ctx, false, p), |p| pass(c1, w1, ctx, false, p));
        if !(ok0 && ok1) {
            return false;
        }
        if !w.extracted {
            node.b12 = ctx.src.extract(&c0.row_idx, &c1.col_idx);
            node.b21 = ctx.src.extract(&c1.row_idx, &c0.col_idx);
            w.extracted = true;
        }
        let s_r = merge_samples(&w0.sr, &w1.sr, &node.b12, &node.b21, &w0.rr, &w1.rr, false, par);
        let s_c = merge_samples(&w0.sc, &w1.sc, &node.b21, &node.b12, &w0.rc, &w1.rc, true, par);
        ctx.count(node.b12.rows() + node.b21.rows(), d, 2 * (node.b12.cols() + node.b21.cols()));
        let rr = w0.rr.vstack(&w1.rr);
        let rc = w0.rc.vstack(&w1.rc);
        let cand_r = [c0.row_idx.as_slice(), c1.row_idx.as_slice()].concat();
        let cand_c = [c0.col_idx.as_slice(), c1.col_idx.as_slice()].concat();
        (s_r, s_c, (rr, rc), cand_r, cand_c)
    };
    if top {
        w.done = true;
        w.round = ctx.round;
        return true;
    }
    let (u, v) = match (certify(&s_r, ctx), certify(&s_c, ctx)) {
        (Some(u), Some(v)) => (u, v),
        _ => return false,
    };
    w.sr = s_r.select_rows(&u.sel);
    w.sc = s_c.select_rows(&v.sel);
    w.rr = adj_mul(&v.basis, r_in.0.as_ref(), par);
    w.rc = adj_mul(&u.basis, r_in.1.as_ref(), par);
    ctx.count(v.rank() + u.rank(), d, r_in.0.rows());
    node.row_idx = u.sel.iter().map(|&i| cand_r[i]).collect();
    node.col_idx = v.sel.iter().map(|&i| cand_c[i]).collect();
    node.u = u;
    node.v = v;
    w.done = true;
    w.round = ctx.round;
    true
}

/// `[s0 - b01 r1; s1 - b10 r0]`, with the adjoints of `b01`/`b10` on the column side.
#[allow(clippy::too_many_arguments)]
fn merge_samples<T: Scalar>(
    s0: &DenseMatrix<T>,
    s1: &DenseMatrix<T>,
    b01: &DenseMatrix<T>,
    b10: &DenseMatrix<T>,
    r0: &DenseMatrix<T>,
    r1: &DenseMatrix<T>,
    adjoint: bool,
    par: Par,
) -> DenseMatrix<T> {
    let apply = |b: &DenseMatrix<T>, x: &DenseMatrix<T>| {
        if adjoint {
            adj_mul(b, x.as_ref(), par)
        } else {
            mul(b.as_ref(), x.as_ref(), par)
        }
    };
    let mut top = s0.clone();
    top.axpy(-T::one(), &apply(b01, r1));
    let mut bot = s1.clone();
    bot.axpy(-T::one(), &apply(b10, r0));
    top.vstack(&bot)
}

/// Row ID of a local sample block, or `None` if `d` is too small to trust it.
fn certify<T: Scalar, S>(s: &DenseMatrix<T>, ctx: &Ctx<'_, T, S>) -> Option<Generator<T>> {
    let m = s.rows();
    let d = ctx.d;
    let id = interpolative_decomposition_capped(&s.adjoint(), ctx.opts.eps, m.min(d));
    let k = id.rank();
    ctx.flops.fetch_add(4 * (m as u64) * (d as u64) * (k as u64), Ordering::Relaxed);
    if k > d.saturating_sub(ctx.opts.p) && k < m {
        return None;
    }
    Some(Generator { basis: id.coeffs.adjoint(), sel: id.cols })
}

/// Extends the reduced quantities of a completed subtree to the columns
/// `d_old..d`.
fn update_new<T: Scalar, S: HssSource<T>>(node: &mut HssNode<T>, w: &mut Work<T>, ctx: &Ctx<'_, T, S>, par: Par) {
    let (d0, dn) = (ctx.d_old, ctx.d - ctx.d_old);
    if w.sr.cols() >= ctx.d {
        return;
    }
    let (s_r, s_c, r_r, r_c) = if node.is_leaf() {
        let rn = ctx.r.block(node.offset, d0, node.size, dn);
        let mut s_r = ctx.sr.block(node.offset, d0, node.size, dn);
        s_r.axpy(-T::one(), &mul(node.d.as_ref(), rn.as_ref(), par));
        let mut s_c = ctx.sc.block(node.offset, d0, node.size, dn);
        s_c.axpy(-T::one(), &adj_mul(&node.d, rn.as_ref(), par));
        ctx.count(node.size, dn, 2 * node.size);
        (s_r, s_c, rn.clone(), rn)
    } else {
        let (c0, c1) = split_pair(&mut node.children);
        let (w0, w1) = split_pair(&mut w.children);
        par.join(|p| update_new(c0, w0, ctx, p), |p| update_new(c1, w1, ctx, p));
        let tail = |m: &DenseMatrix<T>| m.block(0, d0, m.rows(), dn);
        let (sr0, sr1, rr0, rr1) = (tail(&w0.sr), tail(&w1.sr), tail(&w0.rr), tail(&w1.rr));
        let (sc0, sc1, rc0, rc1) = (tail(&w0.sc), tail(&w1.sc), tail(&w0.rc), tail(&w1.rc));
        let s_r = merge_samples(&sr0, &sr1, &node.b12, &node.b21, &rr0, &rr1, false, par);
        let s_c = merge_samples(&sc0, &sc1, &node.b21, &node.b12, &rc0, &rc1, true, par);
        ctx.count(node.b12.rows() + node.b21.rows(), dn, 2 * (node.b12.cols() + node.b21.cols()));
        (s_r, s_c, rr0.vstack(&rr1), rc0.vstack(&rc1))
    };
    append(&mut w.sr, &s_r.select_rows(&node.u.sel));
    append(&mut w.sc, &s_c.select_rows(&node.v.sel));
    append(&mut w.rr, &adj_mul(&node.v.basis, r_r.as_ref(), par));
    append(&mut w.rc, &adj_mul(&node.u.basis, r_c.as_ref(), par));
}

fn append<T: Scalar>(m: &mut DenseMatrix<T>, extra: &DenseMatrix<T>) {
    if m.cols() == 0 && m.rows() != extra.rows() {
        *m = DenseMatrix::zeros(extra.rows(), 0);
    }
    m.append_cols(extra);
}
