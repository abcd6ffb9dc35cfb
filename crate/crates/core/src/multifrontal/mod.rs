//! Multifrontal LU over an elimination tree. Fronts below the switch level
//! are dense; fronts marked with a cluster tree are compressed to HSS form
//! from random samples of the front and factored with a partial ULV.

mod assembly;
mod solver;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use crate::random::SeededRowSampler;
pub use assembly::{build_random_block, ChildSample, RandomBlock, SampleOrigin};
pub use solver::{SetupTimings, Solver, SolverError, SolverOptions};

use crate::dense::{gemm, gemm_flops, lu_partial_pivot, trsm, DenseMatrix, Diag, LuFactors, Par, Side, Uplo};
use crate::hss::{compress, partial_ulv_and_schur, ulv_factor, CompressOptions, HssError, HssMatrix, PartialUlv, UlvFactors};
use crate::order::EliminationTree;
use crate::scalar::Scalar;
use crate::sparse::SparseMatrix;
use crate::tree_par::tree_reduce;
use assembly::{front_entries, local_index, ChildContribution, FrontSource, UpdateOp};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MfError {
    #[error("front {node} has a singular pivot block")]
    Singular { node: usize },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    Shape { expected: usize, got: usize },
    #[error("HSS failure in front {node}: {source}")]
    Hss { node: usize, source: HssError },
}

#[derive(Clone, Copy, Debug, Default)]
pub struct FactorOptions {
    pub compress: CompressOptions,
    /// Keep every HSS front's random block for inspection.
    pub log_samples: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FrontKind {
    Dense,
    Hss,
    /// HSS compression gave up and the front was assembled explicitly.
    DenseFallback,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FrontStats {
    pub id: usize,
    pub level: usize,
    pub dim: usize,
    pub sep: usize,
    pub kind: FrontKind,
    pub rank: usize,
    pub samples: usize,
    pub flops: u64,
    /// Bytes kept for the solve.
    pub bytes: usize,
    /// Bytes alive while the front is being processed.
    pub work_bytes: usize,
    /// Bytes of the update handed to the parent.
    pub update_bytes: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FactorStats {
    pub factor_flops: u64,
    pub solve_flops: u64,
    pub factor_nnz_bytes: usize,
    pub peak_bytes: usize,
    pub max_rank: usize,
    pub hss_fronts: usize,
    pub dense_fallbacks: usize,
    pub fronts: Vec<FrontStats>,
}

/// Random block of one HSS front, rows labelled by global index.
#[derive(Clone, Debug)]
pub struct SampleRecord<T> {
    pub node: usize,
    pub rows: Vec<usize>,
    pub r: DenseMatrix<T>,
}

#[derive(Clone, Debug)]
pub enum HssElimination<T> {
    Partial(PartialUlv<T>),
    Full(UlvFactors<T>),
}

#[derive(Clone, Debug)]
pub enum FrontFactor<T> {
    Dense {
        lu: LuFactors<T>,
        /// `F21 U^{-1}`.
        l21: DenseMatrix<T>,
        /// `L^{-1} P F12`.
        u12: DenseMatrix<T>,
    },
    Hss {
        /// Whole front, dropped once the parent has consumed the update.
        hss: Option<HssMatrix<T>>,
        elim: HssElimination<T>,
    },
}

impl<T: Scalar> FrontFactor<T> {
    pub fn bytes(&self) -> usize {
        match self {
            FrontFactor::Dense { lu, l21, u12 } => lu.bytes() + l21.bytes() + u12.bytes(),
            FrontFactor::Hss { elim, .. } => match elim {
                HssElimination::Partial(p) => p.bytes(),
                HssElimination::Full(f) => f.bytes(),
            },
        }
    }

    fn release_update(&mut self) {
        if let FrontFactor::Hss { hss, .. } = self {
            *hss = None;
        }
    }
}

#[derive(Clone, Debug)]
pub struct Factorization<T> {
    pub tree: EliminationTree,
    pub fronts: Vec<FrontFactor<T>>,
    pub stats: FactorStats,
    pub samples: Vec<SampleRecord<T>>,
}

struct NodeOut<T> {
    own: (FrontFactor<T>, FrontStats),
    below: Vec<(usize, FrontFactor<T>, FrontStats)>,
    update: Option<DenseMatrix<T>>,
    r_upd: Option<DenseMatrix<T>>,
    samples: Vec<SampleRecord<T>>,
}

/// Numerical factorization of `a`, which must already be in the numbering
/// of `tree`.
pub fn factor<T: Scalar>(
    a: &SparseMatrix<T>,
    tree: &EliminationTree,
    opts: &FactorOptions,
    par: Par,
) -> Result<Factorization<T>, MfError> {
    let n = a.n();
    if tree.is_empty() {
        return Err(MfError::Shape { expected: n, got: 0 });
    }
    let covered: usize = tree.nodes.iter().map(|nd| nd.sep.len()).sum();
    if covered != n {
        return Err(MfError::Shape { expected: n, got: covered });
    }
    let at = a.adjoint();
    let f = |i: usize, kids: Vec<Result<NodeOut<T>, MfError>>, p: Par| factor_node(a, &at, tree, opts, i, kids, p);
    let out = tree_reduce(tree, tree.root(), par, &f)?;
    let mut all = out.below;
    all.push((tree.root(), out.own.0, out.own.1));
    all.sort_by_key(|e| e.0);
    let mut fronts = Vec::with_capacity(all.len());
    let mut fstats = Vec::with_capacity(all.len());
    for (_, fr, st) in all {
        fronts.push(fr);
        fstats.push(st);
    }
    let stats = summarize::<T>(tree, fstats);
    let mut samples = out.samples;
    samples.sort_by_key(|s| s.node);
    Ok(Factorization { tree: tree.clone(), fronts, stats, samples })
}

fn summarize<T>(tree: &EliminationTree, fronts: Vec<FrontStats>) -> FactorStats {
    let entry = std::mem::size_of::<T>().max(1);
    // sequential postorder: factors so far, updates waiting for their parent,
    // and the working storage of the current front
    let (mut live, mut kept, mut peak) = (0usize, 0usize, 0usize);
    for (i, st) in fronts.iter().enumerate() {
        peak = peak.max(kept + live + st.work_bytes);
        for &c in &tree.nodes[i].children {
            live -= fronts[c].update_bytes;
        }
        live += st.update_bytes;
        kept += st.bytes;
        peak = peak.max(kept + live);
    }
    FactorStats {
        factor_flops: fronts.iter().map(|f| f.flops).sum(),
        solve_flops: fronts.iter().map(|f| 2 * (f.bytes / entry) as u64).sum(),
        factor_nnz_bytes: kept,
        peak_bytes: peak,
        max_rank: fronts.iter().map(|f| f.rank).max().unwrap_or(0),
        hss_fronts: fronts.iter().filter(|f| f.kind == FrontKind::Hss).count(),
        dense_fallbacks: fronts.iter().filter(|f| f.kind == FrontKind::DenseFallback).count(),
        fronts,
    }
}

fn factor_node<T: Scalar>(
    a: &SparseMatrix<T>,
    at: &SparseMatrix<T>,
    tree: &EliminationTree,
    opts: &FactorOptions,
    i: usize,
    kids: Vec<Result<NodeOut<T>, MfError>>,
    par: Par,
) -> Result<NodeOut<T>, MfError> {
    let kids: Vec<NodeOut<T>> = kids.into_iter().collect::<Result<_, _>>()?;
    let node = &tree.nodes[i];
    let idx = node.indices();
    let ns = node.sep.len();
    let nu = node.upd.len();
    let entries = front_entries(a, at, node, &idx);
    let contribs: Vec<ChildContribution<'_, T>> = kids
        .iter()
        .zip(&node.children)
        .map(|(k, &c)| {
            let cn = &tree.nodes[c];
            let map = cn.upd.iter().map(|&g| local_index(&idx, g)).collect();
            let op = match (&k.update, &k.own.0) {
                (Some(u), _) => UpdateOp::Dense(u),
                (None, FrontFactor::Hss { hss: Some(h), elim: HssElimination::Partial(p) }) => {
                    UpdateOp::Hss { f22: &h.root.children[1], part: p }
                }
                _ => UpdateOp::Empty,
            };
            ChildContribution { upd: &cn.upd, map, op, r: k.r_upd.as_ref() }
        })
        .collect();
    let src = FrontSource { idx: &idx, entries: &entries, children: &contribs };
    let bytes_t = std::mem::size_of::<T>();
    let dim = idx.len();
    let mut stats = FrontStats {
        id: i,
        level: node.level,
        dim,
        sep: ns,
        kind: FrontKind::Dense,
        rank: 0,
        samples: 0,
        flops: 0,
        bytes: 0,
        work_bytes: dim * dim * bytes_t,
        update_bytes: nu * nu * bytes_t,
    };
    let mut samples = Vec::new();
    let mut r_upd = None;

    let mut hss_result = None;
    if let Some(cluster) = &node.hss_cluster {
        match compress(&src, cluster, &opts.compress, par) {
            Ok(c) => hss_result = Some(c),
            Err(HssError::RankExplosion { .. }) => stats.kind = FrontKind::DenseFallback,
            Err(e) => return Err(MfError::Hss { node: i, source: e }),
        }
    }
    let (front, update) = match hss_result {
        Some(c) => {
            let d = c.r.cols();
            let hss_err = |e: HssError| match e {
                HssError::Singular { .. } => MfError::Singular { node: i },
                e => MfError::Hss { node: i, source: e },
            };
            let elim = if nu == 0 {
                HssElimination::Full(ulv_factor(&c.hss.root, par).map_err(hss_err)?)
            } else {
                HssElimination::Partial(partial_ulv_and_schur(&c.hss.root, ns, par).map_err(hss_err)?)
            };
            let k = c.hss.hss_rank() as u64;
            let elim_flops = match &elim {
                HssElimination::Full(f) => f.flops(),
                HssElimination::Partial(p) => {
                    p.f11.flops() + 2 * (p.f11.bytes() / bytes_t) as u64 * k + 6 * (dim as u64) * k * k
                }
            };
            stats.kind = FrontKind::Hss;
            stats.rank = c.hss.hss_rank();
            stats.samples = d;
            stats.flops = c.flops + src.sample_flops(d) + elim_flops;
            stats.work_bytes = c.hss.bytes() + 3 * dim * d * bytes_t;
            stats.update_bytes = if nu == 0 { 0 } else { c.hss.root.children[1].bytes() };
            if nu > 0 {
                r_upd = Some(c.r.block(ns, 0, nu, d));
            }
            if opts.log_samples {
                samples.push(SampleRecord { node: i, rows: idx.clone(), r: c.r.clone() });
            }
            (FrontFactor::Hss { hss: Some(c.hss), elim }, None)
        }
        None => {
            let f = src.assemble_dense();
            let (front, update, flops) = dense_front(f, ns, i, par)?;
            stats.flops = flops;
            (front, update)
        }
    };
    stats.bytes = front.bytes();
    drop(contribs);
    let mut below = Vec::new();
    for (mut k, &c) in kids.into_iter().zip(&node.children) {
        k.own.0.release_update();
        below.extend(k.below);
        below.push((c, k.own.0, k.own.1));
        samples.extend(k.samples);
    }
    Ok(NodeOut { own: (front, stats), below, update, r_upd, samples })
}

/// Factor, update matrix (absent for the root) and flops.
type DenseFront<T> = (FrontFactor<T>, Option<DenseMatrix<T>>, u64);

fn dense_front<T: Scalar>(
    f: DenseMatrix<T>,
    ns: usize,
    id: usize,
    par: Par,
) -> Result<DenseFront<T>, MfError> {
    let dim = f.rows();
    let nu = dim - ns;
    let f11 = f.block(0, 0, ns, ns);
    let mut u12 = f.block(0, ns, ns, nu);
    let mut l21 = f.block(ns, 0, nu, ns);
    let lu = lu_partial_pivot(f11, par).map_err(|_| MfError::Singular { node: id })?;
    let mut flops = LuFactors::<T>::flops(ns);
    if nu == 0 {
        return Ok((FrontFactor::Dense { lu, l21, u12 }, None, flops));
    }
    lu.forward(u12.as_mut(), par).map_err(|_| MfError::Singular { node: id })?;
    trsm(Side::Right, Uplo::Upper, Diag::NonUnit, lu.packed().as_ref(), l21.as_mut(), par)
        .map_err(|_| MfError::Singular { node: id })?;
    let mut upd = f.block(ns, ns, nu, nu);
    gemm(-T::one(), l21.as_ref(), u12.as_ref(), T::one(), upd.as_mut(), par).expect("front blocks conform");
    let (ns64, nu64) = (ns as u64, nu as u64);
    flops += 2 * ns64 * ns64 * nu64 + gemm_flops(nu, nu, ns);
    Ok((FrontFactor::Dense { lu, l21, u12 }, Some(upd), flops))
}

impl<T: Scalar> Factorization<T> {
    pub fn n(&self) -> usize {
        self.tree.nodes.iter().map(|nd| nd.sep.len()).sum()
    }

    /// Solves with the factored (permuted) matrix, one column per right-hand side.
    pub fn solve_in_place(&self, b: &mut DenseMatrix<T>, par: Par) -> Result<(), MfError> {
        let n = self.n();
        if b.rows() != n {
            return Err(MfError::Shape { expected: n, got: b.rows() });
        }
        let nrhs = b.cols();
        let map_err = |i: usize| move |e: HssError| MfError::Hss { node: i, source: e };
        for (i, (node, front)) in self.tree.nodes.iter().zip(&self.fronts).enumerate() {
            let (s0, ns) = (node.sep.start, node.sep.len());
            let mut bs = b.block(s0, 0, ns, nrhs);
            let mut bu = b.select_rows(&node.upd);
            match front {
                FrontFactor::Dense { lu, l21, .. } => {
                    lu.forward(bs.as_mut(), par).map_err(|_| MfError::Singular { node: i })?;
                    if !node.upd.is_empty() {
                        gemm(-T::one(), l21.as_ref(), bs.as_ref(), T::one(), bu.as_mut(), par).expect("conform");
                    }
                }
                FrontFactor::Hss { elim, .. } => match elim {
                    HssElimination::Partial(p) => bs = p.forward(&bs, &mut bu, par).map_err(map_err(i))?,
                    HssElimination::Full(f) => bs = f.solve(&bs, par).map_err(map_err(i))?,
                },
            }
            b.as_mut().sub(s0, 0, ns, nrhs).copy_from(bs.as_ref());
            scatter_rows(b, &node.upd, &bu);
        }
        for (i, (node, front)) in self.tree.nodes.iter().zip(&self.fronts).enumerate().rev() {
            let (s0, ns) = (node.sep.start, node.sep.len());
            let mut ys = b.block(s0, 0, ns, nrhs);
            let xu = b.select_rows(&node.upd);
            match front {
                FrontFactor::Dense { lu, u12, .. } => {
                    if !node.upd.is_empty() {
                        gemm(-T::one(), u12.as_ref(), xu.as_ref(), T::one(), ys.as_mut(), par).expect("conform");
                    }
                    lu.backward(ys.as_mut(), par).map_err(|_| MfError::Singular { node: i })?;
                }
                FrontFactor::Hss { elim, .. } => {
                    if let HssElimination::Partial(p) = elim {
                        p.backward(&mut ys, &xu, par);
                    }
                }
            }
            b.as_mut().sub(s0, 0, ns, nrhs).copy_from(ys.as_ref());
        }
        Ok(())
    }

    pub fn solve(&self, b: &[T], par: Par) -> Result<Vec<T>, MfError> {
        let mut m = DenseMatrix::from_col_major(b.len(), 1, b.to_vec());
        self.solve_in_place(&mut m, par)?;
        Ok(m.into_vec())
    }
}

fn scatter_rows<T: Scalar>(b: &mut DenseMatrix<T>, rows: &[usize], src: &DenseMatrix<T>) {
    for j in 0..src.cols() {
        for (k, &r) in rows.iter().enumerate() {
            b[(r, j)] = src[(k, j)];
        }
    }
}
