//! Fill-reducing ordering, elimination trees, symbolic factorization and
//! the separator reordering that defines HSS cluster trees.

mod nd;
mod perm;
mod separator;
mod symbolic;
mod tree;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dense::Par;
use crate::scalar::Scalar;
use crate::sparse::SparseMatrix;

pub use nd::{nested_dissection, NdStrategy, DEFAULT_MIN_LEAF};
pub use perm::Permutation;
pub use separator::{front_cluster_tree, reorder_separator, separator_graph, SeparatorOrdering};
pub use symbolic::{symbolic_factorization, symbolic_with_graph};
pub use tree::{build_etree_amalgamated, elimination_tree, EliminationTree, FrontNode};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OrderError {
    #[error("elimination tree is inconsistent with the matrix: {0}")]
    InvalidTree(String),
    #[error("grid dimensions {dims:?} do not match a matrix of order {n}")]
    GridMismatch { dims: [usize; 3], n: usize },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AnalysisOptions {
    pub strategy: NdStrategy,
    /// Subdomains at or below this size are not dissected further.
    pub min_leaf: usize,
    /// Fronts at tree level `< ls` may be HSS compressed.
    pub ls: usize,
    /// Smallest front dimension that is compressed.
    pub min_hss_size: usize,
    /// HSS leaf size `b`.
    pub leaf_size: usize,
}

impl Default for AnalysisOptions {
    fn default() -> Self {
        AnalysisOptions {
            strategy: NdStrategy::Graph,
            min_leaf: DEFAULT_MIN_LEAF,
            ls: 0,
            min_hss_size: 512,
            leaf_size: 128,
        }
    }
}

/// Ordering and tree for a matrix, HSS fronts marked by their cluster tree.
#[derive(Clone, Debug, PartialEq)]
pub struct Analysis {
    pub perm: Permutation,
    pub tree: EliminationTree,
}

impl Analysis {
    pub fn hss_fronts(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.tree.len()).filter(|&i| self.tree.nodes[i].hss_cluster.is_some())
    }
}

/// Nested dissection, symbolic factorization, and for every front chosen
/// for compression a reordering of its separator into HSS leaf clusters,
/// followed by a second symbolic pass in the final numbering.
pub fn analyze<T: Scalar>(a: &SparseMatrix<T>, opts: &AnalysisOptions, par: Par) -> Result<Analysis, OrderError> {
    let n = a.n();
    if let NdStrategy::Geometric { dims } = opts.strategy {
        if dims.iter().product::<usize>() != n {
            return Err(OrderError::GridMismatch { dims, n });
        }
    }
    let graph = a.symmetric_graph();
    let (perm, mut tree) = nested_dissection(&graph, opts.strategy, opts.min_leaf);
    let g1 = graph.permute(perm.perm());
    symbolic_with_graph(&g1, &mut tree, par)?;

    let chosen: Vec<usize> = (0..tree.len())
        .filter(|&i| {
            let nd = &tree.nodes[i];
            nd.level < opts.ls && nd.dim() >= opts.min_hss_size && !nd.sep.is_empty()
        })
        .collect();
    if chosen.is_empty() {
        return Ok(Analysis { perm, tree });
    }
    let orderings: Vec<(usize, SeparatorOrdering)> = chosen
        .par_iter()
        .map(|&i| (i, reorder_separator(&g1, tree.nodes[i].sep.clone(), opts.leaf_size)))
        .collect();

    // compose the local reorderings into the permutation
    let mut second: Vec<usize> = (0..n).collect();
    for (i, ord) in &orderings {
        let s0 = tree.nodes[*i].sep.start;
        for (new_local, &old_local) in ord.order.iter().enumerate() {
            second[s0 + new_local] = s0 + old_local;
        }
    }
    let perm = perm.compose(&Permutation::from_order(second));
    let g2 = graph.permute(perm.perm());
    symbolic_with_graph(&g2, &mut tree, par)?;
    for (i, ord) in orderings {
        let n_upd = tree.nodes[i].upd.len();
        tree.nodes[i].hss_cluster = Some(front_cluster_tree(ord.tree, n_upd, opts.leaf_size));
    }
    Ok(Analysis { perm, tree })
}
