use super::tree::EliminationTree;
use super::OrderError;
use crate::dense::Par;
use crate::scalar::Scalar;
use crate::sparse::{Graph, SparseMatrix};
use crate::tree_par::tree_reduce;

/// Fills `upd` of every node: the sorted union of the pattern of the rows
/// and columns in `sep` above the separator and the children's borders,
/// minus `sep`. Runs as a bottom-up tree traversal.
pub fn symbolic_factorization<T: Scalar>(
    a: &SparseMatrix<T>,
    tree: &mut EliminationTree,
    par: Par,
) -> Result<(), OrderError> {
    symbolic_with_graph(&a.symmetric_graph(), tree, par)
}

/// `(node, border)` for every node of a subtree, its root last.
type Borders = Vec<(usize, Vec<usize>)>;

pub fn symbolic_with_graph(graph: &Graph, tree: &mut EliminationTree, par: Par) -> Result<(), OrderError> {
    if tree.is_empty() {
        return Ok(());
    }
    let t: &EliminationTree = tree;
    let all = tree_reduce(t, t.root(), par, &|id, kids: Vec<Result<Borders, OrderError>>, _| {
        let node = &t.nodes[id];
        let mut acc: Borders = Vec::new();
        let mut upd: Vec<usize> = Vec::new();
        for k in kids {
            let k = k?;
            let child_upd = &k.last().expect("subtree result ends with its root").1;
            for &v in child_upd {
                if v < node.sep.start {
                    return Err(OrderError::InvalidTree(format!(
                        "variable {v} in the border of a child of node {id} lies below its separator"
                    )));
                }
                if v >= node.sep.end {
                    upd.push(v);
                }
            }
            acc.extend(k);
        }
        for v in node.sep.clone() {
            upd.extend(graph.neighbors(v).iter().copied().filter(|&w| w >= node.sep.end));
        }
        upd.sort_unstable();
        upd.dedup();
        acc.push((id, upd));
        Ok(acc)
    })?;
    for (id, upd) in all {
        tree.nodes[id].upd = upd;
    }
    Ok(())
}
