//! Bottom-up tree traversal with depth-limited task spawning.

use crate::dense::Par;
use crate::order::EliminationTree;

/// Evaluates `f(node, child_results, par)` bottom-up. Child subtrees run as
/// separate tasks (split in halves when there are more than two) while the
/// depth budget lasts; the parent waits for all of them.
pub(crate) fn tree_reduce<R, F>(tree: &EliminationTree, node: usize, par: Par, f: &F) -> R
where
    R: Send,
    F: Fn(usize, Vec<R>, Par) -> R + Sync,
{
    let kids = &tree.nodes[node].children;
    let results = map_children(tree, kids, par, f);
    f(node, results, par)
}

fn map_children<R, F>(tree: &EliminationTree, kids: &[usize], par: Par, f: &F) -> Vec<R>
where
    R: Send,
    F: Fn(usize, Vec<R>, Par) -> R + Sync,
{
    match kids.len() {
        0 => Vec::new(),
        1 => vec![tree_reduce(tree, kids[0], par.child(), f)],
        _ if par.can_spawn() => {
            let (l, r) = kids.split_at(kids.len() / 2);
            let (mut a, b) = par.join(|p| map_children(tree, l, p, f), |p| map_children(tree, r, p, f));
            a.extend(b);
            a
        }
        _ => kids.iter().map(|&c| tree_reduce(tree, c, par.child(), f)).collect(),
    }
}
