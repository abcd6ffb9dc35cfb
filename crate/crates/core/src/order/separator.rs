use std::ops::Range;

use super::nd::{bfs_order, Scratch};
use crate::hss::ClusterTree;
use crate::sparse::Graph;

/// Result of reordering one separator.
#[derive(Clone, Debug, PartialEq)]
pub struct SeparatorOrdering {
    /// `order[new_local] = old_local` within the separator range.
    pub order: Vec<usize>,
    /// Cluster tree over the reordered separator.
    pub tree: ClusterTree,
}

/// Graph induced on `sep`, enriched with an edge `(u, w)` whenever
/// `u - v - w` with `v` outside the separator. Local indices.
pub fn separator_graph(graph: &Graph, sep: Range<usize>) -> Graph {
    let s0 = sep.start;
    let inside = |v: usize| sep.contains(&v);
    let mut edges = Vec::new();
    for u in sep.clone() {
        for &v in graph.neighbors(u) {
            if inside(v) {
                if v > u {
                    edges.push((u - s0, v - s0));
                }
            } else {
                for &w in graph.neighbors(v) {
                    if inside(w) && w > u {
                        edges.push((u - s0, w - s0));
                    }
                }
            }
        }
    }
    Graph::from_edges(sep.len(), &edges)
}

/// Recursive BFS bisection of the enriched separator graph until parts
/// have at most `leaf` vertices; parts become contiguous in the new order.
pub fn reorder_separator(graph: &Graph, sep: Range<usize>, leaf: usize) -> SeparatorOrdering {
    let n = sep.len();
    if n <= leaf.max(1) {
        return SeparatorOrdering {
            order: (0..n).collect(),
            tree: ClusterTree::leaf(n),
        };
    }
    let g = separator_graph(graph, sep);
    let mut s = Scratch::new(n);
    let mut order = Vec::with_capacity(n);
    let all: Vec<usize> = (0..n).collect();
    let tree = bisect(&g, all, leaf.max(1), &mut s, &mut order);
    SeparatorOrdering { order, tree }
}

fn bisect(g: &Graph, part: Vec<usize>, leaf: usize, s: &mut Scratch, out: &mut Vec<usize>) -> ClusterTree {
    if part.len() <= leaf {
        let t = ClusterTree::leaf(part.len());
        out.extend(part);
        return t;
    }
    let mut sorted = part;
    sorted.sort_unstable();
    let ord = bfs_order(g, &sorted, s);
    let h = ord.len().div_ceil(2);
    let right = ord[h..].to_vec();
    let mut left = ord;
    left.truncate(h);
    let l = bisect(g, left, leaf, s, out);
    let r = bisect(g, right, leaf, s, out);
    ClusterTree::node(l, r)
}

/// Cluster tree of a whole front: the separator tree and a contiguous
/// halving of the border under a common root.
pub fn front_cluster_tree(sep_tree: ClusterTree, n_upd: usize, leaf: usize) -> ClusterTree {
    if n_upd == 0 {
        return sep_tree;
    }
    ClusterTree::node(sep_tree, ClusterTree::balanced(n_upd, leaf))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sparse::{generate_grid_problem, GridKind, GridProblem};

    #[test]
    fn small_separator_is_one_leaf() {
        let g = Graph::from_edges(100, &[]);
        let r = reorder_separator(&g, 0..100, 128);
        assert_eq!(r.tree, ClusterTree::leaf(100));
        assert_eq!(r.order, (0..100).collect::<Vec<_>>());
    }

    #[test]
    fn path_splits_at_midpoint() {
        let e: Vec<(usize, usize)> = (0..255).map(|i| (i, i + 1)).collect();
        let g = Graph::from_edges(256, &e);
        let r = reorder_separator(&g, 0..256, 128);
        assert_eq!(r.tree.leaf_sizes(), vec![128, 128]);
        let mut left: Vec<usize> = r.order[..128].to_vec();
        left.sort_unstable();
        let lo = left == (0..128).collect::<Vec<_>>();
        let hi = left == (128..256).collect::<Vec<_>>();
        assert!(lo || hi);
    }

    #[test]
    fn cross_separator_connected_after_enrichment() {
        // a plus-shaped cut of a 9x9 grid: row 4 and column 4
        let p = GridProblem::new(GridKind::P2D, 9);
        let g = generate_grid_problem(&p).unwrap().symmetric_graph();
        // number the cross last so it is a contiguous range, leaving out the
        // centre so the induced graph falls apart into four arms
        let mut cross: Vec<usize> = (0..9).map(|i| 4 * 9 + i).chain((0..9).map(|j| j * 9 + 4)).collect();
        cross.sort_unstable();
        cross.dedup();
        cross.retain(|&v| v != 40);
        let rest: Vec<usize> = (0..81).filter(|v| !cross.contains(v)).collect();
        let order: Vec<usize> = rest.iter().chain(&cross).copied().collect();
        let perm = crate::order::Permutation::from_order(order);
        let gp = g.permute(perm.perm());
        let sep = rest.len()..81;
        let s0 = sep.start;
        let plain: Vec<(usize, usize)> = sep
            .clone()
            .flat_map(|u| {
                gp.neighbors(u)
                    .iter()
                    .filter(|&&w| sep.contains(&w) && w > u)
                    .map(move |&w| (u - s0, w - s0))
                    .collect::<Vec<_>>()
            })
            .collect();
        let induced = Graph::from_edges(sep.len(), &plain);
        assert!(connected_components(&induced) > 1);
        let enriched = separator_graph(&gp, sep);
        assert_eq!(connected_components(&enriched), 1);
    }

    fn connected_components(g: &Graph) -> usize {
        let mut seen = vec![false; g.n()];
        let mut count = 0;
        for s in 0..g.n() {
            if seen[s] {
                continue;
            }
            count += 1;
            let mut stack = vec![s];
            seen[s] = true;
            while let Some(v) = stack.pop() {
                for &w in g.neighbors(v) {
                    if !seen[w] {
                        seen[w] = true;
                        stack.push(w);
                    }
                }
            }
        }
        count
    }

    #[test]
    fn front_tree_puts_separator_first() {
        let t = front_cluster_tree(ClusterTree::balanced(40, 16), 70, 16);
        assert_eq!(t.children[0].size, 40);
        assert_eq!(t.children[1].size, 70);
        assert!(t.is_consistent());
        assert_eq!(front_cluster_tree(ClusterTree::leaf(5), 0, 16), ClusterTree::leaf(5));
    }
}
