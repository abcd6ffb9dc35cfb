use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use super::tree::{EliminationTree, FrontNode};
use super::Permutation;
use crate::sparse::Graph;

/// How separators are found.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum NdStrategy {
    /// Axis-aligned plane bisection of a `dims[0] x dims[1] x dims[2]` grid
    /// numbered with x fastest.
    Geometric { dims: [usize; 3] },
    /// Level-set bisection of the graph of `A + A^T`.
    Graph,
}

pub const DEFAULT_MIN_LEAF: usize = 32;

/// Recursive nested dissection. Each subdomain of at most `min_leaf`
/// vertices becomes a leaf; the separator of a node is numbered after both
/// of its subtrees, so every separator is a contiguous range and the tree
/// comes out in postorder. Borders are left empty for the symbolic pass.
pub fn nested_dissection(graph: &Graph, strategy: NdStrategy, min_leaf: usize) -> (Permutation, EliminationTree) {
    let min_leaf = min_leaf.max(1);
    let mut b = Builder {
        order: Vec::with_capacity(graph.n()),
        nodes: Vec::new(),
    };
    match strategy {
        NdStrategy::Geometric { dims } => {
            assert_eq!(dims.iter().product::<usize>(), graph.n(), "grid dims do not match the matrix");
            b.geometric([0, 0, 0], dims, dims, min_leaf);
        }
        NdStrategy::Graph => {
            let all: Vec<usize> = (0..graph.n()).collect();
            let mut scratch = Scratch::new(graph.n());
            b.graph(graph, all, min_leaf, &mut scratch);
        }
    }
    let mut tree = EliminationTree { nodes: b.nodes };
    tree.link();
    (Permutation::from_order(b.order), tree)
}

struct Builder {
    order: Vec<usize>,
    nodes: Vec<FrontNode>,
}

impl Builder {
    fn push(&mut self, vertices: &[usize], children: Vec<usize>) -> usize {
        let start = self.order.len();
        self.order.extend_from_slice(vertices);
        self.nodes.push(FrontNode {
            sep: start..self.order.len(),
            upd: Vec::new(),
            children,
            parent: None,
            level: 0,
            hss_cluster: None,
        });
        self.nodes.len() - 1
    }

    fn geometric(&mut self, lo: [usize; 3], hi: [usize; 3], dims: [usize; 3], min_leaf: usize) -> usize {
        let len = [hi[0] - lo[0], hi[1] - lo[1], hi[2] - lo[2]];
        let volume: usize = len.iter().product();
        if volume <= min_leaf {
            let v = box_vertices(lo, hi, dims);
            return self.push(&v, Vec::new());
        }
        // longest axis, lowest axis on ties
        let axis = (0..3).fold(0, |best, a| if len[a] > len[best] { a } else { best });
        let mid = lo[axis] + len[axis] / 2;
        let mut children = Vec::new();
        let mut left_hi = hi;
        left_hi[axis] = mid;
        if mid > lo[axis] {
            children.push(self.geometric(lo, left_hi, dims, min_leaf));
        }
        let mut right_lo = lo;
        right_lo[axis] = mid + 1;
        if mid + 1 < hi[axis] {
            children.push(self.geometric(right_lo, hi, dims, min_leaf));
        }
        let mut sep_lo = lo;
        sep_lo[axis] = mid;
        let mut sep_hi = hi;
        sep_hi[axis] = mid + 1;
        let sep = box_vertices(sep_lo, sep_hi, dims);
        self.push(&sep, children)
    }

    fn graph(&mut self, g: &Graph, vertices: Vec<usize>, min_leaf: usize, s: &mut Scratch) -> usize {
        if vertices.len() <= min_leaf {
            return self.push(&vertices, Vec::new());
        }
        let comps = components(g, &vertices, s);
        if comps.len() > 1 {
            let children = comps.into_iter().map(|c| self.graph(g, c, min_leaf, s)).collect();
            return self.push(&[], children);
        }
        let (sep, a, b) = bisect_with_separator(g, &vertices, s);
        let mut children = Vec::new();
        for part in [a, b] {
            if !part.is_empty() {
                children.push(self.graph(g, part, min_leaf, s));
            }
        }
        self.push(&sep, children)
    }
}

fn box_vertices(lo: [usize; 3], hi: [usize; 3], dims: [usize; 3]) -> Vec<usize> {
    let mut v = Vec::with_capacity((hi[0] - lo[0]) * (hi[1] - lo[1]) * (hi[2] - lo[2]));
    for z in lo[2]..hi[2] {
        for y in lo[1]..hi[1] {
            for x in lo[0]..hi[0] {
                v.push(x + dims[0] * (y + dims[1] * z));
            }
        }
    }
    v
}

/// Marks for subgraph membership and BFS levels, reused across calls.
pub(crate) struct Scratch {
    mark: Vec<u32>,
    stamp: u32,
    level: Vec<usize>,
}

impl Scratch {
    pub(crate) fn new(n: usize) -> Self {
        Scratch {
            mark: vec![0; n],
            stamp: 0,
            level: vec![usize::MAX; n],
        }
    }

    /// Marks `vertices` as the active subgraph.
    fn activate(&mut self, vertices: &[usize]) -> u32 {
        self.stamp += 1;
        for &v in vertices {
            self.mark[v] = self.stamp;
        }
        self.stamp
    }
}

/// Connected components of the induced subgraph, each sorted, ordered by
/// their lowest vertex.
fn components(g: &Graph, vertices: &[usize], s: &mut Scratch) -> Vec<Vec<usize>> {
    let active = s.activate(vertices);
    let seen = active + 1;
    s.stamp += 1;
    let mut comps = Vec::new();
    let mut queue = VecDeque::new();
    for &start in vertices {
        if s.mark[start] != active {
            continue;
        }
        s.mark[start] = seen;
        queue.push_back(start);
        let mut comp = Vec::new();
        while let Some(v) = queue.pop_front() {
            comp.push(v);
            for &w in g.neighbors(v) {
                if s.mark[w] == active {
                    s.mark[w] = seen;
                    queue.push_back(w);
                }
            }
        }
        comp.sort_unstable();
        comps.push(comp);
    }
    comps
}

/// BFS over the active subgraph from `root`; returns the visit order and
/// fills `s.level`. Neighbours are visited in increasing index order.
fn bfs(g: &Graph, root: usize, active: u32, s: &mut Scratch, restrict: &[usize]) -> Vec<usize> {
    for &v in restrict {
        s.level[v] = usize::MAX;
    }
    let mut order = Vec::with_capacity(restrict.len());
    s.level[root] = 0;
    order.push(root);
    let mut head = 0;
    while head < order.len() {
        let v = order[head];
        head += 1;
        for &w in g.neighbors(v) {
            if s.mark[w] == active && s.level[w] == usize::MAX {
                s.level[w] = s.level[v] + 1;
                order.push(w);
            }
        }
    }
    order
}

/// George-Liu pseudo-peripheral vertex of a connected active subgraph,
/// starting from its lowest vertex.
fn pseudo_peripheral(g: &Graph, vertices: &[usize], active: u32, s: &mut Scratch) -> usize {
    let mut root = vertices[0];
    let mut order = bfs(g, root, active, s, vertices);
    let mut ecc = s.level[*order.last().unwrap()];
    loop {
        let far = order
            .iter()
            .copied()
            .filter(|&v| s.level[v] == ecc)
            .min_by_key(|&v| (g.neighbors(v).iter().filter(|&&w| s.mark[w] == active).count(), v))
            .unwrap();
        let o2 = bfs(g, far, active, s, vertices);
        let e2 = s.level[*o2.last().unwrap()];
        if e2 > ecc {
            root = far;
            order = o2;
            ecc = e2;
        } else {
            // restore the levels of the chosen root
            bfs(g, root, active, s, vertices);
            return root;
        }
    }
}

/// BFS ordering of an active subgraph that may be disconnected: each
/// component is started at its pseudo-peripheral vertex, components in
/// order of their lowest vertex.
pub(crate) fn bfs_order(g: &Graph, vertices: &[usize], s: &mut Scratch) -> Vec<usize> {
    let comps = components(g, vertices, s);
    let mut out = Vec::with_capacity(vertices.len());
    for c in comps {
        let active = s.activate(&c);
        let root = pseudo_peripheral(g, &c, active, s);
        out.extend(bfs(g, root, active, s, &c));
    }
    out
}

/// Splits a connected vertex set: the first `ceil(n/2)` vertices of a BFS
/// from a pseudo-peripheral vertex form side A, the rest side B. The
/// separator is whichever side's boundary is smaller (A on ties).
/// Returns `(separator, A minus separator, B minus separator)`, each sorted.
fn bisect_with_separator(g: &Graph, vertices: &[usize], s: &mut Scratch) -> (Vec<usize>, Vec<usize>, Vec<usize>) {
    let active = s.activate(vertices);
    let root = pseudo_peripheral(g, vertices, active, s);
    let order = bfs(g, root, active, s, vertices);
    let half = order.len().div_ceil(2);
    let in_a = s.stamp + 1;
    let in_b = s.stamp + 2;
    s.stamp += 2;
    for (i, &v) in order.iter().enumerate() {
        s.mark[v] = if i < half { in_a } else { in_b };
    }
    let boundary = |side: u32, other: u32, s: &Scratch| -> Vec<usize> {
        let mut b: Vec<usize> = order
            .iter()
            .copied()
            .filter(|&v| s.mark[v] == side && g.neighbors(v).iter().any(|&w| s.mark[w] == other))
            .collect();
        b.sort_unstable();
        b
    };
    let ba = boundary(in_a, in_b, s);
    let bb = boundary(in_b, in_a, s);
    let sep = if ba.len() <= bb.len() { ba } else { bb };
    for &v in &sep {
        s.mark[v] = 0;
    }
    let mut a: Vec<usize> = order[..half].iter().copied().filter(|&v| s.mark[v] == in_a).collect();
    let mut b: Vec<usize> = order[half..].iter().copied().filter(|&v| s.mark[v] == in_b).collect();
    a.sort_unstable();
    b.sort_unstable();
    (sep, a, b)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sparse::{generate_grid_problem, GridKind, GridProblem};

    fn chain(n: usize) -> Graph {
        let e: Vec<(usize, usize)> = (0..n - 1).map(|i| (i, i + 1)).collect();
        Graph::from_edges(n, &e)
    }

    #[test]
    fn chain_of_seven() {
        let (p, tree) = nested_dissection(&chain(7), NdStrategy::Graph, 3);
        assert_eq!(tree.len(), 3);
        let root = &tree.nodes[tree.root()];
        assert_eq!(root.sep.len(), 1);
        assert_eq!(p.iperm()[root.sep.start], 3);
        assert_eq!(tree.nodes[0].sep.len(), 3);
        assert_eq!(tree.nodes[1].sep.len(), 3);
        tree.validate(7).unwrap();
    }

    #[test]
    fn p2d_k5_geometric_root_is_grid_line() {
        let p = GridProblem::new(GridKind::P2D, 5);
        let g = generate_grid_problem(&p).unwrap().symmetric_graph();
        let (perm, tree) = nested_dissection(&g, NdStrategy::Geometric { dims: p.dims() }, 4);
        let root = &tree.nodes[tree.root()];
        let mut line: Vec<usize> = root.sep.clone().map(|i| perm.iperm()[i]).collect();
        line.sort_unstable();
        assert_eq!(line, vec![2, 7, 12, 17, 22]);
        tree.validate(25).unwrap();
        assert!(perm.is_valid());
    }

    #[test]
    fn disconnected_graph_joined_under_empty_node() {
        let g = Graph::from_edges(6, &[(0, 1), (1, 2), (3, 4), (4, 5)]);
        let (_, tree) = nested_dissection(&g, NdStrategy::Graph, 2);
        let root = &tree.nodes[tree.root()];
        assert!(root.sep.is_empty());
        assert_eq!(root.children.len(), 2);
        tree.validate(6).unwrap();
    }

    #[test]
    fn geometric_3d_tree_valid() {
        let p = GridProblem::new(GridKind::P3D, 6);
        let g = generate_grid_problem(&p).unwrap().symmetric_graph();
        let (perm, tree) = nested_dissection(&g, NdStrategy::Geometric { dims: p.dims() }, 8);
        tree.validate(216).unwrap();
        assert!(perm.is_valid());
        assert_eq!(tree.nodes[tree.root()].sep.len(), 36);
    }
}
