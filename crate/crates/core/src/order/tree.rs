use std::ops::Range;

use serde::{Deserialize, Serialize};

use super::Permutation;
use crate::hss::ClusterTree;
use crate::scalar::Scalar;
use crate::sparse::SparseMatrix;

/// One supernode of the elimination tree.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FrontNode {
    /// Fully summed variables, contiguous in the permuted numbering.
    pub sep: Range<usize>,
    /// Border variables, sorted, all `>= sep.end`.
    pub upd: Vec<usize>,
    pub children: Vec<usize>,
    pub parent: Option<usize>,
    /// Depth below the root, which is level 0.
    pub level: usize,
    /// Cluster tree over `sep` followed by `upd` when the front is HSS.
    pub hss_cluster: Option<ClusterTree>,
}

impl FrontNode {
    pub fn sep_len(&self) -> usize {
        self.sep.len()
    }

    pub fn dim(&self) -> usize {
        self.sep.len() + self.upd.len()
    }

    /// `sep` followed by `upd`, which is sorted.
    pub fn indices(&self) -> Vec<usize> {
        self.sep.clone().chain(self.upd.iter().copied()).collect()
    }
}

/// Supernodal elimination tree. Nodes are stored in postorder, so the root
/// is the last node.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EliminationTree {
    pub nodes: Vec<FrontNode>,
}

impl EliminationTree {
    pub fn root(&self) -> usize {
        self.nodes.len() - 1
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Builds parent links and levels from the child lists.
    pub(crate) fn link(&mut self) {
        for n in &mut self.nodes {
            n.parent = None;
        }
        for id in 0..self.nodes.len() {
            for c in self.nodes[id].children.clone() {
                self.nodes[c].parent = Some(id);
            }
        }
        for id in (0..self.nodes.len()).rev() {
            self.nodes[id].level = match self.nodes[id].parent {
                Some(p) => self.nodes[p].level + 1,
                None => 0,
            };
        }
    }

    /// Checks the structural invariants: postorder numbering, a single
    /// root, separators partitioning `[0, n)` and borders above separators.
    pub fn validate(&self, n: usize) -> Result<(), String> {
        let mut covered = vec![false; n];
        for (id, node) in self.nodes.iter().enumerate() {
            for &c in &node.children {
                if c >= id {
                    return Err(format!("child {c} of node {id} is not numbered first"));
                }
                if self.nodes[c].parent != Some(id) {
                    return Err(format!("child {c} of node {id} has a stale parent link"));
                }
            }
            if node.parent.is_none() && id != self.root() {
                return Err(format!("node {id} has no parent but is not the root"));
            }
            for v in node.sep.clone() {
                if v >= n || covered[v] {
                    return Err(format!("variable {v} is covered twice or out of range"));
                }
                covered[v] = true;
            }
            if node.upd.windows(2).any(|w| w[0] >= w[1]) {
                return Err(format!("border of node {id} is not sorted"));
            }
            if node.upd.first().is_some_and(|&u| u < node.sep.end) {
                return Err(format!("border of node {id} reaches below its separator"));
            }
        }
        if let Some(v) = covered.iter().position(|c| !c) {
            return Err(format!("variable {v} belongs to no separator"));
        }
        Ok(())
    }

    /// Total number of entries in the dense fronts, `sum dim^2`.
    pub fn front_entries(&self) -> usize {
        self.nodes.iter().map(|n| n.dim() * n.dim()).sum()
    }
}

/// Scalar elimination tree of the symmetrized pattern:
/// `parent(j) = min { i > j : l_ij != 0 }`.
pub fn elimination_tree<T: Scalar>(a: &SparseMatrix<T>) -> Vec<Option<usize>> {
    let g = a.symmetric_graph();
    let n = a.n();
    let mut parent = vec![None; n];
    let mut ancestor: Vec<usize> = vec![usize::MAX; n];
    for i in 0..n {
        for &k in g.neighbors(i) {
            if k >= i {
                break;
            }
            // climb from k to the root of its current subtree, compressing the path
            let mut r = k;
            while ancestor[r] != usize::MAX && ancestor[r] != i {
                let next = ancestor[r];
                ancestor[r] = i;
                r = next;
            }
            if ancestor[r] == usize::MAX {
                ancestor[r] = i;
                parent[r] = Some(i);
            }
        }
    }
    parent
}

/// Elimination tree of `P A P^T` with chains merged into supernodes: column
/// `j` joins the supernode of `j + 1` when `j + 1` is its parent and has no
/// other child. Several roots are joined under an empty synthetic root.
pub fn build_etree_amalgamated<T: Scalar>(a: &SparseMatrix<T>, perm: &Permutation) -> EliminationTree {
    let ap = a.permute_symmetric(perm.perm());
    let parent = elimination_tree(&ap);
    let n = ap.n();
    let mut nchild = vec![0usize; n];
    for p in parent.iter().flatten() {
        nchild[*p] += 1;
    }
    // supernode boundaries
    let mut super_of = vec![0usize; n];
    let mut ranges: Vec<Range<usize>> = Vec::new();
    let mut start = 0;
    for j in 0..n {
        super_of[j] = ranges.len();
        let extend = j + 1 < n && parent[j] == Some(j + 1) && nchild[j + 1] == 1;
        if !extend {
            ranges.push(start..j + 1);
            start = j + 1;
        }
    }
    let ns = ranges.len();
    let mut sparent: Vec<Option<usize>> = ranges
        .iter()
        .map(|r| parent[r.end - 1].map(|p| super_of[p]))
        .collect();
    let roots: Vec<usize> = (0..ns).filter(|&s| sparent[s].is_none()).collect();
    if roots.len() > 1 {
        ranges.push(n..n);
        sparent.push(None);
        for &r in &roots {
            sparent[r] = Some(ns);
        }
    }
    let total = ranges.len();
    let mut kids: Vec<Vec<usize>> = vec![Vec::new(); total];
    for (s, p) in sparent.iter().enumerate() {
        if let Some(p) = p {
            kids[*p].push(s);
        }
    }
    // renumber in postorder
    let root = (0..total).find(|&s| sparent[s].is_none()).unwrap_or(0);
    let mut order = Vec::with_capacity(total);
    let mut stack = vec![(root, 0usize)];
    while let Some((s, k)) = stack.pop() {
        if k < kids[s].len() {
            stack.push((s, k + 1));
            stack.push((kids[s][k], 0));
        } else {
            order.push(s);
        }
    }
    let mut new_id = vec![0usize; total];
    for (i, &s) in order.iter().enumerate() {
        new_id[s] = i;
    }
    let nodes = order
        .iter()
        .map(|&s| FrontNode {
            sep: ranges[s].clone(),
            upd: Vec::new(),
            children: kids[s].iter().map(|&c| new_id[c]).collect(),
            parent: None,
            level: 0,
            hss_cluster: None,
        })
        .collect();
    let mut tree = EliminationTree { nodes };
    tree.link();
    tree
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tridiag(n: usize) -> SparseMatrix<f64> {
        let mut t = Vec::new();
        for i in 0..n {
            t.push((i, i, 2.0));
            if i + 1 < n {
                t.push((i, i + 1, -1.0));
                t.push((i + 1, i, -1.0));
            }
        }
        SparseMatrix::from_triplets(n, &t).unwrap()
    }

    /// Parent from a dense boolean LU of the pattern.
    fn dense_oracle_parent(a: &SparseMatrix<f64>) -> Vec<Option<usize>> {
        let n = a.n();
        let mut m = vec![vec![false; n]; n];
        for i in 0..n {
            for &c in a.row(i).0 {
                m[i][c] = true;
                m[c][i] = true;
            }
        }
        for k in 0..n {
            for i in k + 1..n {
                if m[i][k] {
                    for j in k + 1..n {
                        if m[k][j] {
                            m[i][j] = true;
                        }
                    }
                }
            }
        }
        (0..n).map(|j| (j + 1..n).find(|&i| m[i][j])).collect()
    }

    #[test]
    fn tridiagonal_chain() {
        let a = tridiag(3);
        assert_eq!(elimination_tree(&a), vec![Some(1), Some(2), None]);
        assert_eq!(elimination_tree(&a), dense_oracle_parent(&a));
    }

    #[test]
    fn etree_matches_dense_oracle_on_arrow_and_random() {
        let mut t = vec![];
        let mut s = 5u64;
        for i in 0..30 {
            t.push((i, i, 1.0));
            for _ in 0..2 {
                s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                let j = (s >> 33) as usize % 30;
                t.push((i, j, 1.0));
            }
        }
        let a = SparseMatrix::from_triplets(30, &t).unwrap();
        assert_eq!(elimination_tree(&a), dense_oracle_parent(&a));
    }

    #[test]
    fn nd_ordered_chain_amalgamates_to_three_nodes() {
        let a = tridiag(7);
        let p = Permutation::from_order(vec![0, 1, 2, 4, 5, 6, 3]);
        let tree = build_etree_amalgamated(&a, &p);
        assert_eq!(tree.len(), 3);
        assert_eq!(tree.nodes[0].sep, 0..3);
        assert_eq!(tree.nodes[1].sep, 3..6);
        assert_eq!(tree.nodes[2].sep, 6..7);
        assert_eq!(tree.nodes[2].children, vec![0, 1]);
        tree.validate(7).unwrap();
    }

    #[test]
    fn forest_gets_synthetic_root() {
        let a = SparseMatrix::<f64>::identity(3);
        let tree = build_etree_amalgamated(&a, &Permutation::identity(3));
        assert_eq!(tree.len(), 4);
        assert_eq!(tree.nodes[3].sep, 3..3);
        assert_eq!(tree.nodes[3].children.len(), 3);
        tree.validate(3).unwrap();
    }
}
